//! Property tests for the structural invariants: matching symmetry and
//! class-agnosticism, threshold monotonicity, ICC symmetries, frame
//! exclusion monotonicity, and scalar-genericity of the kernels.

use proptest::prelude::*;

use framebench::align::{greedy_match, ThresholdUnit};
use framebench::dataset::{
    Annotation, Annotator, CellPoint, CellPointSet, ClassId, ClassRegistry, Dataset, Frame,
    FrameTask, LabelGrid,
};
use framebench::metrics::icc_2_1_from_rows;

fn point_set(points: Vec<(f64, f64, u16)>) -> CellPointSet<f64> {
    CellPointSet {
        frame_id: "f".into(),
        annotator_id: "a".into(),
        points: points
            .into_iter()
            .map(|(x, y, class_id)| CellPoint { x, y, class_id })
            .collect(),
    }
}

fn points_strategy() -> impl Strategy<Value = Vec<(f64, f64, u16)>> {
    prop::collection::vec((0.0..10.0f64, 0.0..10.0f64, 1..4u16), 0..7)
}

proptest! {
    #[test]
    fn matching_is_symmetric(a in points_strategy(), b in points_strategy(), t in 0.5..12.0f64) {
        let sa = point_set(a);
        let sb = point_set(b);
        let fwd = greedy_match(&sa, &sb, t, ThresholdUnit::Px, 1.0).unwrap();
        let rev = greedy_match(&sb, &sa, t, ThresholdUnit::Px, 1.0).unwrap();
        let mut fwd_pairs: Vec<(usize, usize)> = fwd.pairs.iter().map(|&(i, j, _)| (i, j)).collect();
        let mut rev_pairs: Vec<(usize, usize)> = rev.pairs.iter().map(|&(j, i, _)| (i, j)).collect();
        fwd_pairs.sort_unstable();
        rev_pairs.sort_unstable();
        prop_assert_eq!(fwd_pairs, rev_pairs);
        prop_assert_eq!(&fwd.singletons_a, &rev.singletons_b);
        prop_assert_eq!(&fwd.singletons_b, &rev.singletons_a);
    }

    #[test]
    fn matching_ignores_class_labels(a in points_strategy(), b in points_strategy(), t in 0.5..12.0f64) {
        let sa = point_set(a.clone());
        let sb = point_set(b.clone());
        let base = greedy_match(&sa, &sb, t, ThresholdUnit::Px, 1.0).unwrap();
        // permute class labels 1->2->3->1 on both sides
        let relabel = |points: Vec<(f64, f64, u16)>| {
            point_set(points.into_iter().map(|(x, y, c)| (x, y, c % 3 + 1)).collect())
        };
        let permuted = greedy_match(&relabel(a), &relabel(b), t, ThresholdUnit::Px, 1.0).unwrap();
        prop_assert_eq!(base.pairs, permuted.pairs);
        prop_assert_eq!(base.singletons_a, permuted.singletons_a);
        prop_assert_eq!(base.singletons_b, permuted.singletons_b);
    }

    #[test]
    fn raising_threshold_never_drops_pairs(
        a in points_strategy(),
        b in points_strategy(),
        t in 0.5..8.0f64,
        extra in 0.1..6.0f64,
    ) {
        let sa = point_set(a);
        let sb = point_set(b);
        let narrow = greedy_match(&sa, &sb, t, ThresholdUnit::Px, 1.0).unwrap();
        let wide = greedy_match(&sa, &sb, t + extra, ThresholdUnit::Px, 1.0).unwrap();
        prop_assert!(wide.pairs.len() >= narrow.pairs.len());
        let wide_pairs: Vec<(usize, usize)> = wide.pairs.iter().map(|&(i, j, _)| (i, j)).collect();
        for (i, j, _) in &narrow.pairs {
            prop_assert!(wide_pairs.contains(&(*i, *j)));
        }
    }

    #[test]
    fn icc_is_column_symmetric_and_row_order_free(
        rows in prop::collection::vec((0u64..30, 0u64..30), 2..9),
        rotate in 0usize..8,
    ) {
        let base = icc_2_1_from_rows::<f64>(&rows).unwrap();
        let swapped: Vec<(u64, u64)> = rows.iter().map(|&(a, b)| (b, a)).collect();
        let mut rotated = rows.clone();
        let shift = rotate % rows.len();
        rotated.rotate_left(shift);
        let swapped = icc_2_1_from_rows::<f64>(&swapped).unwrap();
        let rotated = icc_2_1_from_rows::<f64>(&rotated).unwrap();
        match (base, swapped, rotated) {
            (Some(x), Some(y), Some(z)) => {
                prop_assert!((x - y).abs() <= 1e-10);
                prop_assert!((x - z).abs() <= 1e-10);
            }
            (None, None, None) => {}
            other => prop_assert!(false, "definedness diverged: {:?}", other),
        }
    }

    #[test]
    fn identical_columns_with_row_variance_give_exactly_one(
        values in prop::collection::vec(0u64..50, 2..9),
    ) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        let rows: Vec<(u64, u64)> = values.iter().map(|&v| (v, v)).collect();
        prop_assert_eq!(icc_2_1_from_rows::<f64>(&rows).unwrap(), Some(1.0));
    }
}

/// Builds a tissue dataset where `coverage[ai][fi]` says whether
/// pathologist `ai` annotated frame `fi`; the model covers everything.
fn dataset_with_coverage(coverage: &[Vec<bool>], n_frames: usize) -> Dataset<f64> {
    let registry =
        ClassRegistry::from_entries(&[(0, "background".into()), (1, "tumor".into())]).unwrap();
    let mut annotators = vec![Annotator { id: "model".into(), is_model: true }];
    for p in 1..=coverage.len() {
        annotators.push(Annotator {
            id: format!("p{p}"),
            is_model: false,
        });
    }
    let frames: Vec<Frame<f64>> = (0..n_frames)
        .map(|i| Frame {
            id: format!("f{i}"),
            slide_id: "s1".into(),
            width_px: 2,
            height_px: 2,
            microns_per_pixel: 0.5,
            task: FrameTask::Tissue,
        })
        .collect();
    let grid = |frame: usize, annotator: &str| {
        Annotation::Grid(LabelGrid {
            frame_id: format!("f{frame}"),
            annotator_id: annotator.into(),
            width: 2,
            height: 2,
            cells: vec![0, 1, 1, 0 as ClassId],
        })
    };
    let mut records = Vec::new();
    for fi in 0..n_frames {
        records.push(grid(fi, "model"));
        for (ai, row) in coverage.iter().enumerate() {
            if row[fi] {
                records.push(grid(fi, &format!("p{}", ai + 1)));
            }
        }
    }
    Dataset::assemble(registry, annotators, vec!["s1".into()], frames, records)
        .unwrap()
        .dataset
}

proptest! {
    #[test]
    fn removing_an_annotator_never_adds_frames(
        coverage in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 2..5),
        removed in 0usize..4,
    ) {
        let n_frames = 4;
        let full = dataset_with_coverage(&coverage, n_frames);
        let mut reduced_coverage = coverage.clone();
        let removed = removed % reduced_coverage.len();
        reduced_coverage[removed] = vec![false; n_frames];
        let reduced = dataset_with_coverage(&reduced_coverage, n_frames);
        prop_assert!(reduced.n_frames() <= full.n_frames());
    }
}

/// The kernels run at f32 too; agreement with f64 is loose but real.
#[test]
fn kernels_are_scalar_generic() {
    let rows = [(3u64, 5u64), (7, 2), (4, 4), (9, 8), (2, 6)];
    let wide = icc_2_1_from_rows::<f64>(&rows).unwrap().unwrap();
    let narrow = icc_2_1_from_rows::<f32>(&rows).unwrap().unwrap();
    assert!((wide - narrow as f64).abs() < 1e-6);

    let a = CellPointSet::<f32> {
        frame_id: "f".into(),
        annotator_id: "a".into(),
        points: vec![CellPoint { x: 0.0, y: 0.0, class_id: 1 }],
    };
    let b = CellPointSet::<f32> {
        frame_id: "f".into(),
        annotator_id: "b".into(),
        points: vec![CellPoint { x: 3.0, y: 4.0, class_id: 1 }],
    };
    let m = greedy_match(&a, &b, 6.0f32, ThresholdUnit::Px, 1.0).unwrap();
    assert_eq!(m.pairs, vec![(0, 0, 5.0f32)]);
}
