//! Shared test support: independent oracle implementations and random
//! dataset builders. The oracles deliberately re-derive everything from
//! first principles (literal loops, no caching, no shared kernels) so they
//! can vouch for the production paths.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use framebench::dataset::{
    Annotation, Annotator, CellPoint, CellPointSet, ClassId, ClassRegistry, CountVector, Dataset,
    Frame, FrameTask, LabelGrid, Loaded,
};
use framebench::metrics::Metric;

// ---------------------------------------------------------------------------
// Greedy matching oracle: literally sort all cross distances and sweep.
// ---------------------------------------------------------------------------

pub struct OracleMatch {
    pub pairs: Vec<(usize, usize, f64)>,
    pub singletons_a: Vec<usize>,
    pub singletons_b: Vec<usize>,
}

pub fn greedy_oracle(a: &[(f64, f64)], b: &[(f64, f64)], threshold_px: f64) -> OracleMatch {
    let limit = threshold_px * threshold_px;
    let mut edges = Vec::new();
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let dx = pa.0 - pb.0;
            let dy = pa.1 - pb.1;
            let d2 = dx * dx + dy * dy;
            if d2 <= limit {
                edges.push((d2, i, j));
            }
        }
    }
    edges.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (d2, i, j) in edges {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        pairs.push((i, j, d2.sqrt()));
    }
    OracleMatch {
        pairs,
        singletons_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        singletons_b: (0..b.len()).filter(|&j| !used_b[j]).collect(),
    }
}

// ---------------------------------------------------------------------------
// ICC(2,1) oracle: definitional two-way ANOVA with explicit loops.
// ---------------------------------------------------------------------------

pub fn icc_oracle(rows: &[(u64, u64)]) -> Option<f64> {
    let n = rows.len();
    assert!(n >= 2, "oracle needs n >= 2");
    let y: Vec<[f64; 2]> = rows.iter().map(|&(a, b)| [a as f64, b as f64]).collect();
    let nf = n as f64;

    let mut total = 0.0;
    for row in &y {
        for &v in row {
            total += v;
        }
    }
    let grand = total / (2.0 * nf);

    let row_means: Vec<f64> = y.iter().map(|r| (r[0] + r[1]) / 2.0).collect();
    let mut col_means = [0.0; 2];
    for (j, cm) in col_means.iter_mut().enumerate() {
        let mut s = 0.0;
        for row in &y {
            s += row[j];
        }
        *cm = s / nf;
    }

    let mut ss_rows = 0.0;
    for &rm in &row_means {
        ss_rows += (rm - grand) * (rm - grand);
    }
    ss_rows *= 2.0;
    let mut ss_cols = 0.0;
    for &cm in &col_means {
        ss_cols += (cm - grand) * (cm - grand);
    }
    ss_cols *= nf;
    let mut ss_err = 0.0;
    for (i, row) in y.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let e = v - row_means[i] - col_means[j] + grand;
            ss_err += e * e;
        }
    }

    let msr = ss_rows / (nf - 1.0);
    let msc = ss_cols / 1.0;
    let mse = ss_err / (nf - 1.0);

    let numerator = msr - mse;
    let denominator = msr + mse + (2.0 / nf) * (msc - mse);
    if denominator == 0.0 {
        if numerator == 0.0 {
            None
        } else {
            Some(numerator.signum())
        }
    } else {
        Some((numerator / denominator).clamp(-1.0, 1.0))
    }
}

// ---------------------------------------------------------------------------
// Nested pairwise oracle: exhaustive loops straight off the dataset.
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct OracleRow {
    pub comparator: String,
    pub model_score: Option<f64>,
    pub comparator_score: Option<f64>,
    pub difference: Option<f64>,
    pub weight: u64,
}

#[derive(Debug)]
pub struct OracleNested {
    pub rows: Vec<OracleRow>,
    pub model_mean: Option<f64>,
    pub pathologist_mean: Option<f64>,
    pub mean_difference: Option<f64>,
    pub weight: u64,
}

/// Unit multiplicities for every frame of a dataset.
pub fn unit_mult(d: &Dataset<f64>) -> HashMap<String, u64> {
    d.frames().iter().map(|f| (f.id.clone(), 1)).collect()
}

fn oracle_confusion_tissue(a: &LabelGrid, b: &LabelGrid, n_classes: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&ca, &cb) in a.cells.iter().zip(&b.cells) {
        m[ca as usize][cb as usize] += 1;
    }
    m
}

fn oracle_confusion_cells(
    a: &CellPointSet<f64>,
    b: &CellPointSet<f64>,
    n_classes: usize,
    threshold_px: f64,
) -> Vec<Vec<u64>> {
    let pa: Vec<(f64, f64)> = a.points.iter().map(|p| (p.x, p.y)).collect();
    let pb: Vec<(f64, f64)> = b.points.iter().map(|p| (p.x, p.y)).collect();
    let matched = greedy_oracle(&pa, &pb, threshold_px);
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (i, j, _) in matched.pairs {
        m[a.points[i].class_id as usize][b.points[j].class_id as usize] += 1;
    }
    for i in matched.singletons_a {
        m[a.points[i].class_id as usize][0] += 1;
    }
    for j in matched.singletons_b {
        m[0][b.points[j].class_id as usize] += 1;
    }
    m
}

fn add_scaled(into: &mut Vec<Vec<u64>>, from: &[Vec<u64>], times: u64) {
    for (dst, src) in into.iter_mut().zip(from) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s * times;
        }
    }
}

fn oracle_metric(m: &[Vec<u64>], class: usize, metric: Metric) -> Option<f64> {
    let diag = m[class][class] as f64;
    let row: u64 = m[class].iter().sum();
    let col: u64 = m.iter().map(|r| r[class]).sum();
    let recall = if row > 0 { Some(diag / row as f64) } else { None };
    let precision = if col > 0 { Some(diag / col as f64) } else { None };
    match metric {
        Metric::Recall => recall,
        Metric::Precision => precision,
        Metric::F1 => match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        },
        Metric::Icc => unreachable!("icc comes from count tables"),
    }
}

/// Pairwise score of `candidate` against ground truth `reference` over the
/// given frame indices, with multiplicities. Returns (value, weight).
fn oracle_pair_score(
    d: &Dataset<f64>,
    reference: usize,
    candidate: usize,
    frames: &[usize],
    mult: &HashMap<String, u64>,
    metric: Metric,
    class: usize,
    threshold_px: f64,
) -> (Option<f64>, u64) {
    let n_classes = d.classes().n_total();
    let mut weight = 0u64;
    if metric == Metric::Icc {
        let mut rows = Vec::new();
        for &fi in frames {
            let m = mult[&d.frames()[fi].id];
            let (Some(Annotation::Counts(cr)), Some(Annotation::Counts(cc))) =
                (d.annotation(fi, reference), d.annotation(fi, candidate))
            else {
                panic!("count annotations expected");
            };
            for _ in 0..m {
                rows.push((cr.count(class as ClassId), cc.count(class as ClassId)));
            }
        }
        weight = rows.len() as u64;
        let value = if rows.len() < 2 { None } else { icc_oracle(&rows) };
        return (value, weight);
    }

    let mut agg = vec![vec![0u64; n_classes]; n_classes];
    for &fi in frames {
        let m = mult[&d.frames()[fi].id];
        if m == 0 {
            continue;
        }
        let single = match (d.annotation(fi, reference), d.annotation(fi, candidate)) {
            (Some(Annotation::Grid(a)), Some(Annotation::Grid(b))) => {
                oracle_confusion_tissue(a, b, n_classes)
            }
            (Some(Annotation::Points(a)), Some(Annotation::Points(b))) => {
                let frame = &d.frames()[fi];
                let t = threshold_px_for(frame, threshold_px);
                oracle_confusion_cells(a, b, n_classes, t)
            }
            _ => panic!("classification annotations expected"),
        };
        add_scaled(&mut agg, &single, m);
        weight += m;
    }
    if weight == 0 {
        return (None, 0);
    }
    (oracle_metric(&agg, class, metric), weight)
}

// The oracle corpus always passes pixel thresholds, so no conversion.
fn threshold_px_for(_frame: &Frame<f64>, threshold_px: f64) -> f64 {
    threshold_px
}

/// Exhaustive-loop nested pairwise evaluation with paired exclusion of
/// undefined scores (the drop policy).
pub fn nested_oracle(
    d: &Dataset<f64>,
    task: FrameTask,
    metric: Metric,
    class: ClassId,
    threshold_px: f64,
    mult: &HashMap<String, u64>,
) -> OracleNested {
    let panel = d.pathologist_indices();
    let model = d.model_index();
    let mut rows = Vec::new();
    for &p in &panel {
        let mut num_model = 0.0;
        let mut num_comp = 0.0;
        let mut weight = 0u64;
        for &r in &panel {
            if r == p {
                continue;
            }
            // frames annotated by both comparator and reference, this task
            let frames: Vec<usize> = (0..d.n_frames())
                .filter(|&fi| {
                    d.frames()[fi].task == task
                        && d.annotation(fi, p).is_some()
                        && d.annotation(fi, r).is_some()
                        && mult[&d.frames()[fi].id] > 0
                })
                .collect();
            let (s_comp, w) =
                oracle_pair_score(d, r, p, &frames, mult, metric, class as usize, threshold_px);
            let (s_model, w2) =
                oracle_pair_score(d, r, model, &frames, mult, metric, class as usize, threshold_px);
            assert_eq!(w, w2);
            if w == 0 {
                continue;
            }
            let (Some(sc), Some(sm)) = (s_comp, s_model) else {
                continue; // paired exclusion
            };
            num_comp += w as f64 * sc;
            num_model += w as f64 * sm;
            weight += w;
        }
        let (model_score, comparator_score, difference) = if weight > 0 {
            let ms = num_model / weight as f64;
            let cs = num_comp / weight as f64;
            (Some(ms), Some(cs), Some(ms - cs))
        } else {
            (None, None, None)
        };
        rows.push(OracleRow {
            comparator: d.annotators()[p].id.clone(),
            model_score,
            comparator_score,
            difference,
            weight,
        });
    }

    let mut weight = 0u64;
    let mut sm = 0.0;
    let mut sc = 0.0;
    let mut sd = 0.0;
    for row in &rows {
        if row.weight == 0 {
            continue;
        }
        sm += row.weight as f64 * row.model_score.unwrap();
        sc += row.weight as f64 * row.comparator_score.unwrap();
        sd += row.weight as f64 * row.difference.unwrap();
        weight += row.weight;
    }
    let (model_mean, pathologist_mean, mean_difference) = if weight > 0 {
        (
            Some(sm / weight as f64),
            Some(sc / weight as f64),
            Some(sd / weight as f64),
        )
    } else {
        (None, None, None)
    };
    OracleNested {
        rows,
        model_mean,
        pathologist_mean,
        mean_difference,
        weight,
    }
}

// ---------------------------------------------------------------------------
// Random dataset builders for oracle corpora.
// ---------------------------------------------------------------------------

pub struct CorpusParams {
    pub max_pathologists: usize,
    pub max_frames: usize,
    pub max_classes: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            max_pathologists: 4,
            max_frames: 6,
            max_classes: 3,
        }
    }
}

fn registry(n_classes: usize) -> ClassRegistry {
    let mut entries = vec![(0u32, "background".to_string())];
    for c in 1..=n_classes {
        entries.push((c as u32, format!("class_{c}")));
    }
    ClassRegistry::from_entries(&entries).unwrap()
}

/// A random panel of the given task with partial pathologist coverage.
/// Frames with fewer than two pathologists get dropped by assembly, which
/// is part of what the corpus exercises.
pub fn random_dataset(rng: &mut ChaCha12Rng, task: FrameTask, params: &CorpusParams) -> Dataset<f64> {
    let n_classes = rng.gen_range(1..=params.max_classes);
    let n_path = rng.gen_range(2..=params.max_pathologists);
    let n_frames = rng.gen_range(1..=params.max_frames);
    let n_slides = rng.gen_range(1..=n_frames);

    let mut annotators = vec![Annotator { id: "model".into(), is_model: true }];
    for p in 1..=n_path {
        annotators.push(Annotator {
            id: format!("p{p}"),
            is_model: false,
        });
    }

    let slides: Vec<String> = (1..=n_slides).map(|s| format!("s{s}")).collect();
    let frames: Vec<Frame<f64>> = (0..n_frames)
        .map(|i| Frame {
            id: format!("f{i}"),
            slide_id: format!("s{}", rng.gen_range(1..=n_slides)),
            width_px: 8,
            height_px: 8,
            microns_per_pixel: 0.5,
            task,
        })
        .collect();

    let mut records = Vec::new();
    for frame in &frames {
        for (ai, annotator) in annotators.iter().enumerate() {
            // the model covers everything; pathologists skip some frames
            if ai != 0 && rng.gen_bool(0.25) {
                continue;
            }
            records.push(random_annotation(rng, frame, &annotator.id, n_classes, task));
        }
    }

    let Loaded { dataset, .. } = Dataset::assemble(
        registry(n_classes),
        annotators,
        slides,
        frames,
        records,
    )
    .unwrap();
    dataset
}

fn random_annotation(
    rng: &mut ChaCha12Rng,
    frame: &Frame<f64>,
    annotator: &str,
    n_classes: usize,
    task: FrameTask,
) -> Annotation<f64> {
    match task {
        FrameTask::Tissue => {
            let n = (frame.width_px * frame.height_px) as usize;
            Annotation::Grid(LabelGrid {
                frame_id: frame.id.clone(),
                annotator_id: annotator.into(),
                width: frame.width_px,
                height: frame.height_px,
                cells: (0..n).map(|_| rng.gen_range(0..=n_classes) as ClassId).collect(),
            })
        }
        FrameTask::CellClass => {
            let n = rng.gen_range(0..=6);
            let points = (0..n)
                .map(|_| {
                    // integer-ish coordinates provoke distance ties
                    let x = if rng.gen_bool(0.5) {
                        rng.gen_range(0..frame.width_px) as f64
                    } else {
                        rng.gen_range(0.0..frame.width_px as f64)
                    };
                    let y = if rng.gen_bool(0.5) {
                        rng.gen_range(0..frame.height_px) as f64
                    } else {
                        rng.gen_range(0.0..frame.height_px as f64)
                    };
                    CellPoint {
                        x,
                        y,
                        class_id: rng.gen_range(1..=n_classes) as ClassId,
                    }
                })
                .collect();
            Annotation::Points(CellPointSet {
                frame_id: frame.id.clone(),
                annotator_id: annotator.into(),
                points,
            })
        }
        FrameTask::CellCount => Annotation::Counts(CountVector::from_dense(
            frame.id.clone(),
            annotator.into(),
            (0..n_classes).map(|_| rng.gen_range(0..=9)).collect(),
        )),
    }
}

/// Metrics applicable to a task.
pub fn task_metrics(task: FrameTask) -> Vec<Metric> {
    match task {
        FrameTask::Tissue | FrameTask::CellClass => {
            vec![Metric::Precision, Metric::Recall, Metric::F1]
        }
        FrameTask::CellCount => vec![Metric::Icc],
    }
}
