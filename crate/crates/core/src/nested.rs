//! The nested pairwise engine.
//!
//! Outer loop: each panel pathologist in turn is the comparator, held out
//! and compared against the model in reference to the remaining panel.
//! Inner loop: every remaining pathologist serves as ground truth for
//! pairwise metrics of both the comparator and the model, computed over
//! the frames common to comparator and reference so both sides see the
//! same data. Inner and outer averages are weighted by the number of
//! frames entering each computation.
//!
//! [`EvalContext`] caches per-frame pairwise confusion matrices (and count
//! vectors) once, so repeated evaluation under bootstrap frame multisets
//! only re-aggregates.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{greedy_match, ThresholdUnit};
use crate::confusion::{object_confusion, pixel_confusion, ConfusionMatrix};
use crate::dataset::{Annotation, ClassId, Dataset, FrameTask};
use crate::error::{Error, Result};
use crate::metrics::{icc_2_1_from_rows, per_class_metrics, Metric};
use crate::scalar::Real;

/// What to do with an undefined pairwise score inside the nested average.
///
/// The default drops the reference from both sides of the comparison
/// (paired exclusion), so averages stay apples-to-apples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedPolicy {
    Drop,
    Zero,
    One,
}

impl std::str::FromStr for UndefinedPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(UndefinedPolicy::Drop),
            "zero" => Ok(UndefinedPolicy::Zero),
            "one" => Ok(UndefinedPolicy::One),
            other => Err(Error::InvalidConfig(format!(
                "unknown undefined-metric policy {other:?}"
            ))),
        }
    }
}

/// Knobs for building an evaluation context.
#[derive(Debug, Clone, Copy)]
pub struct NestedOptions<R> {
    pub match_threshold: R,
    pub threshold_unit: ThresholdUnit,
    pub policy: UndefinedPolicy,
}

impl<R: Real> Default for NestedOptions<R> {
    fn default() -> Self {
        Self {
            // Roughly half a typical cell diameter.
            match_threshold: R::from_f64(7.5).unwrap(),
            threshold_unit: ThresholdUnit::Micron,
            policy: UndefinedPolicy::Drop,
        }
    }
}

/// One pairwise metric value with its frame-count weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseScore<R> {
    pub reference: String,
    pub candidate: String,
    pub class_id: ClassId,
    pub metric: Metric,
    pub value: Option<R>,
    /// Common-frame count; zero iff the value is undefined or no frames.
    pub weight: u64,
}

/// One outer-loop row: the held-out comparator against the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorRow<R> {
    pub comparator: String,
    pub model_score: Option<R>,
    pub comparator_score: Option<R>,
    pub difference: Option<R>,
    pub weight: u64,
}

/// Nested pairwise result for one (metric, class).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedResult<R> {
    pub metric: Metric,
    pub class_id: ClassId,
    pub rows: Vec<ComparatorRow<R>>,
    pub model_mean: Option<R>,
    pub pathologist_mean: Option<R>,
    /// Weighted mean of per-comparator differences; positive = model better.
    pub mean_difference: Option<R>,
    /// Sum of per-comparator weights.
    pub weight: u64,
}

/// Per ordered (comparator, reference) cached aggregation inputs.
struct PairCell {
    /// (position, multiplicity-independent) common frames of the pair.
    common: Vec<usize>,
}

/// Reusable evaluation state for one (dataset, task, matching config).
pub struct EvalContext<'a, R: Real> {
    dataset: &'a Dataset<R>,
    task: FrameTask,
    /// Dataset frame indices of this task, slide-major manifest order.
    frames: Vec<usize>,
    /// Positions into `frames`, grouped per slide (manifest order).
    slide_groups: Vec<Vec<usize>>,
    /// `has[annotator][position]`
    has: Vec<Vec<bool>>,
    pathologists: Vec<usize>,
    model: usize,
    /// Per unordered annotator pair (lo, hi): per-position confusions with
    /// rows = lo. Empty for the count task.
    pair_confusions: HashMap<(usize, usize), Vec<Option<ConfusionMatrix>>>,
    /// Per annotator per position: dense per-class counts (count task only).
    counts: Vec<Vec<Option<Vec<u64>>>>,
    /// Ordered (comparator, reference) common-position lists.
    cells: HashMap<(usize, usize), PairCell>,
}

impl<'a, R: Real> EvalContext<'a, R> {
    pub fn new(
        dataset: &'a Dataset<R>,
        task: FrameTask,
        options: &NestedOptions<R>,
    ) -> Result<Self> {
        let pathologists = dataset.pathologist_indices();
        if pathologists.len() < 2 {
            return Err(Error::TooFewPathologists(pathologists.len()));
        }
        let model = dataset.model_index();
        let n_annotators = dataset.annotators().len();

        // Slide-major frame order; this is also the documented resampling
        // order, so frames-only and hierarchical draws line up when every
        // slide holds a single frame.
        let mut frames = Vec::new();
        let mut slide_groups = Vec::new();
        for slide_id in dataset.slides() {
            let group: Vec<usize> = dataset
                .frames()
                .iter()
                .enumerate()
                .filter(|(_, f)| f.task == task && &f.slide_id == slide_id)
                .map(|(fi, _)| fi)
                .collect();
            if !group.is_empty() {
                let start = frames.len();
                frames.extend(group);
                slide_groups.push((start..frames.len()).collect());
            }
        }

        let has: Vec<Vec<bool>> = (0..n_annotators)
            .map(|ai| {
                frames
                    .iter()
                    .map(|&fi| dataset.has_annotation(fi, ai))
                    .collect()
            })
            .collect();

        let mut pair_confusions = HashMap::new();
        if task != FrameTask::CellCount {
            let mut pairs = Vec::new();
            for lo in 0..n_annotators {
                for hi in lo + 1..n_annotators {
                    pairs.push((lo, hi));
                }
            }
            let n_classes = dataset.classes().n_total();
            let computed: Result<Vec<_>> = pairs
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut per_position = vec![None; frames.len()];
                    for (pos, &fi) in frames.iter().enumerate() {
                        if !(has[lo][pos] && has[hi][pos]) {
                            continue;
                        }
                        let frame = &dataset.frames()[fi];
                        let m = match (
                            dataset.annotation(fi, lo).unwrap(),
                            dataset.annotation(fi, hi).unwrap(),
                        ) {
                            (Annotation::Grid(a), Annotation::Grid(b)) => {
                                pixel_confusion(a, b, n_classes)?
                            }
                            (Annotation::Points(a), Annotation::Points(b)) => {
                                let matching = greedy_match(
                                    a,
                                    b,
                                    options.match_threshold,
                                    options.threshold_unit,
                                    frame.microns_per_pixel,
                                )?;
                                object_confusion(&matching, a, b, n_classes)?
                            }
                            _ => {
                                return Err(Error::Manifest(format!(
                                    "mixed annotation kinds on frame {}",
                                    frame.id
                                )))
                            }
                        };
                        per_position[pos] = Some(m);
                    }
                    Ok(((lo, hi), per_position))
                })
                .collect();
            pair_confusions = computed?.into_iter().collect();
        }

        let counts: Vec<Vec<Option<Vec<u64>>>> = (0..n_annotators)
            .map(|ai| {
                frames
                    .iter()
                    .map(|&fi| match dataset.annotation(fi, ai) {
                        Some(Annotation::Counts(c)) => Some(c.dense().to_vec()),
                        _ => None,
                    })
                    .collect()
            })
            .collect();

        let mut cells = HashMap::new();
        for &p in &pathologists {
            for &r in &pathologists {
                if p == r {
                    continue;
                }
                let common: Vec<usize> = (0..frames.len())
                    .filter(|&pos| has[p][pos] && has[r][pos])
                    .collect();
                cells.insert((p, r), PairCell { common });
            }
        }

        Ok(Self {
            dataset,
            task,
            frames,
            slide_groups,
            has,
            pathologists,
            model,
            pair_confusions,
            counts,
            cells,
        })
    }

    pub fn task(&self) -> FrameTask {
        self.task
    }

    pub fn dataset(&self) -> &Dataset<R> {
        self.dataset
    }

    /// Number of task frames (resampling positions).
    pub fn n_positions(&self) -> usize {
        self.frames.len()
    }

    /// Frame positions grouped by slide, for resampling.
    pub fn slide_groups(&self) -> &[Vec<usize>] {
        &self.slide_groups
    }

    /// Frame id at a position.
    pub fn frame_id(&self, pos: usize) -> &str {
        &self.dataset.frames()[self.frames[pos]].id
    }

    fn check_metric(&self, metric: Metric) -> Result<()> {
        let ok = match self.task {
            FrameTask::Tissue | FrameTask::CellClass => metric.is_classification(),
            FrameTask::CellCount => metric == Metric::Icc,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::TaskMetricMismatch {
                task: self.task.to_string(),
                metric: metric.to_string(),
            })
        }
    }

    fn check_class(&self, metric: Metric, class_id: ClassId) -> Result<()> {
        let registered = self.dataset.classes().contains(class_id);
        let ok = registered && (class_id != 0 || metric.is_classification());
        if ok {
            Ok(())
        } else {
            Err(Error::UnregisteredClass(class_id as u32))
        }
    }

    /// Confusion matrix of (reference rows, candidate columns) aggregated
    /// over the positions of `mult` with their multiplicities, restricted
    /// to positions where both sides annotated. Returns (matrix, weight).
    fn aggregate_pair(
        &self,
        reference: usize,
        candidate: usize,
        positions: &[usize],
        mult: &[u64],
    ) -> (ConfusionMatrix, u64) {
        let (lo, hi) = if reference < candidate {
            (reference, candidate)
        } else {
            (candidate, reference)
        };
        let per_position = &self.pair_confusions[&(lo, hi)];
        let mut agg = ConfusionMatrix::zero(
            self.dataset.classes().n_total(),
            self.dataset.annotators()[lo].id.clone(),
            self.dataset.annotators()[hi].id.clone(),
        );
        let mut weight = 0u64;
        for &pos in positions {
            let m = mult[pos];
            if m == 0 {
                continue;
            }
            if let Some(matrix) = &per_position[pos] {
                agg.accumulate(matrix, m);
                weight += m;
            }
        }
        let oriented = if reference == lo { agg } else { agg.transpose() };
        (oriented, weight)
    }

    /// Count rows (reference, candidate) over positions, with multiplicity
    /// expanding into repeated rows.
    fn count_rows(
        &self,
        reference: usize,
        candidate: usize,
        class_id: ClassId,
        positions: &[usize],
        mult: &[u64],
    ) -> Vec<(u64, u64)> {
        let idx = class_id as usize - 1;
        let mut rows = Vec::new();
        for &pos in positions {
            let m = mult[pos];
            if m == 0 {
                continue;
            }
            if let (Some(rc), Some(cc)) = (&self.counts[reference][pos], &self.counts[candidate][pos])
            {
                for _ in 0..m {
                    rows.push((rc[idx], cc[idx]));
                }
            }
        }
        rows
    }

    fn score_over(
        &self,
        reference: usize,
        candidate: usize,
        positions: &[usize],
        mult: &[u64],
        metric: Metric,
        class_id: ClassId,
    ) -> (Option<R>, u64) {
        match metric {
            Metric::Icc => {
                let rows = self.count_rows(reference, candidate, class_id, positions, mult);
                let weight = rows.len() as u64;
                let value = match icc_2_1_from_rows::<R>(&rows) {
                    Ok(v) => v,
                    Err(_) => None,
                };
                (value, weight)
            }
            _ => {
                let (agg, weight) = self.aggregate_pair(reference, candidate, positions, mult);
                if weight == 0 {
                    return (None, 0);
                }
                let value = per_class_metrics::<R>(&agg, class_id)
                    .ok()
                    .and_then(|cm| cm.get(metric));
                (value, weight)
            }
        }
    }

    /// Aggregated confusion per unordered annotator pair over their common
    /// frames under `mult`, rows = the pair's first annotator. For audit
    /// dumps; empty on the count task.
    pub fn aggregated_pair_matrices(&self, mult: &[u64]) -> Vec<ConfusionMatrix> {
        let mut keys: Vec<(usize, usize)> = self.pair_confusions.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|(lo, hi)| {
                let positions: Vec<usize> = (0..self.frames.len())
                    .filter(|&pos| self.has[lo][pos] && self.has[hi][pos])
                    .collect();
                self.aggregate_pair(lo, hi, &positions, mult).0
            })
            .collect()
    }

    /// Pairwise score of `candidate` against `reference` as ground truth
    /// over an explicit frame subset (must be common to both).
    pub fn pairwise_score(
        &self,
        reference: &str,
        candidate: &str,
        frame_ids: &[String],
        metric: Metric,
        class_id: ClassId,
    ) -> Result<PairwiseScore<R>> {
        self.check_metric(metric)?;
        self.check_class(metric, class_id)?;
        let ri = self
            .dataset
            .annotator_index(reference)
            .ok_or_else(|| Error::UnknownAnnotator(reference.to_string()))?;
        let ci = self
            .dataset
            .annotator_index(candidate)
            .ok_or_else(|| Error::UnknownAnnotator(candidate.to_string()))?;
        let mut positions = Vec::with_capacity(frame_ids.len());
        for id in frame_ids {
            let pos = self
                .frames
                .iter()
                .position(|&fi| self.dataset.frames()[fi].id == *id)
                .ok_or_else(|| Error::FramesNotCommon(id.clone()))?;
            if !(self.has[ri][pos] && self.has[ci][pos]) {
                return Err(Error::FramesNotCommon(id.clone()));
            }
            positions.push(pos);
        }
        let mult = vec![1u64; self.frames.len()];
        let (value, mut weight) = self.score_over(ri, ci, &positions, &mult, metric, class_id);
        if value.is_none() {
            weight = 0;
        }
        Ok(PairwiseScore {
            reference: reference.to_string(),
            candidate: candidate.to_string(),
            class_id,
            metric,
            value,
            weight,
        })
    }

    /// Runs the nested evaluation for every (metric, class) combination
    /// under one frame multiset (`mult[pos]` = draw count; the unit vector
    /// reproduces the plain dataset).
    pub fn evaluate_all(
        &self,
        metrics: &[Metric],
        class_ids: &[ClassId],
        policy: UndefinedPolicy,
        mult: &[u64],
    ) -> Result<Vec<NestedResult<R>>> {
        assert_eq!(mult.len(), self.frames.len(), "multiset length mismatch");
        for &m in metrics {
            self.check_metric(m)?;
            for &c in class_ids {
                self.check_class(m, c)?;
            }
        }

        // Metric- and class-independent aggregates per ordered (p, r).
        struct Agg {
            comparator: ConfusionMatrix,
            model: ConfusionMatrix,
            weight: u64,
        }
        let classification = self.task != FrameTask::CellCount;
        let mut aggs: HashMap<(usize, usize), Agg> = HashMap::new();
        if classification {
            for &p in &self.pathologists {
                for &r in &self.pathologists {
                    if p == r {
                        continue;
                    }
                    let common = &self.cells[&(p, r)].common;
                    let (comp, w1) = self.aggregate_pair(r, p, common, mult);
                    let (model, w2) = self.aggregate_pair(r, self.model, common, mult);
                    debug_assert_eq!(w1, w2, "model covers all frames");
                    aggs.insert(
                        (p, r),
                        Agg {
                            comparator: comp,
                            model,
                            weight: w1,
                        },
                    );
                }
            }
        }

        let mut results = Vec::with_capacity(metrics.len() * class_ids.len());
        for &metric in metrics {
            for &class_id in class_ids {
                let mut rows = Vec::with_capacity(self.pathologists.len());
                for &p in &self.pathologists {
                    let mut num_model = R::zero();
                    let mut num_comp = R::zero();
                    let mut weight = 0u64;
                    for &r in &self.pathologists {
                        if p == r {
                            continue;
                        }
                        let (s_comp, s_model, w) = if classification {
                            let agg = &aggs[&(p, r)];
                            if agg.weight == 0 {
                                continue;
                            }
                            let sc = per_class_metrics::<R>(&agg.comparator, class_id)?
                                .get(metric);
                            let sm = per_class_metrics::<R>(&agg.model, class_id)?.get(metric);
                            (sc, sm, agg.weight)
                        } else {
                            let common = &self.cells[&(p, r)].common;
                            let rows_c = self.count_rows(r, p, class_id, common, mult);
                            if rows_c.is_empty() {
                                continue;
                            }
                            let rows_m = self.count_rows(r, self.model, class_id, common, mult);
                            debug_assert_eq!(rows_c.len(), rows_m.len());
                            let sc = icc_2_1_from_rows::<R>(&rows_c).unwrap_or(None);
                            let sm = icc_2_1_from_rows::<R>(&rows_m).unwrap_or(None);
                            (sc, sm, rows_c.len() as u64)
                        };
                        let substitute = |v: Option<R>| match (v, policy) {
                            (Some(x), _) => Some(x),
                            (None, UndefinedPolicy::Drop) => None,
                            (None, UndefinedPolicy::Zero) => Some(R::zero()),
                            (None, UndefinedPolicy::One) => Some(R::one()),
                        };
                        // Paired exclusion: a reference contributes to both
                        // sides or to neither.
                        let (Some(sc), Some(sm)) = (substitute(s_comp), substitute(s_model))
                        else {
                            continue;
                        };
                        let wf = R::from_count(w);
                        num_comp = num_comp + wf * sc;
                        num_model = num_model + wf * sm;
                        weight += w;
                    }
                    let (model_score, comparator_score, difference) = if weight > 0 {
                        let wf = R::from_count(weight);
                        let ms = num_model / wf;
                        let cs = num_comp / wf;
                        (Some(ms), Some(cs), Some(ms - cs))
                    } else {
                        (None, None, None)
                    };
                    rows.push(ComparatorRow {
                        comparator: self.dataset.annotators()[p].id.clone(),
                        model_score,
                        comparator_score,
                        difference,
                        weight,
                    });
                }

                let mut total_weight = 0u64;
                let mut sum_model = R::zero();
                let mut sum_comp = R::zero();
                let mut sum_diff = R::zero();
                for row in &rows {
                    if row.weight == 0 {
                        continue;
                    }
                    let wf = R::from_count(row.weight);
                    sum_model = sum_model + wf * row.model_score.unwrap();
                    sum_comp = sum_comp + wf * row.comparator_score.unwrap();
                    sum_diff = sum_diff + wf * row.difference.unwrap();
                    total_weight += row.weight;
                }
                let (model_mean, pathologist_mean, mean_difference) = if total_weight > 0 {
                    let wf = R::from_count(total_weight);
                    (
                        Some(sum_model / wf),
                        Some(sum_comp / wf),
                        Some(sum_diff / wf),
                    )
                } else {
                    (None, None, None)
                };
                results.push(NestedResult {
                    metric,
                    class_id,
                    rows,
                    model_mean,
                    pathologist_mean,
                    mean_difference,
                    weight: total_weight,
                });
            }
        }
        Ok(results)
    }
}

/// Nested evaluation of one (metric, class) on the plain dataset.
pub fn evaluate_nested<R: Real>(
    dataset: &Dataset<R>,
    task: FrameTask,
    metric: Metric,
    class_id: ClassId,
    options: &NestedOptions<R>,
) -> Result<NestedResult<R>> {
    let ctx = EvalContext::new(dataset, task, options)?;
    let mult = vec![1u64; ctx.n_positions()];
    Ok(ctx
        .evaluate_all(&[metric], &[class_id], options.policy, &mult)?
        .remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotator, ClassRegistry, Frame, LabelGrid, Loaded};
    use approx::assert_abs_diff_eq;

    /// Tissue dataset: one slide, each annotator's grid given per frame.
    /// `None` means the annotator skipped the frame.
    fn tissue_dataset(
        n_frames: usize,
        grids: &[(&str, bool, Vec<Option<Vec<ClassId>>>)],
    ) -> Dataset<f64> {
        let registry = ClassRegistry::from_entries(&[
            (0, "background".into()),
            (1, "tumor".into()),
            (2, "stroma".into()),
        ])
        .unwrap();
        let annotators: Vec<Annotator> = grids
            .iter()
            .map(|(id, is_model, _)| Annotator {
                id: (*id).into(),
                is_model: *is_model,
            })
            .collect();
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
        let mut records = Vec::new();
        for (id, _, per_frame) in grids {
            for (i, cells) in per_frame.iter().enumerate() {
                if let Some(cells) = cells {
                    records.push(Annotation::Grid(LabelGrid {
                        frame_id: format!("f{i}"),
                        annotator_id: (*id).into(),
                        width: 2,
                        height: 2,
                        cells: cells.clone(),
                    }));
                }
            }
        }
        let Loaded { dataset, .. } = Dataset::assemble(
            registry,
            annotators,
            vec!["s1".into()],
            frames,
            records,
        )
        .unwrap();
        dataset
    }

    #[test]
    fn degenerate_perfect_panel_has_zero_differences() {
        let g = vec![Some(vec![1, 1, 2, 0]), Some(vec![2, 1, 1, 0])];
        let d = tissue_dataset(
            2,
            &[
                ("model", true, g.clone()),
                ("p1", false, g.clone()),
                ("p2", false, g.clone()),
                ("p3", false, g.clone()),
            ],
        );
        for metric in [Metric::Precision, Metric::Recall, Metric::F1] {
            for class_id in [1u16, 2] {
                let r =
                    evaluate_nested(&d, FrameTask::Tissue, metric, class_id, &Default::default())
                        .unwrap();
                assert_eq!(r.mean_difference, Some(0.0));
                for row in &r.rows {
                    assert_eq!(row.difference, Some(0.0));
                }
            }
        }
    }

    #[test]
    fn model_cloned_from_a_pathologist_scores_like_them() {
        let p1 = vec![Some(vec![1, 1, 2, 0]), Some(vec![1, 2, 2, 0])];
        let p2 = vec![Some(vec![1, 2, 2, 0]), Some(vec![1, 1, 1, 0])];
        let p3 = vec![Some(vec![0, 1, 2, 2]), Some(vec![1, 2, 1, 0])];
        let d = tissue_dataset(
            2,
            &[
                ("model", true, p1.clone()),
                ("p1", false, p1),
                ("p2", false, p2),
                ("p3", false, p3),
            ],
        );
        let opts = NestedOptions::default();
        let ctx = EvalContext::new(&d, FrameTask::Tissue, &opts).unwrap();
        let frames: Vec<String> = vec!["f0".into(), "f1".into()];
        let result = evaluate_nested(&d, FrameTask::Tissue, Metric::F1, 1, &opts).unwrap();

        // For comparator p2 the references are {p1, p3}; the model's score
        // must equal the weighted mean of p1's pairwise scores on the same
        // frame sets (the model is a byte clone of p1).
        let row = result.rows.iter().find(|r| r.comparator == "p2").unwrap();
        let s1 = ctx
            .pairwise_score("p1", "model", &frames, Metric::F1, 1)
            .unwrap();
        let s3 = ctx
            .pairwise_score("p3", "model", &frames, Metric::F1, 1)
            .unwrap();
        let expect = (2.0 * s1.value.unwrap() + 2.0 * s3.value.unwrap()) / 4.0;
        assert_abs_diff_eq!(row.model_score.unwrap(), expect, epsilon = 1e-12);

        // And p1's own clone-equality: reference p3, candidate p1 == model.
        let own = ctx
            .pairwise_score("p3", "p1", &frames, Metric::F1, 1)
            .unwrap();
        assert_eq!(own.value, s3.value);
    }

    #[test]
    fn weight_accounting_sums_rows() {
        let g = vec![Some(vec![1, 1, 2, 0]), Some(vec![2, 1, 1, 0]), None];
        let h = vec![Some(vec![1, 0, 2, 0]), None, Some(vec![2, 1, 1, 0])];
        let k = vec![Some(vec![1, 1, 0, 0]), Some(vec![2, 2, 1, 0]), Some(vec![2, 1, 1, 1])];
        let model = vec![
            Some(vec![1, 1, 2, 0]),
            Some(vec![2, 1, 1, 0]),
            Some(vec![2, 1, 1, 0]),
        ];
        let d = tissue_dataset(
            3,
            &[
                ("model", true, model),
                ("p1", false, g),
                ("p2", false, h),
                ("p3", false, k),
            ],
        );
        let r = evaluate_nested(&d, FrameTask::Tissue, Metric::Recall, 1, &Default::default())
            .unwrap();
        let total: u64 = r.rows.iter().map(|row| row.weight).sum();
        assert_eq!(r.weight, total);
        // p1 shares 1 frame with p2 and 2 with p3.
        let row = r.rows.iter().find(|row| row.comparator == "p1").unwrap();
        assert_eq!(row.weight, 3);
    }

    #[test]
    fn fewer_than_two_pathologists_is_an_error() {
        // With a single pathologist every frame fails the two-pathologist
        // rule and the panel is too small for nesting.
        let g = vec![Some(vec![1, 1, 2, 0])];
        let d = tissue_dataset(1, &[("model", true, g.clone()), ("p1", false, g.clone())]);
        assert_eq!(d.n_frames(), 0);
        let err = match EvalContext::new(&d, FrameTask::Tissue, &NestedOptions::default()) {
            Err(e) => e,
            Ok(_) => panic!("expected too-few-pathologists error"),
        };
        assert!(matches!(err, Error::TooFewPathologists(1)));

        let d2 = tissue_dataset(
            1,
            &[
                ("model", true, g.clone()),
                ("p1", false, g.clone()),
                ("p2", false, g),
            ],
        );
        assert!(EvalContext::new(&d2, FrameTask::Tissue, &NestedOptions::default()).is_ok());
    }

    #[test]
    fn task_metric_mismatch_is_rejected() {
        let g = vec![Some(vec![1, 1, 2, 0])];
        let d = tissue_dataset(
            1,
            &[
                ("model", true, g.clone()),
                ("p1", false, g.clone()),
                ("p2", false, g),
            ],
        );
        let err = evaluate_nested(&d, FrameTask::Tissue, Metric::Icc, 1, &Default::default())
            .unwrap_err();
        assert!(matches!(err, Error::TaskMetricMismatch { .. }));
    }

    #[test]
    fn micro_aggregation_is_scale_invariant() {
        // Two identical frames give the same pairwise metric as one.
        let one = vec![Some(vec![1, 2, 2, 0])];
        let two = vec![Some(vec![1, 2, 2, 0]), Some(vec![1, 2, 2, 0])];
        let other_one = vec![Some(vec![1, 1, 2, 0])];
        let other_two = vec![Some(vec![1, 1, 2, 0]), Some(vec![1, 1, 2, 0])];
        let d1 = tissue_dataset(
            1,
            &[
                ("model", true, one.clone()),
                ("p1", false, one),
                ("p2", false, other_one),
            ],
        );
        let d2 = tissue_dataset(
            2,
            &[
                ("model", true, two.clone()),
                ("p1", false, two),
                ("p2", false, other_two),
            ],
        );
        let opts = NestedOptions::default();
        let c1 = EvalContext::new(&d1, FrameTask::Tissue, &opts).unwrap();
        let c2 = EvalContext::new(&d2, FrameTask::Tissue, &opts).unwrap();
        let s1 = c1
            .pairwise_score("p1", "p2", &["f0".into()], Metric::F1, 2)
            .unwrap();
        let s2 = c2
            .pairwise_score("p1", "p2", &["f0".into(), "f1".into()], Metric::F1, 2)
            .unwrap();
        assert_eq!(s1.value, s2.value);
        assert_eq!(s1.weight, 1);
        assert_eq!(s2.weight, 2);
    }

    #[test]
    fn empty_frame_subset_gives_undefined_zero_weight() {
        let g = vec![Some(vec![1, 1, 2, 0])];
        let d = tissue_dataset(
            1,
            &[
                ("model", true, g.clone()),
                ("p1", false, g.clone()),
                ("p2", false, g),
            ],
        );
        let ctx = EvalContext::new(&d, FrameTask::Tissue, &NestedOptions::default()).unwrap();
        let s = ctx
            .pairwise_score("p1", "p2", &[], Metric::F1, 1)
            .unwrap();
        assert_eq!(s.value, None);
        assert_eq!(s.weight, 0);
    }
}
