//! Domain data model: classes, annotators, slides, frames and per-frame
//! annotations, plus dataset assembly with the normalization rules the
//! rest of the crate relies on.
//!
//! A dataset is immutable once assembled and safe to share across threads.

pub mod io;
mod validate;

pub use validate::{validate_dataset, ValidationReport, Violation};

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Class identifier; 0 is always the background class.
pub type ClassId = u16;

/// Ordered class registry. Ids are contiguous from 0 and id 0 is named
/// "background".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRegistry {
    names: Vec<String>,
}

impl ClassRegistry {
    /// Builds a registry from (id, name) entries, validating contiguity,
    /// uniqueness and the background convention.
    pub fn from_entries(entries: &[(u32, String)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Manifest("class registry is empty".into()));
        }
        let mut names = vec![String::new(); entries.len()];
        let mut seen_ids = HashSet::new();
        let mut seen_names = HashSet::new();
        for (id, name) in entries {
            if *id as usize >= entries.len() || !seen_ids.insert(*id) {
                return Err(Error::Manifest(format!(
                    "class ids must be unique and contiguous from 0; offending id {id}"
                )));
            }
            if name.is_empty() || !seen_names.insert(name.clone()) {
                return Err(Error::Manifest(format!(
                    "class names must be unique and nonempty; offending name {name:?}"
                )));
            }
            names[*id as usize] = name.clone();
        }
        if names[0] != "background" {
            return Err(Error::Manifest(format!(
                "class 0 must be named \"background\", found {:?}",
                names[0]
            )));
        }
        Ok(Self { names })
    }

    /// Total number of classes including background.
    pub fn n_total(&self) -> usize {
        self.names.len()
    }

    /// Number of substantive (nonzero) classes.
    pub fn n_nonzero(&self) -> usize {
        self.names.len() - 1
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id as usize) < self.names.len()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id as usize).map(|s| s.as_str())
    }

    /// Ids of substantive classes, ascending.
    pub fn nonzero_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (1..self.names.len()).map(|i| i as ClassId)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotator {
    pub id: String,
    pub is_model: bool,
}

/// The three supported frame tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTask {
    Tissue,
    CellClass,
    CellCount,
}

impl FrameTask {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameTask::Tissue => "tissue",
            FrameTask::CellClass => "cell_class",
            FrameTask::CellCount => "cell_count",
        }
    }
}

impl std::str::FromStr for FrameTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tissue" => Ok(FrameTask::Tissue),
            "cell_class" => Ok(FrameTask::CellClass),
            "cell_count" => Ok(FrameTask::CellCount),
            other => Err(Error::InvalidConfig(format!("unknown task {other:?}"))),
        }
    }
}

impl std::fmt::Display for FrameTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sampled sub-region of a slide on which exhaustive annotation is feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<R> {
    pub id: String,
    pub slide_id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub microns_per_pixel: R,
    pub task: FrameTask,
}

/// Dense per-pixel class assignment for one (frame, annotator).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub frame_id: String,
    pub annotator_id: String,
    pub width: u32,
    pub height: u32,
    /// Row-major, `height * width` entries.
    pub cells: Vec<ClassId>,
}

impl LabelGrid {
    pub fn get(&self, row: u32, col: u32) -> ClassId {
        self.cells[(row * self.width + col) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoint<R> {
    pub x: R,
    pub y: R,
    pub class_id: ClassId,
}

/// Exhaustive cell annotations for one (frame, annotator).
#[derive(Debug, Clone, PartialEq)]
pub struct CellPointSet<R> {
    pub frame_id: String,
    pub annotator_id: String,
    pub points: Vec<CellPoint<R>>,
}

/// One count per substantive class for one (frame, annotator).
///
/// Stored dense: index `c - 1` holds the count for class `c`, so absent
/// classes normalize to zero and pairwise count tables stay rectangular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    pub frame_id: String,
    pub annotator_id: String,
    counts: Vec<u64>,
}

impl CountVector {
    /// Builds a normalized vector from sparse (class_id, count) pairs.
    pub fn from_pairs(
        frame_id: String,
        annotator_id: String,
        pairs: &[(u32, u64)],
        registry: &ClassRegistry,
    ) -> Result<Self> {
        let mut counts = vec![0u64; registry.n_nonzero()];
        for (class_id, count) in pairs {
            if *class_id == 0 || *class_id as usize >= registry.n_total() {
                return Err(Error::UnknownClass {
                    class_id: *class_id,
                    context: format!("count vector for frame {frame_id}, annotator {annotator_id}"),
                });
            }
            counts[*class_id as usize - 1] = *count;
        }
        Ok(Self {
            frame_id,
            annotator_id,
            counts,
        })
    }

    pub fn from_dense(frame_id: String, annotator_id: String, counts: Vec<u64>) -> Self {
        Self {
            frame_id,
            annotator_id,
            counts,
        }
    }

    /// Count for a substantive class.
    pub fn count(&self, class_id: ClassId) -> u64 {
        self.counts[class_id as usize - 1]
    }

    pub fn dense(&self) -> &[u64] {
        &self.counts
    }
}

/// Annotation payload for one (frame, annotator).
#[derive(Debug, Clone, PartialEq)]
pub enum Annotation<R> {
    Grid(LabelGrid),
    Points(CellPointSet<R>),
    Counts(CountVector),
}

impl<R> Annotation<R> {
    pub fn frame_id(&self) -> &str {
        match self {
            Annotation::Grid(g) => &g.frame_id,
            Annotation::Points(p) => &p.frame_id,
            Annotation::Counts(c) => &c.frame_id,
        }
    }

    pub fn annotator_id(&self) -> &str {
        match self {
            Annotation::Grid(g) => &g.annotator_id,
            Annotation::Points(p) => &p.annotator_id,
            Annotation::Counts(c) => &c.annotator_id,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Annotation::Grid(_) => "label grid",
            Annotation::Points(_) => "cell point set",
            Annotation::Counts(_) => "count vector",
        }
    }

    fn matches_task(&self, task: FrameTask) -> bool {
        matches!(
            (self, task),
            (Annotation::Grid(_), FrameTask::Tissue)
                | (Annotation::Points(_), FrameTask::CellClass)
                | (Annotation::Counts(_), FrameTask::CellCount)
        )
    }
}

/// An assembled dataset plus the warnings produced while normalizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<R> {
    pub dataset: Dataset<R>,
    pub warnings: Vec<String>,
}

/// Immutable evaluation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    classes: ClassRegistry,
    annotators: Vec<Annotator>,
    slides: Vec<String>,
    frames: Vec<Frame<R>>,
    /// `annotations[frame_idx][annotator_idx]`
    annotations: Vec<Vec<Option<Annotation<R>>>>,
    model_idx: usize,
}

impl<R: Real> Dataset<R> {
    /// Assembles and normalizes a dataset from its parts.
    ///
    /// Hard errors: structural problems (duplicate or dangling ids, no or
    /// multiple model annotators, payload/task mismatches, grid dimension
    /// mismatches, unregistered classes, non-finite coordinates) and a
    /// missing model annotation on any frame. Frames with fewer than two
    /// pathologist annotations are dropped with a warning rather than
    /// failing the run.
    pub fn assemble(
        classes: ClassRegistry,
        annotators: Vec<Annotator>,
        slides: Vec<String>,
        frames: Vec<Frame<R>>,
        records: Vec<Annotation<R>>,
    ) -> Result<Loaded<R>> {
        let model_indices: Vec<usize> = annotators
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_model)
            .map(|(i, _)| i)
            .collect();
        if model_indices.len() != 1 {
            return Err(Error::Manifest(format!(
                "exactly one annotator must be flagged as the model, found {}",
                model_indices.len()
            )));
        }
        let model_idx = model_indices[0];

        let mut annot_index = HashMap::new();
        for (i, a) in annotators.iter().enumerate() {
            if a.id.is_empty() || annot_index.insert(a.id.clone(), i).is_some() {
                return Err(Error::Manifest(format!(
                    "annotator ids must be unique and nonempty; offending id {:?}",
                    a.id
                )));
            }
        }

        let mut slide_index = HashMap::new();
        for (i, s) in slides.iter().enumerate() {
            if s.is_empty() || slide_index.insert(s.clone(), i).is_some() {
                return Err(Error::Manifest(format!(
                    "slide ids must be unique and nonempty; offending id {s:?}"
                )));
            }
        }

        let mut frame_index = HashMap::new();
        for (i, f) in frames.iter().enumerate() {
            if f.id.is_empty() || frame_index.insert(f.id.clone(), i).is_some() {
                return Err(Error::Manifest(format!(
                    "frame ids must be unique and nonempty; offending id {:?}",
                    f.id
                )));
            }
            if !slide_index.contains_key(&f.slide_id) {
                return Err(Error::Manifest(format!(
                    "frame {} references undeclared slide {}",
                    f.id, f.slide_id
                )));
            }
            if f.width_px == 0 || f.height_px == 0 {
                return Err(Error::Manifest(format!(
                    "frame {} must have positive dimensions",
                    f.id
                )));
            }
            let mpp = f.microns_per_pixel;
            if !(mpp.is_finite() && mpp > R::zero()) {
                return Err(Error::Manifest(format!(
                    "frame {} must have a positive microns_per_pixel",
                    f.id
                )));
            }
        }

        let mut annotations: Vec<Vec<Option<Annotation<R>>>> =
            vec![vec![None; annotators.len()]; frames.len()];

        for record in records {
            let frame_id = record.frame_id().to_string();
            let annotator_id = record.annotator_id().to_string();
            let &fi = frame_index.get(&frame_id).ok_or_else(|| {
                Error::Manifest(format!("annotation references undeclared frame {frame_id:?}"))
            })?;
            let &ai = annot_index.get(&annotator_id).ok_or_else(|| {
                Error::Manifest(format!(
                    "annotation references undeclared annotator {annotator_id:?}"
                ))
            })?;
            let frame = &frames[fi];
            if !record.matches_task(frame.task) {
                return Err(Error::Manifest(format!(
                    "frame {} has task {} but annotation from {} is a {}",
                    frame_id,
                    frame.task,
                    annotator_id,
                    record.kind()
                )));
            }
            match &record {
                Annotation::Grid(g) => {
                    if g.width != frame.width_px || g.height != frame.height_px {
                        return Err(Error::DimensionMismatch {
                            frame_id,
                            annotator_id,
                            expected: format!("{}x{}", frame.height_px, frame.width_px),
                            found: format!("{}x{}", g.height, g.width),
                        });
                    }
                    if g.cells.len() != (g.width as usize) * (g.height as usize) {
                        return Err(Error::DimensionMismatch {
                            frame_id,
                            annotator_id,
                            expected: format!("{} cells", (g.width as usize) * (g.height as usize)),
                            found: format!("{} cells", g.cells.len()),
                        });
                    }
                    for &c in &g.cells {
                        if !classes.contains(c) {
                            return Err(Error::UnknownClass {
                                class_id: c as u32,
                                context: format!("label grid for frame {frame_id}"),
                            });
                        }
                    }
                }
                Annotation::Points(p) => {
                    for pt in &p.points {
                        if !pt.x.is_finite() || !pt.y.is_finite() {
                            return Err(Error::Manifest(format!(
                                "non-finite point coordinate in frame {frame_id}, annotator {annotator_id}"
                            )));
                        }
                        if !classes.contains(pt.class_id) {
                            return Err(Error::UnknownClass {
                                class_id: pt.class_id as u32,
                                context: format!("cell point set for frame {frame_id}"),
                            });
                        }
                    }
                }
                Annotation::Counts(c) => {
                    if c.counts.len() != classes.n_nonzero() {
                        return Err(Error::DimensionMismatch {
                            frame_id,
                            annotator_id,
                            expected: format!("{} classes", classes.n_nonzero()),
                            found: format!("{} classes", c.counts.len()),
                        });
                    }
                }
            }
            if annotations[fi][ai].is_some() {
                return Err(Error::Manifest(format!(
                    "duplicate annotation for frame {frame_id}, annotator {annotator_id}"
                )));
            }
            annotations[fi][ai] = Some(record);
        }

        // The model is assumed to cover every frame in the manifest.
        for (fi, frame) in frames.iter().enumerate() {
            if annotations[fi][model_idx].is_none() {
                return Err(Error::MissingModelAnnotation {
                    frame_id: frame.id.clone(),
                });
            }
        }

        // Drop frames with < 2 pathologist annotations, with a warning.
        let mut warnings = Vec::new();
        let mut keep = Vec::with_capacity(frames.len());
        for (fi, frame) in frames.iter().enumerate() {
            let n_pathologists = annotations[fi]
                .iter()
                .enumerate()
                .filter(|(ai, a)| *ai != model_idx && a.is_some())
                .count();
            if n_pathologists >= 2 {
                keep.push(fi);
            } else {
                warnings.push(format!(
                    "frame {} dropped: only {} pathologist annotation(s), need at least 2",
                    frame.id, n_pathologists
                ));
            }
        }
        let frames: Vec<Frame<R>> = keep.iter().map(|&fi| frames[fi].clone()).collect();
        let annotations: Vec<Vec<Option<Annotation<R>>>> = keep
            .iter()
            .map(|&fi| std::mem::take(&mut annotations[fi]))
            .collect();

        Ok(Loaded {
            dataset: Dataset {
                classes,
                annotators,
                slides,
                frames,
                annotations,
                model_idx,
            },
            warnings,
        })
    }

    pub fn classes(&self) -> &ClassRegistry {
        &self.classes
    }

    pub fn annotators(&self) -> &[Annotator] {
        &self.annotators
    }

    pub fn slides(&self) -> &[String] {
        &self.slides
    }

    pub fn frames(&self) -> &[Frame<R>] {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Index of the distinguished model annotator.
    pub fn model_index(&self) -> usize {
        self.model_idx
    }

    /// Indices of panel pathologists, in declaration order.
    pub fn pathologist_indices(&self) -> Vec<usize> {
        (0..self.annotators.len())
            .filter(|&i| i != self.model_idx)
            .collect()
    }

    pub fn annotator_index(&self, id: &str) -> Option<usize> {
        self.annotators.iter().position(|a| a.id == id)
    }

    pub fn frame_index(&self, id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn slide_index(&self, id: &str) -> Option<usize> {
        self.slides.iter().position(|s| s == id)
    }

    pub fn annotation(&self, frame_idx: usize, annotator_idx: usize) -> Option<&Annotation<R>> {
        self.annotations[frame_idx][annotator_idx].as_ref()
    }

    pub fn has_annotation(&self, frame_idx: usize, annotator_idx: usize) -> bool {
        self.annotations[frame_idx][annotator_idx].is_some()
    }

    /// Frame indices annotated by both annotators, in manifest order.
    pub fn common_frame_indices(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|&fi| self.has_annotation(fi, a) && self.has_annotation(fi, b))
            .collect()
    }

    /// Frames annotated by both named annotators, in manifest order.
    pub fn common_frames(&self, a: &str, b: &str) -> Result<Vec<String>> {
        let ai = self
            .annotator_index(a)
            .ok_or_else(|| Error::UnknownAnnotator(a.to_string()))?;
        let bi = self
            .annotator_index(b)
            .ok_or_else(|| Error::UnknownAnnotator(b.to_string()))?;
        Ok(self
            .common_frame_indices(ai, bi)
            .into_iter()
            .map(|fi| self.frames[fi].id.clone())
            .collect())
    }

    /// Frame indices grouped by slide, both in manifest order. Slides with
    /// no frames are omitted.
    pub fn slide_frame_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.slides.len()];
        for (fi, f) in self.frames.iter().enumerate() {
            let si = self.slide_index(&f.slide_id).expect("slide declared");
            groups[si].push(fi);
        }
        groups.retain(|g| !g.is_empty());
        groups
    }
}
