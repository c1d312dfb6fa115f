//! Synthetic panel generation with known ground truth and controllable
//! per-annotator noise, for demos, calibration experiments and tests.
//!
//! Generation is fully deterministic given the config seed: every
//! (frame, annotator) slot draws from its own ChaCha12 stream, so outputs
//! do not depend on generation order. Tissue truth is made of random
//! rectangular patches per class over background; cell truth is a uniform
//! point process with a per-class Poisson rate; count truth is per-class
//! Poisson. Annotators (the model included) observe independent
//! corruptions of the hidden truth, which is emitted to a `truth/` sidecar
//! directory that evaluation never reads.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::io::{
    self, Manifest, ManifestAnnotation, ManifestAnnotator, ManifestClass, ManifestFrame,
    ManifestSlide,
};
use crate::dataset::{
    Annotation, Annotator, CellPoint, CellPointSet, ClassId, ClassRegistry, CountVector, Dataset,
    Frame, FrameTask, LabelGrid, Loaded,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-annotator corruption knobs. Which fields apply depends on the task:
/// `flip_prob` for tissue and cell classes, `drop_rate`/`spurious_rate`/
/// `jitter_sigma_px` for cell locations, `count_noise_sd` for counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    pub flip_prob: f64,
    pub drop_rate: f64,
    pub spurious_rate: f64,
    pub jitter_sigma_px: f64,
    pub count_noise_sd: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            flip_prob: 0.0,
            drop_rate: 0.0,
            spurious_rate: 0.0,
            jitter_sigma_px: 0.0,
            count_noise_sd: 0.0,
        }
    }
}

/// Panel generation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelConfig {
    pub seed: u64,
    pub task: FrameTask,
    pub n_slides: usize,
    pub frames_per_slide: usize,
    /// When set, overrides `frames_per_slide` and spreads this many frames
    /// as evenly as possible (earlier slides take the remainder).
    pub total_frames: Option<usize>,
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub microns_per_pixel: f64,
    /// Substantive classes (background comes on top).
    pub n_classes: usize,
    pub n_pathologists: usize,
    /// Tissue truth: rectangles drawn per class.
    pub patches_per_class: usize,
    /// Cell tasks: expected truth cells (or counts) per class per frame.
    pub cells_per_class: f64,
    pub pathologist_error: ErrorModel,
    pub model_error: ErrorModel,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            task: FrameTask::Tissue,
            n_slides: 3,
            frames_per_slide: 2,
            total_frames: None,
            frame_width_px: 32,
            frame_height_px: 32,
            microns_per_pixel: 0.5,
            n_classes: 3,
            n_pathologists: 4,
            patches_per_class: 3,
            cells_per_class: 12.0,
            pathologist_error: ErrorModel::default(),
            model_error: ErrorModel::default(),
        }
    }
}

impl PanelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_slides == 0 {
            return bad("n_slides must be >= 1".into());
        }
        match self.total_frames {
            Some(0) => return bad("total_frames must be >= 1".into()),
            None if self.frames_per_slide == 0 => {
                return bad("frames_per_slide must be >= 1".into())
            }
            _ => {}
        }
        if self.frame_width_px == 0 || self.frame_height_px == 0 {
            return bad("frame dimensions must be positive".into());
        }
        if !(self.microns_per_pixel.is_finite() && self.microns_per_pixel > 0.0) {
            return bad("microns_per_pixel must be positive".into());
        }
        if self.n_classes == 0 {
            return bad("n_classes must be >= 1".into());
        }
        if self.n_pathologists < 2 {
            return bad("n_pathologists must be >= 2".into());
        }
        if !(self.cells_per_class.is_finite() && self.cells_per_class >= 0.0) {
            return bad("cells_per_class must be nonnegative".into());
        }
        for (who, e) in [("pathologist", &self.pathologist_error), ("model", &self.model_error)] {
            for (name, p) in [("flip_prob", e.flip_prob), ("drop_rate", e.drop_rate)] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("{who} {name} must lie in [0, 1]"));
                }
            }
            for (name, v) in [
                ("spurious_rate", e.spurious_rate),
                ("jitter_sigma_px", e.jitter_sigma_px),
                ("count_noise_sd", e.count_noise_sd),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("{who} {name} must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    fn frames_for_slide(&self, slide: usize) -> usize {
        match self.total_frames {
            Some(total) => {
                let base = total / self.n_slides;
                let extra = total % self.n_slides;
                base + usize::from(slide < extra)
            }
            None => self.frames_per_slide,
        }
    }
}

/// Loads a [`PanelConfig`] from JSON; absent fields take their defaults.
pub fn load_config(path: &Path) -> Result<PanelConfig> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// An in-memory generated panel plus its hidden truth.
pub struct BuiltPanel<R> {
    pub loaded: Loaded<R>,
    /// One truth annotation per frame, evaluation never reads these.
    pub truth: Vec<Annotation<R>>,
}

/// A panel written to disk.
pub struct GeneratedPanel<R> {
    pub manifest_path: PathBuf,
    pub loaded: Loaded<R>,
}

// One RNG stream per (frame, participant) slot; offset 0 is the truth.
fn slot_rng(seed: u64, frame_global: usize, slot: usize, n_slots: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((frame_global * n_slots + slot) as u64);
    rng
}

fn poisson_count<G: Rng>(rate: f64, rng: &mut G) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(rate).expect("validated rate");
    dist.sample(rng) as u64
}

/// Uniform class different from `current` out of `n_total` ids starting at
/// `first`.
fn flip_class<G: Rng>(current: ClassId, first: ClassId, n_total: usize, rng: &mut G) -> ClassId {
    if n_total <= 1 {
        return current;
    }
    let pick = rng.gen_range(0..n_total - 1) as ClassId + first;
    if pick >= current {
        pick + 1
    } else {
        pick
    }
}

struct FrameShape {
    id: String,
    width: u32,
    height: u32,
}

fn truth_grid<G: Rng>(cfg: &PanelConfig, shape: &FrameShape, rng: &mut G) -> Vec<ClassId> {
    let (w, h) = (shape.width as usize, shape.height as usize);
    let mut cells = vec![0 as ClassId; w * h];
    for class in 1..=cfg.n_classes {
        for _ in 0..cfg.patches_per_class {
            let x0 = rng.gen_range(0..w);
            let y0 = rng.gen_range(0..h);
            let pw = rng.gen_range(1..=(w / 2).max(1));
            let ph = rng.gen_range(1..=(h / 2).max(1));
            for y in y0..(y0 + ph).min(h) {
                for x in x0..(x0 + pw).min(w) {
                    cells[y * w + x] = class as ClassId;
                }
            }
        }
    }
    cells
}

fn truth_points<G: Rng>(cfg: &PanelConfig, shape: &FrameShape, rng: &mut G) -> Vec<(f64, f64, ClassId)> {
    let mut points = Vec::new();
    for class in 1..=cfg.n_classes {
        let n = poisson_count(cfg.cells_per_class, rng);
        for _ in 0..n {
            let x = rng.gen_range(0.0..shape.width as f64);
            let y = rng.gen_range(0.0..shape.height as f64);
            points.push((x, y, class as ClassId));
        }
    }
    points
}

fn truth_counts<G: Rng>(cfg: &PanelConfig, rng: &mut G) -> Vec<u64> {
    (0..cfg.n_classes)
        .map(|_| poisson_count(cfg.cells_per_class, rng))
        .collect()
}

fn corrupt_grid<G: Rng>(
    truth: &[ClassId],
    n_total_classes: usize,
    error: &ErrorModel,
    rng: &mut G,
) -> Vec<ClassId> {
    truth
        .iter()
        .map(|&c| {
            if error.flip_prob > 0.0 && rng.gen_bool(error.flip_prob) {
                flip_class(c, 0, n_total_classes, rng)
            } else {
                c
            }
        })
        .collect()
}

fn corrupt_points<G: Rng>(
    truth: &[(f64, f64, ClassId)],
    cfg: &PanelConfig,
    shape: &FrameShape,
    error: &ErrorModel,
    rng: &mut G,
) -> Vec<(f64, f64, ClassId)> {
    let jitter = Normal::new(0.0, error.jitter_sigma_px).expect("validated sigma");
    let max_x = shape.width as f64 - 1e-6;
    let max_y = shape.height as f64 - 1e-6;
    let mut out = Vec::with_capacity(truth.len());
    for &(x, y, class) in truth {
        if error.drop_rate > 0.0 && rng.gen_bool(error.drop_rate) {
            continue;
        }
        let (mut x, mut y) = (x, y);
        if error.jitter_sigma_px > 0.0 {
            x = (x + jitter.sample(rng)).clamp(0.0, max_x);
            y = (y + jitter.sample(rng)).clamp(0.0, max_y);
        }
        let class = if error.flip_prob > 0.0 && rng.gen_bool(error.flip_prob) {
            flip_class(class, 1, cfg.n_classes, rng)
        } else {
            class
        };
        out.push((x, y, class));
    }
    for _ in 0..poisson_count(error.spurious_rate, rng) {
        let x = rng.gen_range(0.0..max_x);
        let y = rng.gen_range(0.0..max_y);
        let class = rng.gen_range(1..=cfg.n_classes) as ClassId;
        out.push((x, y, class));
    }
    out
}

fn corrupt_counts<G: Rng>(truth: &[u64], error: &ErrorModel, rng: &mut G) -> Vec<u64> {
    let noise = Normal::new(0.0, error.count_noise_sd).expect("validated sd");
    truth
        .iter()
        .map(|&t| {
            if error.count_noise_sd > 0.0 {
                let delta = noise.sample(rng).round() as i64;
                (t as i64 + delta).max(0) as u64
            } else {
                t
            }
        })
        .collect()
}

fn points_annotation<R: Real>(
    frame_id: &str,
    annotator_id: &str,
    points: &[(f64, f64, ClassId)],
) -> Annotation<R> {
    Annotation::Points(CellPointSet {
        frame_id: frame_id.to_string(),
        annotator_id: annotator_id.to_string(),
        points: points
            .iter()
            .map(|&(x, y, class_id)| CellPoint {
                x: R::from_f64(x).unwrap(),
                y: R::from_f64(y).unwrap(),
                class_id,
            })
            .collect(),
    })
}

/// Generates a panel in memory. Deterministic given the seed.
pub fn build_panel<R: Real>(cfg: &PanelConfig) -> Result<BuiltPanel<R>> {
    cfg.validate()?;

    let mut class_entries = vec![(0u32, "background".to_string())];
    for c in 1..=cfg.n_classes {
        class_entries.push((c as u32, format!("class_{c}")));
    }
    let classes = ClassRegistry::from_entries(&class_entries)?;

    let mut annotator_ids = vec!["model".to_string()];
    for p in 1..=cfg.n_pathologists {
        annotator_ids.push(format!("p{p}"));
    }
    let annotators: Vec<Annotator> = annotator_ids
        .iter()
        .enumerate()
        .map(|(i, id)| Annotator {
            id: id.clone(),
            is_model: i == 0,
        })
        .collect();
    let n_slots = annotator_ids.len() + 1;

    let slides: Vec<String> = (1..=cfg.n_slides).map(|s| format!("s{s}")).collect();

    let mut frames = Vec::new();
    let mut shapes = Vec::new();
    for (si, slide_id) in slides.iter().enumerate() {
        for j in 1..=cfg.frames_for_slide(si) {
            let id = format!("{slide_id}_f{j}");
            shapes.push(FrameShape {
                id: id.clone(),
                width: cfg.frame_width_px,
                height: cfg.frame_height_px,
            });
            frames.push(Frame {
                id,
                slide_id: slide_id.clone(),
                width_px: cfg.frame_width_px,
                height_px: cfg.frame_height_px,
                microns_per_pixel: R::from_f64(cfg.microns_per_pixel).unwrap(),
                task: cfg.task,
            });
        }
    }

    let mut records = Vec::new();
    let mut truth = Vec::new();
    for (fg, shape) in shapes.iter().enumerate() {
        let mut truth_rng = slot_rng(cfg.seed, fg, 0, n_slots);
        match cfg.task {
            FrameTask::Tissue => {
                let truth_cells = truth_grid(cfg, shape, &mut truth_rng);
                truth.push(Annotation::Grid(LabelGrid {
                    frame_id: shape.id.clone(),
                    annotator_id: "truth".into(),
                    width: shape.width,
                    height: shape.height,
                    cells: truth_cells.clone(),
                }));
                for (ai, id) in annotator_ids.iter().enumerate() {
                    let error = if ai == 0 { &cfg.model_error } else { &cfg.pathologist_error };
                    let mut rng = slot_rng(cfg.seed, fg, ai + 1, n_slots);
                    records.push(Annotation::Grid(LabelGrid {
                        frame_id: shape.id.clone(),
                        annotator_id: id.clone(),
                        width: shape.width,
                        height: shape.height,
                        cells: corrupt_grid(&truth_cells, classes.n_total(), error, &mut rng),
                    }));
                }
            }
            FrameTask::CellClass => {
                let truth_pts = truth_points(cfg, shape, &mut truth_rng);
                truth.push(points_annotation(&shape.id, "truth", &truth_pts));
                for (ai, id) in annotator_ids.iter().enumerate() {
                    let error = if ai == 0 { &cfg.model_error } else { &cfg.pathologist_error };
                    let mut rng = slot_rng(cfg.seed, fg, ai + 1, n_slots);
                    let pts = corrupt_points(&truth_pts, cfg, shape, error, &mut rng);
                    records.push(points_annotation(&shape.id, id, &pts));
                }
            }
            FrameTask::CellCount => {
                let truth_vec = truth_counts(cfg, &mut truth_rng);
                truth.push(Annotation::Counts(CountVector::from_dense(
                    shape.id.clone(),
                    "truth".into(),
                    truth_vec.clone(),
                )));
                for (ai, id) in annotator_ids.iter().enumerate() {
                    let error = if ai == 0 { &cfg.model_error } else { &cfg.pathologist_error };
                    let mut rng = slot_rng(cfg.seed, fg, ai + 1, n_slots);
                    records.push(Annotation::Counts(CountVector::from_dense(
                        shape.id.clone(),
                        id.clone(),
                        corrupt_counts(&truth_vec, error, &mut rng),
                    )));
                }
            }
        }
    }

    let loaded = Dataset::assemble(classes, annotators, slides, frames, records)?;
    Ok(BuiltPanel { loaded, truth })
}

/// Generates a panel and writes it in the dataset module's formats:
/// `manifest.json`, `annotations/*.csv` and the `truth/` sidecar.
/// Re-running with the same config writes byte-identical files.
pub fn generate_panel<R: Real>(cfg: &PanelConfig, out_dir: &Path) -> Result<GeneratedPanel<R>> {
    let built = build_panel::<R>(cfg)?;
    let dataset = &built.loaded.dataset;

    let annotations_dir = out_dir.join("annotations");
    let truth_dir = out_dir.join("truth");
    for dir in [out_dir, &annotations_dir, &truth_dir] {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }

    let mut annotation_refs = Vec::new();
    for frame in dataset.frames() {
        let fi = dataset.frame_index(&frame.id).unwrap();
        for (ai, annotator) in dataset.annotators().iter().enumerate() {
            let Some(record) = dataset.annotation(fi, ai) else {
                continue;
            };
            let rel = format!("annotations/{}__{}.csv", frame.id, annotator.id);
            let path = out_dir.join(&rel);
            write_annotation(&path, record)?;
            annotation_refs.push(ManifestAnnotation {
                frame: frame.id.clone(),
                annotator: annotator.id.clone(),
                path: rel,
            });
        }
    }
    for record in &built.truth {
        let path = truth_dir.join(format!("{}.csv", record.frame_id()));
        write_annotation(&path, record)?;
    }

    let manifest = Manifest {
        classes: (0..dataset.classes().n_total())
            .map(|c| ManifestClass {
                id: c as u32,
                name: dataset.classes().name(c as ClassId).unwrap().to_string(),
            })
            .collect(),
        annotators: dataset
            .annotators()
            .iter()
            .map(|a| ManifestAnnotator {
                id: a.id.clone(),
                is_model: a.is_model,
            })
            .collect(),
        slides: dataset
            .slides()
            .iter()
            .map(|s| ManifestSlide { id: s.clone() })
            .collect(),
        frames: dataset
            .frames()
            .iter()
            .map(|f| ManifestFrame {
                id: f.id.clone(),
                slide: f.slide_id.clone(),
                width_px: f.width_px,
                height_px: f.height_px,
                mpp: f.microns_per_pixel.to_f64().unwrap(),
                task: f.task,
            })
            .collect(),
        annotations: annotation_refs,
    };
    let manifest_path = out_dir.join("manifest.json");
    io::write_manifest(&manifest_path, &manifest)?;

    Ok(GeneratedPanel {
        manifest_path,
        loaded: built.loaded,
    })
}

fn write_annotation<R: Real>(path: &Path, record: &Annotation<R>) -> Result<()> {
    match record {
        Annotation::Grid(g) => io::write_grid(path, g),
        Annotation::Points(p) => io::write_points(path, p),
        Annotation::Counts(c) => io::write_counts(path, c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::io::parse_manifest;

    #[test]
    fn noiseless_panel_annotators_match_truth() {
        for task in [FrameTask::Tissue, FrameTask::CellClass, FrameTask::CellCount] {
            let cfg = PanelConfig {
                task,
                n_slides: 2,
                frames_per_slide: 2,
                seed: 11,
                ..Default::default()
            };
            let built = build_panel::<f64>(&cfg).unwrap();
            let d = &built.loaded.dataset;
            for fi in 0..d.n_frames() {
                let model = d.annotation(fi, d.model_index()).unwrap();
                for ai in 0..d.annotators().len() {
                    let a = d.annotation(fi, ai).unwrap();
                    match (model, a) {
                        (Annotation::Grid(x), Annotation::Grid(y)) => assert_eq!(x.cells, y.cells),
                        (Annotation::Points(x), Annotation::Points(y)) => {
                            assert_eq!(x.points, y.points)
                        }
                        (Annotation::Counts(x), Annotation::Counts(y)) => {
                            assert_eq!(x.dense(), y.dense())
                        }
                        _ => panic!("mixed annotation kinds"),
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_panel_in_memory() {
        let cfg = PanelConfig {
            task: FrameTask::CellClass,
            pathologist_error: ErrorModel {
                flip_prob: 0.1,
                drop_rate: 0.05,
                spurious_rate: 1.0,
                jitter_sigma_px: 1.5,
                ..Default::default()
            },
            model_error: ErrorModel {
                flip_prob: 0.2,
                ..Default::default()
            },
            seed: 42,
            ..Default::default()
        };
        let a = build_panel::<f64>(&cfg).unwrap();
        let b = build_panel::<f64>(&cfg).unwrap();
        assert_eq!(a.loaded, b.loaded);
    }

    #[test]
    fn emitted_panel_reparses_to_the_same_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PanelConfig {
            task: FrameTask::CellClass,
            n_slides: 2,
            frames_per_slide: 2,
            pathologist_error: ErrorModel {
                flip_prob: 0.1,
                jitter_sigma_px: 0.8,
                spurious_rate: 0.5,
                ..Default::default()
            },
            seed: 7,
            ..Default::default()
        };
        let generated = generate_panel::<f64>(&cfg, dir.path()).unwrap();
        let reparsed: Loaded<f64> = parse_manifest(&generated.manifest_path).unwrap();
        assert_eq!(generated.loaded.dataset, reparsed.dataset);
        assert!(reparsed.warnings.is_empty());
    }

    #[test]
    fn same_seed_byte_identical_files() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = PanelConfig {
            task: FrameTask::Tissue,
            pathologist_error: ErrorModel {
                flip_prob: 0.15,
                ..Default::default()
            },
            model_error: ErrorModel {
                flip_prob: 0.15,
                ..Default::default()
            },
            seed: 5,
            ..Default::default()
        };
        generate_panel::<f64>(&cfg, dir_a.path()).unwrap();
        generate_panel::<f64>(&cfg, dir_b.path()).unwrap();
        for entry in walk(dir_a.path()) {
            let rel = entry.strip_prefix(dir_a.path()).unwrap();
            let other = dir_b.path().join(rel);
            assert_eq!(
                std::fs::read(&entry).unwrap(),
                std::fs::read(&other).unwrap(),
                "{} differs",
                rel.display()
            );
        }
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut files = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push(p);
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn total_frames_distributes_evenly() {
        let cfg = PanelConfig {
            n_slides: 3,
            total_frames: Some(7),
            ..Default::default()
        };
        assert_eq!(cfg.frames_for_slide(0), 3);
        assert_eq!(cfg.frames_for_slide(1), 2);
        assert_eq!(cfg.frames_for_slide(2), 2);
    }

    #[test]
    fn invalid_probabilities_are_rejected() {
        let cfg = PanelConfig {
            pathologist_error: ErrorModel {
                flip_prob: 1.5,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(build_panel::<f64>(&cfg).is_err());
    }
}
