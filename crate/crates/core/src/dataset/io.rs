//! Manifest and annotation-file IO.
//!
//! A dataset is described by a JSON manifest that declares classes,
//! annotators, slides and frames, and references one annotation file per
//! (frame, annotator). Annotation paths are resolved relative to the
//! manifest's directory. File formats:
//!
//! - label grid: CSV of integer class ids, one row per pixel row
//! - cell point set: CSV with header `x,y,class_id`
//! - count vector: CSV with header `class_id,count`

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Annotation, Annotator, CellPoint, CellPointSet, ClassRegistry, CountVector, Dataset, Frame,
    FrameTask, LabelGrid, Loaded,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestClass {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestAnnotator {
    pub id: String,
    pub is_model: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSlide {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub id: String,
    pub slide: String,
    pub width_px: u32,
    pub height_px: u32,
    pub mpp: f64,
    pub task: FrameTask,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestAnnotation {
    pub frame: String,
    pub annotator: String,
    pub path: String,
}

/// On-disk manifest layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: Vec<ManifestClass>,
    pub annotators: Vec<ManifestAnnotator>,
    pub slides: Vec<ManifestSlide>,
    pub frames: Vec<ManifestFrame>,
    pub annotations: Vec<ManifestAnnotation>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads, validates and normalizes a dataset from a manifest file.
pub fn parse_manifest<R: Real>(path: &Path) -> Result<Loaded<R>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let manifest: Manifest =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    dataset_from_manifest(&manifest, base)
}

/// Assembles a dataset from an in-memory manifest, resolving annotation
/// paths against `base`.
pub fn dataset_from_manifest<R: Real>(manifest: &Manifest, base: &Path) -> Result<Loaded<R>> {
    let class_entries: Vec<(u32, String)> = manifest
        .classes
        .iter()
        .map(|c| (c.id, c.name.clone()))
        .collect();
    let classes = ClassRegistry::from_entries(&class_entries)?;

    let annotators: Vec<Annotator> = manifest
        .annotators
        .iter()
        .map(|a| Annotator {
            id: a.id.clone(),
            is_model: a.is_model,
        })
        .collect();

    let slides: Vec<String> = manifest.slides.iter().map(|s| s.id.clone()).collect();

    let frames: Vec<Frame<R>> = manifest
        .frames
        .iter()
        .map(|f| {
            let mpp = R::from_f64(f.mpp).ok_or_else(|| {
                Error::Manifest(format!("frame {}: mpp {} not representable", f.id, f.mpp))
            })?;
            Ok(Frame {
                id: f.id.clone(),
                slide_id: f.slide.clone(),
                width_px: f.width_px,
                height_px: f.height_px,
                microns_per_pixel: mpp,
                task: f.task,
            })
        })
        .collect::<Result<_>>()?;

    let frame_tasks: std::collections::HashMap<&str, FrameTask> = manifest
        .frames
        .iter()
        .map(|f| (f.id.as_str(), f.task))
        .collect();

    let mut records = Vec::with_capacity(manifest.annotations.len());
    for a in &manifest.annotations {
        let task = *frame_tasks.get(a.frame.as_str()).ok_or_else(|| {
            Error::Manifest(format!("annotation references undeclared frame {:?}", a.frame))
        })?;
        let file_path: PathBuf = base.join(&a.path);
        let record = match task {
            FrameTask::Tissue => Annotation::Grid(load_grid(
                &file_path,
                a.frame.clone(),
                a.annotator.clone(),
            )?),
            FrameTask::CellClass => Annotation::Points(load_points(
                &file_path,
                a.frame.clone(),
                a.annotator.clone(),
            )?),
            FrameTask::CellCount => Annotation::Counts(load_counts(
                &file_path,
                a.frame.clone(),
                a.annotator.clone(),
                &classes,
            )?),
        };
        records.push(record);
    }

    Dataset::assemble(classes, annotators, slides, frames, records)
}

/// Reads a label grid CSV (no header, one row per pixel row).
pub fn load_grid(path: &Path, frame_id: String, annotator_id: String) -> Result<LabelGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    let mut cells = Vec::new();
    let mut width: Option<u32> = None;
    let mut height = 0u32;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let row_width = record.len() as u32;
        match width {
            None => width = Some(row_width),
            Some(w) if w != row_width => {
                return Err(Error::Manifest(format!(
                    "ragged grid rows in {}: row {} has {} columns, expected {}",
                    path.display(),
                    height,
                    row_width,
                    w
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let value: u16 = field.trim().parse().map_err(|_| {
                Error::Manifest(format!(
                    "bad class id {:?} in {} row {}",
                    field,
                    path.display(),
                    height
                ))
            })?;
            cells.push(value);
        }
        height += 1;
    }
    Ok(LabelGrid {
        frame_id,
        annotator_id,
        width: width.unwrap_or(0),
        height,
        cells,
    })
}

#[derive(Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    class_id: u32,
}

/// Reads a cell point set CSV (`x,y,class_id`).
pub fn load_points<R: Real>(
    path: &Path,
    frame_id: String,
    annotator_id: String,
) -> Result<CellPointSet<R>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut points = Vec::new();
    for row in reader.deserialize::<PointRow>() {
        let row = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        if row.class_id > u16::MAX as u32 {
            return Err(Error::UnknownClass {
                class_id: row.class_id,
                context: format!("cell point set {}", path.display()),
            });
        }
        let x = R::from_f64(row.x)
            .ok_or_else(|| Error::Manifest(format!("bad x coordinate in {}", path.display())))?;
        let y = R::from_f64(row.y)
            .ok_or_else(|| Error::Manifest(format!("bad y coordinate in {}", path.display())))?;
        points.push(CellPoint {
            x,
            y,
            class_id: row.class_id as u16,
        });
    }
    Ok(CellPointSet {
        frame_id,
        annotator_id,
        points,
    })
}

#[derive(Deserialize)]
struct CountRow {
    class_id: u32,
    count: u64,
}

/// Reads a count vector CSV (`class_id,count`), normalizing absent classes
/// to zero.
pub fn load_counts(
    path: &Path,
    frame_id: String,
    annotator_id: String,
    registry: &ClassRegistry,
) -> Result<CountVector> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut pairs = Vec::new();
    for row in reader.deserialize::<CountRow>() {
        let row = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        pairs.push((row.class_id, row.count));
    }
    CountVector::from_pairs(frame_id, annotator_id, &pairs, registry)
}

/// Writes a label grid in the format [`load_grid`] reads.
pub fn write_grid(path: &Path, grid: &LabelGrid) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for row in 0..grid.height {
        let start = (row * grid.width) as usize;
        let end = start + grid.width as usize;
        let line: Vec<String> = grid.cells[start..end].iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes a cell point set in the format [`load_points`] reads.
pub fn write_points<R: Real>(path: &Path, points: &CellPointSet<R>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,y,class_id").map_err(|e| io_err(path, e))?;
    for p in &points.points {
        writeln!(w, "{},{},{}", p.x, p.y, p.class_id).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes a count vector in the format [`load_counts`] reads.
pub fn write_counts(path: &Path, counts: &CountVector) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "class_id,count").map_err(|e| io_err(path, e))?;
    for (i, c) in counts.dense().iter().enumerate() {
        writeln!(w, "{},{}", i + 1, c).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes a manifest as pretty-printed JSON.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, manifest).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
