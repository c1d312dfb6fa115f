//! Invariant checking over an assembled dataset.
//!
//! Validation never aborts: every violated invariant becomes one entry in
//! the report, keyed by frame and annotator where applicable.

use super::{Annotation, Dataset};
use crate::scalar::Real;

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub frame_id: Option<String>,
    pub annotator_id: Option<String>,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{},{},{}",
            self.frame_id.as_deref().unwrap_or("-"),
            self.annotator_id.as_deref().unwrap_or("-"),
            self.rule
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, frame: Option<&str>, annotator: Option<&str>, rule: impl Into<String>) {
        self.violations.push(Violation {
            frame_id: frame.map(str::to_string),
            annotator_id: annotator.map(str::to_string),
            rule: rule.into(),
        });
    }
}

/// Checks every dataset invariant and reports all violations found.
pub fn validate_dataset<R: Real>(d: &Dataset<R>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let model_idx = d.model_index();

    for (fi, frame) in d.frames().iter().enumerate() {
        if d.annotation(fi, model_idx).is_none() {
            report.push(Some(&frame.id), None, "model annotation missing");
        }
        let n_pathologists = d
            .pathologist_indices()
            .iter()
            .filter(|&&ai| d.has_annotation(fi, ai))
            .count();
        if n_pathologists < 2 {
            report.push(
                Some(&frame.id),
                None,
                "fewer than two pathologist annotations",
            );
        }

        for (ai, annotator) in d.annotators().iter().enumerate() {
            let Some(annotation) = d.annotation(fi, ai) else {
                continue;
            };
            match annotation {
                Annotation::Grid(g) => {
                    if g.width != frame.width_px || g.height != frame.height_px {
                        report.push(Some(&frame.id), Some(&annotator.id), "grid dimension mismatch");
                    }
                    if g.cells.iter().any(|&c| !d.classes().contains(c)) {
                        report.push(
                            Some(&frame.id),
                            Some(&annotator.id),
                            "unregistered class id in grid",
                        );
                    }
                }
                Annotation::Points(p) => {
                    for pt in &p.points {
                        if pt.class_id == 0 {
                            report.push(
                                Some(&frame.id),
                                Some(&annotator.id),
                                "background class in point set",
                            );
                        } else if !d.classes().contains(pt.class_id) {
                            report.push(
                                Some(&frame.id),
                                Some(&annotator.id),
                                "unregistered class id in point set",
                            );
                        }
                        let w = R::from_u32(frame.width_px).unwrap();
                        let h = R::from_u32(frame.height_px).unwrap();
                        if !(pt.x >= R::zero() && pt.x < w && pt.y >= R::zero() && pt.y < h) {
                            report.push(
                                Some(&frame.id),
                                Some(&annotator.id),
                                "point out of frame bounds",
                            );
                        }
                    }
                }
                Annotation::Counts(c) => {
                    if c.dense().len() != d.classes().n_nonzero() {
                        report.push(
                            Some(&frame.id),
                            Some(&annotator.id),
                            "count vector missing registered class",
                        );
                    }
                }
            }
        }
    }

    report
}
