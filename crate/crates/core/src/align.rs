//! Location alignment of two cell point sets within a frame.
//!
//! Pairing is iterative and greedy: among all remaining cross pairs, the
//! one with the smallest Euclidean distance is emitted and both points are
//! removed, until no pair within the distance threshold is left. Matching
//! looks at locations only; class labels are compared downstream.
//!
//! Distances are compared on their squares so the threshold test and the
//! ordering are exact. Equal distances break ties by smaller `index_a`,
//! then smaller `index_b`, which makes the result deterministic and
//! side-symmetric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::CellPointSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unit of the matching distance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdUnit {
    Px,
    Micron,
}

impl std::str::FromStr for ThresholdUnit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "px" => Ok(ThresholdUnit::Px),
            "micron" => Ok(ThresholdUnit::Micron),
            other => Err(Error::InvalidConfig(format!(
                "unknown threshold unit {other:?} (expected px or micron)"
            ))),
        }
    }
}

/// Result of aligning two point sets.
///
/// Each point index appears exactly once, either in a pair or as a
/// singleton of its side. Pair distances are non-decreasing in emission
/// order and never exceed the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPairs<R> {
    /// (index into a, index into b, Euclidean distance in px)
    pub pairs: Vec<(usize, usize, R)>,
    pub singletons_a: Vec<usize>,
    pub singletons_b: Vec<usize>,
}

fn check_same_frame<R>(a: &CellPointSet<R>, b: &CellPointSet<R>) -> Result<()> {
    if a.frame_id != b.frame_id {
        return Err(Error::FrameMismatch {
            a: a.frame_id.clone(),
            b: b.frame_id.clone(),
        });
    }
    Ok(())
}

fn squared_distance<R: Real>(a: &CellPointSet<R>, b: &CellPointSet<R>, i: usize, j: usize) -> R {
    let dx = a.points[i].x - b.points[j].x;
    let dy = a.points[i].y - b.points[j].y;
    dx * dx + dy * dy
}

/// All |a|·|b| cross-pair Euclidean distances, a-major order.
pub fn pairwise_distances<R: Real>(
    a: &CellPointSet<R>,
    b: &CellPointSet<R>,
) -> Result<Vec<(usize, usize, R)>> {
    check_same_frame(a, b)?;
    let mut out = Vec::with_capacity(a.points.len() * b.points.len());
    for i in 0..a.points.len() {
        for j in 0..b.points.len() {
            out.push((i, j, squared_distance(a, b, i, j).sqrt()));
        }
    }
    Ok(out)
}

/// Min-heap entry ordered by (squared distance, index_a, index_b).
struct Candidate<R> {
    d2: R,
    i: usize,
    j: usize,
}

impl<R: Real> PartialEq for Candidate<R> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<R: Real> Eq for Candidate<R> {}

impl<R: Real> PartialOrd for Candidate<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<R: Real> Ord for Candidate<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest on top.
        let by_dist = other
            .d2
            .partial_cmp(&self.d2)
            .expect("distances are finite");
        by_dist
            .then_with(|| other.i.cmp(&self.i))
            .then_with(|| other.j.cmp(&self.j))
    }
}

/// Greedy nearest-pair alignment of two point sets of the same frame.
///
/// `threshold` is interpreted in `unit`; micron thresholds are converted
/// with `microns_per_pixel`. Points left unmatched become singletons.
pub fn greedy_match<R: Real>(
    a: &CellPointSet<R>,
    b: &CellPointSet<R>,
    threshold: R,
    unit: ThresholdUnit,
    microns_per_pixel: R,
) -> Result<MatchedPairs<R>> {
    check_same_frame(a, b)?;
    if !(threshold.is_finite() && threshold > R::zero()) {
        return Err(Error::InvalidThreshold(threshold.to_f64().unwrap_or(f64::NAN)));
    }
    let threshold_px = match unit {
        ThresholdUnit::Px => threshold,
        ThresholdUnit::Micron => {
            if !(microns_per_pixel.is_finite() && microns_per_pixel > R::zero()) {
                return Err(Error::InvalidThreshold(
                    microns_per_pixel.to_f64().unwrap_or(f64::NAN),
                ));
            }
            threshold / microns_per_pixel
        }
    };
    let limit = threshold_px * threshold_px;

    for (points, side) in [(&a.points, &a.frame_id), (&b.points, &b.frame_id)] {
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Manifest(format!(
                "non-finite point coordinate in frame {side}"
            )));
        }
    }

    let mut heap = BinaryHeap::new();
    for i in 0..a.points.len() {
        for j in 0..b.points.len() {
            let d2 = squared_distance(a, b, i, j);
            if d2 <= limit {
                heap.push(Candidate { d2, i, j });
            }
        }
    }

    let mut used_a = vec![false; a.points.len()];
    let mut used_b = vec![false; b.points.len()];
    let mut pairs = Vec::new();
    // Lazy invalidation: consumed endpoints are skipped as they surface.
    while let Some(c) = heap.pop() {
        if used_a[c.i] || used_b[c.j] {
            continue;
        }
        used_a[c.i] = true;
        used_b[c.j] = true;
        pairs.push((c.i, c.j, c.d2.sqrt()));
    }

    let singletons_a = (0..a.points.len()).filter(|&i| !used_a[i]).collect();
    let singletons_b = (0..b.points.len()).filter(|&j| !used_b[j]).collect();
    Ok(MatchedPairs {
        pairs,
        singletons_a,
        singletons_b,
    })
}
