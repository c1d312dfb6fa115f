//! Pairwise confusion matrices for pixel (tissue) and object (cell)
//! classification, and their aggregation across frames in common.
//!
//! Matrices are (C+1)x(C+1) with index 0 = background. Rows belong to the
//! reference annotator of the pair, columns to the candidate. Diagonal
//! entries are concordance, off-diagonal entries discordance. For cells,
//! background encodes unmatched singletons.

use std::io::Write;

use crate::align::MatchedPairs;
use crate::dataset::{CellPointSet, ClassId, ClassRegistry, LabelGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nonnegative integer confusion counts for one annotator pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
    pub row_annotator: String,
    pub col_annotator: String,
    /// Number of frames aggregated into this matrix.
    pub frame_count: u64,
}

impl ConfusionMatrix {
    /// A zero matrix over `n_classes` total classes (background included).
    pub fn zero(n_classes: usize, row_annotator: String, col_annotator: String) -> Self {
        Self {
            n_classes,
            counts: vec![0; n_classes * n_classes],
            row_annotator,
            col_annotator,
            frame_count: 0,
        }
    }

    /// Total class count including background.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, row: ClassId, col: ClassId) -> u64 {
        self.counts[row as usize * self.n_classes + col as usize]
    }

    pub fn add(&mut self, row: ClassId, col: ClassId, amount: u64) {
        self.counts[row as usize * self.n_classes + col as usize] += amount;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, row: ClassId) -> u64 {
        let start = row as usize * self.n_classes;
        self.counts[start..start + self.n_classes].iter().sum()
    }

    pub fn col_sum(&self, col: ClassId) -> u64 {
        (0..self.n_classes)
            .map(|r| self.counts[r * self.n_classes + col as usize])
            .sum()
    }

    /// Swaps the roles of reference and candidate.
    pub fn transpose(&self) -> Self {
        let mut t = Self::zero(
            self.n_classes,
            self.col_annotator.clone(),
            self.row_annotator.clone(),
        );
        t.frame_count = self.frame_count;
        for r in 0..self.n_classes {
            for c in 0..self.n_classes {
                t.counts[c * self.n_classes + r] = self.counts[r * self.n_classes + c];
            }
        }
        t
    }

    /// Adds `multiplicity` copies of `other` into `self`, without identity
    /// checks; the caller guarantees the pair matches.
    pub(crate) fn accumulate(&mut self, other: &ConfusionMatrix, multiplicity: u64) {
        debug_assert_eq!(self.n_classes, other.n_classes);
        for (dst, src) in self.counts.iter_mut().zip(&other.counts) {
            *dst += src * multiplicity;
        }
        self.frame_count += other.frame_count * multiplicity;
    }

    /// Writes the matrix as CSV with class names on both axes.
    pub fn write_csv<W: Write>(&self, registry: &ClassRegistry, mut w: W) -> std::io::Result<()> {
        let names: Vec<&str> = (0..self.n_classes)
            .map(|c| registry.name(c as ClassId).unwrap_or("?"))
            .collect();
        write!(w, "reference\\candidate")?;
        for name in &names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for r in 0..self.n_classes {
            write!(w, "{}", names[r])?;
            for c in 0..self.n_classes {
                write!(w, ",{}", self.counts[r * self.n_classes + c])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Pixel-wise confusion between two label grids of the same frame.
///
/// Entry (i, j) counts pixels labeled `i` by the reference and `j` by the
/// candidate; the total equals the frame area.
pub fn pixel_confusion(
    reference: &LabelGrid,
    candidate: &LabelGrid,
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if reference.frame_id != candidate.frame_id {
        return Err(Error::FrameMismatch {
            a: reference.frame_id.clone(),
            b: candidate.frame_id.clone(),
        });
    }
    if reference.width != candidate.width || reference.height != candidate.height {
        return Err(Error::DimensionMismatch {
            frame_id: reference.frame_id.clone(),
            annotator_id: candidate.annotator_id.clone(),
            expected: format!("{}x{}", reference.height, reference.width),
            found: format!("{}x{}", candidate.height, candidate.width),
        });
    }
    let mut m = ConfusionMatrix::zero(
        n_classes,
        reference.annotator_id.clone(),
        candidate.annotator_id.clone(),
    );
    for (&r, &c) in reference.cells.iter().zip(&candidate.cells) {
        if r as usize >= n_classes || c as usize >= n_classes {
            return Err(Error::UnknownClass {
                class_id: r.max(c) as u32,
                context: format!("label grid for frame {}", reference.frame_id),
            });
        }
        m.add(r, c, 1);
    }
    m.frame_count = 1;
    Ok(m)
}

/// Object-level confusion from a matching of two point sets.
///
/// Matched pairs count at (class_a, class_b); singletons count against
/// background for the side that lacks them. With valid (nonzero-class)
/// point sets the (0, 0) cell stays zero.
pub fn object_confusion<R: Real>(
    matching: &MatchedPairs<R>,
    a: &CellPointSet<R>,
    b: &CellPointSet<R>,
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::zero(n_classes, a.annotator_id.clone(), b.annotator_id.clone());
    let class_of = |points: &CellPointSet<R>, idx: usize| -> Result<ClassId> {
        let p = points
            .points
            .get(idx)
            .ok_or(Error::MatchIndexOutOfRange)?;
        if p.class_id as usize >= n_classes {
            return Err(Error::UnknownClass {
                class_id: p.class_id as u32,
                context: format!("cell point set for frame {}", points.frame_id),
            });
        }
        Ok(p.class_id)
    };
    for &(i, j, _) in &matching.pairs {
        m.add(class_of(a, i)?, class_of(b, j)?, 1);
    }
    for &i in &matching.singletons_a {
        m.add(class_of(a, i)?, 0, 1);
    }
    for &j in &matching.singletons_b {
        m.add(0, class_of(b, j)?, 1);
    }
    m.frame_count = 1;
    Ok(m)
}

/// Element-wise sum of matrices sharing one annotator pair.
pub fn aggregate_confusions(matrices: &[ConfusionMatrix]) -> Result<ConfusionMatrix> {
    let first = matrices.first().ok_or(Error::MixedConfusions)?;
    let mut sum = ConfusionMatrix::zero(
        first.n_classes,
        first.row_annotator.clone(),
        first.col_annotator.clone(),
    );
    for m in matrices {
        if m.n_classes != sum.n_classes
            || m.row_annotator != sum.row_annotator
            || m.col_annotator != sum.col_annotator
        {
            return Err(Error::MixedConfusions);
        }
        sum.accumulate(m, 1);
    }
    Ok(sum)
}
