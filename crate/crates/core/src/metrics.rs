//! Pairwise performance metrics: per-class precision, recall and F1 from
//! confusion matrices, and ICC(2,1) from paired count tables.
//!
//! Metrics can be undefined (zero denominators, degenerate tables);
//! undefined values propagate as `None` and carry zero weight downstream.

use serde::{Deserialize, Serialize};

use crate::confusion::ConfusionMatrix;
use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The metrics this crate knows how to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    F1,
    Icc,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Icc => "icc",
        }
    }

    /// Whether this metric reads confusion matrices (as opposed to counts).
    pub fn is_classification(&self) -> bool {
        !matches!(self, Metric::Icc)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "f1" => Ok(Metric::F1),
            "icc" => Ok(Metric::Icc),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

/// Per-class precision/recall/F1; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics<R> {
    pub class_id: ClassId,
    pub precision: Option<R>,
    pub recall: Option<R>,
    pub f1: Option<R>,
}

impl<R: Real> ClassMetrics<R> {
    pub fn get(&self, metric: Metric) -> Option<R> {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Icc => None,
        }
    }
}

/// Precision, recall and F1 of one class, with the matrix rows as ground
/// truth: recall = diag / row sum, precision = diag / column sum. Each is
/// undefined when its denominator is zero; F1 is the harmonic mean and is
/// undefined when either input is, or when both are zero.
pub fn per_class_metrics<R: Real>(
    m: &ConfusionMatrix,
    class_id: ClassId,
) -> Result<ClassMetrics<R>> {
    if class_id as usize >= m.n_classes() {
        return Err(Error::UnregisteredClass(class_id as u32));
    }
    let diag = R::from_count(m.get(class_id, class_id));
    let row = m.row_sum(class_id);
    let col = m.col_sum(class_id);
    let recall = (row > 0).then(|| diag / R::from_count(row));
    let precision = (col > 0).then(|| diag / R::from_count(col));
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > R::zero() => {
            Some((R::from_count(2) * p * r) / (p + r))
        }
        _ => None,
    };
    Ok(ClassMetrics {
        class_id,
        precision,
        recall,
        f1,
    })
}

/// Per-frame (reference, candidate) counts of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedCounts {
    pub class_id: ClassId,
    /// One row per frame: (reference count, candidate count).
    pub rows: Vec<(u64, u64)>,
}

/// ICC(2,1): two-way random-effects, absolute-agreement, single-rater
/// intraclass correlation for a table of n frames by 2 raters.
///
/// With MSR/MSC/MSE the row, column and residual mean squares and k = 2:
/// ICC = (MSR - MSE) / (MSR + (k-1)·MSE + (k/n)·(MSC - MSE)). The estimate
/// is clamped into [-1, 1] (where the raw ratio escapes that range, the
/// clamp takes the attained bound); a 0/0 form — all mean squares zero,
/// i.e. every entry identical — is undefined. A zero denominator with a
/// nonzero numerator resolves to the signed bound.
///
/// Errors when fewer than 2 rows are supplied.
pub fn icc_2_1<R: Real>(pc: &PairedCounts) -> Result<Option<R>> {
    icc_2_1_from_rows(&pc.rows)
}

/// [`icc_2_1`] on a bare row slice.
pub fn icc_2_1_from_rows<R: Real>(rows: &[(u64, u64)]) -> Result<Option<R>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let nf = R::from_count(n as u64);
    let two = R::from_count(2);

    let mut sum_a = R::zero();
    let mut sum_b = R::zero();
    for &(a, b) in rows {
        sum_a = sum_a + R::from_count(a);
        sum_b = sum_b + R::from_count(b);
    }
    let grand = (sum_a + sum_b) / (two * nf);
    let col_a = sum_a / nf;
    let col_b = sum_b / nf;

    let mut ss_rows = R::zero();
    let mut ss_err = R::zero();
    for &(a, b) in rows {
        let a = R::from_count(a);
        let b = R::from_count(b);
        let row_mean = (a + b) / two;
        let dr = row_mean - grand;
        ss_rows = ss_rows + dr * dr;
        let ea = a - row_mean - col_a + grand;
        let eb = b - row_mean - col_b + grand;
        ss_err = ss_err + ea * ea + eb * eb;
    }
    let ss_rows = ss_rows * two;
    let dca = col_a - grand;
    let dcb = col_b - grand;
    let ss_cols = (dca * dca + dcb * dcb) * nf;

    let df_rows = nf - R::one();
    let msr = ss_rows / df_rows;
    let msc = ss_cols; // df = k - 1 = 1
    let mse = ss_err / df_rows; // df = (n-1)(k-1) = n-1

    let numerator = msr - mse;
    let denominator = msr + mse + (two / nf) * (msc - mse);
    Ok(clamped_ratio(numerator, denominator))
}

/// Shared finishing rule so any ANOVA route lands on identical values.
pub fn clamped_ratio<R: Real>(numerator: R, denominator: R) -> Option<R> {
    if denominator == R::zero() {
        if numerator == R::zero() {
            return None;
        }
        return Some(if numerator > R::zero() { R::one() } else { -R::one() });
    }
    let ratio = numerator / denominator;
    Some(ratio.max(-R::one()).min(R::one()))
}
