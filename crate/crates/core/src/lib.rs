//! Consensus-free relative benchmarking of a candidate model's frame-level
//! predictions against a panel of human annotators.
//!
//! Instead of merging annotators into a single ground truth, every panel
//! member is held out in turn and compared against the model with respect
//! to the remaining panel, using pairwise metrics (per-class precision,
//! recall and F1 for classification; ICC(2,1) for counts) weighted by the
//! number of frames each comparison used. Hierarchical bootstrapping over
//! slides and frames yields confidence intervals, on which margin-based
//! non-inferiority, equivalence or superiority conclusions are drawn.
//!
//! The numeric kernels are generic over the scalar type (see
//! [`scalar::Real`]); the concrete aliases below pin the shipped pipeline
//! to f64.

pub mod align;
pub mod bootstrap;
pub mod confusion;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nested;
pub mod report;
pub mod run;
pub mod scalar;
pub mod simgen;

pub use error::{Error, Result};
pub use scalar::Real;

/// Scalar type used by the shipped pipeline.
pub type Scalar = f64;

/// [`dataset::Dataset`] at the default scalar.
pub type Dataset = dataset::Dataset<Scalar>;
/// [`dataset::Frame`] at the default scalar.
pub type Frame = dataset::Frame<Scalar>;
/// [`dataset::CellPointSet`] at the default scalar.
pub type CellPointSet = dataset::CellPointSet<Scalar>;
/// [`align::MatchedPairs`] at the default scalar.
pub type MatchedPairs = align::MatchedPairs<Scalar>;
/// [`metrics::ClassMetrics`] at the default scalar.
pub type ClassMetrics = metrics::ClassMetrics<Scalar>;
/// [`nested::NestedResult`] at the default scalar.
pub type NestedResult = nested::NestedResult<Scalar>;
/// [`bootstrap::BootstrapResult`] at the default scalar.
pub type BootstrapResult = bootstrap::BootstrapResult<Scalar>;
/// [`bootstrap::TestOutcome`] at the default scalar.
pub type TestOutcome = bootstrap::TestOutcome<Scalar>;
