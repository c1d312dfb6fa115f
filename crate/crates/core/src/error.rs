//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// Semantic problems in a manifest or in-memory dataset parts.
    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("dimension mismatch for frame {frame_id}, annotator {annotator_id}: expected {expected}, found {found}")]
    DimensionMismatch {
        frame_id: String,
        annotator_id: String,
        expected: String,
        found: String,
    },

    #[error("unknown class_id {class_id} in {context}")]
    UnknownClass { class_id: u32, context: String },

    #[error("model annotation missing for frame {frame_id}")]
    MissingModelAnnotation { frame_id: String },

    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),

    #[error("unregistered class {0}")]
    UnregisteredClass(u32),

    #[error("frame mismatch: {a} vs {b}")]
    FrameMismatch { a: String, b: String },

    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),

    #[error("matched pairs refer to indices outside the given point sets")]
    MatchIndexOutOfRange,

    #[error("cannot aggregate confusion matrices with mixed annotator pairs or dimensions")]
    MixedConfusions,

    #[error("paired counts need at least 2 rows, got {0}")]
    TooFewRows(usize),

    #[error("nested evaluation needs at least 2 pathologists, got {0}")]
    TooFewPathologists(usize),

    #[error("metric {metric} is not applicable to task {task}")]
    TaskMetricMismatch { task: String, metric: String },

    #[error("frames given to pairwise_score are not common to both annotators: {0}")]
    FramesNotCommon(String),

    #[error("all bootstrap replicates were undefined")]
    AllReplicatesUndefined,

    #[error("margin must be positive and finite, got {0}")]
    InvalidMargin(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no reportable classes")]
    NoReportableClasses,

    #[error("dataset failed validation with {count} violation(s); run `validate` for details")]
    DatasetInvalid { count: usize },

    #[error("all requested statistics were undefined")]
    AllStatisticsUndefined,
}
