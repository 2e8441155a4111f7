use std::path::PathBuf;

/// Errors raised by graph construction, dataset IO and preprocessing.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("empty graph")]
    EmptyGraph,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node id {id} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("row count mismatch: {left_name} has {left}, {right_name} has {right}")]
    RowCountMismatch {
        left_name: String,
        left: usize,
        right_name: String,
        right: usize,
    },

    #[error("non-finite feature value at node {node}, column {col}")]
    NonFiniteFeature { node: usize, col: usize },

    #[error("label {label} out of range for {num_classes} classes (node {node})")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("sampling ratio too small for graph")]
    SamplingRatioTooSmall,

    #[error("invalid ratio {0}: must lie in {1}")]
    InvalidRatio(f64, &'static str),

    #[error("sampling left an empty graph")]
    EmptySampledGraph,

    #[error("class {class} has {count} members; need at least {min}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        min: usize,
    },

    #[error("cannot sample {requested} negative edges: only {available} non-edges available")]
    NegativesExhausted { requested: usize, available: usize },

    #[error("negative edge sampling gave up after {attempts} attempts")]
    NegativesRetriesExceeded { attempts: usize },

    #[error("graph too small: need {min} {what}, have {got}")]
    GraphTooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("empty group in aggregation")]
    EmptyGroup,

    #[error("metric csv {path}: {message}")]
    MetricsFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
