//! Core data model for the GRL robustness benchmark: compressed sparse
//! graphs, dataset loading, the two degradation preprocessors and the
//! degree-distribution statistics reported for each graph configuration.

pub mod data;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod preprocess;
pub mod seed;
pub mod stats;
pub mod synthetic;

mod error;

pub use data::{load_dataset, save_dataset, Dataset, LabelVector};
pub use error::CoreError;
pub use graph::{build_graph, degree_vector, DegreeVector, Graph, NormalizedAdjacency};
pub use matrix::DenseMatrix;

/// Node features: one row per node, dense `f64` storage.
pub type FeatureMatrix = DenseMatrix;

pub type Result<T> = std::result::Result<T, CoreError>;
