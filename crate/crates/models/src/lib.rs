//! Embedding models for the benchmark: DeepWalk/node2vec walk corpora with
//! Skipgram training, GCN / GraphSage-mean / GAT built on a minimal reverse-
//! mode tape, and the logistic probes and metrics used to score embeddings.

pub mod autograd;
pub mod eval;
pub mod gnn;
pub mod gradcheck;
pub mod linalg;
pub mod skipgram;
pub mod walk;

mod error;

pub use error::ModelError;

/// Learned node representations: one row per node.
pub type EmbeddingMatrix = grl_core::DenseMatrix;

pub type Result<T> = std::result::Result<T, ModelError>;
