#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("backward already ran on this tape; rebuild the forward pass first")]
    BackwardConsumed,

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("auc needs both classes present")]
    SingleClass,

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    #[error(transparent)]
    Core(#[from] grl_core::CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
