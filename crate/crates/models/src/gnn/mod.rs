//! The three supervised architectures and their training loops.

mod checkpoint;
mod layers;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use layers::{attention_coefficients, GnnModel, GraphContext, LayerParams};
pub use train::{train_link_predictor, train_node_classifier, LinkDecoder, TrainReport};

/// Supported layer families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Gcn,
    SageMean,
    Gat,
}

impl Architecture {
    pub fn parse(s: &str) -> Option<Architecture> {
        match s {
            "gcn" => Some(Architecture::Gcn),
            "sage" | "sage_mean" | "graphsage" => Some(Architecture::SageMean),
            "gat" => Some(Architecture::Gat),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::SageMean => "sage",
            Architecture::Gat => "gat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Hyperparameters for one GNN training run. Defaults carry the values the
/// experiment grid uses unless a config file overrides them.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnConfig {
    pub architecture: Architecture,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub gat_heads_hidden: usize,
    pub gat_heads_output: usize,
    /// Keep the attention sum over the node's own transformed features
    /// instead of its neighbors'. Off by default; exists for comparison.
    pub gat_aggregate_self: bool,
    /// Include each node in its own attention support.
    pub gat_self_loops: bool,
    pub leaky_slope: f64,
    pub activation: Activation,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub patience: usize,
    pub grad_clip: f64,
    pub use_bias: bool,
    pub seed: u64,
}

impl GnnConfig {
    pub fn defaults(architecture: Architecture) -> Self {
        Self {
            architecture,
            hidden_dim: 64,
            num_layers: 2,
            gat_heads_hidden: 8,
            gat_heads_output: 1,
            gat_aggregate_self: false,
            gat_self_loops: true,
            leaky_slope: 0.2,
            activation: Activation::Relu,
            dropout: 0.5,
            learning_rate: 1e-2,
            epochs: 300,
            weight_decay: 5e-4,
            patience: 30,
            grad_clip: 5.0,
            use_bias: true,
            seed: 0,
        }
    }

    /// Per-layer widths from input features to the output dimension.
    pub fn layer_dims(&self, input_dim: usize, output_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.num_layers + 1);
        dims.push(input_dim);
        for _ in 1..self.num_layers {
            dims.push(self.hidden_dim);
        }
        dims.push(output_dim);
        dims
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.num_layers == 0 {
            return Err(crate::ModelError::InvalidConfig("num_layers must be positive".into()));
        }
        if self.hidden_dim == 0 {
            return Err(crate::ModelError::InvalidConfig("hidden_dim must be positive".into()));
        }
        if self.architecture == Architecture::Gat
            && (self.gat_heads_hidden == 0 || self.gat_heads_output == 0)
        {
            return Err(crate::ModelError::InvalidConfig("gat heads must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(crate::ModelError::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}
