//! Experiment orchestration: the grid of (preprocessor ratios x models),
//! seeding discipline, the graphs-times-trainings run protocol and report
//! emission.
//!
//! Every random decision derives from `(base_seed, textual cell key, index)`
//! through the fixed mixing function in `grl_core::seed`, so re-running any
//! cell in isolation reproduces exactly the records the full grid produced.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use grl_core::data::{load_dataset, Dataset};
use grl_core::metrics::{MetricRecord, MetricTable, SkippedCell, Task, FAILED_METRIC};
use grl_core::preprocess::{
    apply_features_sampler, apply_sampler, is_feasible_for_classification,
    is_feasible_for_link_prediction, remove_edges, sample_clients, split_edges, split_nodes,
    EdgeSplit, NodeSplit, SampledDataset,
};
use grl_core::seed;
use grl_models::eval::{probe_link_prediction, probe_node_classification, ProbeConfig};
use grl_models::gnn::{
    train_link_predictor, train_node_classifier, Architecture, GnnConfig,
};
use grl_models::skipgram::train_skipgram;
use grl_models::walk::{generate_walks, WalkConfig};

use config::ConfigFile;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] grl_core::CoreError),

    #[error(transparent)]
    Model(#[from] grl_models::ModelError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// The five benchmarked models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    DeepWalk,
    Node2Vec,
    Gcn,
    Sage,
    Gat,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::DeepWalk,
        ModelKind::Node2Vec,
        ModelKind::Gcn,
        ModelKind::Sage,
        ModelKind::Gat,
    ];

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "deepwalk" => Some(ModelKind::DeepWalk),
            "node2vec" => Some(ModelKind::Node2Vec),
            "gcn" => Some(ModelKind::Gcn),
            "sage" | "graphsage" | "sage_mean" => Some(ModelKind::Sage),
            "gat" => Some(ModelKind::Gat),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::DeepWalk => "deepwalk",
            ModelKind::Node2Vec => "node2vec",
            ModelKind::Gcn => "gcn",
            ModelKind::Sage => "sage",
            ModelKind::Gat => "gat",
        }
    }

    /// Walk models never see node features, so feature degradation cells
    /// exclude them.
    pub fn is_walk_model(&self) -> bool {
        matches!(self, ModelKind::DeepWalk | ModelKind::Node2Vec)
    }

    fn architecture(&self) -> Option<Architecture> {
        match self {
            ModelKind::Gcn => Some(Architecture::Gcn),
            ModelKind::Sage => Some(Architecture::SageMean),
            ModelKind::Gat => Some(Architecture::Gat),
            _ => None,
        }
    }
}

/// Ratio value sets the benchmark sweeps by default.
pub const R_SAMPLING_GRID: [f64; 5] = [0.5, 0.1, 0.01, 5e-3, 1e-3];
pub const R_NF_SAMPLING_GRID: [f64; 3] = [0.1, 0.5, 0.75];

/// A fully described experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dataset_dir: PathBuf,
    pub dataset_name: String,
    pub task: Task,
    pub models: Vec<ModelKind>,
    /// `None` entries are the baseline sentinel (no preprocessor).
    pub r_sampling: Vec<Option<f64>>,
    /// Empty means sampler-only experiments.
    pub r_nf_sampling: Vec<f64>,
    pub graphs_per_config: usize,
    pub trainings_per_graph: usize,
    pub base_seed: u64,
    /// Raw config retained for per-model hyperparameter sections.
    pub config: ConfigFile,
}

impl ExperimentSpec {
    /// Read the `[experiment]` section plus per-model overrides.
    pub fn from_config(config: ConfigFile) -> Result<ExperimentSpec> {
        let exp = config.section("experiment");
        let dataset_dir = PathBuf::from(exp.require("dataset")?);
        let dataset_name = dataset_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let task = Task::parse(exp.str_or("task", "node_classification"))
            .ok_or_else(|| BenchError::Config("unknown task".into()))?;

        let models = {
            let names = exp.list("models");
            if names.is_empty() {
                return Err(BenchError::Config("no models listed".into()));
            }
            names
                .iter()
                .map(|name| {
                    ModelKind::parse(name)
                        .ok_or_else(|| BenchError::Config(format!("unknown model '{name}'")))
                })
                .collect::<Result<Vec<_>>>()?
        };

        let r_sampling = {
            let raw = exp.list("r_sampling");
            if raw.is_empty() {
                let mut grid: Vec<Option<f64>> = vec![None];
                grid.extend(R_SAMPLING_GRID.iter().map(|&r| Some(r)));
                grid
            } else {
                raw.iter()
                    .map(|item| {
                        if item == "baseline" {
                            Ok(None)
                        } else {
                            item.parse::<f64>().map(Some).map_err(|_| {
                                BenchError::Config(format!("bad r_sampling entry '{item}'"))
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };

        let r_nf_sampling = exp
            .list("r_nf_sampling")
            .iter()
            .map(|item| {
                item.parse::<f64>()
                    .map_err(|_| BenchError::Config(format!("bad r_nf_sampling entry '{item}'")))
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(ExperimentSpec {
            dataset_dir,
            dataset_name,
            task,
            models,
            r_sampling,
            r_nf_sampling,
            graphs_per_config: exp.usize_or("graphs_per_config", 10)?,
            trainings_per_graph: exp.usize_or("trainings_per_graph", 10)?,
            base_seed: exp.u64_or("base_seed", 0)?,
            config,
        })
    }

    /// Expected record count of a complete cell.
    pub fn runs_per_cell(&self) -> usize {
        self.graphs_per_config * self.trainings_per_graph
    }
}

/// One grid cell: a preprocessor configuration times a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub model: ModelKind,
    /// `None` = baseline.
    pub r_sampling: Option<f64>,
    pub r_nf_sampling: f64,
}

impl Cell {
    pub fn r_sampling_value(&self) -> f64 {
        self.r_sampling.unwrap_or(1.0)
    }

    fn record_key(&self, spec: &ExperimentSpec) -> String {
        format!(
            "{}|{}|{}|{}|{}",
            spec.dataset_name,
            spec.task,
            self.model.as_str(),
            self.r_sampling_value(),
            self.r_nf_sampling
        )
    }

    /// Degraded graphs are shared by every model of a configuration, so the
    /// graph key omits the model.
    fn graph_key(&self, spec: &ExperimentSpec) -> String {
        format!(
            "{}|{}|graphs|{}|{}",
            spec.dataset_name,
            spec.task,
            self.r_sampling_value(),
            self.r_nf_sampling
        )
    }
}

/// Enumerate the cells of the grid. Baseline carries no feature degradation;
/// sampled configurations cross with the feature grid when one is given;
/// walk models are excluded from feature-degradation cells.
pub fn grid_cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &model in &spec.models {
        for &r_s in &spec.r_sampling {
            let nf_values: Vec<f64> = match r_s {
                None => vec![0.0],
                Some(_) if spec.r_nf_sampling.is_empty() => vec![0.0],
                Some(_) => spec.r_nf_sampling.clone(),
            };
            for &r_nf in &nf_values {
                if r_nf > 0.0 && model.is_walk_model() {
                    continue;
                }
                cells.push(Cell {
                    model,
                    r_sampling: r_s,
                    r_nf_sampling: r_nf,
                });
            }
        }
    }
    cells
}

/// Resolve the effective GNN hyperparameters for a model: architecture
/// defaults overridden by the spec's per-model section.
pub fn gnn_config(spec: &ExperimentSpec, model: ModelKind, train_seed: u64) -> Result<GnnConfig> {
    let arch = model.architecture().expect("gnn models only");
    let section = spec.config.section(model.as_str());
    let defaults = GnnConfig::defaults(arch);
    Ok(GnnConfig {
        architecture: arch,
        hidden_dim: section.usize_or("hidden_dim", defaults.hidden_dim)?,
        num_layers: section.usize_or("num_layers", defaults.num_layers)?,
        gat_heads_hidden: section.usize_or("gat_heads_hidden", defaults.gat_heads_hidden)?,
        gat_heads_output: section.usize_or("gat_heads_output", defaults.gat_heads_output)?,
        gat_aggregate_self: section.bool_or("gat_aggregate_self", defaults.gat_aggregate_self)?,
        gat_self_loops: section.bool_or("gat_self_loops", defaults.gat_self_loops)?,
        leaky_slope: section.f64_or("leaky_slope", defaults.leaky_slope)?,
        activation: defaults.activation,
        dropout: section.f64_or("dropout", defaults.dropout)?,
        learning_rate: section.f64_or("learning_rate", defaults.learning_rate)?,
        epochs: section.usize_or("epochs", defaults.epochs)?,
        weight_decay: section.f64_or("weight_decay", defaults.weight_decay)?,
        patience: section.usize_or("patience", defaults.patience)?,
        grad_clip: section.f64_or("grad_clip", defaults.grad_clip)?,
        use_bias: section.bool_or("use_bias", defaults.use_bias)?,
        seed: train_seed,
    })
}

/// Resolve walk-model hyperparameters; node2vec's `(p, q)` switch by task
/// unless the spec overrides them.
pub fn walk_config(spec: &ExperimentSpec, model: ModelKind, train_seed: u64) -> Result<WalkConfig> {
    // node2vec switches (p, q) by task; DeepWalk stays unbiased.
    let (default_p, default_q) = match (model, spec.task) {
        (ModelKind::Node2Vec, Task::NodeClassification) => (1.0, 0.5),
        (ModelKind::Node2Vec, Task::LinkPrediction) => (1.0, 2.0),
        _ => (1.0, 1.0),
    };
    let section = spec.config.section(model.as_str());
    let defaults = WalkConfig::default();
    Ok(WalkConfig {
        walks_per_node: section.usize_or("walks_per_node", defaults.walks_per_node)?,
        walk_length: section.usize_or("walk_length", defaults.walk_length)?,
        return_param: section.f64_or("return_param", default_p)?,
        inout_param: section.f64_or("inout_param", default_q)?,
        embedding_dim: section.usize_or("embedding_dim", defaults.embedding_dim)?,
        window: section.usize_or("window", defaults.window)?,
        negatives_per_positive: section
            .usize_or("negatives_per_positive", defaults.negatives_per_positive)?,
        epochs: section.usize_or("epochs", defaults.epochs)?,
        learning_rate: section.f64_or("learning_rate", defaults.learning_rate)?,
        seed: train_seed,
    })
}

fn probe_config(spec: &ExperimentSpec, train_seed: u64) -> Result<ProbeConfig> {
    let section = spec.config.section("probe");
    let defaults = ProbeConfig::default();
    Ok(ProbeConfig {
        l2_strength: section.f64_or("l2_strength", defaults.l2_strength)?,
        epochs: section.usize_or("epochs", defaults.epochs)?,
        learning_rate: section.f64_or("learning_rate", defaults.learning_rate)?,
        seed: seed::mix_str(train_seed, "probe"),
    })
}

enum TaskSplit {
    Nodes(NodeSplit),
    Edges(EdgeSplit),
}

/// Train one model once and return the task metric.
fn run_single(
    spec: &ExperimentSpec,
    model: ModelKind,
    dataset: &Dataset,
    split: &TaskSplit,
    train_seed: u64,
) -> Result<f64> {
    match (model.is_walk_model(), split) {
        (false, TaskSplit::Nodes(node_split)) => {
            let cfg = gnn_config(spec, model, train_seed)?;
            let (_, accuracy, _) = train_node_classifier(dataset, node_split, &cfg)?;
            Ok(accuracy)
        }
        (false, TaskSplit::Edges(edge_split)) => {
            let cfg = gnn_config(spec, model, train_seed)?;
            let (_, _, auc, _) = train_link_predictor(dataset, edge_split, &cfg)?;
            Ok(auc)
        }
        (true, TaskSplit::Nodes(node_split)) => {
            let cfg = walk_config(spec, model, train_seed)?;
            let corpus = generate_walks(&dataset.graph, &cfg, seed::mix_str(train_seed, "walks"));
            let embedding = train_skipgram(&corpus, &cfg, seed::mix_str(train_seed, "embed"))?;
            let probe = probe_config(spec, train_seed)?;
            Ok(probe_node_classification(
                &embedding,
                &dataset.labels,
                node_split,
                &probe,
            )?)
        }
        (true, TaskSplit::Edges(edge_split)) => {
            let cfg = walk_config(spec, model, train_seed)?;
            // Walks must not see held-out test edges.
            let train_graph = remove_edges(&dataset.graph, &edge_split.test_pos)?;
            let corpus = generate_walks(&train_graph, &cfg, seed::mix_str(train_seed, "walks"));
            let embedding = train_skipgram(&corpus, &cfg, seed::mix_str(train_seed, "embed"))?;
            let probe = probe_config(spec, train_seed)?;
            Ok(probe_link_prediction(&embedding, edge_split, &probe)?)
        }
    }
}

struct GraphJob {
    cell: Cell,
    graph_index: usize,
    graph_seed: u64,
}

enum JobOutcome {
    Records(Vec<MetricRecord>),
    Skipped(SkippedCell),
}

/// Degrade (or pass through) the dataset for one generated graph.
fn degrade(
    base: &Dataset,
    cell: &Cell,
    graph_seed: u64,
) -> grl_core::Result<Option<SampledDataset>> {
    let Some(r) = cell.r_sampling else {
        return Ok(None);
    };
    let mask = sample_clients(&base.graph, r, seed::mix_str(graph_seed, "clients"))?;
    let sampled = apply_sampler(base, &mask)?;
    if cell.r_nf_sampling > 0.0 {
        Ok(Some(apply_features_sampler(
            &sampled,
            cell.r_nf_sampling,
            seed::mix_str(graph_seed, "features"),
        )?))
    } else {
        Ok(Some(sampled))
    }
}

fn run_graph_job(spec: &ExperimentSpec, base: &Dataset, job: &GraphJob) -> JobOutcome {
    let cell = &job.cell;
    let skip = |reason: String| {
        JobOutcome::Skipped(SkippedCell {
            cell_key: format!("{}|graph{}", cell.record_key(spec), job.graph_index),
            reason,
        })
    };

    let degraded = match degrade(base, cell, job.graph_seed) {
        Ok(d) => d,
        Err(e) => return skip(format!("degradation failed: {e}")),
    };
    let dataset: &Dataset = degraded.as_ref().map_or(base, |sd| &sd.dataset);

    if let Some(sd) = &degraded {
        let feasible = match spec.task {
            Task::NodeClassification => is_feasible_for_classification(sd),
            Task::LinkPrediction => is_feasible_for_link_prediction(sd),
        };
        if !feasible {
            return skip(format!(
                "infeasible configuration: {} nodes, {} edges",
                sd.dataset.graph.node_count(),
                sd.dataset.graph.edge_count()
            ));
        }
    }

    let split = match spec.task {
        Task::NodeClassification => {
            match split_nodes(
                &dataset.labels,
                (0.8, 0.1, 0.1),
                seed::mix_str(job.graph_seed, "node-split"),
            ) {
                Ok(s) => TaskSplit::Nodes(s),
                Err(e) => return skip(format!("node split failed: {e}")),
            }
        }
        Task::LinkPrediction => {
            match split_edges(&dataset.graph, 0.1, seed::mix_str(job.graph_seed, "edge-split")) {
                Ok(s) => TaskSplit::Edges(s),
                Err(e) => return skip(format!("edge split failed: {e}")),
            }
        }
    };

    let mut records = Vec::with_capacity(spec.trainings_per_graph);
    for t in 0..spec.trainings_per_graph {
        let train_seed =
            seed::mix_index(seed::mix_str(job.graph_seed, cell.model.as_str()), t as u64);
        let record = |metric_name: String, value: f64| MetricRecord {
            dataset: spec.dataset_name.clone(),
            task: spec.task,
            model: cell.model.as_str().to_string(),
            r_sampling: cell.r_sampling_value(),
            r_nf_sampling: cell.r_nf_sampling,
            graph_seed: job.graph_seed,
            train_seed,
            metric_name,
            value,
        };
        match run_single(spec, cell.model, dataset, &split, train_seed) {
            Ok(value) => records.push(record(spec.task.metric_name().to_string(), value)),
            Err(_) => records.push(record(FAILED_METRIC.to_string(), 0.0)),
        }
    }
    JobOutcome::Records(records)
}

/// Run a whole experiment grid over an already loaded dataset. Records from
/// `existing` belonging to complete cells are carried over untouched and
/// their cells are not re-run. When a `sink` is given, records are appended
/// to it as each graph job finishes (serialized through the one mutex), so
/// an interrupted run leaves a resumable CSV behind.
pub fn run_experiment_on(
    base: &Dataset,
    spec: &ExperimentSpec,
    existing: Option<&MetricTable>,
    sink: Option<&std::sync::Mutex<grl_core::metrics::MetricsAppender>>,
) -> Result<MetricTable> {
    let mut table = MetricTable::default();
    let mut completed_cells = std::collections::HashSet::new();
    if let Some(existing) = existing {
        let mut per_cell: std::collections::HashMap<String, Vec<&MetricRecord>> =
            std::collections::HashMap::new();
        for r in &existing.records {
            per_cell.entry(r.cell_key()).or_default().push(r);
        }
        for (key, records) in per_cell {
            if records.len() == spec.runs_per_cell() {
                completed_cells.insert(key);
                table.records.extend(records.into_iter().cloned());
            }
        }
    }
    if let Some(sink) = sink {
        sink.lock().expect("appender poisoned").append(&table.records)?;
    }

    let base = Arc::new(base.clone());
    let jobs: Vec<GraphJob> = grid_cells(spec)
        .into_iter()
        .filter(|cell| !completed_cells.contains(&cell.record_key(spec)))
        .flat_map(|cell| {
            let graph_base = seed::mix_str(spec.base_seed, &cell.graph_key(spec));
            (0..spec.graphs_per_config).map(move |g| GraphJob {
                cell,
                graph_index: g,
                graph_seed: seed::mix_index(graph_base, g as u64),
            })
        })
        .collect();

    let outcomes: Vec<JobOutcome> = jobs
        .par_iter()
        .map(|job| {
            let outcome = run_graph_job(spec, &base, job);
            if let (Some(sink), JobOutcome::Records(records)) = (sink, &outcome) {
                // Append errors only surface on the final save; a dead disk
                // shows up there too.
                let _ = sink.lock().expect("appender poisoned").append(records);
            }
            outcome
        })
        .collect();

    for outcome in outcomes {
        match outcome {
            JobOutcome::Records(records) => table.records.extend(records),
            JobOutcome::Skipped(cell) => table.skipped.push(cell),
        }
    }
    table.sort();
    table
        .skipped
        .sort_by(|a, b| (&a.cell_key, &a.reason).cmp(&(&b.cell_key, &b.reason)));
    Ok(table)
}

/// Load the dataset named by the spec and run the grid.
pub fn run_experiment(
    spec: &ExperimentSpec,
    existing: Option<&MetricTable>,
    sink: Option<&std::sync::Mutex<grl_core::metrics::MetricsAppender>>,
) -> Result<MetricTable> {
    let dataset = load_dataset(&spec.dataset_dir)?;
    run_experiment_on(&dataset, spec, existing, sink)
}

/// Where the runner persists records inside an output directory.
pub fn metrics_path(out_dir: &Path) -> PathBuf {
    out_dir.join("metrics.csv")
}
