//! Grid enumeration and spec parsing.

use grl_bench::config::ConfigFile;
use grl_bench::{grid_cells, ExperimentSpec, ModelKind};
use grl_core::metrics::Task;

fn spec(text: &str) -> ExperimentSpec {
    ExperimentSpec::from_config(ConfigFile::parse(text).unwrap()).unwrap()
}

#[test]
fn walk_models_are_excluded_from_feature_degradation_cells() {
    let s = spec(
        "[experiment]\ndataset = x\ntask = node_classification\nmodels = gcn, deepwalk\nr_sampling = baseline, 0.5\nr_nf_sampling = 0.1, 0.5\n",
    );
    let cells = grid_cells(&s);
    // gcn: baseline + 0.5 x {0.1, 0.5} = 3; deepwalk: baseline only = 1.
    assert_eq!(cells.len(), 4);
    for cell in &cells {
        if cell.model.is_walk_model() {
            assert_eq!(cell.r_nf_sampling, 0.0, "walk model in a feature cell");
        }
    }
    let deepwalk_cells = cells.iter().filter(|c| c.model == ModelKind::DeepWalk).count();
    assert_eq!(deepwalk_cells, 1);
}

#[test]
fn baseline_never_carries_feature_degradation() {
    let s = spec(
        "[experiment]\ndataset = x\ntask = node_classification\nmodels = gat\nr_sampling = baseline, 0.1\nr_nf_sampling = 0.75\n",
    );
    let cells = grid_cells(&s);
    assert_eq!(cells.len(), 2);
    let baseline = cells.iter().find(|c| c.r_sampling.is_none()).unwrap();
    assert_eq!(baseline.r_nf_sampling, 0.0);
    let sampled = cells.iter().find(|c| c.r_sampling.is_some()).unwrap();
    assert_eq!(sampled.r_nf_sampling, 0.75);
}

#[test]
fn default_grid_is_the_published_value_set() {
    let s = spec("[experiment]\ndataset = x\nmodels = gcn\n");
    assert_eq!(s.task, Task::NodeClassification);
    assert_eq!(
        s.r_sampling,
        vec![None, Some(0.5), Some(0.1), Some(0.01), Some(5e-3), Some(1e-3)]
    );
    assert!(s.r_nf_sampling.is_empty());
    assert_eq!(s.graphs_per_config, 10);
    assert_eq!(s.trainings_per_graph, 10);
    assert_eq!(s.runs_per_cell(), 100);
}

#[test]
fn full_grid_cardinality_matches_the_published_layout() {
    // {baseline, 0.5, 0.1, 0.01} x 3 GNNs with 10x10 runs: 10 cells,
    // 1200 expected records.
    let s = spec(
        "[experiment]\ndataset = x\ntask = node_classification\nmodels = gcn, gat, sage\nr_sampling = baseline, 0.5, 0.1, 0.01\n",
    );
    let cells = grid_cells(&s);
    assert_eq!(cells.len(), 12);
    assert_eq!(cells.len() * s.runs_per_cell(), 1200);
}

#[test]
fn unknown_model_is_a_config_error() {
    let result = ExperimentSpec::from_config(
        ConfigFile::parse("[experiment]\ndataset = x\nmodels = resnet\n").unwrap(),
    );
    assert!(result.is_err());
}
