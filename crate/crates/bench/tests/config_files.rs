//! The canonical grid configs in `configs/` must parse into valid specs.

use std::path::Path;

use grl_bench::config::ConfigFile;
use grl_bench::{grid_cells, ExperimentSpec};
use grl_core::metrics::Task;

fn load(name: &str) -> ExperimentSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentSpec::from_config(ConfigFile::from_path(&path).unwrap()).unwrap()
}

#[test]
fn canonical_configs_parse_with_expected_grids() {
    let amazon_nc = load("amazon_nc_features.cfg");
    assert_eq!(amazon_nc.task, Task::NodeClassification);
    // baseline + 3 x 3 feature cells, three models each.
    assert_eq!(grid_cells(&amazon_nc).len(), 3 * (1 + 9));
    assert_eq!(amazon_nc.runs_per_cell(), 100);

    let cs_lp = load("cs_lp_features.cfg");
    assert_eq!(cs_lp.task, Task::LinkPrediction);
    assert_eq!(grid_cells(&cs_lp).len(), 3 * (1 + 9));

    let sampler_nc = load("amazon_nc_sampler.cfg");
    // 5 models x (baseline + 5 ratios), no feature cells.
    assert_eq!(grid_cells(&sampler_nc).len(), 5 * 6);
    assert!(grid_cells(&sampler_nc).iter().all(|c| c.r_nf_sampling == 0.0));

    let sampler_lp = load("pubmed_lp_sampler.cfg");
    assert_eq!(sampler_lp.task, Task::LinkPrediction);
    assert_eq!(grid_cells(&sampler_lp).len(), 5 * 6);
}
