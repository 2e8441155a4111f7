//! `grl-bench` command line: dataset ingestion, graph statistics, the two
//! preprocessors, single training runs, experiment grids and report
//! rendering.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 completed with
//! failed runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grl_bench::config::ConfigFile;
use grl_bench::report::render_table;
use grl_bench::{
    metrics_path, run_experiment, BenchError, ExperimentSpec, ModelKind,
};
use grl_core::data::{load_dataset, save_clients, save_dataset, load_embedding, save_embedding};
use grl_core::metrics::{load_metrics, save_metrics, MetricTable, Task};
use grl_core::preprocess::{apply_features_sampler, apply_sampler, sample_clients, split_nodes};
use grl_core::seed;
use grl_core::stats::{compute_stats, GraphStats};

#[derive(Parser)]
#[command(name = "grl-bench", about = "Robustness benchmark for graph representation learning under sparsity and asymmetric node information", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset directory and print a summary.
    Ingest { dir: PathBuf },

    /// Generate a synthetic preferential-attachment dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 3)]
        attach: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        features: usize,
        #[arg(long, default_value_t = 2.0)]
        shift: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Print a statistics row (TSV): name, r_sampling, n, m, d, p, t, gamma, H_er.
    Stats {
        dir: PathBuf,
        /// Client sampling ratio; omitted means the full graph.
        #[arg(long)]
        r_sampling: Option<f64>,
        /// Seeds to average over when sampling.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },

    /// Apply the sampler (and optionally the features sampler) and persist
    /// the degraded dataset plus clients.txt.
    Preprocess {
        dir: PathBuf,
        #[arg(long)]
        r_sampling: f64,
        #[arg(long)]
        r_nf: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },

    /// Train one model once and print the test metric.
    Train {
        dir: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        task: String,
        /// Optional key = value config file with per-model sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Export final node representations to this path (text format).
        #[arg(long)]
        export_embedding: Option<PathBuf>,
        /// Save trained parameters as a versioned binary checkpoint.
        #[arg(long)]
        save_checkpoint: Option<PathBuf>,
    },

    /// Run an experiment grid described by a spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },

    /// Re-render a metrics CSV.
    Report {
        csv: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
        /// Write to this path instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn stats_row(name: &str, r_sampling: f64, s: &GraphStats) -> String {
    let gamma = if s.gamma.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.2}", s.gamma)
    };
    format!(
        "{name}\t{r_sampling}\t{}\t{}\t{:.2}\t{:.1e}\t{:.2}\t{gamma}\t{:.2}",
        s.n, s.m, s.mean_degree, s.fill, s.triangles_per_node, s.entropy
    )
}

fn cmd_ingest(dir: &Path) -> Result<(), BenchError> {
    let d = load_dataset(dir)?;
    let stats = compute_stats(&d.graph)?;
    println!(
        "dataset {}: n={} m={} features={} classes={}",
        d.name,
        d.graph.node_count(),
        d.graph.edge_count(),
        d.features.cols(),
        d.labels.num_classes
    );
    println!(
        "mean degree {:.2}, fill {:.1e}, triangles/node {:.2}, H_er {:.2}",
        stats.mean_degree, stats.fill, stats.triangles_per_node, stats.entropy
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    out: &Path,
    nodes: usize,
    attach: usize,
    classes: usize,
    features: usize,
    shift: f64,
    seed: u64,
) -> Result<(), BenchError> {
    let spec = grl_core::synthetic::SyntheticSpec {
        node_count: nodes,
        attachment_degree: attach,
        num_classes: classes,
        feature_dim: features,
        intra_class_feature_shift: shift,
        seed,
    };
    let dataset = grl_core::synthetic::generate_synthetic(&spec)?;
    save_dataset(&dataset, out)?;
    println!(
        "wrote synthetic dataset to {}: n={} m={} f={} k={}",
        out.display(),
        dataset.graph.node_count(),
        dataset.graph.edge_count(),
        features,
        classes
    );
    Ok(())
}

fn cmd_stats(dir: &Path, r_sampling: Option<f64>, seeds: u64) -> Result<(), BenchError> {
    let d = load_dataset(dir)?;
    println!("name\tr_sampling\tn\tm\td\tp\tt\tgamma\tH_er");
    match r_sampling {
        None => {
            let s = compute_stats(&d.graph)?;
            println!("{}", stats_row(&d.name, 1.0, &s));
        }
        Some(r) => {
            // Mean of each statistic over the sampling seeds.
            let mut acc: Option<GraphStats> = None;
            let mut used = 0u64;
            for s_idx in 0..seeds {
                let mask = sample_clients(&d.graph, r, seed::mix_index(0xb0a7, s_idx))?;
                let sd = apply_sampler(&d, &mask)?;
                let s = compute_stats(&sd.dataset.graph)?;
                used += 1;
                acc = Some(match acc {
                    None => s,
                    Some(mut a) => {
                        a.n += s.n;
                        a.m += s.m;
                        a.mean_degree += s.mean_degree;
                        a.fill += s.fill;
                        a.triangles_per_node += s.triangles_per_node;
                        a.gamma += s.gamma;
                        a.entropy += s.entropy;
                        a
                    }
                });
            }
            let mut a = acc.expect("at least one seed");
            let k = used as f64;
            a.n = (a.n as f64 / k).round() as usize;
            a.m = (a.m as f64 / k).round() as usize;
            a.mean_degree /= k;
            a.fill /= k;
            a.triangles_per_node /= k;
            a.gamma /= k;
            a.entropy /= k;
            println!("{}", stats_row(&d.name, r, &a));
        }
    }
    Ok(())
}

fn cmd_preprocess(
    dir: &Path,
    r_sampling: f64,
    r_nf: Option<f64>,
    seed_value: u64,
    out: &Path,
) -> Result<(), BenchError> {
    let d = load_dataset(dir)?;
    let mask = sample_clients(&d.graph, r_sampling, seed::mix_str(seed_value, "clients"))?;
    let mut sd = apply_sampler(&d, &mask)?;
    if let Some(r_nf) = r_nf {
        sd = apply_features_sampler(&sd, r_nf, seed::mix_str(seed_value, "features"))?;
    }
    save_dataset(&sd.dataset, out)?;
    save_clients(&sd.client_mask.client_indices(), &out.join("clients.txt"))?;
    println!(
        "wrote degraded dataset to {}: n={} m={} clients={}",
        out.display(),
        sd.dataset.graph.node_count(),
        sd.dataset.graph.edge_count(),
        sd.client_mask.client_count()
    );
    Ok(())
}

fn cmd_train(
    dir: &Path,
    model: &str,
    task: &str,
    config: Option<&Path>,
    seed_value: u64,
    export: Option<&Path>,
    checkpoint: Option<&Path>,
) -> Result<(), BenchError> {
    let model = ModelKind::parse(model)
        .ok_or_else(|| BenchError::Config(format!("unknown model '{model}'")))?;
    let task = Task::parse(task).ok_or_else(|| BenchError::Config(format!("unknown task '{task}'")))?;
    let dataset = load_dataset(dir)?;

    // Reuse the runner's single-run path through a one-cell spec.
    let mut cfg_text = format!(
        "[experiment]\ndataset = {}\ntask = {}\nmodels = {}\ngraphs_per_config = 1\ntrainings_per_graph = 1\nr_sampling = baseline\nbase_seed = {}\n",
        dir.display(),
        task.as_str(),
        model.as_str(),
        seed_value,
    );
    if let Some(path) = config {
        cfg_text.push_str(
            &std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?,
        );
    }
    let spec = ExperimentSpec::from_config(ConfigFile::parse(&cfg_text)?)?;
    let table = grl_bench::run_experiment_on(&dataset, &spec, None, None)?;
    for r in &table.records {
        println!(
            "{} {} {} seed={} {}={}",
            r.dataset, r.model, r.task, r.train_seed, r.metric_name, r.value
        );
    }
    if table.records.iter().any(|r| r.is_failure()) {
        return Err(BenchError::Config("run failed (divergence)".into()));
    }

    if export.is_some() || checkpoint.is_some() {
        if model.is_walk_model() {
            let cfg = grl_bench::walk_config(&spec, model, seed_value)?;
            let corpus = grl_models::walk::generate_walks(
                &dataset.graph,
                &cfg,
                seed::mix_str(seed_value, "walks"),
            );
            let embedding =
                grl_models::skipgram::train_skipgram(&corpus, &cfg, seed::mix_str(seed_value, "embed"))?;
            if let Some(path) = export {
                save_embedding(&embedding, path)?;
                let _ = load_embedding(path)?;
                println!("wrote representations to {}", path.display());
            }
            if let Some(path) = checkpoint {
                grl_models::gnn::save_checkpoint(&[("embedding".to_string(), &embedding)], path)?;
                println!("wrote checkpoint to {}", path.display());
            }
        } else {
            let gnn_cfg = grl_bench::gnn_config(&spec, model, seed_value)?;
            let (trained, decoder) = match task {
                Task::NodeClassification => {
                    let split = split_nodes(
                        &dataset.labels,
                        (0.8, 0.1, 0.1),
                        seed::mix_str(seed_value, "export-split"),
                    )?;
                    let (m, _, _) = grl_models::gnn::train_node_classifier(&dataset, &split, &gnn_cfg)?;
                    (m, None)
                }
                Task::LinkPrediction => {
                    let split = grl_core::preprocess::split_edges(
                        &dataset.graph,
                        0.1,
                        seed::mix_str(seed_value, "export-split"),
                    )?;
                    let (m, d, _, _) = grl_models::gnn::train_link_predictor(&dataset, &split, &gnn_cfg)?;
                    (m, Some(d))
                }
            };
            if let Some(path) = export {
                let ctx = grl_models::gnn::GraphContext::new(
                    dataset.graph.clone(),
                    &dataset.features,
                    gnn_cfg.gat_self_loops,
                );
                let mut tape = grl_models::autograd::Tape::new();
                let (out, _) = trained.forward(&mut tape, &ctx, false, 0);
                save_embedding(tape.value(out), path)?;
                let _ = load_embedding(path)?;
                println!("wrote representations to {}", path.display());
            }
            if let Some(path) = checkpoint {
                let mut params: Vec<(String, &grl_core::DenseMatrix)> = trained.named_params();
                if let Some(decoder) = &decoder {
                    params.extend(decoder.named_params());
                }
                grl_models::gnn::save_checkpoint(&params, path)?;
                println!("wrote checkpoint to {}", path.display());
            }
        }
    }
    Ok(())
}

fn cmd_experiment(spec_path: &Path, out: &Path, workers: Option<usize>) -> Result<bool, BenchError> {
    if let Some(w) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    }
    let spec = ExperimentSpec::from_config(ConfigFile::from_path(spec_path)?)?;
    std::fs::create_dir_all(out)?;
    let csv = metrics_path(out);
    let existing = if csv.is_file() {
        Some(load_metrics(&csv)?)
    } else {
        None
    };
    // Stream records as cells complete, then rewrite in canonical order.
    let appender = std::sync::Mutex::new(grl_core::metrics::MetricsAppender::create(&csv)?);
    let table = run_experiment(&spec, existing.as_ref(), Some(&appender))?;
    drop(appender);
    save_metrics(&table, &csv)?;
    let rendered = render_table(&table)?;
    std::fs::write(out.join("report.txt"), &rendered)?;
    print!("{rendered}");
    let failures = table.records.iter().filter(|r| r.is_failure()).count();
    if failures > 0 {
        eprintln!("{failures} runs failed (recorded with metric_name=failed)");
    }
    for s in &table.skipped {
        eprintln!("skipped {}: {}", s.cell_key, s.reason);
    }
    println!("wrote {} records to {}", table.records.len(), csv.display());
    Ok(failures > 0)
}

fn cmd_report(csv: &Path, format: &str, out: Option<&Path>) -> Result<(), BenchError> {
    let table: MetricTable = load_metrics(csv)?;
    let rendered = match format {
        "table" => render_table(&table)?,
        "csv" => {
            let target = out.map_or_else(|| csv.to_path_buf(), Path::to_path_buf);
            save_metrics(&table, &target)?;
            format!("wrote {}\n", target.display())
        }
        other => return Err(BenchError::Config(format!("unknown format '{other}'"))),
    };
    match out {
        Some(path) if format == "table" => std::fs::write(path, &rendered)?,
        _ => print!("{rendered}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let result = match &cli.command {
        Command::Ingest { dir } => cmd_ingest(dir).map(|()| false),
        Command::Synth { out, nodes, attach, classes, features, shift, seed } => {
            cmd_synth(out, *nodes, *attach, *classes, *features, *shift, *seed).map(|()| false)
        }
        Command::Stats { dir, r_sampling, seeds } => {
            cmd_stats(dir, *r_sampling, *seeds).map(|()| false)
        }
        Command::Preprocess { dir, r_sampling, r_nf, seed, out } => {
            cmd_preprocess(dir, *r_sampling, *r_nf, *seed, out).map(|()| false)
        }
        Command::Train { dir, model, task, config, seed, export_embedding, save_checkpoint } => cmd_train(
            dir,
            model,
            task,
            config.as_deref(),
            *seed,
            export_embedding.as_deref(),
            save_checkpoint.as_deref(),
        )
        .map(|()| false),
        Command::Experiment { spec, out, workers } => cmd_experiment(spec, out, *workers),
        Command::Report { csv, format, out } => cmd_report(csv, format, out.as_deref()).map(|()| false),
    };

    match result {
        Ok(false) => ExitCode::SUCCESS,
        // Experiment completed but some runs failed.
        Ok(true) => ExitCode::from(3),
        Err(BenchError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
