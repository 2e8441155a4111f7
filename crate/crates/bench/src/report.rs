//! Rendering of aggregated results: rows are preprocessor configurations,
//! columns are models, cells carry mean ± std and the relative change
//! against the model's own baseline.

use std::collections::BTreeMap;

use grl_core::metrics::{aggregate, GroupField, MetricTable};

use crate::Result;

/// Keys: (dataset, task) -> (r_nf, r_s) -> model -> (mean, std, count).
type Grouped = BTreeMap<(String, String), BTreeMap<(String, String), BTreeMap<String, (f64, f64, usize)>>>;

fn group(table: &MetricTable) -> Result<Grouped> {
    let stats = match aggregate(
        &table.records,
        &[
            GroupField::Dataset,
            GroupField::Task,
            GroupField::RNfSampling,
            GroupField::RSampling,
            GroupField::Model,
        ],
    ) {
        Ok(stats) => stats,
        // Nothing aggregatable (empty table or failures only).
        Err(grl_core::CoreError::EmptyGroup) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let mut grouped: Grouped = BTreeMap::new();
    for s in stats {
        let [dataset, task, r_nf, r_s, model]: [String; 5] =
            s.key.clone().try_into().expect("five group fields");
        grouped
            .entry((dataset, task))
            .or_default()
            .entry((r_nf, r_s))
            .or_default()
            .insert(model, (s.mean, s.std, s.count));
    }
    Ok(grouped)
}

fn sort_configs(configs: &mut [(String, String)]) {
    // Baseline (r_s = 1, r_nf = 0) first, then increasing degradation: by
    // r_nf ascending, then r_sampling descending.
    configs.sort_by(|a, b| {
        let parse = |c: &(String, String)| -> (f64, f64) {
            (c.0.parse().unwrap_or(0.0), c.1.parse().unwrap_or(0.0))
        };
        let (a_nf, a_rs) = parse(a);
        let (b_nf, b_rs) = parse(b);
        let a_baseline = a_rs == 1.0 && a_nf == 0.0;
        let b_baseline = b_rs == 1.0 && b_nf == 0.0;
        b_baseline
            .cmp(&a_baseline)
            .then(a_nf.partial_cmp(&b_nf).expect("finite"))
            .then(b_rs.partial_cmp(&a_rs).expect("finite"))
    });
}

/// Human-readable table with one block per (dataset, task).
pub fn render_table(table: &MetricTable) -> Result<String> {
    let grouped = group(table)?;
    let mut out = String::new();
    if grouped.is_empty() {
        let failures = table.records.iter().filter(|r| r.is_failure()).count();
        out.push_str(&format!(
            "no successful runs to aggregate ({failures} failed, {} total)\n",
            table.records.len()
        ));
    }
    for ((dataset, task), configs) in &grouped {
        let mut models: Vec<String> = configs
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        // Stable presentation order.
        let order = ["deepwalk", "node2vec", "gcn", "sage", "gat"];
        models.sort_by_key(|m| order.iter().position(|o| o == m).unwrap_or(order.len()));

        out.push_str(&format!("dataset={dataset} task={task}\n"));
        out.push_str(&format!("{:<10} {:<10}", "r_nf", "r_sampling"));
        for m in &models {
            out.push_str(&format!(" {m:<26}"));
        }
        out.push('\n');

        let mut config_keys: Vec<(String, String)> = configs.keys().cloned().collect();
        sort_configs(&mut config_keys);
        let baseline_key = config_keys
            .iter()
            .find(|(nf, rs)| rs == "1" && nf == "0")
            .cloned();

        for key in &config_keys {
            let (r_nf, r_s) = key;
            let is_baseline = Some(key) == baseline_key.as_ref();
            let label_rs = if is_baseline { "baseline" } else { r_s.as_str() };
            let label_nf = if is_baseline { "-" } else { r_nf.as_str() };
            out.push_str(&format!("{label_nf:<10} {label_rs:<10}"));
            for m in &models {
                let cell = configs[key].get(m);
                let text = match cell {
                    None => "-".to_string(),
                    Some(&(mean, std, _)) => {
                        let rel = baseline_key
                            .as_ref()
                            .filter(|_| !is_baseline)
                            .and_then(|bk| configs[bk].get(m))
                            .map(|&(base_mean, _, _)| 100.0 * (mean - base_mean) / base_mean);
                        match rel {
                            Some(pct) => format!("{mean:.3} ± {std:.3} ({pct:+.1}%)"),
                            None => format!("{mean:.3} ± {std:.3}"),
                        }
                    }
                };
                out.push_str(&format!(" {text:<26}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    if !table.skipped.is_empty() {
        out.push_str("skipped configurations:\n");
        for s in &table.skipped {
            out.push_str(&format!("  {}: {}\n", s.cell_key, s.reason));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use grl_core::metrics::{MetricRecord, Task};

    fn record(model: &str, r_s: f64, r_nf: f64, value: f64, t: u64) -> MetricRecord {
        MetricRecord {
            dataset: "toy".into(),
            task: Task::NodeClassification,
            model: model.into(),
            r_sampling: r_s,
            r_nf_sampling: r_nf,
            graph_seed: 1,
            train_seed: t,
            metric_name: "accuracy".into(),
            value,
        }
    }

    #[test]
    fn relative_change_against_baseline() {
        let mut table = MetricTable::default();
        table.records.push(record("gcn", 1.0, 0.0, 0.9, 1));
        table.records.push(record("gcn", 1.0, 0.0, 0.9, 2));
        table.records.push(record("gcn", 0.5, 0.0, 0.8, 1));
        table.records.push(record("gcn", 0.5, 0.0, 0.8, 2));
        let rendered = render_table(&table).unwrap();
        assert!(rendered.contains("baseline"), "{rendered}");
        // (0.8 - 0.9) / 0.9 = -11.1%
        assert!(rendered.contains("(-11.1%)"), "{rendered}");
        assert!(rendered.contains("0.900 ± 0.000"), "{rendered}");
    }

    #[test]
    fn baseline_only_renders_single_row() {
        let mut table = MetricTable::default();
        table.records.push(record("gat", 1.0, 0.0, 0.7, 1));
        let rendered = render_table(&table).unwrap();
        let data_rows = rendered
            .lines()
            .filter(|l| l.starts_with('-') || l.starts_with("baseline") || l.contains("baseline"))
            .count();
        assert_eq!(data_rows, 1, "{rendered}");
    }
}
