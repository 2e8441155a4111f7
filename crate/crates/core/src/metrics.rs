//! Metric records, the results CSV schema and mean/std aggregation.
//!
//! CSV columns, in order: `dataset, task, model, r_sampling, r_nf_sampling,
//! graph_seed, train_seed, metric_name, value`. Floats are written in
//! shortest round-trip form, so a reloaded table is bit-identical.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{CoreError, Result};

pub const METRIC_CSV_HEADER: [&str; 9] = [
    "dataset",
    "task",
    "model",
    "r_sampling",
    "r_nf_sampling",
    "graph_seed",
    "train_seed",
    "metric_name",
    "value",
];

/// Name of the pseudo-metric recording a diverged or otherwise failed run.
/// Failed runs stay in the table (they are counted) but never aggregate.
pub const FAILED_METRIC: &str = "failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    NodeClassification,
    LinkPrediction,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::NodeClassification => "node_classification",
            Task::LinkPrediction => "link_prediction",
        }
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            Task::NodeClassification => "accuracy",
            Task::LinkPrediction => "auc",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "node_classification" | "nc" => Some(Task::NodeClassification),
            "link_prediction" | "lp" => Some(Task::LinkPrediction),
            _ => None,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One completed (or failed) run of one model on one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub dataset: String,
    pub task: Task,
    pub model: String,
    /// 1.0 encodes the baseline (no sampler applied).
    pub r_sampling: f64,
    /// 0.0 encodes "no feature degradation".
    pub r_nf_sampling: f64,
    pub graph_seed: u64,
    pub train_seed: u64,
    pub metric_name: String,
    pub value: f64,
}

impl MetricRecord {
    pub fn is_failure(&self) -> bool {
        self.metric_name == FAILED_METRIC
    }

    /// Key identifying the grid cell this record belongs to.
    pub fn cell_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}",
            self.dataset, self.task, self.model, self.r_sampling, self.r_nf_sampling
        )
    }
}

/// All records of an experiment plus the cells the feasibility guard skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    pub records: Vec<MetricRecord>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub cell_key: String,
    pub reason: String,
}

impl MetricTable {
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            (a.cell_key(), a.graph_seed, a.train_seed, &a.metric_name).cmp(&(
                b.cell_key(),
                b.graph_seed,
                b.train_seed,
                &b.metric_name,
            ))
        });
    }
}

fn write_record<W: std::io::Write>(writer: &mut csv::Writer<W>, r: &MetricRecord) -> Result<()> {
    writer.write_record([
        r.dataset.as_str(),
        r.task.as_str(),
        r.model.as_str(),
        &format!("{}", r.r_sampling),
        &format!("{}", r.r_nf_sampling),
        &format!("{}", r.graph_seed),
        &format!("{}", r.train_seed),
        r.metric_name.as_str(),
        &format!("{}", r.value),
    ])?;
    Ok(())
}

/// Write the records to `path` in the schema above.
pub fn save_metrics(table: &MetricTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(METRIC_CSV_HEADER)?;
    for r in &table.records {
        write_record(&mut writer, r)?;
    }
    writer.flush()?;
    Ok(())
}

/// Incremental writer for long runs: records are flushed batch by batch so
/// an interrupted run leaves a loadable CSV behind.
pub struct MetricsAppender {
    writer: csv::Writer<std::fs::File>,
}

impl MetricsAppender {
    /// Create (truncate) the file and write the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(METRIC_CSV_HEADER)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn append(&mut self, records: &[MetricRecord]) -> Result<()> {
        for r in records {
            write_record(&mut self.writer, r)?;
        }
        self.writer.flush()?;
        Ok(())
    }
}

/// Reload a metrics CSV written by [`save_metrics`].
pub fn load_metrics(path: &Path) -> Result<MetricTable> {
    let bad = |message: String| CoreError::MetricsFormat {
        path: path.to_path_buf(),
        message,
    };
    if !path.is_file() {
        return Err(CoreError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    {
        let headers = reader.headers()?;
        let expected: Vec<&str> = METRIC_CSV_HEADER.to_vec();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(bad(format!("unexpected header: {headers:?}")));
        }
    }
    let mut table = MetricTable::default();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() != 9 {
            return Err(bad(format!("row {i}: expected 9 fields, got {}", row.len())));
        }
        let field = |k: usize| row.get(k).unwrap().to_string();
        let parse_f64 = |k: usize| {
            row.get(k)
                .unwrap()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {i} field {k}: {e}")))
        };
        let parse_u64 = |k: usize| {
            row.get(k)
                .unwrap()
                .parse::<u64>()
                .map_err(|e| bad(format!("row {i} field {k}: {e}")))
        };
        table.records.push(MetricRecord {
            dataset: field(0),
            task: Task::parse(row.get(1).unwrap())
                .ok_or_else(|| bad(format!("row {i}: unknown task '{}'", field(1))))?,
            model: field(2),
            r_sampling: parse_f64(3)?,
            r_nf_sampling: parse_f64(4)?,
            graph_seed: parse_u64(5)?,
            train_seed: parse_u64(6)?,
            metric_name: field(7),
            value: parse_f64(8)?,
        });
    }
    Ok(table)
}

/// Grouping fields for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupField {
    Dataset,
    Task,
    Model,
    RSampling,
    RNfSampling,
    MetricName,
}

impl GroupField {
    fn extract(&self, r: &MetricRecord) -> String {
        match self {
            GroupField::Dataset => r.dataset.clone(),
            GroupField::Task => r.task.as_str().to_string(),
            GroupField::Model => r.model.clone(),
            GroupField::RSampling => format!("{}", r.r_sampling),
            GroupField::RNfSampling => format!("{}", r.r_nf_sampling),
            GroupField::MetricName => r.metric_name.clone(),
        }
    }
}

/// Sample mean and unbiased standard deviation of one aggregation group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStat {
    pub key: Vec<String>,
    pub mean: f64,
    /// 0.0 when `count == 1`; check `count` before trusting the spread.
    pub std: f64,
    pub count: usize,
}

/// Mean and unbiased (n-1) standard deviation per group. Failed records are
/// never aggregated; a group consisting only of failures is an error.
pub fn aggregate(records: &[MetricRecord], group_keys: &[GroupField]) -> Result<Vec<GroupStat>> {
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.is_failure() {
            continue;
        }
        let key: Vec<String> = group_keys.iter().map(|k| k.extract(r)).collect();
        groups.entry(key).or_default().push(r.value);
    }
    if groups.is_empty() {
        return Err(CoreError::EmptyGroup);
    }
    Ok(groups
        .into_iter()
        .map(|(key, values)| {
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let std = if count > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
                var.sqrt()
            } else {
                0.0
            };
            GroupStat { key, mean, std, count }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(model: &str, value: f64, train_seed: u64) -> MetricRecord {
        MetricRecord {
            dataset: "toy".into(),
            task: Task::NodeClassification,
            model: model.into(),
            r_sampling: 1.0,
            r_nf_sampling: 0.0,
            graph_seed: 1,
            train_seed,
            metric_name: "accuracy".into(),
            value,
        }
    }

    #[test]
    fn aggregate_two_values_hand_arithmetic() {
        let records = vec![record("gcn", 0.8, 1), record("gcn", 0.9, 2)];
        let stats = aggregate(&records, &[GroupField::Model]).unwrap();
        assert_eq!(stats.len(), 1);
        assert!((stats[0].mean - 0.85).abs() < 1e-15);
        assert!((stats[0].std - 0.07071067811865475).abs() < 1e-12);
        assert_eq!(stats[0].count, 2);
    }

    #[test]
    fn aggregate_single_record_has_zero_std_and_count_flag() {
        let stats = aggregate(&[record("gcn", 0.8, 1)], &[GroupField::Model]).unwrap();
        assert_eq!(stats[0].std, 0.0);
        assert_eq!(stats[0].count, 1);
    }

    #[test]
    fn aggregate_identical_values_zero_std() {
        let records: Vec<_> = (0..100).map(|t| record("gat", 0.75, t)).collect();
        let stats = aggregate(&records, &[GroupField::Model]).unwrap();
        assert_eq!(stats[0].std, 0.0);
        assert_eq!(stats[0].count, 100);
    }

    #[test]
    fn aggregate_skips_failures_and_rejects_empty() {
        let mut failed = record("gat", 0.0, 3);
        failed.metric_name = FAILED_METRIC.into();
        let stats = aggregate(
            &[record("gat", 0.6, 1), failed.clone()],
            &[GroupField::Model],
        )
        .unwrap();
        assert_eq!(stats[0].count, 1);
        assert!(matches!(aggregate(&[failed], &[GroupField::Model]), Err(CoreError::EmptyGroup)));
        assert!(matches!(aggregate(&[], &[GroupField::Model]), Err(CoreError::EmptyGroup)));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = std::env::temp_dir().join(format!("grl_metrics_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("metrics.csv");
        let mut table = MetricTable::default();
        table.records.push(MetricRecord {
            r_sampling: 0.1,
            r_nf_sampling: 0.75,
            value: 0.8617283945612342,
            ..record("sage", 0.0, 77)
        });
        save_metrics(&table, &path).unwrap();
        let reloaded = load_metrics(&path).unwrap();
        assert_eq!(reloaded.records, table.records);
    }

    #[test]
    fn empty_table_round_trips_header_only() {
        let dir = std::env::temp_dir().join(format!("grl_metrics_empty_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("metrics.csv");
        save_metrics(&MetricTable::default(), &path).unwrap();
        let contents = std::fs::read_to_string(&path).unwrap();
        assert_eq!(contents.lines().count(), 1);
        assert!(load_metrics(&path).unwrap().records.is_empty());
    }
}
