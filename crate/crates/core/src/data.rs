//! Dataset loading and persistence.
//!
//! All datasets live in one normalized on-disk layout per directory:
//!
//! - `edges.txt` — one edge per line, two whitespace-separated integer ids;
//!   `#` starts a comment.
//! - `features.txt` — header `n f dense` or `n f sparse`; dense is `n` lines
//!   of `f` reals, sparse is `node_index col value` triplets with absent
//!   entries zero.
//! - `labels.txt` — header `n k`, then `n` lines of `node_index label`.
//!
//! The node universe is the feature file's `n`: every node listed there is
//! registered, so degree-zero nodes survive loading and feature/label rows
//! align with graph indices by construction.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::{CoreError, FeatureMatrix, Result};

/// Integer class label per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        for (node, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(CoreError::LabelOutOfRange {
                    node,
                    label,
                    num_classes,
                });
            }
        }
        Ok(Self { labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Members of each class, by class id.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes];
        for (node, &label) in self.labels.iter().enumerate() {
            members[label].push(node);
        }
        members
    }
}

/// A graph with aligned node features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
}

impl Dataset {
    pub fn new(name: String, graph: Graph, features: FeatureMatrix, labels: LabelVector) -> Result<Self> {
        if features.rows() != graph.node_count() {
            return Err(CoreError::RowCountMismatch {
                left_name: "features".into(),
                left: features.rows(),
                right_name: "graph nodes".into(),
                right: graph.node_count(),
            });
        }
        if labels.len() != graph.node_count() {
            return Err(CoreError::RowCountMismatch {
                left_name: "labels".into(),
                left: labels.len(),
                right_name: "graph nodes".into(),
                right: graph.node_count(),
            });
        }
        Ok(Self { name, graph, features, labels })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    if !path.is_file() {
        return Err(CoreError::MissingFile(path.to_path_buf()));
    }
    Ok(BufReader::new(File::open(path)?))
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> CoreError {
    CoreError::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Data lines of a file with comments and blanks stripped, 1-based line numbers kept.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((idx + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_fields<T: std::str::FromStr, const N: usize>(
    path: &Path,
    line_no: usize,
    line: &str,
) -> Result<[T; N]> {
    let mut fields = line.split_whitespace();
    let mut out = Vec::with_capacity(N);
    for i in 0..N {
        let raw = fields
            .next()
            .ok_or_else(|| malformed(path, line_no, format!("expected {N} fields, got {i}")))?;
        let value = raw
            .parse::<T>()
            .map_err(|_| malformed(path, line_no, format!("cannot parse field '{raw}'")))?;
        out.push(value);
    }
    out.try_into()
        .map_err(|_| malformed(path, line_no, "wrong field count"))
}

fn load_edges(path: &Path) -> Result<Vec<(u64, u64)>> {
    let mut edges = Vec::new();
    for (line_no, line) in data_lines(path)? {
        let [a, b]: [u64; 2] = parse_fields(path, line_no, &line)?;
        edges.push((a, b));
    }
    Ok(edges)
}

fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let lines = data_lines(path)?;
    let (header_no, header) = lines
        .first()
        .ok_or_else(|| malformed(path, 1, "missing header"))?;
    let mut fields = header.split_whitespace();
    let n: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(path, *header_no, "header must be 'n f dense|sparse'"))?;
    let f: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(path, *header_no, "header must be 'n f dense|sparse'"))?;
    let layout = fields
        .next()
        .ok_or_else(|| malformed(path, *header_no, "header must be 'n f dense|sparse'"))?;

    let mut features = DenseMatrix::zeros(n, f);
    match layout {
        "dense" => {
            let rows = &lines[1..];
            if rows.len() != n {
                return Err(CoreError::RowCountMismatch {
                    left_name: "features header n".into(),
                    left: n,
                    right_name: "feature rows".into(),
                    right: rows.len(),
                });
            }
            for (row, (line_no, line)) in rows.iter().enumerate() {
                let mut count = 0;
                for (col, raw) in line.split_whitespace().enumerate() {
                    if col >= f {
                        return Err(malformed(path, *line_no, format!("more than {f} values")));
                    }
                    let value: f64 = raw
                        .parse()
                        .map_err(|_| malformed(path, *line_no, format!("cannot parse '{raw}'")))?;
                    features.set(row, col, value);
                    count += 1;
                }
                if count != f {
                    return Err(malformed(path, *line_no, format!("expected {f} values, got {count}")));
                }
            }
        }
        "sparse" => {
            for (line_no, line) in &lines[1..] {
                let mut fields = line.split_whitespace();
                let parse_idx = |raw: Option<&str>| -> Result<usize> {
                    raw.and_then(|s| s.parse().ok())
                        .ok_or_else(|| malformed(path, *line_no, "expected 'node col value'"))
                };
                let node = parse_idx(fields.next())?;
                let col = parse_idx(fields.next())?;
                let value: f64 = fields
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| malformed(path, *line_no, "expected 'node col value'"))?;
                if node >= n || col >= f {
                    return Err(malformed(path, *line_no, format!("index ({node},{col}) out of {n}x{f}")));
                }
                features.set(node, col, value);
            }
        }
        other => {
            return Err(malformed(path, *header_no, format!("unknown layout '{other}'")));
        }
    }

    for node in 0..n {
        for (col, &v) in features.row(node).iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFiniteFeature { node, col });
            }
        }
    }
    Ok(features)
}

fn load_labels(path: &Path) -> Result<LabelVector> {
    let lines = data_lines(path)?;
    let (header_no, header) = lines
        .first()
        .ok_or_else(|| malformed(path, 1, "missing header"))?;
    let [n, k]: [usize; 2] = parse_fields(path, *header_no, header)?;
    let rows = &lines[1..];
    if rows.len() != n {
        return Err(CoreError::RowCountMismatch {
            left_name: "labels header n".into(),
            left: n,
            right_name: "label rows".into(),
            right: rows.len(),
        });
    }
    let mut labels = vec![usize::MAX; n];
    for (line_no, line) in rows {
        let [node, label]: [usize; 2] = parse_fields(path, *line_no, line)?;
        if node >= n {
            return Err(malformed(path, *line_no, format!("node {node} out of range {n}")));
        }
        labels[node] = label;
    }
    for (node, &label) in labels.iter().enumerate() {
        if label == usize::MAX {
            return Err(malformed(path, 0, format!("node {node} has no label line")));
        }
    }
    LabelVector::new(labels, k)
}

/// Load a dataset directory, validating that all three files align.
pub fn load_dataset(directory: &Path) -> Result<Dataset> {
    let features = load_features(&directory.join("features.txt"))?;
    let labels = load_labels(&directory.join("labels.txt"))?;
    let edges = load_edges(&directory.join("edges.txt"))?;
    if labels.len() != features.rows() {
        return Err(CoreError::RowCountMismatch {
            left_name: "labels".into(),
            left: labels.len(),
            right_name: "features".into(),
            right: features.rows(),
        });
    }
    let graph = Graph::with_node_count(features.rows(), &edges)?;
    let name = directory
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::new(name, graph, features, labels)
}

/// Persist a dataset in the normalized layout. Sparse feature layout is
/// picked automatically when it is smaller than dense.
pub fn save_dataset(dataset: &Dataset, directory: &Path) -> Result<()> {
    std::fs::create_dir_all(directory)?;

    let mut edges = BufWriter::new(File::create(directory.join("edges.txt"))?);
    for (a, b) in dataset.graph.edges() {
        writeln!(edges, "{a} {b}")?;
    }
    edges.flush()?;

    let features = &dataset.features;
    let (n, f) = (features.rows(), features.cols());
    let nonzero = features.as_slice().iter().filter(|v| **v != 0.0).count();
    let mut out = BufWriter::new(File::create(directory.join("features.txt"))?);
    if nonzero * 3 < n * f {
        writeln!(out, "{n} {f} sparse")?;
        for i in 0..n {
            for (j, &v) in features.row(i).iter().enumerate() {
                if v != 0.0 {
                    writeln!(out, "{i} {j} {v}")?;
                }
            }
        }
    } else {
        writeln!(out, "{n} {f} dense")?;
        for i in 0..n {
            let row: Vec<String> = features.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    out.flush()?;

    let mut labels = BufWriter::new(File::create(directory.join("labels.txt"))?);
    writeln!(labels, "{} {}", dataset.labels.len(), dataset.labels.num_classes)?;
    for (node, label) in dataset.labels.labels.iter().enumerate() {
        writeln!(labels, "{node} {label}")?;
    }
    labels.flush()?;
    Ok(())
}

/// Write an embedding matrix in the text format `n d` header plus one row
/// of reals per node.
pub fn save_embedding(embedding: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{} {}", embedding.rows(), embedding.cols())?;
    for i in 0..embedding.rows() {
        let row: Vec<String> = embedding.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Read an embedding matrix written by [`save_embedding`].
pub fn load_embedding(path: &Path) -> Result<DenseMatrix> {
    let lines = data_lines(path)?;
    let (header_no, header) = lines
        .first()
        .ok_or_else(|| malformed(path, 1, "missing header"))?;
    let [n, d]: [usize; 2] = parse_fields(path, *header_no, header)?;
    if lines.len() - 1 != n {
        return Err(CoreError::RowCountMismatch {
            left_name: "embedding header n".into(),
            left: n,
            right_name: "rows".into(),
            right: lines.len() - 1,
        });
    }
    let mut out = DenseMatrix::zeros(n, d);
    for (row, (line_no, line)) in lines[1..].iter().enumerate() {
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|raw| {
                raw.parse()
                    .map_err(|_| malformed(path, *line_no, format!("cannot parse '{raw}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(malformed(path, *line_no, format!("expected {d} values")));
        }
        out.row_mut(row).copy_from_slice(&values);
    }
    Ok(out)
}

/// Write the client-node audit file: one client node index per line.
pub fn save_clients(client_indices: &[usize], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for idx in client_indices {
        writeln!(out, "{idx}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn dataset_paths(directory: &Path) -> [PathBuf; 3] {
    [
        directory.join("edges.txt"),
        directory.join("features.txt"),
        directory.join("labels.txt"),
    ]
}
