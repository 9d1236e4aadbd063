//! Dataset ingestion and persistence: delimited node/edge files, feature
//! normalization, synthetic biased-graph generation, and report round-trips.
//!
//! File formats:
//! - `nodes.csv` — header `id,<features...>,sensitive,label`; empty sensitive
//!   or label cells mean unobserved.
//! - `edges.csv` — header `src,dst`; 0-based node index pairs.
//! - `report.json` — a [`FairnessReport`] document; undefined metrics are null.
//! - `history.csv` — per-epoch loss columns (written by the trainer).

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, BinaryAttr, Graph};
use crate::metrics::FairnessReport;

/// Column layout of a delimited node/edge dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub nodes_path: std::path::PathBuf,
    pub edges_path: std::path::PathBuf,
    pub sensitive_column: String,
    pub label_column: String,
    pub feature_columns: Vec<String>,
    pub delimiter: u8,
}

impl DatasetSchema {
    /// Schema for the formats written by [`save_dataset`]: `id` first, then
    /// features, then `sensitive,label`.
    pub fn standard(dir: &Path, feature_columns: Vec<String>) -> Self {
        Self {
            nodes_path: dir.join("nodes.csv"),
            edges_path: dir.join("edges.csv"),
            sensitive_column: "sensitive".into(),
            label_column: "label".into(),
            feature_columns,
            delimiter: b',',
        }
    }

    fn validate(&self) -> Result<()> {
        if self.feature_columns.contains(&self.sensitive_column) {
            return Err(Error::Schema(format!(
                "sensitive column '{}' listed among feature columns",
                self.sensitive_column
            )));
        }
        if self.feature_columns.contains(&self.label_column) {
            return Err(Error::Schema(format!(
                "label column '{}' listed among feature columns",
                self.label_column
            )));
        }
        Ok(())
    }
}

fn parse_binary_cell(cell: &str, row: usize, what: &str) -> Result<BinaryAttr> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell {
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::Parse(format!(
            "row {row}: {what} value '{other}' is not 0, 1, or empty"
        ))),
    }
}

/// Load a graph from delimited node and edge files.
pub fn load_dataset(schema: &DatasetSchema) -> Result<Graph> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(&schema.nodes_path)
        .map_err(|e| Error::Parse(format!("{}: {e}", schema.nodes_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let sensitive_idx = col(&schema.sensitive_column)?;
    let label_idx = col(&schema.label_column)?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut sensitive = Vec::new();
    let mut n = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("row {}: {e}", row_no + 1)))?;
        for &fi in &feature_idx {
            let cell = record.get(fi).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "row {}: feature column '{}' value '{}' is not numeric",
                    row_no + 1,
                    headers.get(fi).unwrap_or(""),
                    cell
                ))
            })?;
            features.push(v);
        }
        sensitive.push(parse_binary_cell(
            record.get(sensitive_idx).unwrap_or(""),
            row_no + 1,
            "sensitive",
        )?);
        labels.push(parse_binary_cell(
            record.get(label_idx).unwrap_or(""),
            row_no + 1,
            "label",
        )?);
        n += 1;
    }
    let features = Array2::from_shape_vec((n, feature_idx.len()), features)
        .map_err(|e| Error::Shape(e.to_string()))?;

    let mut edge_reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(&schema.edges_path)
        .map_err(|e| Error::Parse(format!("{}: {e}", schema.edges_path.display())))?;
    let mut edges = Vec::new();
    for (row_no, record) in edge_reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("edge row {}: {e}", row_no + 1)))?;
        let src: usize = record
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("edge row {}: {e}", row_no + 1)))?;
        let dst: usize = record
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("edge row {}: {e}", row_no + 1)))?;
        edges.push((src, dst));
    }

    let graph = build_graph(features, &edges, Some(labels), Some(sensitive))?;
    log::info!(
        "loaded dataset: {} nodes, {} features, {} undirected edges",
        graph.n,
        graph.feature_dim(),
        graph.edges.len()
    );
    Ok(graph)
}

/// Write `nodes.csv` and `edges.csv` in the documented format.
pub fn save_dataset(graph: &Graph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let d = graph.feature_dim();
    let mut writer = csv::Writer::from_path(dir.join("nodes.csv"))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|i| format!("f{i}")));
    header.push("sensitive".into());
    header.push("label".into());
    writer
        .write_record(&header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let fmt = |a: BinaryAttr| match a {
        Some(true) => "1".to_string(),
        Some(false) => "0".to_string(),
        None => String::new(),
    };
    for i in 0..graph.n {
        let mut row = vec![i.to_string()];
        row.extend((0..d).map(|c| graph.features[[i, c]].to_string()));
        row.push(fmt(graph.sensitive[i]));
        row.push(fmt(graph.labels[i]));
        writer
            .write_record(&row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;

    let mut ewriter = csv::Writer::from_path(dir.join("edges.csv"))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    ewriter
        .write_record(["src", "dst"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for &(a, b) in &graph.edges {
        ewriter
            .write_record([a.to_string(), b.to_string()])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    ewriter
        .flush()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Standardize every column to mean 0, variance 1 (1/N convention), using
/// statistics from `stat_rows` but applying them to all rows. Zero-variance
/// columns map to all-zeros.
pub fn normalize_features_masked(x: &Array2<f64>, stat_rows: &[usize]) -> Result<Array2<f64>> {
    if stat_rows.is_empty() {
        return Err(Error::DegenerateInput(
            "normalization with no statistic rows".into(),
        ));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite feature value {bad}")));
    }
    let n_stat = stat_rows.len() as f64;
    let mut out = x.clone();
    for c in 0..x.ncols() {
        let mean = stat_rows.iter().map(|&r| x[[r, c]]).sum::<f64>() / n_stat;
        let var = stat_rows
            .iter()
            .map(|&r| (x[[r, c]] - mean).powi(2))
            .sum::<f64>()
            / n_stat;
        if var == 0.0 {
            for r in 0..x.nrows() {
                out[[r, c]] = 0.0;
            }
        } else {
            let std = var.sqrt();
            for r in 0..x.nrows() {
                out[[r, c]] = (x[[r, c]] - mean) / std;
            }
        }
    }
    Ok(out)
}

/// Whole-matrix standardization (statistics over every row).
pub fn normalize_features(x: &Array2<f64>) -> Result<Array2<f64>> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    normalize_features_masked(x, &rows)
}

/// Two-block stochastic block model with a planted label bias.
///
/// Sensitive attribute = block id. Feature 0 is standard normal in both
/// groups; the remaining dimensions are shifted by ±`GROUP_SHIFT` according to
/// the group. The fair latent is `sign(feature 0)`; the biased latent agrees
/// with the sensitive attribute at rate `(1 + BIAS_AGREEMENT)/2`. Each label
/// copies the biased latent with probability `label_bias`, else the fair
/// latent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub nodes_per_group: usize,
    pub intra_p: f64,
    pub inter_p: f64,
    pub feature_dim: usize,
    /// ρ: probability that a label copies the sensitive-correlated latent.
    pub label_bias: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            nodes_per_group: 500,
            intra_p: 0.05,
            inter_p: 0.005,
            feature_dim: 8,
            label_bias: 0.8,
            seed: 0,
        }
    }
}

const GROUP_SHIFT: f64 = 0.5;
/// Correlation between the biased latent and the sensitive attribute.
const BIAS_AGREEMENT: f64 = 0.3;
/// Feature 0 is a bimodal mixture so its sign is cleanly learnable.
const FAIR_FEATURE_SEPARATION: f64 = 1.5;
const FAIR_FEATURE_NOISE: f64 = 0.25;

pub fn gen_synthetic(config: &SyntheticConfig) -> Result<Graph> {
    if config.nodes_per_group < 2 {
        return Err(Error::Config("need at least 2 nodes per group".into()));
    }
    if config.feature_dim < 2 {
        return Err(Error::Config(
            "synthetic graphs need at least 2 feature dimensions".into(),
        ));
    }
    for (name, p) in [("intra_p", config.intra_p), ("inter_p", config.inter_p)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
        }
    }
    if !(0.0..=1.0).contains(&config.label_bias) {
        return Err(Error::Config(format!(
            "label_bias = {} outside [0, 1]",
            config.label_bias
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = 2 * config.nodes_per_group;
    let d = config.feature_dim;
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("valid normal");
    use rand_distr::Distribution;

    let sensitive: Vec<BinaryAttr> = (0..n)
        .map(|i| Some(i >= config.nodes_per_group))
        .collect();
    let mut features = Array2::zeros((n, d));
    for i in 0..n {
        let shift = if i < config.nodes_per_group {
            -GROUP_SHIFT
        } else {
            GROUP_SHIFT
        };
        let mode = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        features[[i, 0]] =
            mode * FAIR_FEATURE_SEPARATION + FAIR_FEATURE_NOISE * normal.sample(&mut rng);
        for c in 1..d {
            features[[i, c]] = normal.sample(&mut rng) + shift;
        }
    }

    let labels: Vec<BinaryAttr> = (0..n)
        .map(|i| {
            let s = i >= config.nodes_per_group;
            let fair = features[[i, 0]] > 0.0;
            let agree = rng.random::<f64>() < (1.0 + BIAS_AGREEMENT) / 2.0;
            let biased = if agree { s } else { !s };
            let label = if rng.random::<f64>() < config.label_bias {
                biased
            } else {
                fair
            };
            Some(label)
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same = (i < config.nodes_per_group) == (j < config.nodes_per_group);
            let p = if same { config.intra_p } else { config.inter_p };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    build_graph(features, &edges, Some(labels), Some(sensitive))
}

/// Serialize a report as pretty JSON.
pub fn save_report(report: &FairnessReport, path: &Path) -> Result<()> {
    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<FairnessReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ReportMetadata;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn normalize_one_n_convention() {
        let x = array![[1.0], [2.0], [3.0]];
        let out = normalize_features(&x).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert_relative_eq!(out[[0, 0]], -expected, max_relative = 1e-12);
        assert_relative_eq!(out[[0, 0]], -1.2247, max_relative = 1e-4);
        assert_relative_eq!(out[[1, 0]], 0.0, epsilon = 1e-12);
        assert_relative_eq!(out[[2, 0]], expected, max_relative = 1e-12);
    }

    #[test]
    fn normalize_constant_column_zeroed() {
        let x = array![[5.0], [5.0], [5.0]];
        let out = normalize_features(&x).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_idempotent_on_standardized() {
        let x = array![[-1.0], [0.0], [1.0]];
        // variance = 2/3, so standardize first:
        let once = normalize_features(&x).unwrap();
        let twice = normalize_features(&once).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_statistics_from_masked_rows() {
        let x = array![[0.0], [2.0], [100.0]];
        let out = normalize_features_masked(&x, &[0, 1]).unwrap();
        // mean 1, std 1 over rows {0,1}; row 2 transformed with those stats.
        assert_relative_eq!(out[[0, 0]], -1.0, max_relative = 1e-12);
        assert_relative_eq!(out[[1, 0]], 1.0, max_relative = 1e-12);
        assert_relative_eq!(out[[2, 0]], 99.0, max_relative = 1e-12);
    }

    #[test]
    fn synthetic_group_sizes_and_determinism() {
        let config = SyntheticConfig {
            nodes_per_group: 50,
            seed: 3,
            ..Default::default()
        };
        let g1 = gen_synthetic(&config).unwrap();
        let g2 = gen_synthetic(&config).unwrap();
        assert_eq!(g1.n, 100);
        assert_eq!(
            g1.sensitive.iter().filter(|s| **s == Some(true)).count(),
            50
        );
        assert_eq!(g1.edges, g2.edges);
        assert_eq!(g1.labels, g2.labels);
    }

    #[test]
    fn synthetic_unbiased_labels_uncorrelated_with_group() {
        // 5-seed average of |corr(label, sensitive)| at n = 2000, ρ = 0.
        let mut total = 0.0;
        for seed in 0..5 {
            let config = SyntheticConfig {
                nodes_per_group: 1000,
                label_bias: 0.0,
                seed,
                ..Default::default()
            };
            let g = gen_synthetic(&config).unwrap();
            let y: Vec<f64> = g.labels.iter().map(|l| f64::from(l.unwrap())).collect();
            let s: Vec<f64> = g.sensitive.iter().map(|v| f64::from(v.unwrap())).collect();
            let n = g.n as f64;
            let my = y.iter().sum::<f64>() / n;
            let ms = s.iter().sum::<f64>() / n;
            let cov = y
                .iter()
                .zip(s.iter())
                .map(|(a, b)| (a - my) * (b - ms))
                .sum::<f64>()
                / n;
            let vy = y.iter().map(|a| (a - my).powi(2)).sum::<f64>() / n;
            let vs = s.iter().map(|a| (a - ms).powi(2)).sum::<f64>() / n;
            total += (cov / (vy * vs).sqrt()).abs();
        }
        assert!(total / 5.0 <= 0.1, "mean |corr| = {}", total / 5.0);
    }

    #[test]
    fn synthetic_inter_edge_fraction_near_expectation() {
        let config = SyntheticConfig {
            nodes_per_group: 500,
            intra_p: 0.05,
            inter_p: 0.005,
            seed: 17,
            ..Default::default()
        };
        let g = gen_synthetic(&config).unwrap();
        let inter = g
            .edges
            .iter()
            .filter(|&&(a, b)| (a < 500) != (b < 500))
            .count() as f64;
        let frac = inter / g.edges.len() as f64;
        // E[intra] = 2·C(500,2)·0.05, E[inter] = 500·500·0.005 → 1/10.98.
        let expected = 1250.0 / (2.0 * 124_750.0 * 0.05 + 1250.0);
        assert!(
            (frac - expected).abs() / expected <= 0.2,
            "inter fraction {frac} vs expected {expected}"
        );
    }

    #[test]
    fn dataset_roundtrip() {
        let config = SyntheticConfig {
            nodes_per_group: 20,
            seed: 5,
            ..Default::default()
        };
        let mut g = gen_synthetic(&config).unwrap();
        // Punch a few unknowns through to exercise empty cells.
        g.labels[3] = None;
        g.sensitive[7] = None;
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&g, dir.path()).unwrap();
        let schema = DatasetSchema::standard(
            dir.path(),
            (0..g.feature_dim()).map(|i| format!("f{i}")).collect(),
        );
        let loaded = load_dataset(&schema).unwrap();
        assert_eq!(loaded.n, g.n);
        assert_eq!(loaded.edges, g.edges);
        assert_eq!(loaded.labels, g.labels);
        assert_eq!(loaded.sensitive, g.sensitive);
        assert_eq!(loaded.features, g.features);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("nodes.csv"), "id,f0,label\n0,1.0,1\n").unwrap();
        std::fs::write(dir.path().join("edges.csv"), "src,dst\n").unwrap();
        let schema = DatasetSchema::standard(dir.path(), vec!["f0".into()]);
        match load_dataset(&schema) {
            Err(Error::Schema(msg)) => assert!(msg.contains("sensitive")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_feature_is_parse_error_with_row() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("nodes.csv"),
            "id,f0,sensitive,label\n0,1.0,0,1\n1,abc,1,0\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("edges.csv"), "src,dst\n0,1\n").unwrap();
        let schema = DatasetSchema::standard(dir.path(), vec!["f0".into()]);
        match load_dataset(&schema) {
            Err(Error::Parse(msg)) => assert!(msg.contains("row 2"), "message: {msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn report_roundtrip_exact() {
        let report = FairnessReport {
            accuracy: 73.13,
            auc: Some(79.28),
            delta_sp: Some(0.43),
            delta_eo: None,
            individual_fairness: 0.08,
            group_if: vec![0.12, 0.05],
            max_ig: 0.12,
            epsilon_bound_check: Some(true),
            metadata: ReportMetadata {
                dataset: "synthetic".into(),
                seed: 7,
                config_hash: "abc".into(),
                node_count: 100,
                ..Default::default()
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        save_report(&report, &path).unwrap();
        let loaded = load_report(&path).unwrap();
        assert_eq!(loaded, report);
        assert_eq!(loaded.delta_eo, None);
        assert_eq!(loaded.accuracy, 73.13);
    }

    #[test]
    fn truncated_report_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        std::fs::write(&path, "{\"accuracy\": 50.0, \"auc\"").unwrap();
        assert!(matches!(load_report(&path), Err(Error::Parse(_))));
    }
}
