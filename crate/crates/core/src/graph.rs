//! Attributed graph representation: features, undirected edges, binary labels
//! and sensitive attributes (both possibly unobserved), split masks, and the
//! sensitive-group partition.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Per-node binary attribute that may be unobserved.
pub type BinaryAttr = Option<bool>;

pub fn attr_to_f64(a: BinaryAttr) -> Option<f64> {
    a.map(|b| if b { 1.0 } else { 0.0 })
}

/// Immutable attributed undirected graph. Adjacency is symmetric with a zero
/// diagonal; self-loops are dropped on construction.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n: usize,
    pub features: Array2<f64>,
    /// Unique undirected edges as (lower, upper) index pairs, sorted.
    pub edges: Vec<(usize, usize)>,
    pub adjacency: SparseMatrix,
    pub labels: Vec<BinaryAttr>,
    pub sensitive: Vec<BinaryAttr>,
}

impl Graph {
    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Indices of nodes with a known class label.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.labels[i].is_some()).collect()
    }

    /// Replace the feature matrix (e.g. after normalization).
    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.n {
            return Err(Error::Shape(format!(
                "feature rows {} != node count {}",
                features.nrows(),
                self.n
            )));
        }
        self.features = features;
        Ok(self)
    }
}

/// Train/validation/test masks plus the set of nodes whose sensitive
/// attribute is observed during training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub sensitive_labeled_mask: Vec<bool>,
}

impl Split {
    pub fn train_nodes(&self) -> Vec<usize> {
        mask_indices(&self.train_mask)
    }
    pub fn val_nodes(&self) -> Vec<usize> {
        mask_indices(&self.val_mask)
    }
    pub fn test_nodes(&self) -> Vec<usize> {
        mask_indices(&self.test_mask)
    }
    pub fn sensitive_labeled_nodes(&self) -> Vec<usize> {
        mask_indices(&self.sensitive_labeled_mask)
    }
}

pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// Nodes partitioned by sensitive attribute; group 1 is the protected group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub group_of: Vec<u8>,
    /// members[0] = unprotected (s = 0), members[1] = protected (s = 1),
    /// each sorted ascending.
    pub members: [Vec<usize>; 2],
}

impl GroupPartition {
    pub fn n_groups(&self) -> usize {
        2
    }
}

/// Assemble a validated graph from raw parts. Edges are deduplicated and
/// symmetrized; self-loops are dropped.
pub fn build_graph(
    features: Array2<f64>,
    edge_list: &[(usize, usize)],
    labels: Option<Vec<BinaryAttr>>,
    sensitive: Option<Vec<BinaryAttr>>,
) -> Result<Graph> {
    let n = features.nrows();
    if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite feature value {bad}")));
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(edge_list.len());
    for &(a, b) in edge_list {
        if a >= n || b >= n {
            return Err(Error::StructuralInput(format!(
                "edge ({a}, {b}) out of range for n = {n}"
            )));
        }
        if a == b {
            continue; // self-loop dropped
        }
        edges.push((a.min(b), a.max(b)));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut triplets = Vec::with_capacity(edges.len() * 2);
    for &(a, b) in &edges {
        triplets.push((a, b, 1.0));
        triplets.push((b, a, 1.0));
    }
    let adjacency = SparseMatrix::from_triplets(n, &triplets)?;

    let labels = match labels {
        Some(l) => {
            if l.len() != n {
                return Err(Error::Shape(format!("labels length {} != n {}", l.len(), n)));
            }
            l
        }
        None => vec![None; n],
    };
    let sensitive = match sensitive {
        Some(s) => {
            if s.len() != n {
                return Err(Error::Shape(format!(
                    "sensitive length {} != n {}",
                    s.len(),
                    n
                )));
            }
            s
        }
        None => vec![None; n],
    };

    Ok(Graph {
        n,
        features,
        edges,
        adjacency,
        labels,
        sensitive,
    })
}

/// Deterministic split of the labeled nodes into train/val/test by the given
/// ratios, plus a budget of observed sensitive labels.
///
/// Validation and test sizes are rounded down; train receives the remainder.
/// The sensitive budget is drawn from training nodes with a known sensitive
/// attribute; if the budget exceeds that pool it spills over to the remaining
/// known-sensitive nodes so a budget of `n` observes everyone.
pub fn split_nodes(
    graph: &Graph,
    ratios: (f64, f64, f64),
    sensitive_budget: usize,
    seed: u64,
) -> Result<Split> {
    let (r_train, r_val, r_test) = ratios;
    if r_train <= 0.0 || r_val <= 0.0 || r_test <= 0.0 {
        return Err(Error::Config("split ratios must be positive".into()));
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios sum to {}, expected 1",
            r_train + r_val + r_test
        )));
    }
    if sensitive_budget > graph.n {
        return Err(Error::Config(format!(
            "sensitive budget {} exceeds node count {}",
            sensitive_budget, graph.n
        )));
    }

    let mut labeled = graph.labeled_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labeled.shuffle(&mut rng);

    let m = labeled.len();
    let n_val = (m as f64 * r_val).floor() as usize;
    let n_test = (m as f64 * r_test).floor() as usize;
    let n_train = m - n_val - n_test;

    let mut train_mask = vec![false; graph.n];
    let mut val_mask = vec![false; graph.n];
    let mut test_mask = vec![false; graph.n];
    for &i in &labeled[..n_train] {
        train_mask[i] = true;
    }
    for &i in &labeled[n_train..n_train + n_val] {
        val_mask[i] = true;
    }
    for &i in &labeled[n_train + n_val..] {
        test_mask[i] = true;
    }

    let mut primary: Vec<usize> = labeled[..n_train]
        .iter()
        .copied()
        .filter(|&i| graph.sensitive[i].is_some())
        .collect();
    primary.sort_unstable();
    let mut spill: Vec<usize> = (0..graph.n)
        .filter(|&i| graph.sensitive[i].is_some() && !train_mask[i])
        .collect();
    if sensitive_budget > primary.len() + spill.len() {
        return Err(Error::Config(format!(
            "sensitive budget {} exceeds the {} nodes with known sensitive attribute",
            sensitive_budget,
            primary.len() + spill.len()
        )));
    }
    primary.shuffle(&mut rng);
    let mut sensitive_labeled_mask = vec![false; graph.n];
    let take_primary = sensitive_budget.min(primary.len());
    for &i in &primary[..take_primary] {
        sensitive_labeled_mask[i] = true;
    }
    if sensitive_budget > take_primary {
        spill.shuffle(&mut rng);
        for &i in &spill[..sensitive_budget - take_primary] {
            sensitive_labeled_mask[i] = true;
        }
    }

    Ok(Split {
        train_mask,
        val_mask,
        test_mask,
        sensitive_labeled_mask,
    })
}

/// Partition nodes by a fully observed sensitive attribute.
pub fn partition_by_sensitive(sensitive: &[BinaryAttr]) -> Result<GroupPartition> {
    let mut group_of = vec![0u8; sensitive.len()];
    let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in sensitive.iter().enumerate() {
        match s {
            Some(true) => {
                group_of[i] = 1;
                members[1].push(i);
            }
            Some(false) => {
                group_of[i] = 0;
                members[0].push(i);
            }
            None => {
                return Err(Error::Validation(format!(
                    "sensitive attribute unknown at node {i}"
                )));
            }
        }
    }
    Ok(GroupPartition { group_of, members })
}
