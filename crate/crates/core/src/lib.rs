//! Fair graph learning for node classification: a graph-attention classifier
//! trained against group-fairness pressure (adversarial debiasing plus
//! covariance constraints for statistical parity and equal opportunity) and a
//! within-group individual-fairness penalty built on a node-similarity
//! Laplacian. Includes a sensitive-attribute estimator for semi-supervised
//! sensitive labels, a full fairness metric suite, and synthetic biased-graph
//! generation for experiments.

pub mod autograd;
pub mod data;
pub mod error;
pub mod graph;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod similarity;
pub mod sparse;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{build_graph, partition_by_sensitive, split_nodes, Graph, GroupPartition, Split};
pub use similarity::{
    build_similarity, laplacian, LaplacianMatrix, SimilarityMatrix, SimilarityMethod,
};
pub use sparse::SparseMatrix;
