//! Node-similarity matrix construction and its Laplacian.
//!
//! The similarity matrix drives every individual-fairness quantity. Each node
//! keeps its top-k most similar peers (ties broken toward the lower index),
//! the result is symmetrized by elementwise max, and negative similarities
//! are clipped to zero before selection so stored entries are strictly
//! positive.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityMethod {
    /// Cosine similarity of feature rows.
    Cosine,
    /// Jaccard coefficient of the nonzero supports of the rows (use adjacency
    /// rows as input for structural similarity).
    AdjacencyJaccard,
}

/// Sparse symmetric nonnegative similarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: SparseMatrix,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.entries.n()
    }

    /// Number of stored nonzero entries, counting both directions of each
    /// symmetric pair.
    pub fn nnz(&self) -> usize {
        self.entries.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter()
    }

    pub fn as_sparse(&self) -> &SparseMatrix {
        &self.entries
    }

    /// Validate and wrap a sparse matrix as a similarity matrix.
    pub fn from_sparse(entries: SparseMatrix) -> Result<Self> {
        for (i, j, v) in entries.iter() {
            if i == j {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            if v < 0.0 {
                return Err(Error::Validation(format!(
                    "negative similarity {v} at ({i}, {j})"
                )));
            }
        }
        if !entries.is_symmetric(0.0) {
            return Err(Error::Validation("similarity matrix not symmetric".into()));
        }
        Ok(Self { entries })
    }

    /// Restrict to rows/columns inside `members` (ascending node indices),
    /// reindexed to 0..members.len(). Returns the submatrix and its ordered
    /// nonzero pair count.
    pub fn restrict(&self, members: &[usize]) -> (SparseMatrix, usize) {
        let mut local = vec![usize::MAX; self.n()];
        for (li, &gi) in members.iter().enumerate() {
            local[gi] = li;
        }
        let mut triplets = Vec::new();
        for &gi in members {
            let (cols, vals) = self.entries.row(gi);
            for (&gj, &v) in cols.iter().zip(vals.iter()) {
                if local[gj] != usize::MAX {
                    triplets.push((local[gi], local[gj], v));
                }
            }
        }
        let nnz = triplets.len();
        let sub = SparseMatrix::from_triplets(members.len(), &triplets)
            .expect("restriction of a valid similarity matrix is valid");
        (sub, nnz)
    }
}

/// Laplacian `L = D - M` of a similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: SparseMatrix,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.entries.n()
    }

    pub fn as_sparse(&self) -> &SparseMatrix {
        &self.entries
    }

    /// `Tr(Zᵀ L Z)`.
    pub fn quad_form(&self, z: &Array2<f64>) -> f64 {
        self.entries.quad_form(z)
    }
}

/// `L = D - M` with `D = diag(row sums of M)`.
pub fn laplacian(m: &SimilarityMatrix) -> LaplacianMatrix {
    let n = m.n();
    let degrees = m.as_sparse().row_sums();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(m.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, degrees[i]));
    }
    for (i, j, v) in m.iter() {
        triplets.push((i, j, -v));
    }
    let entries = SparseMatrix::from_triplets_keep_zeros(n, &triplets)
        .expect("Laplacian triplets are structurally valid");
    LaplacianMatrix { entries }
}

/// Build the top-k similarity matrix from a feature matrix.
///
/// Rows with zero norm (cosine) or empty support (Jaccard) produce an all-zero
/// similarity row before symmetrization. Zero similarities are never stored,
/// so a node may end up with fewer than `k` neighbors.
pub fn build_similarity(
    features: &Array2<f64>,
    method: SimilarityMethod,
    k: usize,
) -> Result<SimilarityMatrix> {
    let n = features.nrows();
    if k == 0 {
        return Err(Error::Config("neighbor count k must be >= 1".into()));
    }
    if k >= n {
        return Err(Error::Config(format!(
            "neighbor count k = {k} must be < node count n = {n}"
        )));
    }
    if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite feature value {bad}")));
    }

    let rows: Vec<Vec<(usize, f64)>> = match method {
        SimilarityMethod::Cosine => {
            let norms: Vec<f64> = (0..n)
                .map(|i| features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    if norms[i] == 0.0 {
                        return Vec::new();
                    }
                    let ri = features.row(i);
                    let mut sims: Vec<(usize, f64)> = Vec::with_capacity(n - 1);
                    for j in 0..n {
                        if j == i || norms[j] == 0.0 {
                            continue;
                        }
                        let dot: f64 = ri
                            .iter()
                            .zip(features.row(j).iter())
                            .map(|(a, b)| a * b)
                            .sum();
                        let cos = (dot / (norms[i] * norms[j])).max(0.0);
                        if cos > 0.0 {
                            sims.push((j, cos));
                        }
                    }
                    top_k(sims, k)
                })
                .collect()
        }
        SimilarityMethod::AdjacencyJaccard => {
            let supports: Vec<Vec<usize>> = (0..n)
                .map(|i| {
                    features
                        .row(i)
                        .iter()
                        .enumerate()
                        .filter_map(|(c, &v)| (v != 0.0).then_some(c))
                        .collect()
                })
                .collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    if supports[i].is_empty() {
                        return Vec::new();
                    }
                    let mut sims = Vec::new();
                    for j in 0..n {
                        if j == i || supports[j].is_empty() {
                            continue;
                        }
                        let inter = sorted_intersection_len(&supports[i], &supports[j]);
                        if inter == 0 {
                            continue;
                        }
                        let union = supports[i].len() + supports[j].len() - inter;
                        sims.push((j, inter as f64 / union as f64));
                    }
                    top_k(sims, k)
                })
                .collect()
        }
    };

    // Symmetrize by elementwise max.
    let mut pair_max: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            let key = (i.min(j), i.max(j));
            let slot = pair_max.entry(key).or_insert(0.0);
            if v > *slot {
                *slot = v;
            }
        }
    }
    let mut triplets = Vec::with_capacity(pair_max.len() * 2);
    for (&(a, b), &v) in &pair_max {
        triplets.push((a, b, v));
        triplets.push((b, a, v));
    }
    SimilarityMatrix::from_sparse(SparseMatrix::from_triplets(n, &triplets)?)
}

/// Keep the k largest (value, then lower index wins ties) entries.
fn top_k(mut sims: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    sims.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("similarities are finite")
            .then(a.0.cmp(&b.0))
    });
    sims.truncate(k);
    sims
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut ia, mut ib, mut count) = (0, 0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                ia += 1;
                ib += 1;
            }
        }
    }
    count
}

/// Write as coordinate-list text: one `i j value` line per stored entry,
/// sorted by (i, j).
pub fn save_similarity(m: &SimilarityMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (i, j, v) in m.iter() {
        writeln!(out, "{i} {j} {v}").expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_similarity(path: &Path, n: usize) -> Result<SimilarityMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut triplets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "similarity line {}: expected 3 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("similarity line {}: {e}", lineno + 1)))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| Error::Parse(format!("similarity line {}: {e}", lineno + 1)))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|e| Error::Parse(format!("similarity line {}: {e}", lineno + 1)))?;
        triplets.push((i, j, v));
    }
    SimilarityMatrix::from_sparse(SparseMatrix::from_triplets(n, &triplets)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn identical_rows_cosine_one() {
        let f = array![[1.0, 2.0], [1.0, 2.0]];
        let m = build_similarity(&f, SimilarityMethod::Cosine, 1).unwrap();
        assert_relative_eq!(m.get(0, 1), 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.get(1, 0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_rows_clipped_to_zero() {
        let f = array![[1.0, 0.0], [0.0, 1.0]];
        let m = build_similarity(&f, SimilarityMethod::Cosine, 1).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn tie_breaks_toward_lower_index() {
        // Brute-force all-pairs cosine oracle for the 3-node instance.
        let f = array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let m = build_similarity(&f, SimilarityMethod::Cosine, 1).unwrap();
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(m.get(0, 1), expected, max_relative = 1e-12);
        assert_relative_eq!(m.get(1, 0), expected, max_relative = 1e-12);
        // Node 2 still picks node 1, so (1,2) is present after symmetrization.
        assert_relative_eq!(m.get(1, 2), expected, max_relative = 1e-12);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn k_too_large_rejected() {
        let f = array![[1.0], [2.0]];
        assert!(build_similarity(&f, SimilarityMethod::Cosine, 2).is_err());
    }

    #[test]
    fn zero_norm_row_gets_no_neighbors_of_its_own() {
        let f = array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
        let m = build_similarity(&f, SimilarityMethod::Cosine, 2).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(m.get(1, 2) > 0.0);
    }

    #[test]
    fn jaccard_on_binary_rows() {
        let f = array![[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        let m = build_similarity(&f, SimilarityMethod::AdjacencyJaccard, 2).unwrap();
        // |{0}| / |{0,1,2}| = 1/3 for the (0,1) pair.
        assert_relative_eq!(m.get(0, 1), 1.0 / 3.0, max_relative = 1e-12);
        // (1,2): share column 2 of supports {0,2} and {2}: 1/2.
        assert_relative_eq!(m.get(1, 2), 0.5, max_relative = 1e-12);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn laplacian_two_node_chain() {
        let m = SimilarityMatrix::from_sparse(
            SparseMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap(),
        )
        .unwrap();
        let l = laplacian(&m);
        let dense = l.as_sparse().to_dense();
        assert_eq!(dense, array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn laplacian_of_empty_similarity_is_zero() {
        let m = SimilarityMatrix::from_sparse(SparseMatrix::zero(3)).unwrap();
        let l = laplacian(&m);
        assert_eq!(l.as_sparse().to_dense(), Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn laplacian_quad_form_matches_pairwise_sum() {
        // x^T L x = ½ Σ_ij M[i,j] (x_i - x_j)^2 on a random 20-node instance.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 20;
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.3 {
                    let v = rng.random::<f64>();
                    triplets.push((i, j, v));
                    triplets.push((j, i, v));
                }
            }
        }
        let m = SimilarityMatrix::from_sparse(SparseMatrix::from_triplets(n, &triplets).unwrap())
            .unwrap();
        let l = laplacian(&m);
        for _ in 0..10 {
            let x = Array2::from_shape_fn((n, 1), |_| rng.random::<f64>() * 2.0 - 1.0);
            let quad = l.quad_form(&x);
            let mut pairwise = 0.0;
            for (i, j, v) in m.iter() {
                let d = x[[i, 0]] - x[[j, 0]];
                pairwise += v * d * d;
            }
            pairwise *= 0.5;
            assert_relative_eq!(quad, pairwise, max_relative = 1e-9);
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let f = Array2::from_shape_fn((15, 4), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let m = build_similarity(&f, SimilarityMethod::Cosine, 3).unwrap();
        let l = laplacian(&m);
        for (i, s) in l.as_sparse().row_sums().iter().enumerate() {
            let degree = m.as_sparse().row(i).1.iter().sum::<f64>();
            assert!(s.abs() <= 1e-9 * degree.max(1.0), "row {i} sums to {s}");
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let f = array![[1.0, 0.5], [0.9, 0.4], [0.1, 0.8], [0.2, 0.9]];
        let m = build_similarity(&f, SimilarityMethod::Cosine, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        save_similarity(&m, &path).unwrap();
        let loaded = load_similarity(&path, 4).unwrap();
        assert_eq!(m.nnz(), loaded.nnz());
        for (i, j, v) in m.iter() {
            assert_eq!(loaded.get(i, j), v);
        }
    }

    #[test]
    fn restrict_counts_ordered_pairs() {
        let m = SimilarityMatrix::from_sparse(
            SparseMatrix::from_triplets(
                4,
                &[
                    (0, 1, 0.5),
                    (1, 0, 0.5),
                    (2, 3, 0.25),
                    (3, 2, 0.25),
                    (0, 3, 0.1),
                    (3, 0, 0.1),
                ],
            )
            .unwrap(),
        )
        .unwrap();
        let (sub, nnz) = m.restrict(&[0, 1]);
        assert_eq!(nnz, 2);
        assert_eq!(sub.get(0, 1), 0.5);
        assert_eq!(sub.get(1, 0), 0.5);
    }
}
