//! Compressed sparse row matrix used for adjacency, similarity, and Laplacian
//! storage. All matrices in this crate are square and (except Laplacians)
//! nonnegative; symmetry is maintained by the constructors that need it.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout. Stored entries may be zero only for
/// Laplacian diagonals; similarity constructors never store explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Duplicate coordinates are an
    /// error; entries with value exactly zero are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::StructuralInput(format!(
                    "entry ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite entry at ({i}, {j})")));
            }
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::StructuralInput(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Like `from_triplets` but keeps explicit zeros (Laplacian diagonals of
    /// isolated nodes).
    pub fn from_triplets_keep_zeros(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut shifted: Vec<(usize, usize, f64)> = triplets.to_vec();
        // Route through from_triplets by replacing zeros with a sentinel, then
        // restoring. Simpler: inline duplicate of the logic without the filter.
        shifted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in shifted.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::StructuralInput(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, j, v) in &shifted {
            if i >= n || j >= n {
                return Err(Error::StructuralInput(format!(
                    "entry ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite entry at ({i}, {j})")));
            }
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = shifted.iter().map(|e| e.1).collect();
        let values = shifted.iter().map(|e| e.2).collect();
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals.iter()).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum::<f64>())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.iter().all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol)
    }

    /// Dense product `self · m`.
    pub fn matmul_dense(&self, m: &Array2<f64>) -> Array2<f64> {
        assert_eq!(m.nrows(), self.n, "spmm dimension mismatch");
        let d = m.ncols();
        let mut out = Array2::zeros((self.n, d));
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals.iter()) {
                for c in 0..d {
                    out[[i, c]] += v * m[[j, c]];
                }
            }
        }
        out
    }

    /// Quadratic form `Tr(Zᵀ · self · Z)`.
    pub fn quad_form(&self, z: &Array2<f64>) -> f64 {
        assert_eq!(z.nrows(), self.n, "quad_form dimension mismatch");
        let d = z.ncols();
        let mut acc = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals.iter()) {
                let mut dot = 0.0;
                for c in 0..d {
                    dot += z[[i, c]] * z[[j, c]];
                }
                acc += v * dot;
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.iter() {
            out[[i, j]] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_roundtrip() {
        let m = SparseMatrix::from_triplets(3, &[(0, 1, 2.0), (1, 0, 2.0), (2, 2, 1.5)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn zero_entries_dropped() {
        let m = SparseMatrix::from_triplets(2, &[(0, 1, 0.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn duplicate_rejected() {
        let r = SparseMatrix::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseMatrix::from_triplets(2, &[(0, 5, 1.0)]).is_err());
    }

    #[test]
    fn matmul_matches_dense() {
        let m = SparseMatrix::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 3.0)]).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let got = m.matmul_dense(&x);
        let want = m.to_dense().dot(&x);
        assert!((&got - &want).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn quad_form_matches_dense() {
        let m = SparseMatrix::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0), (2, 2, 2.0)]).unwrap();
        let z = array![[1.0], [2.0], [3.0]];
        let dense = m.to_dense();
        let want = z.t().dot(&dense).dot(&z)[[0, 0]];
        assert!((m.quad_form(&z) - want).abs() < 1e-12);
    }
}
