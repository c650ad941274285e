use std::collections::HashSet;

use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Square sparse matrix in CSR layout. Entries within a row keep the order
/// in which they were supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseAdjacency {
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut counts = vec![0usize; n + 1];
        for &(r, c, w) in entries {
            if r >= n || c >= n {
                return shape_err(format!("entry ({r}, {c}) outside {n}x{n}"));
            }
            if !w.is_finite() {
                return Err(Error::Config(format!("non-finite weight at ({r}, {c})")));
            }
            if !seen.insert((r, c)) {
                return shape_err(format!("duplicate entry ({r}, {c})"));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; entries.len()];
        let mut weights = vec![0.0; entries.len()];
        for &(r, c, w) in entries {
            let slot = next[r];
            col_idx[slot] = c;
            weights[slot] = w;
            next[r] += 1;
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            weights,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            weights: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// (col, weight) pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, w)| (r, c, w)))
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.row(r).find(|&(col, _)| col == c).map(|(_, w)| w)
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n, self.n);
        for (r, c, w) in self.entries() {
            t.set(r, c, w);
        }
        t
    }

    /// `self * h`.
    pub fn spmm(&self, h: &Tensor) -> Result<Tensor> {
        if h.rows() != self.n {
            return shape_err(format!("spmm {}x{} by {}x{}", self.n, self.n, h.rows(), h.cols()));
        }
        let cols = h.cols();
        let mut out = Tensor::zeros(self.n, cols);
        for r in 0..self.n {
            let dst = out.row_mut(r);
            for (c, w) in self.row(r) {
                for (d, s) in dst.iter_mut().zip(h.row(c)) {
                    *d += w * s;
                }
            }
        }
        Ok(out)
    }

    /// Accumulates `selfᵀ * g` into `acc`.
    pub(crate) fn spmm_transpose_into(&self, g: &Tensor, acc: &mut Tensor) {
        for r in 0..self.n {
            let src = g.row(r).to_vec();
            for (c, w) in self.row(r) {
                for (d, s) in acc.row_mut(c).iter_mut().zip(&src) {
                    *d += w * s;
                }
            }
        }
    }
}
