//! Sparse assembly, compressed storage and a multifrontal LU factorization.

mod lu;
mod ordering;

pub use lu::{FactorStats, SparseLu, SymbolicLu};
pub use ordering::{GridLayout, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered `(row, col, value)` entries of a square matrix. Duplicates are
/// summed by [`compress`].
#[derive(Clone, Debug, Default)]
pub struct TripletBuffer {
    dim: usize,
    entries: Vec<(u32, u32, f64)>,
    out_of_range: Option<(usize, usize)>,
}

impl TripletBuffer {
    pub fn new(dim: usize) -> Self {
        Self::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        assert!(dim <= u32::MAX as usize, "matrix dimension {dim} too large");
        Self {
            dim,
            entries: Vec::with_capacity(cap),
            out_of_range: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if row >= self.dim || col >= self.dim {
            self.out_of_range.get_or_insert((row, col));
            return;
        }
        self.entries.push((row as u32, col as u32, value));
    }

    pub fn extend(&mut self, other: TripletBuffer) {
        assert_eq!(self.dim, other.dim, "triplet buffers of different dimension");
        if self.out_of_range.is_none() {
            self.out_of_range = other.out_of_range;
        }
        self.entries.extend(other.entries);
    }
}

/// Square matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

/// Sums duplicates and drops exact zeros. Within a row, duplicates are summed
/// in a canonical order so the result does not depend on insertion order.
pub fn compress(buf: TripletBuffer) -> Result<SparseMatrix> {
    if let Some((row, col)) = buf.out_of_range {
        return Err(Error::OutOfRange { row, col, dim: buf.dim });
    }
    let n = buf.dim;
    let mut counts = vec![0usize; n + 1];
    for &(r, _, _) in &buf.entries {
        counts[r as usize + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let starts = counts;
    let mut fill = starts.clone();
    let mut slots: Vec<(u32, f64)> = vec![(0, 0.0); buf.entries.len()];
    for &(r, c, v) in &buf.entries {
        let p = &mut fill[r as usize];
        slots[*p] = (c, v);
        *p += 1;
    }
    drop(buf);

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(slots.len());
    let mut values = Vec::with_capacity(slots.len());
    row_ptr.push(0);
    for i in 0..n {
        let row = &mut slots[starts[i]..starts[i + 1]];
        row.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut k = 0;
        while k < row.len() {
            let c = row[k].0;
            let mut s = 0.0;
            while k < row.len() && row[k].0 == c {
                s += row[k].1;
                k += 1;
            }
            if s != 0.0 {
                col_idx.push(c);
                values.push(s);
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix {
        dim: n,
        row_ptr,
        col_idx,
        values,
    })
}

impl SparseMatrix {
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut buf = TripletBuffer::with_capacity(dim, triplets.len());
        for &(r, c, v) in triplets {
            buf.push(r, c, v);
        }
        compress(buf)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b]
            .iter()
            .zip(&self.values[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[a..b].binary_search(&(j as u32)) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub(crate) fn raw(&self) -> (&[usize], &[u32], &[f64]) {
        (&self.row_ptr, &self.col_idx, &self.values)
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.dim == other.dim && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn transpose(&self) -> SparseMatrix {
        let n = self.dim;
        let mut ptr = vec![0usize; n + 1];
        for &c in &self.col_idx {
            ptr[c as usize + 1] += 1;
        }
        for i in 0..n {
            ptr[i + 1] += ptr[i];
        }
        let mut fill = ptr.clone();
        let mut idx = vec![0u32; self.nnz()];
        let mut val = vec![0.0; self.nnz()];
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k] as usize;
                idx[fill[c]] = i as u32;
                val[fill[c]] = self.values[k];
                fill[c] += 1;
            }
        }
        SparseMatrix {
            dim: n,
            row_ptr: ptr,
            col_idx: idx,
            values: val,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn sparsity_report(&self) -> SparsityReport {
        let n = self.dim;
        let nnz = self.nnz();
        let cells = (n as f64) * (n as f64);
        SparsityReport {
            dim: n,
            nnz,
            nnz_per_row: if n == 0 { 0.0 } else { nnz as f64 / n as f64 },
            max_row_nnz: (0..n).map(|i| self.row_nnz(i)).max().unwrap_or(0),
            density: if n == 0 { 0.0 } else { nnz as f64 / cells },
            sparsity: if n == 0 { 1.0 } else { 1.0 - nnz as f64 / cells },
        }
    }
}

/// Storage statistics of an assembled matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub dim: usize,
    pub nnz: usize,
    /// For a crossbar Jacobian over `N^2` unknowns this is `nnz / N^2`.
    pub nnz_per_row: f64,
    pub max_row_nnz: usize,
    pub density: f64,
    pub sparsity: f64,
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let m = SparseMatrix::from_triplets(
            3,
            &[
                (0, 0, 1.0),
                (0, 0, 2.0),
                (1, 2, 5.0),
                (1, 2, -5.0),
                (2, 1, 0.0),
                (2, 2, 4.0),
            ],
        )
        .unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.get(2, 2), 4.0);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let err = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (2, 0, 1.0)]).unwrap_err();
        assert_eq!(err, Error::OutOfRange { row: 2, col: 0, dim: 2 });
    }

    #[test]
    fn empty_matrix() {
        let m = SparseMatrix::from_triplets(4, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.sparsity_report().sparsity, 1.0);
    }

    #[test]
    fn transpose_and_matvec() {
        let m = SparseMatrix::from_triplets(3, &[(0, 1, 2.0), (2, 0, -1.0), (1, 1, 3.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 2.0);
        assert_eq!(t.get(0, 2), -1.0);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![4.0, 6.0, -1.0]);
        assert_eq!(m.norm_inf(), 3.0);
    }

    proptest! {
        #[test]
        fn compression_is_insertion_order_independent(
            entries in proptest::collection::vec((0usize..6, 0usize..6, -4i32..5), 0..60),
            seed in any::<u64>(),
        ) {
            let trip: Vec<(usize, usize, f64)> =
                entries.iter().map(|&(r, c, v)| (r, c, v as f64 * 0.37)).collect();
            let mut shuffled = trip.clone();
            // deterministic Fisher-Yates from the seed
            let mut s = seed | 1;
            for i in (1..shuffled.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                shuffled.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let a = SparseMatrix::from_triplets(6, &trip).unwrap();
            let b = SparseMatrix::from_triplets(6, &shuffled).unwrap();
            prop_assert_eq!(&a, &b);
            let mut dense = [[0.0f64; 6]; 6];
            for &(r, c, v) in &trip { dense[r][c] += v; }
            for r in 0..6 { for c in 0..6 {
                prop_assert!((a.get(r, c) - dense[r][c]).abs() < 1e-12);
            }}
            prop_assert!(a.values.iter().all(|v| *v != 0.0));
        }
    }
}
