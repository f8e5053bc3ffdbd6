use alloc::vec;
use alloc::vec::Vec;

use super::LinalgError;
use crate::math::abs;

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on [`build`](Self::build).
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * m` with its origin shifted to `(row0, col0)`.
    pub fn push_block(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        for i in 0..m.nrows() {
            for (j, v) in m.row(i) {
                self.push(row0 + i, col0 + j, scale * v);
            }
        }
    }

    /// Adds `scale * mᵀ` with its origin shifted to `(row0, col0)`.
    pub fn push_block_transposed(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        for i in 0..m.nrows() {
            for (j, v) in m.row(i) {
                self.push(row0 + j, col0 + i, scale * v);
            }
        }
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols);
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "mul_vec: input length");
        assert_eq!(y.len(), self.nrows, "mul_vec: output length");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `Aᵀ x`
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "mul_vec_transpose: input length");
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    /// `yᵀ A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        assert_eq!(x.len(), self.ncols);
        let mut s = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let mut r = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.values[k] * x[self.col_idx[k]];
            }
            s += yi * r;
        }
        s
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    /// Selects rows and columns; `rows[i]` / `cols[j]` give the source index
    /// of the new row `i` / column `j`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &old_i) in rows.iter().enumerate() {
            for (j, v) in self.row(old_i) {
                if col_map[j] != usize::MAX {
                    t.push((new_i, col_map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`, with the first
    /// offending index pair if it exceeds `tol`.
    pub fn check_symmetric(&self, tol: f64) -> Result<(), LinalgError> {
        if self.nrows != self.ncols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.nrows,
                found: self.ncols,
            });
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if abs(v - self.get(j, i)) > tol * scale {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

/// Square matrix whose stored pattern and values are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym(CsrMatrix);

impl SparseSym {
    pub const SYMMETRY_TOL: f64 = 1e-14;

    pub fn new(m: CsrMatrix) -> Result<Self, LinalgError> {
        m.check_symmetric(Self::SYMMETRY_TOL)?;
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CsrMatrix {
        self.0
    }
}

impl core::ops::Deref for SparseSym {
    type Target = CsrMatrix;
    fn deref(&self) -> &CsrMatrix {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn transpose_products() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 4.0]]);
        let x = [1.0, 2.0];
        assert_eq!(m.mul_vec_transpose(&x), vec![1.0, 0.0, 8.0]);
        assert_eq!(m.transpose().mul_vec(&x), vec![1.0, 0.0, 8.0]);
        assert_eq!(m.bilinear(&x, &[1.0, 1.0, 1.0]), 3.0 + 6.0);
    }

    #[test]
    fn symmetry_check() {
        let s = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!(SparseSym::new(s).is_ok());
        let ns = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 2.0]]);
        assert!(matches!(SparseSym::new(ns), Err(LinalgError::NotSymmetric { .. })));
    }

    #[test]
    fn submatrix_selects() {
        let m = CsrMatrix::from_dense(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ]);
        let s = m.submatrix(&[2, 0], &[1, 2]);
        assert_eq!(s.to_dense(), vec![vec![8.0, 9.0], vec![2.0, 3.0]]);
    }
}
