#![allow(dead_code)]

use biot_core::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};

pub fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i][j])
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Relative max-norm distance.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    max_diff(a, b) / max_abs(b).max(1e-300)
}
