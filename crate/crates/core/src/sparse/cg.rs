use alloc::vec;
use alloc::vec::Vec;

use super::{LinalgError, SparseSym};
use crate::math::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
    /// Defaults to `10 · dim` when `None`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
///
/// `kernel` holds Euclidean-orthonormal vectors spanning a known null space;
/// the right-hand side, iterates and search directions are kept orthogonal to
/// it, so singular but consistent systems (pure Neumann problems) converge to
/// the minimum-norm solution.
pub fn cg(a: &SparseSym, b: &[f64], kernel: &[Vec<f64>], opts: CgOptions) -> Result<CgOutcome, LinalgError> {
    let n = a.dim();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(LinalgError::InvalidInput("CG tolerance must be positive"));
    }
    let project = |v: &mut [f64]| {
        for k in kernel {
            let c = dot(k, v);
            for (vi, ki) in v.iter_mut().zip(k) {
                *vi -= c * ki;
            }
        }
    };
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = norm2(&r);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        project(&mut z);
        z
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinalgError::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = norm2(&r) / bnorm;
        if rel <= opts.tol {
            // Confirm against the true residual to guard against drift.
            let mut ax = a.mul_vec(&x);
            project(&mut ax);
            let true_r: Vec<f64> = {
                let mut bb = b.to_vec();
                project(&mut bb);
                bb.iter().zip(&ax).map(|(b, a)| b - a).collect()
            };
            let true_rel = norm2(&true_r) / bnorm;
            if true_rel <= opts.tol {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    relative_residual: true_rel,
                });
            }
            r = true_r;
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NotConverged {
        iterations: max_iter,
        residual: rel,
    })
}

/// Solves `A x = b` for symmetric positive definite `A` to relative residual `tol`.
pub fn solve_spd(a: &SparseSym, b: &[f64], tol: f64) -> Result<Vec<f64>, LinalgError> {
    cg(a, b, &[], CgOptions { tol, max_iter: None }).map(|o| o.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_returns_rhs() {
        let a = SparseSym::new(CsrMatrix::identity(4)).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5];
        let x = solve_spd(&a, &b, 1e-12).unwrap();
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn tridiagonal_three() {
        let a = SparseSym::new(CsrMatrix::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]))
        .unwrap();
        let x = solve_spd(&a, &[1.0, 1.0, 1.0], 1e-12).unwrap();
        for (u, v) in x.iter().zip(&[1.5, 2.0, 1.5]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseSym::new(CsrMatrix::from_triplets(n, n, t)).unwrap();
        let err = cg(&a, &vec![1.0; n], &[], CgOptions { tol: 1e-12, max_iter: Some(3) }).unwrap_err();
        assert!(matches!(err, LinalgError::NotConverged { iterations: 3, .. }));
    }
}
