use alloc::vec;
use alloc::vec::Vec;

use super::dense::tridiag_eigen;
use super::{CsrMatrix, LinalgError, LuOptions, SparseLu, SparseSym, TripletBuilder};
use crate::math::{abs, dot, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    /// Smallest eigenvalue on the `M`-orthogonal complement of the supplied kernel.
    SmallestNonzero,
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Target for `‖Ax − θMx‖_{M⁻¹}` with `‖x‖_M = 1`, scaled by `max(1, |θ|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    /// `M`-normalized eigenvector.
    pub vector: Vec<f64>,
    /// `‖Ax − θMx‖_{M⁻¹}`.
    pub residual: f64,
    pub iterations: usize,
}

fn start_vector(n: usize) -> Vec<f64> {
    // splitmix64 stream, fixed seed: deterministic and free of structure.
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 + 0.5
        })
        .collect()
}

struct MInner<'a> {
    m: &'a CsrMatrix,
}

impl MInner<'_> {
    fn ip(&self, x: &[f64], y: &[f64]) -> f64 {
        self.m.bilinear(x, y)
    }

    fn orthogonalize(&self, w: &mut [f64], basis: &[Vec<f64>]) {
        for q in basis {
            let c = self.ip(q, w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

/// Extreme generalized eigenpair of `A x = θ M x` (A positive semidefinite,
/// M positive definite) by Lanczos iteration in the `M` inner product with
/// full reorthogonalization.
///
/// For [`Which::SmallestNonzero`] the iteration runs on the shift-inverted
/// operator `A⁻¹M` restricted to the `M`-orthogonal complement of `kernel`,
/// which must span the null space of `A` exactly (solves are done on the
/// kernel-bordered system). [`Which::Largest`] iterates with `M⁻¹A`.
pub fn eig_extremes(
    a: &SparseSym,
    m: &SparseSym,
    which: Which,
    kernel: &[Vec<f64>],
    opts: EigOptions,
) -> Result<EigPair, LinalgError> {
    let n = a.dim();
    if m.dim() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: m.dim(),
        });
    }
    if kernel.iter().any(|k| k.len() != n) {
        return Err(LinalgError::InvalidInput("kernel vector length differs from matrix dimension"));
    }
    let inner = MInner { m: m.matrix() };
    let mut kbasis: Vec<Vec<f64>> = Vec::new();
    for k in kernel {
        let mut v = k.clone();
        inner.orthogonalize(&mut v, &kbasis);
        inner.orthogonalize(&mut v, &kbasis);
        let nv = sqrt(inner.ip(&v, &v));
        if nv == 0.0 {
            return Err(LinalgError::InvalidInput("kernel vectors are linearly dependent"));
        }
        v.iter_mut().for_each(|x| *x /= nv);
        kbasis.push(v);
    }
    if kbasis.len() >= n {
        return Err(LinalgError::InvalidInput("kernel spans the whole space"));
    }
    let lu_opts = LuOptions::default();
    let m_lu = SparseLu::factor(m.matrix(), lu_opts)?;
    let nk = kbasis.len();

    let a_lu = if which == Which::SmallestNonzero {
        let mut t = TripletBuilder::new(n + nk, n + nk);
        t.push_block(0, 0, a.matrix(), 1.0);
        for (c, k) in kbasis.iter().enumerate() {
            let mk = m.mul_vec(k);
            for (i, v) in mk.iter().enumerate() {
                if *v != 0.0 {
                    t.push(i, n + c, *v);
                    t.push(n + c, i, *v);
                }
            }
        }
        Some(SparseLu::factor(&t.build(), lu_opts)?)
    } else {
        None
    };

    let apply = |v: &[f64]| -> Vec<f64> {
        match &a_lu {
            Some(lu) => {
                let mut rhs = m.mul_vec(v);
                rhs.resize(n + nk, 0.0);
                let mut x = lu.solve(&rhs);
                x.truncate(n);
                x
            }
            None => m_lu.solve(&a.mul_vec(v)),
        }
    };

    let residual_of = |x: &[f64], theta: f64| -> f64 {
        let ax = a.mul_vec(x);
        let mx = m.mul_vec(x);
        let r: Vec<f64> = ax.iter().zip(&mx).map(|(a, b)| a - theta * b).collect();
        let z = m_lu.solve(&r);
        sqrt(dot(&r, &z).max(0.0))
    };

    let mut q0 = start_vector(n);
    inner.orthogonalize(&mut q0, &kbasis);
    let n0 = sqrt(inner.ip(&q0, &q0));
    q0.iter_mut().for_each(|x| *x /= n0);

    let cap = opts.max_iter.min(n - nk).max(1);
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_residual = f64::INFINITY;
    for j in 0..cap {
        let mut w = apply(&basis[j]);
        inner.orthogonalize(&mut w, &kbasis);
        let alpha = inner.ip(&basis[j], &w);
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * qi;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * qi;
            }
        }
        inner.orthogonalize(&mut w, &basis);
        inner.orthogonalize(&mut w, &basis);
        inner.orthogonalize(&mut w, &kbasis);
        alphas.push(alpha);
        let beta = sqrt(inner.ip(&w, &w).max(0.0));
        let scale = alphas.iter().fold(0.0f64, |s, a| s.max(abs(*a)));
        let exhausted = beta <= 1e-13 * scale.max(f64::MIN_POSITIVE) || j + 1 == cap;
        if j % 5 == 4 || exhausted {
            let (vals, vecs) = tridiag_eigen(&alphas, &betas);
            let top = vals.len() - 1;
            let s = &vecs[top];
            let mut x = vec![0.0; n];
            for (c, q) in s.iter().zip(&basis) {
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi += c * qi;
                }
            }
            let nx = sqrt(inner.ip(&x, &x));
            x.iter_mut().for_each(|v| *v /= nx);
            let theta = a.quad_form(&x);
            let res = residual_of(&x, theta);
            last_residual = res;
            if res <= opts.tol * theta.abs().max(1.0) {
                return Ok(EigPair {
                    value: theta,
                    vector: x,
                    residual: res,
                    iterations: j + 1,
                });
            }
        }
        if exhausted {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|v| *v /= beta);
        basis.push(w);
    }
    Err(LinalgError::NotConverged {
        iterations: cap,
        residual: last_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(d: &[Vec<f64>]) -> SparseSym {
        SparseSym::new(CsrMatrix::from_dense(d)).unwrap()
    }

    #[test]
    fn equal_matrices_give_one() {
        let m = sym(&[
            vec![2.0, 0.5, 0.0],
            vec![0.5, 2.0, 0.5],
            vec![0.0, 0.5, 2.0],
        ]);
        for which in [Which::SmallestNonzero, Which::Largest] {
            let e = eig_extremes(&m, &m, which, &[], EigOptions::default()).unwrap();
            assert!((e.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_with_kernel() {
        let a = sym(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 4.0],
        ]);
        let m = SparseSym::new(CsrMatrix::identity(3)).unwrap();
        let kernel = vec![vec![1.0, 0.0, 0.0]];
        let e = eig_extremes(&a, &m, Which::SmallestNonzero, &kernel, EigOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        let e = eig_extremes(&a, &m, Which::Largest, &[], EigOptions::default()).unwrap();
        assert!((e.value - 4.0).abs() < 1e-12);
    }
}
