//! Small dense kernels: symmetric eigendecomposition (Householder
//! tridiagonalization followed by implicit QL), Cholesky and the generalized
//! symmetric-definite eigenproblem built on them.

use alloc::vec;
use alloc::vec::Vec;

use super::LinalgError;
use crate::math::{abs, sqrt};

/// Row-major square matrix.
pub type Dense = Vec<Vec<f64>>;

fn hypot(a: f64, b: f64) -> f64 {
    libm::hypot(a, b)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (`vectors[k]` is the
/// `k`-th eigenvector) of a symmetric matrix.
pub fn sym_eigen(a: &Dense) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut v: Dense = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(core::cmp::Ordering::Equal));
    let values = idx.iter().map(|&k| d[k]).collect();
    let vectors = idx
        .iter()
        .map(|&k| (0..n).map(|i| v[i][k]).collect())
        .collect();
    (values, vectors)
}

/// Eigen-decomposition of a symmetric tridiagonal matrix given its diagonal
/// and sub-diagonal (`off[i]` couples `i` and `i + 1`).
pub fn tridiag_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = diag[i];
        if i + 1 < n {
            a[i][i + 1] = off[i];
            a[i + 1][i] = off[i];
        }
    }
    sym_eigen(&a)
}

// Householder reduction to tridiagonal form, accumulating the transform in `v`.
fn tred2(v: &mut Dense, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += abs(d[k]);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

// Implicit QL iterations on the tridiagonal form.
fn tql2(v: &mut Dense, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(abs(d[l]) + abs(e[l]));
        let mut m = l;
        while m < n {
            if abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in l + 2..n {
                    d[i] -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Dense) -> Result<Dense, LinalgError> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut s = a[j][j];
        for k in 0..j {
            s -= l[j][k] * l[j][k];
        }
        if s <= 0.0 {
            return Err(LinalgError::Singular { step: j, pivot: s });
        }
        let ljj = sqrt(s);
        l[j][j] = ljj;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / ljj;
        }
    }
    Ok(l)
}

fn forward(l: &Dense, b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}

fn backward_t(l: &Dense, b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[k][i] * x[k];
        }
        x[i] /= l[i][i];
    }
    x
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Dense, b: &[f64]) -> Vec<f64> {
    backward_t(l, &forward(l, b))
}

/// Generalized eigenpairs of `A x = θ M x` with `M` positive definite;
/// eigenvectors are `M`-orthonormal and values ascending.
pub fn generalized_sym_eigen(a: &Dense, m: &Dense) -> Result<(Vec<f64>, Vec<Vec<f64>>), LinalgError> {
    let n = a.len();
    let l = cholesky(m)?;
    // C = L⁻¹ A L⁻ᵀ, built column by column.
    let mut tmp = vec![vec![0.0; n]; n];
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a[i][j]).collect();
        let y = forward(&l, &col);
        for i in 0..n {
            tmp[i][j] = y[i];
        }
    }
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        let y = forward(&l, &tmp[i]);
        c[i] = y;
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = s;
            c[j][i] = s;
        }
    }
    let (vals, vecs) = sym_eigen(&c);
    let vecs = vecs.iter().map(|y| backward_t(&l, y)).collect();
    Ok((vals, vecs))
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Dense, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.len();
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(abs(*v)));
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| abs(m[i][k]).partial_cmp(&abs(m[j][k])).unwrap())
            .unwrap();
        if abs(m[p][k]) <= 1e-300 + 1e-15 * scale {
            return Err(LinalgError::Singular {
                step: k,
                pivot: abs(m[p][k]),
            });
        }
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= m[i][j] * x[j];
        }
        x[i] /= m[i][i];
    }
    Ok(x)
}
