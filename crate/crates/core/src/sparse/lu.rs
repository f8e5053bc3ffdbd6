use alloc::vec;
use alloc::vec::Vec;

use super::{reverse_cuthill_mckee, CsrMatrix, LinalgError};
use crate::math::{abs, norm2, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuOptions {
    /// Threshold partial pivoting: the diagonal entry is kept whenever it is at
    /// least this fraction of the largest candidate in its column.
    pub pivot_tol: f64,
    /// Factorization fails when the largest available pivot falls below this
    /// fraction of the largest entry of the equilibrated matrix.
    pub singular_tol: f64,
    pub refinement_steps: usize,
    pub equilibrate: bool,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 0.1,
            singular_tol: 1e-12,
            refinement_steps: 2,
            equilibrate: true,
        }
    }
}

/// Left-looking sparse LU with threshold partial pivoting,
/// `P (Dr A Dc) Q = L U`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    scaled: CsrMatrix,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    min_pivot: f64,
    refinement_steps: usize,
}

struct Csc {
    p: Vec<usize>,
    i: Vec<usize>,
    x: Vec<f64>,
}

fn to_csc(a: &CsrMatrix) -> Csc {
    let n = a.ncols();
    let mut count = vec![0usize; n + 1];
    for &j in a.col_idx() {
        count[j + 1] += 1;
    }
    for j in 0..n {
        count[j + 1] += count[j];
    }
    let mut next = count.clone();
    let mut i = vec![0; a.nnz()];
    let mut x = vec![0.0; a.nnz()];
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            let k = next[c];
            i[k] = r;
            x[k] = v;
            next[c] += 1;
        }
    }
    Csc { p: count, i, x }
}

fn ruiz(a: &CsrMatrix, iterations: usize) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut dr = vec![1.0; m];
    let mut dc = vec![1.0; n];
    for _ in 0..iterations {
        let mut rmax = vec![0.0f64; m];
        let mut cmax = vec![0.0f64; n];
        for i in 0..m {
            for (j, v) in a.row(i) {
                let s = abs(dr[i] * v * dc[j]);
                rmax[i] = rmax[i].max(s);
                cmax[j] = cmax[j].max(s);
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                dr[i] /= sqrt(rmax[i]);
            }
        }
        for j in 0..n {
            if cmax[j] > 0.0 {
                dc[j] /= sqrt(cmax[j]);
            }
        }
    }
    (dr, dc)
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix, opts: LuOptions) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let (row_scale, col_scale) = if opts.equilibrate {
            ruiz(a, 10)
        } else {
            (vec![1.0; n], vec![1.0; n])
        };
        let mut t = Vec::with_capacity(a.nnz());
        for i in 0..n {
            for (j, v) in a.row(i) {
                t.push((i, j, row_scale[i] * v * col_scale[j]));
            }
        }
        let scaled = CsrMatrix::from_triplets(n, n, t);
        let dense_threshold = (10.0 * sqrt(n as f64)) as usize + 16;
        let q = reverse_cuthill_mckee(&scaled, dense_threshold);
        let amax = scaled.max_abs();
        if amax == 0.0 && n > 0 {
            return Err(LinalgError::Singular { step: 0, pivot: 0.0 });
        }
        let csc = to_csc(&scaled);

        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let mut lp = Vec::with_capacity(n + 1);
        let mut up = Vec::with_capacity(n + 1);
        let cap = 4 * a.nnz() + n;
        let mut li: Vec<usize> = Vec::with_capacity(cap);
        let mut lx: Vec<f64> = Vec::with_capacity(cap);
        let mut ui: Vec<usize> = Vec::with_capacity(cap);
        let mut ux: Vec<f64> = Vec::with_capacity(cap);
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut marked = vec![false; n];
        let mut min_pivot = f64::INFINITY;

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];

            // Reach of column `col` through the graph of L.
            let mut top = n;
            for p in csc.p[col]..csc.p[col + 1] {
                let start = csc.i[p];
                if marked[start] {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = start;
                loop {
                    let j = stack[head];
                    let jnew = pinv[j];
                    if !marked[j] {
                        marked[j] = true;
                        pstack[head] = if jnew == NONE { 0 } else { lp[jnew] };
                    }
                    let end = if jnew == NONE { 0 } else { lp[jnew + 1] };
                    let mut done = true;
                    let mut pp = pstack[head];
                    while pp < end {
                        let i = li[pp];
                        pp += 1;
                        if !marked[i] {
                            pstack[head] = pp;
                            head += 1;
                            stack[head] = i;
                            done = false;
                            break;
                        }
                    }
                    if done {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }
            for &j in &xi[top..n] {
                marked[j] = false;
                x[j] = 0.0;
            }
            for p in csc.p[col]..csc.p[col + 1] {
                x[csc.i[p]] = csc.x[p];
            }
            // Sparse triangular solve with the unit lower factor.
            for px in top..n {
                let j = xi[px];
                let jj = pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in lp[jj] + 1..lp[jj + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax_col = -1.0;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    if abs(x[i]) > amax_col {
                        amax_col = abs(x[i]);
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || amax_col <= opts.singular_tol * amax {
                return Err(LinalgError::Singular {
                    step: k,
                    pivot: amax_col.max(0.0) / amax,
                });
            }
            if pinv[col] == NONE && abs(x[col]) >= opts.pivot_tol * amax_col {
                ipiv = col;
            }
            let pivot = x[ipiv];
            min_pivot = min_pivot.min(abs(pivot) / amax);
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            scaled,
            row_scale,
            col_scale,
            q,
            pinv,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
            min_pivot: if n == 0 { 1.0 } else { min_pivot },
            refinement_steps: opts.refinement_steps,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude relative to the largest entry of the
    /// equilibrated matrix.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot
    }

    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    fn solve_scaled(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let last = self.up[j + 1] - 1;
            y[j] /= self.ux[last];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..last {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = y[k];
        }
        x
    }

    /// Solves `A x = b` with a few steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "LU solve: right-hand side length");
        let bs: Vec<f64> = b.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect();
        let mut z = self.solve_scaled(&bs);
        let mut rnorm = f64::INFINITY;
        for _ in 0..self.refinement_steps {
            let az = self.scaled.mul_vec(&z);
            let r: Vec<f64> = bs.iter().zip(&az).map(|(b, a)| b - a).collect();
            let rn = norm2(&r);
            if rn == 0.0 || rn >= rnorm {
                break;
            }
            rnorm = rn;
            let dz = self.solve_scaled(&r);
            for (zi, d) in z.iter_mut().zip(&dz) {
                *zi += d;
            }
        }
        z.iter().zip(&self.col_scale).map(|(v, s)| v * s).collect()
    }
}

/// Factorizes and solves an indefinite (possibly nonsymmetric) system,
/// failing if the factorization is singular or the relative residual
/// `‖Ax − b‖ / (‖A‖‖x‖ + ‖b‖)` exceeds `tol`.
pub fn solve_saddle(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let lu = SparseLu::factor(a, LuOptions::default())?;
    let x = lu.solve(b);
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let scale = a.max_abs() * norm2(&x) + norm2(b);
    let res = norm2(&r);
    if scale > 0.0 && res > tol * scale {
        return Err(LinalgError::NotConverged {
            iterations: 0,
            residual: res / scale,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric() {
        let a = CsrMatrix::from_dense(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![3.0, 1.0, 4.0],
        ]);
        let xs = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&xs);
        let x = solve_saddle(&a, &b, 1e-12).unwrap();
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn detects_singular() {
        let a = CsrMatrix::from_dense(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 1.0],
        ]);
        assert!(matches!(
            SparseLu::factor(&a, LuOptions::default()),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn saddle_point_with_zero_block() {
        // [[2, 0, 1], [0, 2, 1], [1, 1, 0]]
        let a = CsrMatrix::from_dense(&[
            vec![2.0, 0.0, 1.0],
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ]);
        let x = solve_saddle(&a, &[1.0, 3.0, 0.0], 1e-12).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-14);
        assert!((x[1] - 0.5).abs() < 1e-14);
        assert!((x[2] - 2.0).abs() < 1e-14);
    }
}
