//! Uniform time grids and Gauss–Legendre quadrature in time.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, cos, PI};

/// Uniform partition of `[0, T]` into `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Self {
        assert!(t_final > 0.0 && steps > 0, "time grid needs T > 0 and at least one step");
        Self { t_final, steps }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// `t_k`, `k = 0..=steps`.
    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.tau()
        }
    }

    /// `(t_{k-1}, t_k)` for `k = 1..=steps`.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.t(k - 1), self.t(k))
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.t(k)).collect()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if abs(x) < 1.0 {
        nf * (x * p1 - p0) / (x * x - 1.0)
    } else {
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    };
    (p1, dp)
}

/// `q`-point Gauss–Legendre rule on `[-1, 1]`, exact for degree `2q − 1`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q > 0);
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = cos(PI * (i as f64 + 0.75) / (q as f64 + 0.5));
        for _ in 0..100 {
            let (p, dp) = legendre(q, z);
            let dz = p / dp;
            z -= dz;
            if abs(dz) < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(q, z);
        x[q - 1 - i] = z;
        w[q - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss–Legendre points and weights mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, q: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(q);
    let h = 0.5 * (b - a);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (a + h * (xi + 1.0), h * wi))
        .collect()
}
