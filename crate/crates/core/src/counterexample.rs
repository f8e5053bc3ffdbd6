//! Trial functions of vanishing trial norm whose pressure keeps a fixed
//! `L²(ℙ)` size, built from the Neumann eigenmodes of the unit square.
//!
//! For a mode `w` with `𝓛w = λw`, `‖w‖_Ω = 1`, and `r = ⌈λ⌉`:
//!
//! ```text
//! p(t) = w tʳ / Tʳ,    m(t) = −λ w tʳ⁺¹ / ((r + 1) Tʳ)
//! ```
//!
//! so that `∂_t m + 𝓛p = 0` and `m(0) = 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::OperatorSet;
use crate::math::{ceil, cos, powi, sqrt, PI};
use crate::mesh::{Mesh, Point};
use crate::norms::{TrialFunction, TrialValues};
use crate::problem::{gamma, MaterialParams, SpaceConfig};
use crate::solver::FourFieldTrajectory;
use crate::time::TimeGrid;

/// Neumann eigenmode `w(x, y) = N cos(iπx) cos(jπy)` of `−κΔ` on the unit
/// square, normalized in `L²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMode {
    pub i: u32,
    pub j: u32,
    /// `κπ²(i² + j²)`
    pub eigenvalue: f64,
    /// `N`, with `N² ∫ cos²(iπx) cos²(jπy) = 1`.
    pub normalization: f64,
}

impl EigenMode {
    /// Panics if `i = j = 0`.
    pub fn new(i: u32, j: u32, kappa: f64) -> Self {
        assert!(i + j > 0, "the constant mode is excluded");
        let normalization = if i > 0 && j > 0 { 2.0 } else { sqrt(2.0) };
        Self {
            i,
            j,
            eigenvalue: kappa * PI * PI * (i * i + j * j) as f64,
            normalization,
        }
    }

    /// `r = ⌈λ⌉`.
    pub fn degree(&self) -> u64 {
        ceil(self.eigenvalue) as u64
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.normalization * cos(self.i as f64 * PI * x[0]) * cos(self.j as f64 * PI * x[1])
    }
}

/// The first `k` modes by increasing eigenvalue, ties broken by `(i, j)`.
pub fn eigen_sequence(k: usize, kappa: f64) -> Vec<EigenMode> {
    let l = 2 * (sqrt(k as f64) as u32 + 1) + 2;
    let mut idx: Vec<(u32, u32)> = (0..=l)
        .flat_map(|i| (0..=l).map(move |j| (i, j)))
        .filter(|&(i, j)| i + j > 0)
        .collect();
    idx.sort_by_key(|&(i, j)| (i * i + j * j, i, j));
    idx.into_iter().take(k).map(|(i, j)| EigenMode::new(i, j, kappa)).collect()
}

/// Closed-form time integrals of one rough trial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughQuantities {
    pub eigenvalue: f64,
    pub r: u64,
    /// `∫ ‖p‖²_Ω`
    pub int_p_l2: f64,
    /// `∫ ‖m‖²_Ω`
    pub int_m_l2: f64,
    /// `∫ ‖∂_t m‖²_{ℙ*} = ∫ ‖p‖²_ℙ`
    pub rough: f64,
    /// Squared trial norm of `(0, 0, p, m)`.
    pub trial_sq: f64,
}

impl RoughQuantities {
    /// `rough / trial_sq`
    pub fn quotient(&self) -> f64 {
        self.rough / self.trial_sq
    }

    /// `∫ ‖𝓟₀ p‖²_ℙ = Tλ / (r + 1)²`.
    pub fn p0_projection_sq(&self, t_final: f64) -> f64 {
        let r1 = (self.r + 1) as f64;
        t_final * self.eigenvalue / (r1 * r1)
    }

    /// `sup_t ‖∫₀ᵗ p‖_ℙ = √λ T / (r + 1)`.
    pub fn antiderivative_sup(&self, t_final: f64) -> f64 {
        sqrt(self.eigenvalue) * t_final / (self.r + 1) as f64
    }
}

/// Closed forms for an eigenvalue `λ` (not necessarily one of the square),
/// with the mode normalized in `L²` and mean free.
pub fn rough_quantities_for(eigenvalue: f64, t_final: f64, params: &MaterialParams, spaces: &SpaceConfig) -> RoughQuantities {
    let r = ceil(eigenvalue) as u64;
    let rf = r as f64;
    let t = t_final;
    let int_p_l2 = t / (2.0 * rf + 1.0);
    let int_m_l2 = t * t * t * eigenvalue * eigenvalue / ((rf + 1.0) * (rf + 1.0) * (2.0 * rf + 3.0));
    let rough = eigenvalue * int_p_l2;
    // ∫ ‖σp − m‖² = σ² ∫‖p‖² + 2σλ ∫ t^{2r+1}/((r+1)T^{2r}) + ∫‖m‖²
    let s = params.sigma;
    let cross = s * eigenvalue * t * t / ((rf + 1.0) * (rf + 1.0));
    let m_res = s * s * int_p_l2 + cross + int_m_l2;
    let trial_sq = params.alpha * params.alpha / (params.mu + params.lambda) * int_p_l2 + gamma(params, spaces) * m_res;
    RoughQuantities {
        eigenvalue,
        r,
        int_p_l2,
        int_m_l2,
        rough,
        trial_sq,
    }
}

pub fn rough_quantities(mode: &EigenMode, t_final: f64, params: &MaterialParams, spaces: &SpaceConfig) -> RoughQuantities {
    rough_quantities_for(mode.eigenvalue, t_final, params, spaces)
}

/// One row of the divergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceRow {
    pub mode: EigenMode,
    pub q: RoughQuantities,
}

/// Rough quantities along the first `k` modes.
pub fn verify_divergence(k: usize, t_final: f64, params: &MaterialParams, spaces: &SpaceConfig) -> Vec<DivergenceRow> {
    eigen_sequence(k, params.kappa)
        .into_iter()
        .map(|mode| DivergenceRow {
            mode,
            q: rough_quantities(&mode, t_final, params, spaces),
        })
        .collect()
}

/// Largest relative deviation of `rough` from `T/2` over rows with
/// eigenvalue at least `from`.
pub fn rough_limit_deviation(rows: &[DivergenceRow], t_final: f64, from: f64) -> f64 {
    rows.iter()
        .filter(|r| r.q.eigenvalue >= from)
        .map(|r| (r.q.rough / (0.5 * t_final) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Whether `trial_sq` is nonincreasing over rows with eigenvalue at least
/// `from`.
pub fn trial_sq_nonincreasing(rows: &[DivergenceRow], from: f64) -> bool {
    let tail: Vec<f64> = rows.iter().filter(|r| r.q.eigenvalue >= from).map(|r| r.q.trial_sq).collect();
    tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

/// Quotient at the first eigenvalue at least `hi` over the quotient at the
/// first eigenvalue at least `lo`.
pub fn quotient_growth(rows: &[DivergenceRow], lo: f64, hi: f64) -> Option<f64> {
    let at = |x: f64| rows.iter().find(|r| r.q.eigenvalue >= x).map(|r| r.q.quotient());
    Some(at(hi)? / at(lo)?)
}

/// A rough trial function `(0, 0, w_h tʳ/Tʳ, −λ w_h tʳ⁺¹/((r+1)Tʳ))` with
/// `w_h` the vertex interpolant of a mode, for cross-checks against the
/// finite-element norms. Requires a pressure space on all vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrial {
    pub w: Vec<f64>,
    pub eigenvalue: f64,
    pub r: u64,
    pub t_final: f64,
    n_u: usize,
}

impl ModeTrial {
    pub fn new(mesh: &Mesh, ops: &OperatorSet, mode: &EigenMode, t_final: f64) -> Self {
        assert_eq!(ops.n_p(), ops.n_s(), "pressure space must live on all vertices");
        let w = mesh.vertices().iter().map(|&x| mode.eval(x)).collect();
        Self {
            w,
            eigenvalue: mode.eigenvalue,
            r: mode.degree(),
            t_final,
            n_u: ops.n_u(),
        }
    }

    /// Uses a discrete eigenpair `L w = λ M w` with `wᵀ M w = 1` and `w`
    /// mean free, for which the closed forms hold exactly.
    pub fn from_discrete(w: Vec<f64>, eigenvalue: f64, t_final: f64, n_u: usize) -> Self {
        Self {
            w,
            eigenvalue,
            r: ceil(eigenvalue) as u64,
            t_final,
            n_u,
        }
    }

    /// Interval averages of `p` and nodal values of `m` on `grid`, in the
    /// layout of a backward-Euler trajectory. Averaging preserves the time
    /// integral of `p` over every interval.
    pub fn stepped(&self, grid: TimeGrid) -> FourFieldTrajectory {
        let r1 = (self.r + 1) as i32;
        let tr = powi(self.t_final, r1 - 1);
        let n = grid.steps();
        let mut p = Vec::with_capacity(n);
        for k in 1..=n {
            let (a, b) = grid.interval(k);
            let avg = (powi(b, r1) - powi(a, r1)) / (r1 as f64 * tr * (b - a));
            p.push(self.scaled_w(avg));
        }
        FourFieldTrajectory {
            grid,
            u: vec![vec![0.0; self.n_u]; n],
            p_tot: vec![vec![0.0; self.w.len()]; n],
            p,
            m: (0..=n).map(|k| self.m_at(grid.t(k))).collect(),
            max_residual: 0.0,
        }
    }

    fn scaled_w(&self, s: f64) -> Vec<f64> {
        self.w.iter().map(|x| s * x).collect()
    }

    fn m_coeff(&self, t: f64) -> f64 {
        let r = self.r as i32;
        -self.eigenvalue * powi(t, r + 1) / ((r + 1) as f64 * powi(self.t_final, r))
    }
}

impl TrialFunction for ModeTrial {
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.t_final]
    }

    fn degree(&self) -> usize {
        self.r as usize + 1
    }

    fn eval(&self, _piece: usize, t: f64) -> TrialValues {
        let r = self.r as i32;
        let pt = powi(t / self.t_final, r);
        let m = self.scaled_w(self.m_coeff(t));
        TrialValues {
            u: vec![0.0; self.n_u],
            p_tot: vec![0.0; self.w.len()],
            p: self.scaled_w(pt),
            dm_dt: self.scaled_w(-self.eigenvalue * pt),
            m_constraint: m.clone(),
            m,
        }
    }

    fn m_at(&self, t: f64) -> Vec<f64> {
        self.scaled_w(self.m_coeff(t))
    }
}
