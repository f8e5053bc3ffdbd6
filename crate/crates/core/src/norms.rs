//! Trial, test and data norms of the four-field problem, with dual norms
//! evaluated through factorized Riesz maps.

use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::OperatorSet;
use crate::math::{abs, dot, norm2, sqrt};
use crate::problem::gamma;
use crate::solver::{FourFieldTrajectory, LoadData};
use crate::sparse::{dense, CsrMatrix, LinalgError, LuOptions, SparseLu, TripletBuilder};
use crate::time::{gauss_on, TimeGrid};

/// Relative size of the constant (or rigid-motion) component above which a
/// functional is rejected by the dual norms.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Factorized Riesz maps of the displacement, pressure and L² spaces.
#[derive(Debug, Clone)]
pub struct Riesz {
    e_lu: SparseLu,
    l_lu: SparseLu,
    m_lu: SparseLu,
    n_u: usize,
    n_p: usize,
    rm_mass: Vec<Vec<f64>>,
    rm_gram: dense::Dense,
    rigid: Vec<Vec<f64>>,
    mean_p: Option<Vec<f64>>,
    l_constant_kernel: bool,
    area: f64,
}

fn bordered(a: &CsrMatrix, cols: &[&[f64]]) -> CsrMatrix {
    let n = a.nrows();
    let k = cols.len();
    let mut t = TripletBuilder::new(n + k, n + k);
    t.push_block(0, 0, a, 1.0);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            if *v != 0.0 {
                t.push(i, n + j, *v);
                t.push(n + j, i, *v);
            }
        }
    }
    t.build()
}

impl Riesz {
    pub fn new(ops: &OperatorSet) -> Result<Self, LinalgError> {
        let opts = LuOptions::default();
        let rigid = ops.rigid_motions.clone();
        let rcols: Vec<&[f64]> = rigid.iter().map(|v| v.as_slice()).collect();
        let e_lu = SparseLu::factor(&bordered(ops.e.matrix(), &rcols), opts)?;
        let mean_p = ops.spaces.p_zero_mean.then(|| ops.mean_vec_p.clone());
        let l_lu = match &mean_p {
            Some(c) => SparseLu::factor(&bordered(ops.l.matrix(), &[c.as_slice()]), opts)?,
            None => SparseLu::factor(ops.l.matrix(), opts)?,
        };
        let m_lu = SparseLu::factor(ops.m.matrix(), opts)?;
        let rm_mass: Vec<Vec<f64>> = rigid.iter().map(|r| ops.mass_u.mul_vec(r)).collect();
        let rm_gram = rigid
            .iter()
            .map(|ri| rm_mass.iter().map(|gj| dot(ri, gj)).collect())
            .collect();
        Ok(Self {
            e_lu,
            l_lu,
            m_lu,
            n_u: ops.n_u(),
            n_p: ops.n_p(),
            rm_mass,
            rm_gram,
            rigid,
            mean_p,
            l_constant_kernel: ops.l_has_constant_kernel(),
            area: ops.area,
        })
    }

    /// `E⁻¹ r` on the displacement space (modulo rigid motions when they are
    /// quotiented out; the result is then orthogonal to them).
    pub fn solve_e(&self, r: &[f64]) -> Vec<f64> {
        let mut rhs = r.to_vec();
        rhs.resize(self.n_u + self.rigid.len(), 0.0);
        let mut x = self.e_lu.solve(&rhs);
        x.truncate(self.n_u);
        x
    }

    /// `L⁻¹ r` on the pressure space.
    pub fn solve_l(&self, r: &[f64]) -> Vec<f64> {
        let mut rhs = r.to_vec();
        rhs.resize(self.n_p + self.mean_p.is_some() as usize, 0.0);
        let mut x = self.l_lu.solve(&rhs);
        x.truncate(self.n_p);
        x
    }

    /// `M⁻¹ r` on the vertex space.
    pub fn solve_m(&self, r: &[f64]) -> Vec<f64> {
        self.m_lu.solve(r)
    }

    /// Removes the rigid-motion component of a displacement functional,
    /// using mass-weighted rigid motions as the complement.
    pub fn restrict_u(&self, r: &[f64]) -> Vec<f64> {
        if self.rigid.is_empty() {
            return r.to_vec();
        }
        let rhs: Vec<f64> = self.rigid.iter().map(|q| dot(q, r)).collect();
        let a = dense::lu_solve(&self.rm_gram, &rhs).expect("rigid motions are independent");
        let mut out = r.to_vec();
        for (g, ak) in self.rm_mass.iter().zip(&a) {
            for (o, gi) in out.iter_mut().zip(g) {
                *o -= ak * gi;
            }
        }
        out
    }

    /// Canonical representative of a pressure functional on the mean-free
    /// pressure space: the component along the mean functional is chosen so
    /// that the result annihilates the constant coefficient vector.
    pub fn restrict_p(&self, r: &[f64]) -> Vec<f64> {
        match &self.mean_p {
            Some(c) => {
                let s: f64 = c.iter().sum();
                let a = r.iter().sum::<f64>() / s;
                r.iter().zip(c).map(|(ri, ci)| ri - a * ci).collect()
            }
            None => r.to_vec(),
        }
    }

    /// `‖r‖_{𝕌*} = (rᵀ E⁻¹ r)^{1/2}`.
    pub fn dual_norm_u(&self, r: &[f64]) -> Result<f64, LinalgError> {
        if r.len() != self.n_u {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n_u,
                found: r.len(),
            });
        }
        let rn = norm2(r);
        for q in &self.rigid {
            if abs(dot(q, r)) > COMPATIBILITY_TOL * rn * norm2(q) {
                return Err(LinalgError::InvalidInput(
                    "displacement functional does not annihilate rigid motions",
                ));
            }
        }
        Ok(sqrt(dot(r, &self.solve_e(r)).max(0.0)))
    }

    /// `‖r‖_{ℙ*} = (rᵀ L⁻¹ r)^{1/2}`. When the pressure stiffness has the
    /// constants in its kernel, `r` must annihilate the constant field.
    pub fn dual_norm_p(&self, r: &[f64]) -> Result<f64, LinalgError> {
        if r.len() != self.n_p {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n_p,
                found: r.len(),
            });
        }
        if self.l_constant_kernel {
            let s: f64 = r.iter().sum();
            let scale: f64 = r.iter().map(|v| abs(*v)).sum();
            // below this scale the relative test reaches subnormal numbers
            if scale >= f64::MIN_POSITIVE / COMPATIBILITY_TOL && abs(s) > COMPATIBILITY_TOL * scale {
                return Err(LinalgError::InvalidInput(
                    "pressure functional has a nonzero constant component",
                ));
            }
        }
        Ok(sqrt(dot(r, &self.solve_l(r)).max(0.0)))
    }

    /// Squared L² norm of the field represented by the functional `g`
    /// (`gᵀ M⁻¹ g`), after projection onto mean-free fields if requested.
    pub fn l2_functional_sq(&self, g: &[f64], zero_mean: bool) -> f64 {
        let mut v = dot(g, &self.solve_m(g));
        if zero_mean {
            let s: f64 = g.iter().sum();
            v -= s * s / self.area;
        }
        v.max(0.0)
    }
}

/// Values of a trial function at one instant of one time piece.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialValues {
    pub u: Vec<f64>,
    pub p_tot: Vec<f64>,
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    pub dm_dt: Vec<f64>,
    /// Fluid content entering the constraint row. Equals `m` for genuinely
    /// continuous trial functions; time-stepped solutions use the value held
    /// at the right end of the interval.
    pub m_constraint: Vec<f64>,
}

/// A discrete space–time trial function, polynomial in time on each piece.
pub trait TrialFunction {
    /// `0 = t_0 < … < t_N = T`.
    fn breakpoints(&self) -> Vec<f64>;
    /// Largest time degree of any component on a piece.
    fn degree(&self) -> usize;
    /// Values on piece `k` (between breakpoints `k` and `k + 1`) at time `t`.
    fn eval(&self, piece: usize, t: f64) -> TrialValues;
    /// Continuous fluid content at time `t`.
    fn m_at(&self, t: f64) -> Vec<f64>;
    fn m_initial(&self) -> Vec<f64> {
        self.m_at(0.0)
    }
}

fn piece_of(breaks: &[f64], t: f64) -> usize {
    let n = breaks.len() - 1;
    (0..n).find(|&k| t <= breaks[k + 1]).unwrap_or(n - 1)
}

impl TrialFunction for FourFieldTrajectory {
    fn breakpoints(&self) -> Vec<f64> {
        self.grid.breakpoints()
    }

    fn degree(&self) -> usize {
        1
    }

    fn eval(&self, piece: usize, t: f64) -> TrialValues {
        let (a, b) = self.grid.interval(piece + 1);
        let s = (t - a) / (b - a);
        let (m0, m1) = (&self.m[piece], &self.m[piece + 1]);
        TrialValues {
            u: self.u[piece].clone(),
            p_tot: self.p_tot[piece].clone(),
            p: self.p[piece].clone(),
            m: m0.iter().zip(m1).map(|(x, y)| (1.0 - s) * x + s * y).collect(),
            dm_dt: m0.iter().zip(m1).map(|(x, y)| (y - x) / (b - a)).collect(),
            m_constraint: m1.clone(),
        }
    }

    fn m_at(&self, t: f64) -> Vec<f64> {
        let br = self.grid.breakpoints();
        let k = piece_of(&br, t);
        let s = ((t - br[k]) / (br[k + 1] - br[k])).clamp(0.0, 1.0);
        self.m[k]
            .iter()
            .zip(&self.m[k + 1])
            .map(|(x, y)| (1.0 - s) * x + s * y)
            .collect()
    }

    fn m_initial(&self) -> Vec<f64> {
        self.m[0].clone()
    }
}

/// Term-by-term evaluation of the trial norm and the augmented quantities
/// appearing in the two-sided stability bound. All entries are squared.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormReport {
    /// `∫ ‖u‖²_𝕌`
    pub u_term: f64,
    /// `∫ ‖p_tot‖²_Ω / μ`
    pub p_tot_term: f64,
    /// `∫ ‖∂_t m + 𝓛p‖²_{ℙ*}`
    pub evolution_term: f64,
    /// `‖m(0)‖²_{ℙ*}`
    pub initial_term: f64,
    /// `∫ ‖λ𝓓u − p_tot − α𝓟_𝔻 p‖²_Ω / (μ + λ)`
    pub ptot_constraint_term: f64,
    /// `γ ∫ ‖α𝓟_P̄ 𝓓u + σp − m‖²_Ω`
    pub m_constraint_term: f64,
    /// `λ ∫ ‖𝓓u‖²_Ω`, with the divergence projected onto the discrete
    /// total-pressure space.
    pub div_term: f64,
    /// `σ ∫ ‖p‖²_Ω`
    pub storage_term: f64,
    /// `‖m‖²_{L∞(ℙ*)}`, sampled at breakpoints and piece midpoints.
    pub m_sup_sq: f64,
    /// Time at which the sampled supremum is attained.
    pub m_sup_time: f64,
}

impl NormReport {
    /// Squared trial norm.
    pub fn trial_sq(&self) -> f64 {
        self.u_term
            + self.p_tot_term
            + self.evolution_term
            + self.initial_term
            + self.ptot_constraint_term
            + self.m_constraint_term
    }

    /// Trial norm augmented by the terms controlled through inf-sup stability.
    pub fn augmented_sq(&self) -> f64 {
        self.trial_sq() + self.m_sup_sq + self.div_term + self.storage_term
    }

    /// Left-hand side of the two-sided stability bound.
    pub fn stability_lhs(&self) -> f64 {
        self.u_term + self.div_term + self.p_tot_term + self.storage_term + self.evolution_term + self.m_sup_sq
    }
}

/// Constraint-row residual functionals of a trial function at one instant:
/// `(λBu − M p_tot − α M_sp p, α B u + σ M_sp p − M m)`.
pub fn constraint_residuals(ops: &OperatorSet, v: &TrialValues) -> (Vec<f64>, Vec<f64>) {
    let prm = &ops.params;
    let bu = ops.b.mul_vec(&v.u);
    let mpt = ops.m.mul_vec(&v.p_tot);
    let msp = ops.m_sp.mul_vec(&v.p);
    let mm = ops.m.mul_vec(&v.m_constraint);
    let g1 = (0..ops.n_s())
        .map(|i| prm.lambda * bu[i] - mpt[i] - prm.alpha * msp[i])
        .collect();
    let g2 = (0..ops.n_s())
        .map(|i| prm.alpha * bu[i] + prm.sigma * msp[i] - mm[i])
        .collect();
    (g1, g2)
}

/// Evolution residual functional `M_ps ∂_t m + L p` on free pressure dofs.
pub fn evolution_functional(ops: &OperatorSet, v: &TrialValues) -> Vec<f64> {
    let a = ops.m_sp.mul_vec_transpose(&v.dm_dt);
    let b = ops.l.mul_vec(&v.p);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// Sample times for the `L∞(ℙ*)` norm: breakpoints and piece midpoints.
pub fn sup_sample_times(breaks: &[f64]) -> Vec<f64> {
    let mut ts = Vec::with_capacity(2 * breaks.len());
    for k in 0..breaks.len() {
        ts.push(breaks[k]);
        if k + 1 < breaks.len() {
            ts.push(0.5 * (breaks[k] + breaks[k + 1]));
        }
    }
    ts
}

/// `‖m‖_{ℙ*}` of a vertex field.
pub fn m_dual_norm(riesz: &Riesz, ops: &OperatorSet, m: &[f64]) -> Result<f64, LinalgError> {
    riesz.dual_norm_p(&riesz.restrict_p(&ops.m_sp.mul_vec_transpose(m)))
}

/// Evaluates every term of the trial norm with Gauss quadrature in time that
/// is exact for the trial function's piecewise-polynomial degree.
pub fn trial_norm(tf: &dyn TrialFunction, ops: &OperatorSet, riesz: &Riesz) -> Result<NormReport, LinalgError> {
    let prm = &ops.params;
    let sp = &ops.spaces;
    let gam = gamma(prm, sp);
    let breaks = tf.breakpoints();
    let q = tf.degree() + 2;
    let mut rep = NormReport::default();
    for k in 0..breaks.len() - 1 {
        for (t, w) in gauss_on(breaks[k], breaks[k + 1], q) {
            let v = tf.eval(k, t);
            rep.u_term += w * ops.u_norm_sq(&v.u);
            rep.p_tot_term += w * ops.l2_sq(&v.p_tot) / prm.mu;
            let ev = riesz.restrict_p(&evolution_functional(ops, &v));
            let evn = riesz.dual_norm_p(&ev)?;
            rep.evolution_term += w * evn * evn;
            let (g1, g2) = constraint_residuals(ops, &v);
            rep.ptot_constraint_term += w * riesz.l2_functional_sq(&g1, sp.d_zero_mean) / (prm.mu + prm.lambda);
            rep.m_constraint_term += w * gam * riesz.l2_functional_sq(&g2, sp.pbar_zero_mean);
            rep.div_term += w * prm.lambda * riesz.l2_functional_sq(&ops.b.mul_vec(&v.u), sp.d_zero_mean);
            rep.storage_term += w * prm.sigma * ops.l2_sq_p(&v.p);
        }
    }
    let n0 = m_dual_norm(riesz, ops, &tf.m_initial())?;
    rep.initial_term = n0 * n0;
    for t in sup_sample_times(&breaks) {
        let n = m_dual_norm(riesz, ops, &tf.m_at(t))?;
        if n * n > rep.m_sup_sq {
            rep.m_sup_sq = n * n;
            rep.m_sup_time = t;
        }
    }
    Ok(rep)
}

/// Term-by-term squared data norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataNormReport {
    /// `∫ ‖ℓ_u‖²_{𝕌*}`
    pub lu_term: f64,
    /// `∫ ‖ℓ_p‖²_{ℙ*}`
    pub lp_term: f64,
    /// `‖ℓ_0‖²_{ℙ*}`
    pub l0_term: f64,
    /// `∫ ‖ℓ_ptot‖²_Ω / (μ + λ)`
    pub lptot_term: f64,
    /// `γ ∫ ‖ℓ_m‖²_Ω`
    pub lm_term: f64,
}

impl DataNormReport {
    pub fn total_sq(&self) -> f64 {
        self.lu_term + self.lp_term + self.l0_term + self.lptot_term + self.lm_term
    }

    /// Right-hand side of the two-sided stability bound.
    pub fn stability_rhs(&self) -> f64 {
        self.lu_term + self.lp_term + self.l0_term
    }
}

/// Data norm of piecewise-constant-in-time loads on `grid`. Functionals are
/// first restricted to the displacement and pressure spaces (rigid-motion
/// and mean components removed where those spaces are quotients or
/// mean-free).
pub fn data_norm(loads: &LoadData, grid: &TimeGrid, ops: &OperatorSet, riesz: &Riesz) -> Result<DataNormReport, LinalgError> {
    if loads.steps.len() != grid.steps() {
        return Err(LinalgError::DimensionMismatch {
            expected: grid.steps(),
            found: loads.steps.len(),
        });
    }
    let prm = &ops.params;
    let sp = &ops.spaces;
    let gam = gamma(prm, sp);
    let mut rep = DataNormReport::default();
    for (k, l) in loads.steps.iter().enumerate() {
        let (a, b) = grid.interval(k + 1);
        let tau = b - a;
        let nu = riesz.dual_norm_u(&riesz.restrict_u(&l.lu))?;
        let np = riesz.dual_norm_p(&riesz.restrict_p(&l.lp))?;
        rep.lu_term += tau * nu * nu;
        rep.lp_term += tau * np * np;
        if let Some(g) = &l.lptot {
            rep.lptot_term += tau * riesz.l2_functional_sq(g, sp.d_zero_mean) / (prm.mu + prm.lambda);
        }
        if let Some(g) = &l.lm {
            rep.lm_term += tau * gam * riesz.l2_functional_sq(g, sp.pbar_zero_mean);
        }
    }
    let n0 = m_dual_norm(riesz, ops, &loads.m0)?;
    rep.l0_term = n0 * n0;
    Ok(rep)
}

/// Values of a test function at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSample {
    pub v: Vec<f64>,
    pub q_tot: Vec<f64>,
    pub q: Vec<f64>,
    pub n: Vec<f64>,
}

/// Discrete test function, polynomial in time on each piece and stored by
/// its values at the `nodes` Gauss points of every piece (piece-major).
/// `n0` is time independent.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub breaks: Vec<f64>,
    pub nodes: usize,
    pub samples: Vec<TestSample>,
    pub n0: Vec<f64>,
}

impl TestFunction {
    pub fn zeros(ops: &OperatorSet, breaks: Vec<f64>, nodes: usize) -> Self {
        let k = breaks.len() - 1;
        let zero = TestSample {
            v: vec![0.0; ops.n_u()],
            q_tot: vec![0.0; ops.n_s()],
            q: vec![0.0; ops.n_s()],
            n: vec![0.0; ops.n_p()],
        };
        Self {
            breaks,
            nodes,
            samples: vec![zero; k * nodes],
            n0: vec![0.0; ops.n_p()],
        }
    }

    pub fn pieces(&self) -> usize {
        self.breaks.len() - 1
    }

    /// `(piece, node index, time, weight)` for every stored sample.
    pub fn nodes_iter(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.pieces()).flat_map(move |k| {
            gauss_on(self.breaks[k], self.breaks[k + 1], self.nodes)
                .into_iter()
                .enumerate()
                .map(move |(j, (t, w))| (k, j, t, w))
        })
    }

    pub fn sample(&self, piece: usize, node: usize) -> &TestSample {
        &self.samples[piece * self.nodes + node]
    }

    pub fn sample_mut(&mut self, piece: usize, node: usize) -> &mut TestSample {
        &mut self.samples[piece * self.nodes + node]
    }
}

/// Squared test norm; exact for time degree below `nodes`.
pub fn test_norm_sq(y: &TestFunction, ops: &OperatorSet) -> f64 {
    let prm = &ops.params;
    let gam = gamma(prm, &ops.spaces);
    let mut s = ops.p_norm_sq(&y.n0);
    for (k, j, _, w) in y.nodes_iter() {
        let z = y.sample(k, j);
        s += w
            * (ops.u_norm_sq(&z.v)
                + ops.p_norm_sq(&z.n)
                + (prm.mu + prm.lambda) * ops.l2_sq(&z.q_tot)
                + ops.l2_sq(&z.q) / gam);
    }
    s
}

/// Index of the trial piece containing the test piece `[a, b]`.
pub(crate) fn enclosing_piece(breaks: &[f64], a: f64, b: f64) -> usize {
    piece_of(breaks, 0.5 * (a + b))
}

/// `b(ỹ₁, y₂)`. The test pieces must refine the trial pieces; the result is
/// exact when `y.nodes > tf.degree()` and the test samples are values of a
/// polynomial of degree below `y.nodes`.
pub fn bilinear_form(tf: &dyn TrialFunction, y: &TestFunction, ops: &OperatorSet) -> f64 {
    let breaks = tf.breakpoints();
    let mut s = dot(&ops.m_sp.mul_vec_transpose(&tf.m_initial()), &y.n0);
    for (k, j, t, w) in y.nodes_iter() {
        let piece = enclosing_piece(&breaks, y.breaks[k], y.breaks[k + 1]);
        let v = tf.eval(piece, t);
        let z = y.sample(k, j);
        let eu = ops.e.mul_vec(&v.u);
        let bt = ops.b.mul_vec_transpose(&v.p_tot);
        let r1: Vec<f64> = eu.iter().zip(&bt).map(|(a, b)| a + b).collect();
        let ev = evolution_functional(ops, &v);
        let (g1, g2) = constraint_residuals(ops, &v);
        s += w * (dot(&r1, &z.v) + dot(&ev, &z.n) + dot(&g1, &z.q_tot) + dot(&g2, &z.q));
    }
    s
}

/// `sup_{y₂} b(ỹ₁, y₂) / ‖y₂‖₂` over test functions of time degree at most
/// `tf.degree()` on the trial pieces, evaluated in closed form through the
/// Riesz maps.
pub fn residual_dual_norm(tf: &dyn TrialFunction, ops: &OperatorSet, riesz: &Riesz) -> Result<f64, LinalgError> {
    let prm = &ops.params;
    let sp = &ops.spaces;
    let gam = gamma(prm, sp);
    let breaks = tf.breakpoints();
    let q = tf.degree() + 1;
    let n0 = m_dual_norm(riesz, ops, &tf.m_initial())?;
    let mut s = n0 * n0;
    for k in 0..breaks.len() - 1 {
        for (t, w) in gauss_on(breaks[k], breaks[k + 1], q) {
            let v = tf.eval(k, t);
            let eu = ops.e.mul_vec(&v.u);
            let bt = ops.b.mul_vec_transpose(&v.p_tot);
            let r1: Vec<f64> = eu.iter().zip(&bt).map(|(a, b)| a + b).collect();
            let nu = riesz.dual_norm_u(&riesz.restrict_u(&r1))?;
            let np = riesz.dual_norm_p(&riesz.restrict_p(&evolution_functional(ops, &v)))?;
            let (g1, g2) = constraint_residuals(ops, &v);
            s += w
                * (nu * nu
                    + np * np
                    + riesz.l2_functional_sq(&g1, sp.d_zero_mean) / (prm.mu + prm.lambda)
                    + gam * riesz.l2_functional_sq(&g2, sp.pbar_zero_mean));
        }
    }
    Ok(sqrt(s))
}
