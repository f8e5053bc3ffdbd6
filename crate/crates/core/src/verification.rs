//! Numerical certification of the stability theory: divergence inf-sup
//! constants, the two-sided stability ratio, the constructive inf-sup test
//! function, nondegeneracy of the step matrix and the pressure bounds
//! satisfied by every trial function.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::{assemble_operators, AssemblyError, OperatorSet};
use crate::math::{abs, dot, sqrt};
use crate::mesh::Mesh;
use crate::norms::{
    bilinear_form, constraint_residuals, data_norm, enclosing_piece, evolution_functional, m_dual_norm,
    residual_dual_norm, test_norm_sq, trial_norm, DataNormReport, NormReport, Riesz, TestFunction,
    TrialFunction,
};
use crate::problem::{gamma, select_spaces, BoundaryConfig, MaterialParams, ProblemError, SegmentTags, Tag};
use crate::random::RandomLoads;
use crate::solver::{
    initial_fluid_content_projected, run_with_system, FourFieldTrajectory, LoadData, SolverError, StepSystem,
    SystemOptions,
};
use crate::sparse::{dense, LinalgError};
use crate::time::{gauss_on, legendre, TimeGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerificationError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("time polynomial degree {0} is not supported (at most 3)")]
    DegreeTooHigh(usize),
    #[error("data norm vanishes")]
    ZeroData,
}

/// Extreme constants of `c ‖q‖² ≤ μ ‖Bᵀq‖²_{𝕌*} ≤ C ‖q‖²` on the discrete
/// total-pressure space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceConstants {
    pub c: f64,
    pub big_c: f64,
}

/// Dense generalized eigenvalue problem `μ B E⁻¹ Bᵀ q = θ M q`. When the
/// total-pressure space is mean-free the eigenpair belonging to the
/// constants is removed.
pub fn div_infsup_constants(ops: &OperatorSet, riesz: &Riesz) -> Result<DivergenceConstants, VerificationError> {
    let n = ops.n_s();
    let mu = ops.params.mu;
    let mut s = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let bt = ops.b.mul_vec_transpose(&e);
        let col = ops.b.mul_vec(&riesz.solve_e(&bt));
        for i in 0..n {
            s[i][j] = mu * col[i];
        }
        e[j] = 0.0;
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[i][j] + s[j][i]);
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    let (vals, vecs) = dense::generalized_sym_eigen(&s, &ops.m.to_dense())?;
    let mut keep: Vec<f64> = vals.clone();
    if ops.spaces.d_zero_mean {
        let c = &ops.mean_vec;
        let (drop, _) = vecs
            .iter()
            .enumerate()
            .map(|(k, v)| (k, abs(dot(c, v))))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        keep.remove(drop);
    }
    let c = keep.iter().copied().fold(f64::INFINITY, f64::min);
    let big_c = keep.iter().copied().fold(0.0, f64::max);
    if !(c > 0.0) {
        return Err(LinalgError::Singular { step: 0, pivot: c }.into());
    }
    Ok(DivergenceConstants { c, big_c })
}

/// Result of the constructive inf-sup test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupQuotient {
    /// `b(ỹ₁, y₂)`
    pub b_value: f64,
    /// `‖y₂‖₂`
    pub test_norm: f64,
    /// `b(ỹ₁, y₂) / ‖y₂‖₂`, zero when degenerate.
    pub quotient: f64,
    /// Time at which the indicator of the second summand is cut.
    pub s_bar: f64,
    /// The test function vanished (`ỹ₁ = 0`).
    pub degenerate: bool,
}

/// Builds the test function `y₂ = y_{2,T} + y_{2,s̄}` for the trial
/// function `tf`, with `s̄` the sampled maximizer of `‖m̃(t)‖_{ℙ*}`, and
/// evaluates `b(ỹ₁, y₂) / ‖y₂‖₂`.
pub fn infsup_lower_bound(
    tf: &dyn TrialFunction,
    ops: &OperatorSet,
    riesz: &Riesz,
    consts: DivergenceConstants,
) -> Result<InfSupQuotient, VerificationError> {
    let prm = &ops.params;
    let sp = &ops.spaces;
    let gam = gamma(prm, sp);
    let trial_breaks = tf.breakpoints();

    let mut s_bar = 0.0;
    let mut best = -1.0;
    for t in crate::norms::sup_sample_times(&trial_breaks) {
        let v = m_dual_norm(riesz, ops, &tf.m_at(t))?;
        if v > best {
            best = v;
            s_bar = t;
        }
    }

    let mut breaks = trial_breaks.clone();
    let t_final = *breaks.last().unwrap();
    let tol = 1e-12 * t_final;
    if !breaks.iter().any(|b| abs(b - s_bar) <= tol) {
        let pos = breaks.iter().position(|b| *b > s_bar).unwrap();
        breaks.insert(pos, s_bar);
    }

    let nodes = tf.degree() + 1;
    let mut y = TestFunction::zeros(ops, breaks.clone(), nodes);
    let kq = 4.0 * consts.big_c.max(1.0) / (prm.mu + prm.lambda);
    let kqq = 4.0 * gam / consts.c.min(1.0);
    for k in 0..breaks.len() - 1 {
        let piece = enclosing_piece(&trial_breaks, breaks[k], breaks[k + 1]);
        let factor = if breaks[k + 1] <= s_bar + tol { 2.0 } else { 1.0 };
        for (j, (t, _)) in gauss_on(breaks[k], breaks[k + 1], nodes).into_iter().enumerate() {
            let v = tf.eval(piece, t);
            let ev = evolution_functional(ops, &v);
            let (g1, g2) = constraint_residuals(ops, &v);
            let ebt = riesz.solve_e(&ops.b.mul_vec_transpose(&v.p_tot));
            let mps = ops.m_sp.mul_vec_transpose(&v.m);
            let rn: Vec<f64> = mps.iter().zip(&ev).map(|(a, b)| 2.0 * a + b).collect();
            let n = riesz.solve_l(&riesz.restrict_p(&rn));
            let qt = ops.apply_pd(&riesz.solve_m(&g1));
            let q = ops.apply_pbar(&riesz.solve_m(&g2));
            let z = y.sample_mut(k, j);
            z.v = v.u.iter().zip(&ebt).map(|(a, b)| factor * (a + b)).collect();
            z.q_tot = qt.iter().map(|x| factor * kq * x).collect();
            z.q = q.iter().map(|x| factor * kqq * x).collect();
            z.n = n.iter().map(|x| factor * x).collect();
        }
    }
    let m0 = ops.m_sp.mul_vec_transpose(&tf.m_initial());
    y.n0 = riesz.solve_l(&riesz.restrict_p(&m0)).iter().map(|x| 4.0 * x).collect();

    let b_value = bilinear_form(tf, &y, ops);
    let test_norm = sqrt(test_norm_sq(&y, ops).max(0.0));
    let degenerate = test_norm == 0.0;
    Ok(InfSupQuotient {
        b_value,
        test_norm,
        quotient: if degenerate { 0.0 } else { b_value / test_norm },
        s_bar,
        degenerate,
    })
}

/// Outcome of factorizing the per-step matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NondegeneracyReport {
    pub nonsingular: bool,
    /// Smallest accepted pivot relative to the largest matrix entry, or the
    /// rejected pivot ratio when singular.
    pub min_pivot_ratio: f64,
    pub message: Option<String>,
}

pub fn check_nondegeneracy(ops: &OperatorSet, tau: f64, opts: SystemOptions) -> NondegeneracyReport {
    match StepSystem::with_options(ops, tau, opts) {
        Ok(sys) => NondegeneracyReport {
            nonsingular: true,
            min_pivot_ratio: sys.min_pivot_ratio(),
            message: None,
        },
        Err(err) => {
            let pivot = match err {
                SolverError::Linalg(LinalgError::Singular { pivot, .. }) => pivot,
                _ => 0.0,
            };
            NondegeneracyReport {
                nonsingular: false,
                min_pivot_ratio: pivot,
                message: Some(alloc::format!("{err}")),
            }
        }
    }
}

/// Pressure bound in `L²(L²)`: numerator, the `γ⁻¹`-weighted lower
/// quantity and the ratio against `(1 + T)` times the squared trial norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2PressureCheck {
    pub numerator: f64,
    pub gamma_weighted: f64,
    pub ratio: f64,
    pub degenerate: bool,
}

/// `[α²/(μ+λ) ∫‖𝓟_𝔻 p‖² + σ ∫‖p‖²] / ((1 + T) ‖ỹ₁‖₁²)` for a trajectory.
pub fn check_l2l2_pressure(traj: &FourFieldTrajectory, ops: &OperatorSet, trial_sq: f64) -> L2PressureCheck {
    let prm = &ops.params;
    let gam = gamma(prm, &ops.spaces);
    let mut num = 0.0;
    let mut low = 0.0;
    for (k, p) in traj.p.iter().enumerate() {
        let (a, b) = traj.grid.interval(k + 1);
        let tau = b - a;
        let pd = ops.apply_pd(&ops.p_to_s(p));
        let pp = ops.l2_sq_p(p);
        num += tau * (prm.alpha * prm.alpha / (prm.mu + prm.lambda) * ops.l2_sq(&pd) + prm.sigma * pp);
        low += tau * pp / gam;
    }
    let t_final = traj.grid.t_final();
    let degenerate = trial_sq == 0.0;
    L2PressureCheck {
        numerator: num,
        gamma_weighted: low,
        ratio: if degenerate { 0.0 } else { num / ((1.0 + t_final) * trial_sq) },
        degenerate,
    }
}

/// Orthonormal Legendre polynomial of degree `j` on `[0, T]`.
fn shifted_legendre(j: usize, t: f64, t_final: f64) -> f64 {
    let x = 2.0 * t / t_final - 1.0;
    legendre(j, x).0 * sqrt((2 * j + 1) as f64 / t_final)
}

/// `L²`-orthogonal projection in time of a piecewise-constant history onto
/// polynomials of degree `r`: coefficients of the orthonormal Legendre
/// basis on `[0, T]`, one spatial vector per degree. Exact in time.
pub fn project_time_polynomial(p: &[Vec<f64>], grid: &TimeGrid, r: usize) -> Result<Vec<Vec<f64>>, VerificationError> {
    if r > 3 {
        return Err(VerificationError::DegreeTooHigh(r));
    }
    let dim = p.first().map_or(0, |v| v.len());
    let t_final = grid.t_final();
    let mut coeffs = vec![vec![0.0; dim]; r + 1];
    for (k, pk) in p.iter().enumerate() {
        let (a, b) = grid.interval(k + 1);
        for (j, c) in coeffs.iter_mut().enumerate() {
            let w: f64 = gauss_on(a, b, r + 1)
                .into_iter()
                .map(|(t, w)| w * shifted_legendre(j, t, t_final))
                .sum();
            for (ci, pi) in c.iter_mut().zip(pk) {
                *ci += w * pi;
            }
        }
    }
    Ok(coeffs)
}

/// Evaluates a time polynomial given by [`project_time_polynomial`].
pub fn eval_time_polynomial(coeffs: &[Vec<f64>], t: f64, t_final: f64) -> Vec<f64> {
    let dim = coeffs.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; dim];
    for (j, c) in coeffs.iter().enumerate() {
        let phi = shifted_legendre(j, t, t_final);
        for (o, ci) in out.iter_mut().zip(c) {
            *o += phi * ci;
        }
    }
    out
}

/// `∫ ‖𝓟_r p‖²_ℙ / ‖ỹ₁‖₁²`.
pub fn check_pr_bound(traj: &FourFieldTrajectory, ops: &OperatorSet, r: usize, trial_sq: f64) -> Result<f64, VerificationError> {
    let coeffs = project_time_polynomial(&traj.p, &traj.grid, r)?;
    let num: f64 = coeffs.iter().map(|c| ops.p_norm_sq(c)).sum();
    Ok(if trial_sq == 0.0 { 0.0 } else { num / trial_sq })
}

/// `sup_t ‖∫₀ᵗ p‖_ℙ / ‖ỹ₁‖₁`. The antiderivative of a piecewise-constant
/// history is piecewise linear, so the supremum is attained at a node.
pub fn check_antiderivative(traj: &FourFieldTrajectory, ops: &OperatorSet, trial_sq: f64) -> f64 {
    let mut acc = vec![0.0; ops.n_p()];
    let mut sup: f64 = 0.0;
    for (k, p) in traj.p.iter().enumerate() {
        let (a, b) = traj.grid.interval(k + 1);
        for (x, pi) in acc.iter_mut().zip(p) {
            *x += (b - a) * pi;
        }
        sup = sup.max(sqrt(ops.p_norm_sq(&acc).max(0.0)));
    }
    if trial_sq == 0.0 {
        0.0
    } else {
        sup / sqrt(trial_sq)
    }
}

/// Random discrete trial function with the time structure of a
/// backward-Euler trajectory, respecting all mean and essential constraints.
pub fn random_trajectory(ops: &OperatorSet, grid: TimeGrid, rng: &mut impl Rng) -> FourFieldTrajectory {
    let mut vecn = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let n = grid.steps();
    let mut u = Vec::with_capacity(n);
    let mut p_tot = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n + 1);
    for _ in 0..n {
        u.push(vecn(ops.n_u()));
        p_tot.push(ops.apply_pd(&vecn(ops.n_s())));
        p.push(project_p_mean(ops, vecn(ops.n_p())));
    }
    for _ in 0..=n {
        m.push(ops.apply_pbar(&vecn(ops.n_s())));
    }
    FourFieldTrajectory {
        grid,
        u,
        p_tot,
        p,
        m,
        max_residual: 0.0,
    }
}

fn project_p_mean(ops: &OperatorSet, mut p: Vec<f64>) -> Vec<f64> {
    if ops.spaces.p_zero_mean {
        let c = &ops.mean_vec_p;
        let mean = dot(c, &p) / c.iter().sum::<f64>();
        for x in &mut p {
            *x -= mean;
        }
    }
    p
}

/// Ratio `sup_{y₂} b(ỹ₁, y₂)/‖y₂‖₂ / ‖ỹ₁‖₁` for a trial function.
pub fn boundedness_ratio(tf: &dyn TrialFunction, ops: &OperatorSet, riesz: &Riesz) -> Result<f64, VerificationError> {
    let rep = trial_norm(tf, ops, riesz)?;
    let sup = residual_dual_norm(tf, ops, riesz)?;
    Ok(if rep.trial_sq() == 0.0 { 0.0 } else { sup / sqrt(rep.trial_sq()) })
}

/// Axes of the material-parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub alpha: Vec<f64>,
    pub mu: f64,
    pub t_final: f64,
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self {
            lambda: vec![1.0, 1e2, 1e4, 1e8],
            sigma: vec![0.0, 1e-8, 1e-4, 1.0],
            kappa: vec![1e-8, 1.0],
            alpha: vec![0.1, 1.0],
            mu: 1.0,
            t_final: 1.0,
        }
    }
}

impl ParameterGrid {
    /// All grid points, `λ` varying slowest and `α` fastest.
    pub fn points(&self) -> Result<Vec<MaterialParams>, ProblemError> {
        let mut out = Vec::new();
        for &lambda in &self.lambda {
            for &sigma in &self.sigma {
                for &kappa in &self.kappa {
                    for &alpha in &self.alpha {
                        out.push(MaterialParams::new(self.mu, lambda, alpha, sigma, kappa, self.t_final)?);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.lambda.len() * self.sigma.len() * self.kappa.len() * self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Clamped displacement everywhere, pressure prescribed on `top` and
/// natural elsewhere.
pub fn default_sweep_bc() -> BoundaryConfig {
    let mut bc = BoundaryConfig::unit_square_uniform(Tag::Essential, Tag::Natural);
    bc.set("top", SegmentTags::new(Tag::Essential, Tag::Essential));
    bc
}

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub steps: usize,
    pub seed: u64,
    /// Highest time degree for the polynomial projection check.
    pub pr_max_degree: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            steps: 16,
            seed: 20240611,
            pr_max_degree: 2,
        }
    }
}

/// Everything measured at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct InfSupReport {
    pub params: MaterialParams,
    pub divergence: DivergenceConstants,
    pub norms: NormReport,
    pub data: DataNormReport,
    /// Left over right side of the two-sided stability bound.
    pub stability_ratio: f64,
    pub infsup: InfSupQuotient,
    /// Inf-sup quotient over the augmented trial norm.
    pub infsup_factor: f64,
    pub boundedness: f64,
    pub nondegeneracy: NondegeneracyReport,
    pub l2l2: L2PressureCheck,
    /// `check_pr_bound` for `r = 0..=pr_max_degree`.
    pub pr: Vec<f64>,
    pub antiderivative: f64,
    pub max_step_residual: f64,
}

/// Solves with seeded random loads at one parameter point and evaluates
/// every check. `consts` are the divergence constants of the mesh and
/// boundary configuration (they do not depend on the material).
pub fn evaluate_point(
    mesh: &Mesh,
    bc: &BoundaryConfig,
    params: MaterialParams,
    settings: &SweepSettings,
    consts: DivergenceConstants,
) -> Result<InfSupReport, VerificationError> {
    let spaces = select_spaces(bc, &params);
    let (dofs, ops) = assemble_operators(mesh, &params, bc, spaces)?;
    let grid = TimeGrid::new(params.t_final, settings.steps);
    let loads_src = RandomLoads::new(settings.seed, params.t_final);
    let mut loads = LoadData::from_fields(mesh, &dofs, &ops, &loads_src.fields(), None, &grid)?;
    loads.m0 = initial_fluid_content_projected(mesh, &ops, &|x| loads_src.initial(x))?;

    let nondegeneracy = check_nondegeneracy(&ops, grid.tau(), SystemOptions::default());
    let system = StepSystem::new(&ops, grid.tau())?;
    let traj = run_with_system(&system, &ops, &loads, grid)?;
    let riesz = Riesz::new(&ops)?;
    let norms = trial_norm(&traj, &ops, &riesz)?;
    let data = data_norm(&loads, &grid, &ops, &riesz)?;
    if data.stability_rhs() == 0.0 {
        return Err(VerificationError::ZeroData);
    }
    let infsup = infsup_lower_bound(&traj, &ops, &riesz, consts)?;
    let aug = norms.augmented_sq();
    let trial_sq = norms.trial_sq();

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let rand_traj = random_trajectory(&ops, grid, &mut rng);
    let boundedness = boundedness_ratio(&rand_traj, &ops, &riesz)?;

    let pr = (0..=settings.pr_max_degree)
        .map(|r| check_pr_bound(&traj, &ops, r, trial_sq))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InfSupReport {
        params,
        divergence: consts,
        stability_ratio: norms.stability_lhs() / data.stability_rhs(),
        infsup_factor: if aug == 0.0 { 0.0 } else { infsup.quotient / sqrt(aug) },
        infsup,
        boundedness,
        nondegeneracy,
        l2l2: check_l2l2_pressure(&traj, &ops, trial_sq),
        pr,
        antiderivative: check_antiderivative(&traj, &ops, trial_sq),
        max_step_residual: traj.max_residual,
        norms,
        data,
    })
}

/// Divergence constants for a mesh and boundary configuration.
pub fn mesh_divergence_constants(mesh: &Mesh, bc: &BoundaryConfig) -> Result<DivergenceConstants, VerificationError> {
    let params = MaterialParams::unit();
    let spaces = select_spaces(bc, &params);
    let (_, ops) = assemble_operators(mesh, &params, bc, spaces)?;
    let riesz = Riesz::new(&ops)?;
    div_infsup_constants(&ops, &riesz)
}

/// Smallest and largest value of a sample, ignoring non-finite entries.
pub fn spread(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Median of a sample (mean of the two central values for even length).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest sample value relative to the median.
pub fn max_over_median(values: &[f64]) -> f64 {
    let m = median(values);
    let (_, hi) = spread(values.iter().copied());
    hi / m
}
