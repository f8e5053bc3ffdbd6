//! Backward-Euler time stepping of the four-field system.
//!
//! Per step the unknowns are ordered `[u | p_tot | p | m | multipliers]` and
//! the rows `[momentum | total pressure | flow | fluid content | constraints]`
//! so that every diagonal block is a natural pivot candidate. The flow rows
//! are multiplied by τ:
//!
//! ```text
//! E u + Bᵀ p_tot                          (+ R θ)    = ℓ_u
//! λ B u − M p_tot − α M_sp p              (+ c μ_D)  = ℓ_ptot
//! τ L p + M_ps m                          (+ c_p μ_p) = τ ℓ_p + M_ps m_prev
//! α B u + σ M_sp p − M m                  (+ c μ_m)  = ℓ_m
//! ```
//!
//! closed by `Rᵀu = 0`, `cᵀp_tot = 0`, `c_pᵀp = 0`, `cᵀm = 0` as the space
//! configuration requires.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::assembly::{assemble_loads, assemble_scalar_functional, AssemblyError, DofMap, LoadFields, OperatorSet};
use crate::math::{abs, dot, norm2};
use crate::mesh::{Mesh, Point};
use crate::sparse::{CsrMatrix, LinalgError, LuOptions, SparseLu, TripletBuilder};
use crate::time::TimeGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("load data has {found} steps, expected {expected}")]
    StepCount { expected: usize, found: usize },
    #[error("step {step}: relative residual {residual:e} exceeds tolerance")]
    StepResidual { step: usize, residual: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Which mean-value multipliers and rigid-motion multipliers are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SystemOptions {
    /// Leaves out the multiplier fixing the mean of the pressure even when
    /// the space configuration asks for it. Only useful to exhibit a
    /// singular system.
    pub drop_pressure_mean_multiplier: bool,
}


/// Offsets of the unknown blocks in a step vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_u: usize,
    pub n_s: usize,
    pub n_p: usize,
    pub n_rm: usize,
    pub mean_d: bool,
    pub mean_p: bool,
    pub mean_m: bool,
}

impl Layout {
    pub fn u0(&self) -> usize {
        0
    }
    pub fn ptot0(&self) -> usize {
        self.n_u
    }
    pub fn p0(&self) -> usize {
        self.n_u + self.n_s
    }
    pub fn m0(&self) -> usize {
        self.n_u + self.n_s + self.n_p
    }
    pub fn rm0(&self) -> usize {
        self.n_u + 2 * self.n_s + self.n_p
    }
    pub fn mean_d_index(&self) -> Option<usize> {
        self.mean_d.then(|| self.rm0() + self.n_rm)
    }
    pub fn mean_p_index(&self) -> Option<usize> {
        self.mean_p
            .then(|| self.rm0() + self.n_rm + self.mean_d as usize)
    }
    pub fn mean_m_index(&self) -> Option<usize> {
        self.mean_m
            .then(|| self.rm0() + self.n_rm + self.mean_d as usize + self.mean_p as usize)
    }
    pub fn dim(&self) -> usize {
        self.rm0() + self.n_rm + self.mean_d as usize + self.mean_p as usize + self.mean_m as usize
    }
}

/// Load functionals of one step, on free dofs. The constraint-row data are
/// zero for the Biot equations but may be set to probe the trial norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLoads {
    pub lu: Vec<f64>,
    pub lp: Vec<f64>,
    pub lptot: Option<Vec<f64>>,
    pub lm: Option<Vec<f64>>,
}

impl StepLoads {
    pub fn zeros(ops: &OperatorSet) -> Self {
        Self {
            lu: vec![0.0; ops.n_u()],
            lp: vec![0.0; ops.n_p()],
            lptot: None,
            lm: None,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let sc = |v: &Vec<f64>| v.iter().map(|x| s * x).collect::<Vec<f64>>();
        Self {
            lu: sc(&self.lu),
            lp: sc(&self.lp),
            lptot: self.lptot.as_ref().map(sc),
            lm: self.lm.as_ref().map(sc),
        }
    }
}

/// Piecewise-constant-in-time loads (one entry per step) and the initial
/// fluid content as a vertex field.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadData {
    pub steps: Vec<StepLoads>,
    pub m0: Vec<f64>,
}

impl LoadData {
    pub fn zeros(ops: &OperatorSet, steps: usize) -> Self {
        Self {
            steps: vec![StepLoads::zeros(ops); steps],
            m0: vec![0.0; ops.n_s()],
        }
    }

    /// Samples the load fields at interval midpoints and projects the
    /// initial datum onto the fluid-content space.
    pub fn from_fields(
        mesh: &Mesh,
        dofs: &DofMap,
        ops: &OperatorSet,
        fields: &LoadFields,
        initial: Option<&dyn Fn(Point) -> f64>,
        grid: &TimeGrid,
    ) -> Result<Self, SolverError> {
        let mut steps = Vec::with_capacity(grid.steps());
        for k in 1..=grid.steps() {
            let (a, b) = grid.interval(k);
            let lv = assemble_loads(mesh, dofs, fields, 0.5 * (a + b))?;
            steps.push(StepLoads {
                lu: lv.lu,
                lp: lv.lp,
                lptot: None,
                lm: None,
            });
        }
        let m0 = match initial {
            Some(f) => initial_fluid_content(mesh, ops, f)?,
            None => vec![0.0; ops.n_s()],
        };
        Ok(Self { steps, m0 })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            steps: self.steps.iter().map(|l| l.scaled(s)).collect(),
            m0: self.m0.iter().map(|x| s * x).collect(),
        }
    }
}

/// L²-projection of the initial datum onto the vertex space; rejected when
/// the fluid-content space is mean-free and the datum is not.
pub fn initial_fluid_content(
    mesh: &Mesh,
    ops: &OperatorSet,
    f: &dyn Fn(Point) -> f64,
) -> Result<Vec<f64>, SolverError> {
    let r = assemble_scalar_functional(mesh, f);
    let total: f64 = r.iter().sum();
    let scale: f64 = r.iter().map(|v| abs(*v)).sum();
    if ops.spaces.pbar_zero_mean && abs(total) > 1e-10 * scale.max(1e-300) {
        return Err(AssemblyError::InitialMeanNonzero { mean: total / ops.area }.into());
    }
    let lu = SparseLu::factor(ops.m.matrix(), LuOptions::default())?;
    Ok(ops.apply_pbar(&lu.solve(&r)))
}

/// Like [`initial_fluid_content`], but removes the mean of the datum when
/// the fluid-content space is mean-free instead of rejecting it.
pub fn initial_fluid_content_projected(
    mesh: &Mesh,
    ops: &OperatorSet,
    f: &dyn Fn(Point) -> f64,
) -> Result<Vec<f64>, SolverError> {
    if !ops.spaces.pbar_zero_mean {
        return initial_fluid_content(mesh, ops, f);
    }
    let r = assemble_scalar_functional(mesh, f);
    let mean = r.iter().sum::<f64>() / ops.area;
    initial_fluid_content(mesh, ops, &|x| f(x) - mean)
}

/// Factorized per-step matrix for a fixed time step.
#[derive(Debug, Clone)]
pub struct StepSystem {
    matrix: CsrMatrix,
    lu: SparseLu,
    layout: Layout,
    tau: f64,
    m_ps: CsrMatrix,
}

/// Assembles the per-step matrix without factorizing it.
pub fn step_matrix(ops: &OperatorSet, tau: f64, opts: SystemOptions) -> (CsrMatrix, Layout) {
    let sp = &ops.spaces;
    let prm = &ops.params;
    let layout = Layout {
        n_u: ops.n_u(),
        n_s: ops.n_s(),
        n_p: ops.n_p(),
        n_rm: ops.rigid_motions.len(),
        mean_d: sp.d_zero_mean,
        mean_p: sp.p_zero_mean && !opts.drop_pressure_mean_multiplier,
        mean_m: sp.pbar_zero_mean,
    };
    let n = layout.dim();
    let mut t = TripletBuilder::with_capacity(
        n,
        n,
        ops.e.nnz() + 4 * ops.b.nnz() + 3 * ops.m.nnz() + ops.l.nnz() + 2 * ops.m_sp.nnz(),
    );
    let (u0, s0, p0, m0, r0) = (layout.u0(), layout.ptot0(), layout.p0(), layout.m0(), layout.rm0());
    t.push_block(u0, u0, ops.e.matrix(), 1.0);
    t.push_block_transposed(u0, s0, &ops.b, 1.0);
    t.push_block(s0, u0, &ops.b, prm.lambda);
    t.push_block(s0, s0, ops.m.matrix(), -1.0);
    t.push_block(s0, p0, &ops.m_sp, -prm.alpha);
    t.push_block(p0, p0, ops.l.matrix(), tau);
    t.push_block_transposed(p0, m0, &ops.m_sp, 1.0);
    t.push_block(m0, u0, &ops.b, prm.alpha);
    if prm.sigma != 0.0 {
        t.push_block(m0, p0, &ops.m_sp, prm.sigma);
    }
    t.push_block(m0, m0, ops.m.matrix(), -1.0);
    for (k, r) in ops.rigid_motions.iter().enumerate() {
        for (i, v) in r.iter().enumerate() {
            if *v != 0.0 {
                t.push(u0 + i, r0 + k, *v);
                t.push(r0 + k, u0 + i, *v);
            }
        }
    }
    let mut border = |idx: Option<usize>, block0: usize, c: &[f64]| {
        if let Some(j) = idx {
            for (i, v) in c.iter().enumerate() {
                if *v != 0.0 {
                    t.push(block0 + i, j, *v);
                    t.push(j, block0 + i, *v);
                }
            }
        }
    };
    border(layout.mean_d_index(), s0, &ops.mean_vec);
    border(layout.mean_p_index(), p0, &ops.mean_vec_p);
    border(layout.mean_m_index(), m0, &ops.mean_vec);
    (t.build(), layout)
}

/// Solution of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub u: Vec<f64>,
    pub p_tot: Vec<f64>,
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    /// Relative residual of the full step system.
    pub residual: f64,
}

/// Relative residual tolerance for accepting a step solve.
pub const STEP_TOL: f64 = 1e-9;

impl StepSystem {
    pub fn new(ops: &OperatorSet, tau: f64) -> Result<Self, SolverError> {
        Self::with_options(ops, tau, SystemOptions::default())
    }

    pub fn with_options(ops: &OperatorSet, tau: f64, opts: SystemOptions) -> Result<Self, SolverError> {
        if !(tau > 0.0) {
            return Err(SolverError::InvalidInput("time step must be positive"));
        }
        let (matrix, layout) = step_matrix(ops, tau, opts);
        let lu = SparseLu::factor(&matrix, LuOptions::default())?;
        Ok(Self {
            matrix,
            lu,
            layout,
            tau,
            m_ps: ops.m_sp.transpose(),
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn min_pivot_ratio(&self) -> f64 {
        self.lu.min_pivot_ratio()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advances the fluid content from `prev_m` by one step.
    pub fn step(&self, prev_m: &[f64], loads: &StepLoads) -> Result<StepSolution, SolverError> {
        let lay = self.layout;
        if prev_m.len() != lay.n_s || loads.lu.len() != lay.n_u || loads.lp.len() != lay.n_p {
            return Err(SolverError::InvalidInput("step data has wrong dimensions"));
        }
        let mut rhs = vec![0.0; lay.dim()];
        rhs[..lay.n_u].copy_from_slice(&loads.lu);
        if let Some(l) = &loads.lptot {
            rhs[lay.ptot0()..lay.ptot0() + lay.n_s].copy_from_slice(l);
        }
        let mprev = self.m_ps.mul_vec(prev_m);
        for i in 0..lay.n_p {
            rhs[lay.p0() + i] = self.tau * loads.lp[i] + mprev[i];
        }
        if let Some(l) = &loads.lm {
            rhs[lay.m0()..lay.m0() + lay.n_s].copy_from_slice(l);
        }
        let x = self.lu.solve(&rhs);
        let ax = self.matrix.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let scale = self.matrix.max_abs() * norm2(&x) + norm2(&rhs);
        let residual = if scale > 0.0 { norm2(&r) / scale } else { 0.0 };
        Ok(StepSolution {
            u: x[..lay.n_u].to_vec(),
            p_tot: x[lay.ptot0()..lay.ptot0() + lay.n_s].to_vec(),
            p: x[lay.p0()..lay.p0() + lay.n_p].to_vec(),
            m: x[lay.m0()..lay.m0() + lay.n_s].to_vec(),
            residual,
        })
    }
}

/// One backward-Euler step, factorizing the step matrix on the fly.
pub fn backward_euler_step(
    prev_m: &[f64],
    tau: f64,
    loads: &StepLoads,
    ops: &OperatorSet,
) -> Result<StepSolution, SolverError> {
    StepSystem::new(ops, tau)?.step(prev_m, loads)
}

/// Discrete trajectory: `u`, `p_tot`, `p` are constant on each interval
/// `(t_{k−1}, t_k]` (index `k − 1`), `m` is continuous piecewise linear with
/// nodal values `m[k]`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourFieldTrajectory {
    pub grid: TimeGrid,
    pub u: Vec<Vec<f64>>,
    pub p_tot: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    /// Largest relative step residual.
    pub max_residual: f64,
}

impl FourFieldTrajectory {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let sc = |f: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            f.iter().map(|v| v.iter().map(|x| s * x).collect()).collect()
        };
        Self {
            grid: self.grid,
            u: sc(&self.u),
            p_tot: sc(&self.p_tot),
            p: sc(&self.p),
            m: sc(&self.m),
            max_residual: self.max_residual,
        }
    }
}

/// Runs all steps of `loads` on the grid, reusing one factorization.
pub fn run_trajectory(ops: &OperatorSet, loads: &LoadData, grid: TimeGrid) -> Result<FourFieldTrajectory, SolverError> {
    let system = StepSystem::new(ops, grid.tau())?;
    run_with_system(&system, ops, loads, grid)
}

pub fn run_with_system(
    system: &StepSystem,
    ops: &OperatorSet,
    loads: &LoadData,
    grid: TimeGrid,
) -> Result<FourFieldTrajectory, SolverError> {
    if loads.steps.len() != grid.steps() {
        return Err(SolverError::StepCount {
            expected: grid.steps(),
            found: loads.steps.len(),
        });
    }
    if abs(system.tau() - grid.tau()) > 1e-14 * grid.tau() {
        return Err(SolverError::InvalidInput("step system built for a different time step"));
    }
    if loads.m0.len() != ops.n_s() {
        return Err(SolverError::InvalidInput("initial fluid content has wrong dimension"));
    }
    if ops.spaces.pbar_zero_mean {
        let scale = norm2(&loads.m0) * norm2(&ops.mean_vec);
        if abs(dot(&ops.mean_vec, &loads.m0)) > 1e-10 * scale.max(1e-300) {
            return Err(AssemblyError::InitialMeanNonzero {
                mean: ops.mean(&loads.m0),
            }
            .into());
        }
    }
    let n = grid.steps();
    let mut traj = FourFieldTrajectory {
        grid,
        u: Vec::with_capacity(n),
        p_tot: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        m: Vec::with_capacity(n + 1),
        max_residual: 0.0,
    };
    traj.m.push(loads.m0.clone());
    for (k, l) in loads.steps.iter().enumerate() {
        let s = system.step(traj.m.last().unwrap(), l)?;
        if s.residual > STEP_TOL {
            return Err(SolverError::StepResidual {
                step: k + 1,
                residual: s.residual,
            });
        }
        traj.max_residual = traj.max_residual.max(s.residual);
        traj.u.push(s.u);
        traj.p_tot.push(s.p_tot);
        traj.p.push(s.p);
        traj.m.push(s.m);
    }
    Ok(traj)
}

/// Initial datum as a shareable closure.
pub type InitialField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
