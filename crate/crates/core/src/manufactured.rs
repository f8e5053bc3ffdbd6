//! Smooth manufactured solution on the unit square for convergence studies.
//!
//! `U = e^t (S, S)`, `P = e^t C` with `S = sin πx sin πy` and
//! `C = cos πx cos πy`, so that `U` vanishes on the boundary and `P` has
//! zero normal derivative and zero mean. Intended for a clamped
//! displacement with natural pressure conditions everywhere.

use alloc::vec::Vec;

use crate::assembly::{assemble_operators, energy_error_p, energy_error_u, LoadFields};
use crate::math::{cos, sin, sqrt, PI};
use crate::mesh::{unit_square_mesh, Point};
use crate::problem::{select_spaces, BoundaryConfig, MaterialParams, Tag};
use crate::solver::{initial_fluid_content_projected, run_trajectory, LoadData, SolverError};
use crate::time::TimeGrid;

fn parts(x: Point) -> (f64, f64, f64, f64) {
    let (sx, cx) = (sin(PI * x[0]), cos(PI * x[0]));
    let (sy, cy) = (sin(PI * x[1]), cos(PI * x[1]));
    // S, C, ∂ₓS, ∂ᵧS
    (sx * sy, cx * cy, PI * cx * sy, PI * sx * cy)
}

/// Exact fields and the data that produce them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub params: MaterialParams,
}

impl Manufactured {
    pub fn new(params: MaterialParams) -> Self {
        Self { params }
    }

    pub fn bc() -> BoundaryConfig {
        BoundaryConfig::unit_square_uniform(Tag::Essential, Tag::Natural)
    }

    pub fn u(&self, x: Point, t: f64) -> [f64; 2] {
        let (s, ..) = parts(x);
        let g = libm::exp(t);
        [g * s, g * s]
    }

    /// `grad[i][j] = ∂_j U_i`
    pub fn grad_u(&self, x: Point, t: f64) -> [[f64; 2]; 2] {
        let (_, _, sx, sy) = parts(x);
        let g = libm::exp(t);
        [[g * sx, g * sy], [g * sx, g * sy]]
    }

    pub fn p(&self, x: Point, t: f64) -> f64 {
        libm::exp(t) * parts(x).1
    }

    pub fn grad_p(&self, x: Point, t: f64) -> [f64; 2] {
        let (_, _, sx, sy) = parts(x);
        let h = libm::exp(t);
        [-h * sy, -h * sx]
    }

    /// `α div U + σ P`
    pub fn m(&self, x: Point, t: f64) -> f64 {
        let (_, c, sx, sy) = parts(x);
        let g = libm::exp(t);
        self.params.alpha * g * (sx + sy) + self.params.sigma * g * c
    }

    pub fn fields(&self) -> LoadFields {
        let prm = self.params;
        LoadFields::zero()
            .with_f_u(move |x, t| {
                let (s, c, sx, sy) = parts(x);
                let g = libm::exp(t);
                let a = g * PI * PI * (prm.mu * (3.0 * s - c) + prm.lambda * (s - c));
                [a - prm.alpha * g * sy, a - prm.alpha * g * sx]
            })
            .with_f_p(move |x, t| {
                let (_, c, sx, sy) = parts(x);
                let g = libm::exp(t);
                // ∂_t m − κΔP
                prm.alpha * g * (sx + sy) + prm.sigma * g * c + prm.kappa * 2.0 * PI * PI * g * c
            })
    }
}

/// Errors of one run at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSample {
    pub n: usize,
    pub steps: usize,
    pub h: f64,
    pub error_u: f64,
    pub error_p: f64,
}

/// Observed orders `log₂(e_k / e_{k+1})` between consecutive samples.
pub fn observed_orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| libm::log(w[0] / w[1]) / libm::log(ratio))
        .collect()
}

fn solve(mf: &Manufactured, n: usize, steps: usize) -> Result<(ConvergenceSample, Vec<f64>), SolverError> {
    let mesh = unit_square_mesh(n);
    let bc = Manufactured::bc();
    let spaces = select_spaces(&bc, &mf.params);
    let (dofs, ops) = assemble_operators(&mesh, &mf.params, &bc, spaces)?;
    let grid = TimeGrid::new(mf.params.t_final, steps);
    let mut loads = LoadData::from_fields(&mesh, &dofs, &ops, &mf.fields(), None, &grid)?;
    // the datum is mean free; projecting removes the quadrature error of its mean
    loads.m0 = initial_fluid_content_projected(&mesh, &ops, &|x| mf.m(x, 0.0))?;
    let traj = run_trajectory(&ops, &loads, grid)?;
    let t = mf.params.t_final;
    let u = traj.u.last().unwrap();
    let p = traj.p.last().unwrap();
    let error_u = energy_error_u(&mesh, &dofs, mf.params.mu, u, |x| mf.grad_u(x, t));
    let error_p = energy_error_p(&mesh, &dofs, mf.params.kappa, p, |x| mf.grad_p(x, t));
    let m = traj.m.last().unwrap().clone();
    Ok((
        ConvergenceSample {
            n,
            steps,
            h: mesh.h_max(),
            error_u,
            error_p,
        },
        m,
    ))
}

/// Final-time errors in the `𝕌` and `ℙ` norms for each mesh size.
pub fn spatial_study(mf: &Manufactured, ns: &[usize], steps: usize) -> Result<Vec<ConvergenceSample>, SolverError> {
    ns.iter().map(|&n| solve(mf, n, steps).map(|r| r.0)).collect()
}

/// `L²` distance of the terminal fluid content for each step count from a
/// reference run with `reference_steps`, all on the same mesh.
pub fn temporal_study(
    mf: &Manufactured,
    n: usize,
    steps: &[usize],
    reference_steps: usize,
) -> Result<Vec<f64>, SolverError> {
    let mesh = unit_square_mesh(n);
    let bc = Manufactured::bc();
    let spaces = select_spaces(&bc, &mf.params);
    let (_, ops) = assemble_operators(&mesh, &mf.params, &bc, spaces)?;
    let (_, m_ref) = solve(mf, n, reference_steps)?;
    let mut out = Vec::with_capacity(steps.len());
    for &s in steps {
        let (_, m) = solve(mf, n, s)?;
        let d: Vec<f64> = m.iter().zip(&m_ref).map(|(a, b)| a - b).collect();
        out.push(sqrt(ops.l2_sq(&d)));
    }
    Ok(out)
}
