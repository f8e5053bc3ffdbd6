//! Experiment dispatch. Every experiment writes its CSV artifacts, a
//! `summary.txt` listing the asserted properties and a `manifest.txt`.

use std::path::{Path, PathBuf};

use biot_core::assembly::assemble_operators;
use biot_core::counterexample::{quotient_growth, rough_limit_deviation, trial_sq_nonincreasing, verify_divergence, DivergenceRow};
use biot_core::manufactured::{observed_orders, spatial_study, temporal_study, ConvergenceSample, Manufactured};
use biot_core::mesh::{unit_square_mesh, Mesh};
use biot_core::norms::{data_norm, trial_norm, Riesz};
use biot_core::problem::{select_spaces, BoundaryConfig, MaterialParams, Tag};
use biot_core::random::RandomLoads;
use biot_core::solver::{initial_fluid_content_projected, run_trajectory, LoadData, SolverError, SystemOptions};
use biot_core::time::TimeGrid;
use biot_core::verification::{
    check_nondegeneracy, evaluate_point, max_over_median, median, mesh_divergence_constants, spread,
    DivergenceConstants, InfSupReport, SweepSettings, VerificationError,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, MeshSpec, Tolerances};
use crate::meshio::{read_mesh, MeshIoError};
use crate::output::{create_dir, format_summary, write_text, Cell, Check, OutputError, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshIoError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    /// Evaluate sweep points one after another instead of in parallel.
    pub sequential: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        crate::output::all_passed(&self.checks)
    }
}

pub fn load_mesh(spec: &MeshSpec) -> Result<Mesh, RunError> {
    Ok(match spec {
        MeshSpec::UnitSquare { n } => unit_square_mesh(*n),
        MeshSpec::File { path, refinements } => {
            let mut m = read_mesh(path)?;
            for _ in 0..*refinements {
                m = m.refine_uniform();
            }
            m
        }
    })
}

fn describe_mesh(spec: &MeshSpec) -> String {
    match spec {
        MeshSpec::UnitSquare { n } => format!("unit-square n={n}"),
        MeshSpec::File { path, refinements } => {
            let name = path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
            format!("file {name} refinements={refinements}")
        }
    }
}

fn params_of(cfg: &ExperimentConfig) -> MaterialParams {
    cfg.params.expect("validated on parse")
}

/// Runs the configured experiment and writes all artifacts to
/// `opts.output_dir`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let seed = cfg.effective_seed(opts.seed)?;
    if let (Some(bc), MeshSpec::File { .. }) = (&cfg.boundary, &cfg.mesh) {
        let mesh = load_mesh(&cfg.mesh)?;
        bc.validate_labels(mesh.labels().iter().map(String::as_str))
            .map_err(|e| ConfigError::Semantic(format!("[boundary]: {e}")))?;
    }
    create_dir(&opts.output_dir)?;
    let dir = opts.output_dir.as_path();
    let mut out = match cfg.kind {
        ExperimentKind::Solve => run_solve(cfg, seed.unwrap(), dir)?,
        ExperimentKind::StabilitySweep => run_sweep(cfg, seed.unwrap(), opts.sequential, dir)?,
        ExperimentKind::InfSup => run_infsup(cfg, seed.unwrap(), opts.sequential, dir)?,
        ExperimentKind::Counterexample => run_counterexample(cfg, dir)?,
        ExperimentKind::Convergence => run_convergence(cfg, opts.sequential, dir)?,
    };
    write_text(&dir.join("summary.txt"), &format_summary(cfg.kind.name(), &out.checks))?;
    out.files.push("summary.txt".into());
    let mut manifest = format!("kind = {}\nmesh = {}\n", cfg.kind.name(), describe_mesh(&cfg.mesh));
    if let Some(s) = seed {
        manifest.push_str(&format!("seed = {s}\n"));
    }
    manifest.push_str(&format!("passed = {}\n", out.passed()));
    for f in &out.files {
        manifest.push_str(&format!("file = {f}\n"));
    }
    write_text(&dir.join("manifest.txt"), &manifest)?;
    out.files.push("manifest.txt".into());
    Ok(out)
}

fn save(table: &Table, dir: &Path, name: &str, files: &mut Vec<String>) -> Result<(), RunError> {
    table.write(&dir.join(name))?;
    files.push(name.into());
    Ok(())
}

fn run_solve(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome, RunError> {
    let mesh = load_mesh(&cfg.mesh)?;
    let bc = cfg.boundary_or_default();
    let params = params_of(cfg);
    let (dofs, ops) = assemble_operators(&mesh, &params, &bc, select_spaces(&bc, &params)).map_err(SolverError::from)?;
    let grid = TimeGrid::new(params.t_final, cfg.steps);
    let src = RandomLoads::new(seed, params.t_final);
    let mut loads = LoadData::from_fields(&mesh, &dofs, &ops, &src.fields(), None, &grid)?;
    loads.m0 = initial_fluid_content_projected(&mesh, &ops, &|x| src.initial(x))?;
    let nondeg = check_nondegeneracy(&ops, grid.tau(), SystemOptions::default());
    let traj = run_trajectory(&ops, &loads, grid)?;
    let riesz = Riesz::new(&ops).map_err(VerificationError::from)?;
    let norms = trial_norm(&traj, &ops, &riesz).map_err(VerificationError::from)?;
    let data = data_norm(&loads, &grid, &ops, &riesz).map_err(VerificationError::from)?;

    let mut files = Vec::new();
    let mut t = Table::new(["step", "t", "u_energy", "p_energy", "p_tot_l2", "p_l2", "m_l2", "m_mean"]);
    for k in 0..=grid.steps() {
        let m = &traj.m[k];
        let (u, pt, p) = if k == 0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let (u, pt, p) = (&traj.u[k - 1], &traj.p_tot[k - 1], &traj.p[k - 1]);
            (ops.u_norm_sq(u).sqrt(), ops.l2_sq(pt).sqrt(), ops.p_norm_sq(p).sqrt())
        };
        let pl2 = if k == 0 { f64::NAN } else { ops.l2_sq_p(&traj.p[k - 1]).sqrt() };
        t.push(vec![
            k.into(),
            grid.t(k).into(),
            u.into(),
            p.into(),
            pt.into(),
            pl2.into(),
            ops.l2_sq(m).sqrt().into(),
            ops.mean(m).into(),
        ]);
    }
    save(&t, dir, "trajectory.csv", &mut files)?;

    let mut n = Table::new(["term", "value"]);
    let rows: [(&str, f64); 17] = [
        ("u_term", norms.u_term),
        ("p_tot_term", norms.p_tot_term),
        ("evolution_term", norms.evolution_term),
        ("initial_term", norms.initial_term),
        ("ptot_constraint_term", norms.ptot_constraint_term),
        ("m_constraint_term", norms.m_constraint_term),
        ("div_term", norms.div_term),
        ("storage_term", norms.storage_term),
        ("m_sup_sq", norms.m_sup_sq),
        ("trial_sq", norms.trial_sq()),
        ("augmented_sq", norms.augmented_sq()),
        ("data_lu_term", data.lu_term),
        ("data_lp_term", data.lp_term),
        ("data_l0_term", data.l0_term),
        ("data_total_sq", data.total_sq()),
        ("stability_ratio", norms.stability_lhs() / data.stability_rhs()),
        ("max_step_residual", traj.max_residual),
    ];
    for (name, v) in rows {
        n.push(vec![name.into(), v.into()]);
    }
    save(&n, dir, "norms.csv", &mut files)?;

    let ratio = norms.stability_lhs() / data.stability_rhs();
    let checks = vec![
        Check::new(
            "step residual",
            traj.max_residual <= cfg.tolerances.step_residual,
            format!("max relative residual {:.3e}", traj.max_residual),
        ),
        Check::new(
            "nondegeneracy",
            nondeg.nonsingular,
            format!("min pivot ratio {:.3e}", nondeg.min_pivot_ratio),
        ),
        Check::new(
            "stability ratio finite",
            ratio.is_finite() && ratio > 0.0,
            format!("ratio {ratio:.6e}"),
        ),
    ];
    Ok(Outcome { checks, files })
}

/// Results of a parameter sweep, in grid order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub constants: DivergenceConstants,
    pub points: Vec<MaterialParams>,
    pub reports: Vec<Result<InfSupReport, VerificationError>>,
}

impl SweepResult {
    pub fn successful(&self) -> impl Iterator<Item = &InfSupReport> {
        self.reports.iter().filter_map(|r| r.as_ref().ok())
    }
}

/// Evaluates every parameter point; failures are kept per point.
pub fn stability_sweep(
    mesh: &Mesh,
    bc: &BoundaryConfig,
    points: Vec<MaterialParams>,
    settings: &SweepSettings,
    sequential: bool,
) -> Result<SweepResult, VerificationError> {
    let constants = mesh_divergence_constants(mesh, bc)?;
    let eval = |p: &MaterialParams| evaluate_point(mesh, bc, *p, settings, constants);
    let reports = if sequential {
        points.iter().map(eval).collect()
    } else {
        points.par_iter().map(eval).collect()
    };
    Ok(SweepResult {
        constants,
        points,
        reports,
    })
}

fn spread_check(name: &str, values: &[f64], limit: f64) -> Check {
    let (lo, hi) = spread(values.iter().copied());
    let r = hi / lo;
    Check::new(
        name,
        lo > 0.0 && r <= limit,
        format!("min {lo:.4e}, max {hi:.4e}, max/min {r:.4e} (limit {limit})"),
    )
}

fn median_check(name: &str, values: &[f64], factor: f64) -> Check {
    let med = median(values);
    let r = max_over_median(values);
    Check::new(
        name,
        r.is_finite() && r <= factor,
        format!("median {med:.4e}, max/median {r:.4e} (limit {factor})"),
    )
}

/// Properties asserted on a sweep.
pub fn sweep_checks(sweep: &SweepResult, tol: &Tolerances) -> Vec<Check> {
    let ok: Vec<&InfSupReport> = sweep.successful().collect();
    let failed = sweep.reports.len() - ok.len();
    let col = |f: &dyn Fn(&InfSupReport) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let mut checks = vec![Check::new(
        "all points evaluated",
        failed == 0 && !ok.is_empty(),
        format!("{} of {} points", ok.len(), sweep.reports.len()),
    )];
    checks.push(spread_check("stability ratio", &col(&|r| r.stability_ratio), tol.stability_spread));
    let singular = ok.iter().filter(|r| !r.nondegeneracy.nonsingular).count();
    let min_pivot = col(&|r| r.nondegeneracy.min_pivot_ratio).into_iter().fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "nondegeneracy",
        singular == 0 && failed == 0,
        format!("{singular} singular points, smallest pivot ratio {min_pivot:.3e}"),
    ));
    let (flo, fhi) = spread(col(&|r| r.infsup_factor));
    checks.push(Check::new(
        "inf-sup factor positive",
        flo > 0.0,
        format!("min {flo:.4e}, max {fhi:.4e}"),
    ));
    checks.push(spread_check("boundedness constant", &col(&|r| r.boundedness), tol.boundedness_spread));
    let degenerate = ok.iter().filter(|r| r.l2l2.degenerate).count();
    checks.push(Check::new(
        "nonzero trial norms",
        degenerate == 0,
        format!("{degenerate} degenerate points"),
    ));
    checks.push(median_check("L2(L2) pressure ratio", &col(&|r| r.l2l2.ratio), tol.median_factor));
    let degrees = ok.first().map_or(0, |r| r.pr.len());
    for d in 0..degrees {
        checks.push(median_check(
            &format!("degree-{d} time projection ratio"),
            &col(&|r| r.pr[d]),
            tol.median_factor,
        ));
    }
    checks.push(median_check("antiderivative ratio", &col(&|r| r.antiderivative), tol.median_factor));
    let res = col(&|r| r.max_step_residual).into_iter().fold(0.0, f64::max);
    checks.push(Check::new(
        "step residual",
        res <= tol.step_residual,
        format!("max relative residual {res:.3e}"),
    ));
    checks
}

pub fn sweep_table(sweep: &SweepResult) -> Table {
    let pr_degrees = sweep.successful().next().map_or(0, |r| r.pr.len());
    let mut header: Vec<String> = [
        "index", "mu", "lambda", "alpha", "sigma", "kappa", "T", "status", "stability_lhs", "stability_rhs",
        "stability_ratio", "trial_sq", "augmented_sq", "u_term", "p_tot_term", "evolution_term", "initial_term",
        "ptot_constraint_term", "m_constraint_term", "div_term", "storage_term", "m_sup_sq", "data_lu_term",
        "data_lp_term", "data_l0_term", "infsup_quotient", "infsup_test_norm", "infsup_s_bar", "infsup_factor",
        "boundedness", "nonsingular", "min_pivot_ratio", "l2l2_ratio", "l2l2_numerator", "l2l2_gamma_weighted",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for d in 0..pr_degrees {
        header.push(format!("pr{d}_ratio"));
    }
    header.extend(["antiderivative_ratio".into(), "max_step_residual".into(), "c_h".into(), "big_c_h".into()]);
    let mut t = Table::new(header);
    let width = t.header.len();
    for (i, (p, rep)) in sweep.points.iter().zip(&sweep.reports).enumerate() {
        let mut row: Vec<Cell> = vec![
            i.into(),
            p.mu.into(),
            p.lambda.into(),
            p.alpha.into(),
            p.sigma.into(),
            p.kappa.into(),
            p.t_final.into(),
        ];
        match rep {
            Ok(r) => {
                let n = &r.norms;
                row.push("ok".into());
                row.extend(
                    [
                        n.stability_lhs(),
                        r.data.stability_rhs(),
                        r.stability_ratio,
                        n.trial_sq(),
                        n.augmented_sq(),
                        n.u_term,
                        n.p_tot_term,
                        n.evolution_term,
                        n.initial_term,
                        n.ptot_constraint_term,
                        n.m_constraint_term,
                        n.div_term,
                        n.storage_term,
                        n.m_sup_sq,
                        r.data.lu_term,
                        r.data.lp_term,
                        r.data.l0_term,
                        r.infsup.quotient,
                        r.infsup.test_norm,
                        r.infsup.s_bar,
                        r.infsup_factor,
                        r.boundedness,
                    ]
                    .map(Cell::from),
                );
                row.push(r.nondegeneracy.nonsingular.into());
                row.extend(
                    [r.nondegeneracy.min_pivot_ratio, r.l2l2.ratio, r.l2l2.numerator, r.l2l2.gamma_weighted]
                        .map(Cell::from),
                );
                row.extend(r.pr.iter().map(|&v| Cell::from(v)));
                row.extend([r.antiderivative, r.max_step_residual, r.divergence.c, r.divergence.big_c].map(Cell::from));
            }
            Err(e) => {
                row.push(format!("error: {e}").into());
                while row.len() < width {
                    row.push(f64::NAN.into());
                }
            }
        }
        t.push(row);
    }
    t
}

fn run_sweep(cfg: &ExperimentConfig, seed: u64, sequential: bool, dir: &Path) -> Result<Outcome, RunError> {
    let mesh = load_mesh(&cfg.mesh)?;
    let bc = cfg.boundary_or_default();
    let grid = cfg.grid.clone().expect("validated on parse");
    let points = grid.points().map_err(VerificationError::from)?;
    let settings = SweepSettings {
        steps: cfg.steps,
        seed,
        pr_max_degree: cfg.pr_max_degree,
    };
    let sweep = stability_sweep(&mesh, &bc, points, &settings, sequential)?;
    let mut files = Vec::new();
    save(&sweep_table(&sweep), dir, "sweep.csv", &mut files)?;
    Ok(Outcome {
        checks: sweep_checks(&sweep, &cfg.tolerances),
        files,
    })
}

/// Divergence constants on a sequence of meshes.
pub fn divergence_study(meshes: &[Mesh], bc: &BoundaryConfig) -> Result<Vec<DivergenceConstants>, VerificationError> {
    meshes.iter().map(|m| mesh_divergence_constants(m, bc)).collect()
}

pub fn divergence_checks(consts: &[DivergenceConstants], tol: &Tolerances) -> Vec<Check> {
    let (lo, hi) = spread(consts.iter().map(|d| d.c));
    let variation = (hi - lo) / lo;
    let top = consts.iter().map(|d| d.big_c).fold(0.0, f64::max);
    vec![
        Check::new(
            "ordered divergence constants",
            consts.iter().all(|d| d.c > 0.0 && d.c <= d.big_c),
            format!("smallest c_h {lo:.6e}"),
        ),
        Check::new(
            "c_h under refinement",
            variation <= tol.refinement_variation,
            format!("relative variation {variation:.4e} (limit {})", tol.refinement_variation),
        ),
        Check::new(
            "C_h bound",
            top <= tol.upper_divergence,
            format!("largest C_h {top:.6e} (limit {})", tol.upper_divergence),
        ),
    ]
}

fn run_infsup(cfg: &ExperimentConfig, seed: u64, sequential: bool, dir: &Path) -> Result<Outcome, RunError> {
    let bc = cfg.boundary_or_default();
    let meshes: Vec<(String, Mesh)> = match &cfg.mesh {
        MeshSpec::UnitSquare { .. } => cfg
            .refinements
            .iter()
            .map(|&n| (format!("n={n}"), unit_square_mesh(n)))
            .collect(),
        MeshSpec::File { path, refinements } => {
            let base = read_mesh(path)?;
            cfg.refinements
                .iter()
                .map(|&r| {
                    let mut m = base.clone();
                    for _ in 0..refinements + r {
                        m = m.refine_uniform();
                    }
                    (format!("level={}", refinements + r), m)
                })
                .collect()
        }
    };
    let plain: Vec<Mesh> = meshes.iter().map(|(_, m)| m.clone()).collect();
    let consts: Vec<DivergenceConstants> = if sequential {
        divergence_study(&plain, &bc)?
    } else {
        plain
            .par_iter()
            .map(|m| mesh_divergence_constants(m, &bc))
            .collect::<Result<_, _>>()?
    };
    let mut files = Vec::new();
    let mut t = Table::new(["mesh", "vertices", "h", "c_h", "big_c_h"]);
    for ((label, m), d) in meshes.iter().zip(&consts) {
        t.push(vec![label.clone().into(), m.num_vertices().into(), m.h_max().into(), d.c.into(), d.big_c.into()]);
    }
    save(&t, dir, "divergence.csv", &mut files)?;
    let mut checks = divergence_checks(&consts, &cfg.tolerances);

    let mesh = load_mesh(&cfg.mesh)?;
    let base = mesh_divergence_constants(&mesh, &bc)?;
    let settings = SweepSettings {
        steps: cfg.steps,
        seed,
        pr_max_degree: cfg.pr_max_degree,
    };
    let rep = evaluate_point(&mesh, &bc, params_of(cfg), &settings, base)?;
    let mut q = Table::new([
        "b_value", "test_norm", "quotient", "s_bar", "augmented_sq", "infsup_factor", "boundedness", "stability_ratio",
    ]);
    q.push(
        [
            rep.infsup.b_value,
            rep.infsup.test_norm,
            rep.infsup.quotient,
            rep.infsup.s_bar,
            rep.norms.augmented_sq(),
            rep.infsup_factor,
            rep.boundedness,
            rep.stability_ratio,
        ]
        .map(Cell::from)
        .to_vec(),
    );
    save(&q, dir, "infsup.csv", &mut files)?;
    checks.push(Check::new(
        "inf-sup factor positive",
        rep.infsup_factor > 0.0 && !rep.infsup.degenerate,
        format!("quotient / augmented norm = {:.6e}", rep.infsup_factor),
    ));
    checks.push(Check::new(
        "nondegeneracy",
        rep.nondegeneracy.nonsingular,
        format!("min pivot ratio {:.3e}", rep.nondegeneracy.min_pivot_ratio),
    ));
    Ok(Outcome { checks, files })
}

/// Boundary configuration of the counterexample when none is configured:
/// clamped displacement, natural pressure conditions.
pub fn counterexample_bc() -> BoundaryConfig {
    BoundaryConfig::unit_square_uniform(Tag::Essential, Tag::Natural)
}

pub fn counterexample_table(rows: &[DivergenceRow], t_final: f64) -> Table {
    let mut t = Table::new([
        "k",
        "i",
        "j",
        "eigenvalue",
        "r",
        "int_p_l2",
        "int_m_l2",
        "rough",
        "trial_sq",
        "quotient",
        "p0_projection_sq",
        "p0_ratio",
        "antiderivative_sup",
        "antiderivative_ratio",
    ]);
    for (k, row) in rows.iter().enumerate() {
        let q = &row.q;
        let p0 = q.p0_projection_sq(t_final);
        let anti = q.antiderivative_sup(t_final);
        t.push(vec![
            (k + 1).into(),
            row.mode.i.into(),
            row.mode.j.into(),
            q.eigenvalue.into(),
            q.r.into(),
            q.int_p_l2.into(),
            q.int_m_l2.into(),
            q.rough.into(),
            q.trial_sq.into(),
            q.quotient().into(),
            p0.into(),
            (p0 / q.trial_sq).into(),
            anti.into(),
            (anti / q.trial_sq.sqrt()).into(),
        ]);
    }
    t
}

/// Whether the quotient increases strictly between distinct eigenvalues
/// (degenerate modes share their quotient) from `from` on.
pub fn quotient_strictly_increasing(rows: &[DivergenceRow], from: f64) -> bool {
    let tail: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.q.eigenvalue >= from)
        .map(|r| (r.q.eigenvalue, r.q.quotient()))
        .collect();
    tail.windows(2).all(|w| if w[1].0 > w[0].0 { w[1].1 > w[0].1 } else { w[1].1 == w[0].1 })
}

pub fn counterexample_checks(rows: &[DivergenceRow], t_final: f64, tol: &Tolerances) -> Vec<Check> {
    let top = rows.last().map_or(0.0, |r| r.q.eigenvalue);
    let mut checks = Vec::new();
    if top >= 250.0 {
        let dev = rough_limit_deviation(rows, t_final, 250.0);
        checks.push(Check::new(
            "rough limit T/2",
            dev <= tol.rough_limit,
            format!("largest relative deviation {dev:.4e} for eigenvalues >= 250 (limit {})", tol.rough_limit),
        ));
    }
    checks.push(Check::new(
        "trial norm decreasing",
        trial_sq_nonincreasing(rows, 100.0),
        format!("eigenvalues >= 100, last trial_sq {:.4e}", rows.last().map_or(f64::NAN, |r| r.q.trial_sq)),
    ));
    checks.push(Check::new(
        "quotient increasing",
        quotient_strictly_increasing(rows, 100.0),
        format!(
            "eigenvalues >= 100, {} modes, last eigenvalue {:.4e}, last quotient {:.4e}",
            rows.len(),
            top,
            rows.last().map_or(f64::NAN, |r| r.q.quotient())
        ),
    ));
    if let Some(g) = quotient_growth(rows, 100.0, 1000.0) {
        checks.push(Check::new(
            "quotient growth per decade",
            g >= tol.quotient_growth,
            format!("growth {g:.4e} between eigenvalues 1e2 and 1e3 (limit {})", tol.quotient_growth),
        ));
    }
    let tail: Vec<&DivergenceRow> = rows.iter().filter(|r| r.q.eigenvalue >= 100.0).collect();
    if !tail.is_empty() {
        let p0: Vec<f64> = tail.iter().map(|r| r.q.p0_projection_sq(t_final) / r.q.trial_sq).collect();
        checks.push(median_check("degree-0 time projection ratio bounded", &p0, tol.median_factor));
        let anti: Vec<f64> = tail
            .iter()
            .map(|r| r.q.antiderivative_sup(t_final) / r.q.trial_sq.sqrt())
            .collect();
        checks.push(median_check("antiderivative ratio bounded", &anti, tol.median_factor));
    }
    checks
}

fn run_counterexample(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, RunError> {
    let params = params_of(cfg);
    let bc = cfg.boundary.clone().unwrap_or_else(counterexample_bc);
    if !bc.pressure_natural_everywhere() {
        return Err(RunError::Unsupported(
            "the counterexample needs natural pressure conditions on the whole boundary".into(),
        ));
    }
    let spaces = select_spaces(&bc, &params);
    let rows = verify_divergence(cfg.modes, params.t_final, &params, &spaces);
    let mut files = Vec::new();
    save(&counterexample_table(&rows, params.t_final), dir, "counterexample.csv", &mut files)?;
    Ok(Outcome {
        checks: counterexample_checks(&rows, params.t_final, &cfg.tolerances),
        files,
    })
}

/// Spatial and temporal studies of the manufactured solution.
pub struct ConvergenceResult {
    pub spatial: Vec<ConvergenceSample>,
    pub temporal_steps: Vec<usize>,
    pub temporal: Vec<f64>,
}

pub fn convergence_study(
    params: MaterialParams,
    settings: &crate::config::ConvergenceSettings,
    sequential: bool,
) -> Result<ConvergenceResult, SolverError> {
    let mf = Manufactured::new(params);
    let spatial_job = || spatial_study(&mf, &settings.meshes, settings.steps);
    let temporal_job = || {
        temporal_study(&mf, settings.temporal_mesh, &settings.temporal_steps, settings.reference_steps)
    };
    let (spatial, temporal) = if sequential {
        (spatial_job(), temporal_job())
    } else {
        rayon::join(spatial_job, temporal_job)
    };
    Ok(ConvergenceResult {
        spatial: spatial?,
        temporal_steps: settings.temporal_steps.clone(),
        temporal: temporal?,
    })
}

fn refinement_ratios(values: &[usize]) -> Option<f64> {
    let r = values.get(1)? / values.first()?;
    values.windows(2).all(|w| w[1] == r * w[0]).then_some(r as f64)
}

pub fn convergence_checks(res: &ConvergenceResult, tol: &Tolerances) -> Result<Vec<Check>, RunError> {
    let ns: Vec<usize> = res.spatial.iter().map(|s| s.n).collect();
    let ratio = refinement_ratios(&ns).ok_or_else(|| RunError::Unsupported("meshes must refine by a constant factor".into()))?;
    let tratio = refinement_ratios(&res.temporal_steps)
        .ok_or_else(|| RunError::Unsupported("step counts must refine by a constant factor".into()))?;
    let eu: Vec<f64> = res.spatial.iter().map(|s| s.error_u).collect();
    let ep: Vec<f64> = res.spatial.iter().map(|s| s.error_p).collect();
    let ou = observed_orders(&eu, ratio);
    let op = observed_orders(&ep, ratio);
    let ot = observed_orders(&res.temporal, tratio);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::new(
            "displacement spatial order",
            min_of(&ou) >= tol.min_spatial_order,
            format!("orders [{}] (minimum {})", fmt(&ou), tol.min_spatial_order),
        ),
        Check::new(
            "pressure spatial order",
            min_of(&op) >= tol.min_spatial_order,
            format!("orders [{}] (minimum {})", fmt(&op), tol.min_spatial_order),
        ),
        Check::new(
            "fluid content temporal order",
            ot.iter().all(|o| (o - 1.0).abs() <= tol.temporal_order_band),
            format!("orders [{}] (band 1 ± {})", fmt(&ot), tol.temporal_order_band),
        ),
    ])
}

fn run_convergence(cfg: &ExperimentConfig, sequential: bool, dir: &Path) -> Result<Outcome, RunError> {
    if cfg.boundary.is_some() || !matches!(cfg.mesh, MeshSpec::UnitSquare { .. }) {
        return Err(RunError::Unsupported(
            "the convergence study uses its own unit-square meshes and boundary conditions".into(),
        ));
    }
    let res = convergence_study(params_of(cfg), &cfg.convergence, sequential)?;
    let checks = convergence_checks(&res, &cfg.tolerances)?;
    let mut files = Vec::new();
    let mut s = Table::new(["n", "steps", "h", "error_u", "error_p"]);
    for x in &res.spatial {
        s.push(vec![x.n.into(), x.steps.into(), x.h.into(), x.error_u.into(), x.error_p.into()]);
    }
    save(&s, dir, "convergence_space.csv", &mut files)?;
    let mut t = Table::new(["steps", "tau", "terminal_m_distance"]);
    let t_final = params_of(cfg).t_final;
    for (n, d) in res.temporal_steps.iter().zip(&res.temporal) {
        t.push(vec![(*n).into(), (t_final / *n as f64).into(), (*d).into()]);
    }
    save(&t, dir, "convergence_time.csv", &mut files)?;
    Ok(Outcome { checks, files })
}
