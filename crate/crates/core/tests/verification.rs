mod common;

use biot_core::assembly::{assemble_operators, OperatorSet};
use biot_core::counterexample::ModeTrial;
use biot_core::mesh::unit_square_mesh;
use biot_core::norms::{bilinear_form, residual_dual_norm, test_norm_sq, trial_norm, Riesz, TestFunction};
use biot_core::problem::{select_spaces, BoundaryConfig, MaterialParams, Tag};
use biot_core::random::RandomLoads;
use biot_core::solver::{run_trajectory, LoadData, SystemOptions};
use biot_core::norms::data_norm;
use biot_core::time::TimeGrid;
use biot_core::verification::{
    check_antiderivative, check_l2l2_pressure, check_nondegeneracy, default_sweep_bc, div_infsup_constants,
    eval_time_polynomial, evaluate_point, infsup_lower_bound, mesh_divergence_constants, project_time_polynomial,
    random_trajectory, DivergenceConstants, SweepSettings,
};
use common::{dense, max_diff};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn operators(n: usize, bc: &BoundaryConfig, params: MaterialParams) -> OperatorSet {
    let mesh = unit_square_mesh(n);
    assemble_operators(&mesh, &params, bc, select_spaces(bc, &params)).unwrap().1
}

fn clamped_bc() -> BoundaryConfig {
    BoundaryConfig::unit_square_uniform(Tag::Essential, Tag::Natural)
}

/// Extreme eigenvalues of `μ B E⁻¹ Bᵀ q = θ M q` on mean-free `q`, with the
/// constraint built into an explicit basis.
fn dense_divergence_oracle(ops: &OperatorSet) -> (f64, f64) {
    let n = ops.n_s();
    let e = dense(ops.e.matrix());
    let b = dense(&ops.b);
    let s = &b * e.try_inverse().unwrap() * b.transpose() * ops.params.mu;
    let m = dense(ops.m.matrix());
    let c = &ops.mean_vec;
    let mut z = DMatrix::<f64>::zeros(n, n - 1);
    for i in 0..n - 1 {
        z[(i, i)] = 1.0;
        z[(n - 1, i)] = -c[i] / c[n - 1];
    }
    let sz = z.transpose() * s * &z;
    let mz = z.transpose() * m * &z;
    let linv = mz.cholesky().unwrap().l().try_inverse().unwrap();
    let k = &linv * sz * linv.transpose();
    let vals = ((&k + k.transpose()) * 0.5).symmetric_eigen().eigenvalues;
    (vals.min(), vals.max())
}

#[test]
fn divergence_constants_match_dense_oracle() {
    let ops = operators(4, &clamped_bc(), MaterialParams::unit());
    let riesz = Riesz::new(&ops).unwrap();
    let dc = div_infsup_constants(&ops, &riesz).unwrap();
    let (c, big_c) = dense_divergence_oracle(&ops);
    assert!((dc.c - c).abs() < 1e-8 * c, "{} vs {c}", dc.c);
    assert!((dc.big_c - big_c).abs() < 1e-8 * big_c);
    assert!(0.0 < dc.c && dc.c <= dc.big_c);
}

#[test]
fn divergence_constants_do_not_depend_on_shear_modulus() {
    let at = |mu: f64| {
        let ops = operators(4, &clamped_bc(), MaterialParams::new(mu, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap());
        div_infsup_constants(&ops, &Riesz::new(&ops).unwrap()).unwrap()
    };
    let (a, b) = (at(1.0), at(1e3));
    assert!((a.c - b.c).abs() < 1e-8 * a.c);
    assert!((a.big_c - b.big_c).abs() < 1e-8 * a.big_c);
}

#[test]
fn divergence_constants_are_stable_under_refinement() {
    let bc = clamped_bc();
    let consts: Vec<DivergenceConstants> = [4, 8, 16]
        .iter()
        .map(|&n| mesh_divergence_constants(&unit_square_mesh(n), &bc).unwrap())
        .collect();
    let (lo, hi) = consts.iter().fold((f64::INFINITY, 0.0f64), |(l, h), d| (l.min(d.c), h.max(d.c)));
    assert!((hi - lo) / lo <= 0.1, "{consts:?}");
    for d in &consts {
        assert!(d.big_c <= 2.0 + 1e-8, "{}", d.big_c);
    }
}

#[test]
fn nondegeneracy_checks() {
    let sigma0 = MaterialParams::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let ops = operators(4, &clamped_bc(), sigma0);
    assert!(check_nondegeneracy(&ops, 0.1, SystemOptions::default()).nonsingular);
    let broken = check_nondegeneracy(
        &ops,
        0.1,
        SystemOptions {
            drop_pressure_mean_multiplier: true,
        },
    );
    assert!(!broken.nonsingular);
    assert!(broken.message.is_some());

    let ops = operators(4, &default_sweep_bc(), MaterialParams::new(1.0, 1e8, 0.1, 0.0, 1e-8, 1.0).unwrap());
    let rep = check_nondegeneracy(&ops, 1e6, SystemOptions::default());
    assert!(rep.nonsingular && rep.min_pivot_ratio > 0.0);
}

#[test]
fn zero_trial_function_is_degenerate() {
    let ops = operators(3, &default_sweep_bc(), MaterialParams::unit());
    let riesz = Riesz::new(&ops).unwrap();
    let consts = div_infsup_constants(&ops, &riesz).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = random_trajectory(&ops, TimeGrid::new(1.0, 4), &mut rng).scaled(0.0);
    let q = infsup_lower_bound(&zero, &ops, &riesz, consts).unwrap();
    assert!(q.degenerate);
    assert_eq!(q.quotient, 0.0);
    let l2 = check_l2l2_pressure(&zero, &ops, 0.0);
    assert!(l2.degenerate && l2.ratio == 0.0);
    assert_eq!(check_antiderivative(&zero, &ops, 0.0), 0.0);
}

#[test]
fn time_projection_examples() {
    let grid = TimeGrid::new(2.0, 8);
    let constant = vec![vec![1.5, -2.0]; 8];
    for r in 0..=3 {
        let c = project_time_polynomial(&constant, &grid, r).unwrap();
        for t in [0.0, 0.7, 2.0] {
            assert!(max_diff(&eval_time_polynomial(&c, t, 2.0), &[1.5, -2.0]) < 1e-13);
        }
    }
    // interval averages of p(t) = t; the best constant is the mean value 1
    let linear: Vec<Vec<f64>> = (1..=8).map(|k| vec![0.25 * (k as f64 - 0.5)]).collect();
    let c = project_time_polynomial(&linear, &grid, 0).unwrap();
    assert!((eval_time_polynomial(&c, 0.3, 2.0)[0] - 1.0).abs() < 1e-14);
    assert!(project_time_polynomial(&constant, &grid, 4).is_err());
}

#[test]
fn gamma_weighted_pressure_is_dominated_by_numerator() {
    for bc in [default_sweep_bc(), clamped_bc()] {
        for sigma in [0.0, 1e-4, 1.0] {
            let params = MaterialParams::new(1.0, 100.0, 0.3, sigma, 1.0, 1.0).unwrap();
            let ops = operators(3, &bc, params);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let traj = random_trajectory(&ops, TimeGrid::new(1.0, 5), &mut rng);
            let rep = check_l2l2_pressure(&traj, &ops, 1.0);
            assert!(rep.gamma_weighted <= rep.numerator * (1.0 + 1e-12), "{rep:?}");
        }
    }
}

fn random_test_function(ops: &OperatorSet, breaks: Vec<f64>, nodes: usize, rng: &mut ChaCha8Rng) -> TestFunction {
    let mut vecn = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let p_mean = |mut p: Vec<f64>| {
        if ops.spaces.p_zero_mean {
            let c = &ops.mean_vec_p;
            let mean = c.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / c.iter().sum::<f64>();
            p.iter_mut().for_each(|x| *x -= mean);
        }
        p
    };
    let mut y = TestFunction::zeros(ops, breaks, nodes);
    for k in 0..y.pieces() {
        for j in 0..nodes {
            let v = vecn(ops.n_u());
            let q_tot = ops.apply_pd(&vecn(ops.n_s()));
            let q = ops.apply_pbar(&vecn(ops.n_s()));
            let n = p_mean(vecn(ops.n_p()));
            let z = y.sample_mut(k, j);
            z.v = v;
            z.q_tot = q_tot;
            z.q = q;
            z.n = n;
        }
    }
    y.n0 = p_mean(vecn(ops.n_p()));
    y
}

#[test]
fn bilinear_form_is_bounded_by_the_residual_dual_norm() {
    for (bc, sigma) in [(default_sweep_bc(), 0.0), (clamped_bc(), 0.5), (clamped_bc(), 0.0)] {
        let params = MaterialParams::new(1.0, 1e4, 0.5, sigma, 0.1, 1.0).unwrap();
        let ops = operators(3, &bc, params);
        let riesz = Riesz::new(&ops).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = TimeGrid::new(1.0, 3);
        let traj = random_trajectory(&ops, grid, &mut rng);
        let sup = residual_dual_norm(&traj, &ops, &riesz).unwrap();
        for _ in 0..20 {
            let y = random_test_function(&ops, grid.breakpoints(), 2, &mut rng);
            let b = bilinear_form(&traj, &y, &ops);
            let yn = test_norm_sq(&y, &ops).sqrt();
            assert!(b.abs() <= sup * yn * (1.0 + 1e-10), "{b} > {sup} * {yn}");
        }
    }
}

#[test]
fn stability_ratio_is_invariant_under_load_scaling() {
    let mesh = unit_square_mesh(4);
    let bc = default_sweep_bc();
    let params = MaterialParams::new(1.0, 1e2, 1.0, 1e-4, 1.0, 1.0).unwrap();
    let (dofs, ops) = assemble_operators(&mesh, &params, &bc, select_spaces(&bc, &params)).unwrap();
    let riesz = Riesz::new(&ops).unwrap();
    let grid = TimeGrid::new(1.0, 6);
    let src = RandomLoads::new(42, 1.0);
    let loads = LoadData::from_fields(&mesh, &dofs, &ops, &src.fields(), None, &grid).unwrap();
    let ratio = |l: &LoadData| {
        let traj = run_trajectory(&ops, l, grid).unwrap();
        let lhs = trial_norm(&traj, &ops, &riesz).unwrap().stability_lhs();
        lhs / data_norm(l, &grid, &ops, &riesz).unwrap().stability_rhs()
    };
    let r1 = ratio(&loads);
    let r2 = ratio(&loads.scaled(-250.0));
    assert!((r1 - r2).abs() < 1e-10 * r1);
}

#[test]
fn evaluated_point_is_finite_and_positive() {
    let mesh = unit_square_mesh(4);
    let bc = default_sweep_bc();
    let consts = mesh_divergence_constants(&mesh, &bc).unwrap();
    let settings = SweepSettings {
        steps: 6,
        ..SweepSettings::default()
    };
    for params in [
        MaterialParams::new(1.0, 1e8, 0.1, 0.0, 1e-8, 1.0).unwrap(),
        MaterialParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
    ] {
        let rep = evaluate_point(&mesh, &bc, params, &settings, consts).unwrap();
        assert!(rep.stability_ratio.is_finite() && rep.stability_ratio > 0.0);
        assert!(rep.infsup_factor > 0.0 && !rep.infsup.degenerate);
        assert!(rep.boundedness.is_finite() && rep.boundedness > 0.0);
        assert!(rep.nondegeneracy.nonsingular);
        assert_eq!(rep.pr.len(), 3);
        assert!(rep.l2l2.ratio.is_finite() && rep.antiderivative.is_finite());
        assert!(rep.max_step_residual < 1e-10);
    }
}

#[test]
fn inf_sup_quotient_tracks_the_trial_norm_of_rough_modes() {
    let params = MaterialParams::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let ops = operators(6, &clamped_bc(), params);
    let riesz = Riesz::new(&ops).unwrap();
    let consts = div_infsup_constants(&ops, &riesz).unwrap();
    let l = dense(ops.l.matrix());
    let m = dense(ops.m.matrix());
    let linv = m.cholesky().unwrap().l().try_inverse().unwrap();
    let c = &linv * &l * linv.transpose();
    let eig = ((&c + c.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut factors = Vec::new();
    for &k in order.iter().skip(1).step_by(6).take(6) {
        let w = linv.transpose() * eig.eigenvectors.column(k);
        let tf = ModeTrial::from_discrete(w.as_slice().to_vec(), eig.eigenvalues[k], 1.0, ops.n_u());
        let rep = trial_norm(&tf, &ops, &riesz).unwrap();
        let q = infsup_lower_bound(&tf, &ops, &riesz, consts).unwrap();
        factors.push(q.quotient / rep.trial_sq().sqrt());
    }
    let (lo, hi) = factors.iter().fold((f64::INFINITY, 0.0f64), |(l, h), f| (l.min(*f), h.max(*f)));
    assert!(lo > 0.1 && hi <= 1.0 + 1e-10, "{factors:?}");
}
