mod common;

use biot_core::assembly::{assemble_operators, OperatorSet};
use biot_core::counterexample::{
    eigen_sequence, quotient_growth, rough_limit_deviation, rough_quantities, rough_quantities_for,
    trial_sq_nonincreasing, verify_divergence, EigenMode, ModeTrial,
};
use biot_core::mesh::{unit_square_mesh, Mesh};
use biot_core::norms::{trial_norm, Riesz};
use biot_core::problem::{select_spaces, BoundaryConfig, MaterialParams, SpaceConfig, Tag};
use biot_core::time::TimeGrid;
use biot_core::verification::{check_antiderivative, check_pr_bound};
use common::dense;
use nalgebra::DVector;
use std::f64::consts::PI;

fn unit_params() -> MaterialParams {
    MaterialParams::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap()
}

fn neumann_bc() -> BoundaryConfig {
    BoundaryConfig::unit_square_uniform(Tag::Essential, Tag::Natural)
}

fn spaces(params: &MaterialParams) -> SpaceConfig {
    select_spaces(&neumann_bc(), params)
}

fn setup(n: usize, params: MaterialParams) -> (Mesh, OperatorSet, Riesz) {
    let mesh = unit_square_mesh(n);
    let bc = neumann_bc();
    let (_, ops) = assemble_operators(&mesh, &params, &bc, select_spaces(&bc, &params)).unwrap();
    let riesz = Riesz::new(&ops).unwrap();
    (mesh, ops, riesz)
}

/// Discrete eigenpairs of `L w = λ M w`, `M`-normalized, ascending, constant
/// mode dropped.
fn discrete_modes(ops: &OperatorSet, count: usize) -> Vec<(f64, Vec<f64>)> {
    let l = dense(ops.l.matrix());
    let m = dense(ops.m.matrix());
    let linv = m.cholesky().unwrap().l().try_inverse().unwrap();
    let c = &linv * &l * linv.transpose();
    let eig = ((&c + c.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order[1..=count]
        .iter()
        .map(|&k| {
            let w: DVector<f64> = linv.transpose() * eig.eigenvectors.column(k);
            (eig.eigenvalues[k], w.as_slice().to_vec())
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

#[test]
fn closed_forms_for_synthetic_eigenvalues() {
    let p = unit_params();
    let sp = spaces(&p);
    let q = rough_quantities_for(5.0, 1.0, &p, &sp);
    assert_eq!(q.r, 5);
    assert!((q.int_p_l2 - 1.0 / 11.0).abs() < 1e-12);
    assert!((q.rough - 5.0 / 11.0).abs() < 1e-12);
    assert!((q.int_m_l2 - 25.0 / 468.0).abs() < 1e-12);
    assert!((q.trial_sq - (0.5 / 11.0 + 2.0 * 25.0 / 468.0)).abs() < 1e-12);
    assert!((q.trial_sq - 0.15229).abs() < 5e-6);

    let q = rough_quantities_for(100.0, 1.0, &p, &sp);
    assert!((q.int_p_l2 - 1.0 / 201.0).abs() < 1e-12);
    assert!((q.rough - 100.0 / 201.0).abs() < 1e-12);
    assert!((q.rough / 0.5 - 1.0).abs() < 0.005);
    let expected = 0.5 / 201.0 + 2.0 * 1e4 / (101.0 * 101.0 * 203.0);
    assert!((q.trial_sq - expected).abs() < 1e-12);
    assert!((q.trial_sq - 0.012146).abs() < 1e-6);
    assert!((q.quotient() - 41.0).abs() < 0.1, "{}", q.quotient());
}

#[test]
fn eigen_sequence_is_sorted_and_starts_with_the_lowest_modes() {
    let seq = eigen_sequence(40, 1.0);
    assert_eq!(seq.len(), 40);
    let idx: Vec<(u32, u32)> = seq.iter().take(5).map(|m| (m.i, m.j)).collect();
    assert_eq!(idx, vec![(0, 1), (1, 0), (1, 1), (0, 2), (2, 0)]);
    assert!((seq[0].eigenvalue - PI * PI).abs() < 1e-12);
    assert!((seq[2].eigenvalue - 2.0 * PI * PI).abs() < 1e-12);
    assert!(seq.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
    // every mode strictly below the last one fits in the sequence
    let top = seq.last().map(|m| m.i * m.i + m.j * m.j).unwrap();
    let below = (0..20u32)
        .flat_map(|i| (0..20u32).map(move |j| (i, j)))
        .filter(|&(i, j)| i + j > 0 && i * i + j * j < top)
        .count();
    assert!(below <= 40);
    assert_eq!(eigen_sequence(3, 0.5)[0].eigenvalue, 0.5 * PI * PI);
}

#[test]
fn modes_are_normalized() {
    let mesh = unit_square_mesh(40);
    for mode in [EigenMode::new(1, 0, 1.0), EigenMode::new(0, 2, 1.0), EigenMode::new(1, 2, 1.0)] {
        let zero = vec![0.0; mesh.num_vertices()];
        let norm = biot_core::assembly::l2_error_scalar(&mesh, &zero, |x| mode.eval(x));
        assert!((norm - 1.0).abs() < 1e-4, "{norm}");
    }
}

#[test]
fn discrete_mode_trial_matches_closed_forms() {
    let params = unit_params();
    let (_, ops, riesz) = setup(6, params);
    for (lam, w) in discrete_modes(&ops, 6) {
        let tf = ModeTrial::from_discrete(w, lam, 1.0, ops.n_u());
        let rep = trial_norm(&tf, &ops, &riesz).unwrap();
        let q = rough_quantities_for(lam, 1.0, &params, &ops.spaces);
        assert!(rep.evolution_term <= 1e-20 * q.trial_sq, "residual {}", rep.evolution_term);
        assert_eq!(rep.initial_term, 0.0);
        assert!(close(rep.trial_sq(), q.trial_sq, 1e-10), "{} vs {}", rep.trial_sq(), q.trial_sq);
        assert_eq!(rep.u_term + rep.p_tot_term + rep.storage_term, 0.0);
    }
}

#[test]
fn discrete_mode_with_storage_matches_closed_forms() {
    let params = MaterialParams::new(2.0, 5.0, 0.7, 0.3, 0.8, 1.5).unwrap();
    let (_, ops, riesz) = setup(5, params);
    for (lam, w) in discrete_modes(&ops, 3) {
        let tf = ModeTrial::from_discrete(w, lam, params.t_final, ops.n_u());
        let rep = trial_norm(&tf, &ops, &riesz).unwrap();
        let q = rough_quantities_for(lam, params.t_final, &params, &ops.spaces);
        assert!(close(rep.trial_sq(), q.trial_sq, 1e-10), "{} vs {}", rep.trial_sq(), q.trial_sq);
    }
}

#[test]
fn interpolated_mode_matches_closed_forms_within_two_percent() {
    let params = unit_params();
    let (mesh, ops, riesz) = setup(32, params);
    for mode in eigen_sequence(3, params.kappa) {
        let tf = ModeTrial::new(&mesh, &ops, &mode, 1.0);
        let rep = trial_norm(&tf, &ops, &riesz).unwrap();
        let q = rough_quantities(&mode, 1.0, &params, &ops.spaces);
        assert!(close(rep.trial_sq(), q.trial_sq, 0.02), "{} vs {}", rep.trial_sq(), q.trial_sq);
    }
}

#[test]
fn time_projection_and_antiderivative_of_discrete_modes() {
    let params = unit_params();
    let (_, ops, _) = setup(6, params);
    let grid = TimeGrid::new(1.0, 8);
    for (lam, w) in discrete_modes(&ops, 4) {
        let tf = ModeTrial::from_discrete(w, lam, 1.0, ops.n_u());
        let traj = tf.stepped(grid);
        let q = rough_quantities_for(lam, 1.0, &params, &ops.spaces);
        let p0 = check_pr_bound(&traj, &ops, 0, 1.0).unwrap();
        assert!(close(p0, q.p0_projection_sq(1.0), 1e-10), "{p0}");
        let anti = check_antiderivative(&traj, &ops, 1.0);
        assert!(close(anti, q.antiderivative_sup(1.0), 1e-10));
    }
}

#[test]
fn divergence_table_properties() {
    let p = unit_params();
    let sp = spaces(&p);
    let rows = verify_divergence(400, 1.0, &p, &sp);
    assert!(rows.last().unwrap().q.eigenvalue > 1e3);
    assert!(rough_limit_deviation(&rows, 1.0, 250.0) < 0.01);
    assert!(trial_sq_nonincreasing(&rows, 100.0));
    assert!(quotient_growth(&rows, 100.0, 1000.0).unwrap() >= 5.0);
    // trial norm vanishes while the pressure norm does not
    let last = rows.last().unwrap().q;
    assert!(last.trial_sq < 2e-3);
    assert!(last.rough > 0.49);
    // the projected pressure and the antiderivative stay controlled
    for r in rows.iter().filter(|r| r.q.eigenvalue >= 100.0) {
        assert!(r.q.p0_projection_sq(1.0) / r.q.trial_sq < 1.0);
        assert!(r.q.antiderivative_sup(1.0) / r.q.trial_sq.sqrt() < 1.0);
    }
}
