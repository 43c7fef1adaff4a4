mod common;

use common::*;
use msmtfl::prox::{linf_prox_row, project_l1_ball, row_group_l2_prox};
use msmtfl::{
    dirty_fit, fista_solve, kkt_residual, l12_critical_lambda, l12_fit, lasso_fit, lipschitz_constant, loss_gradient, loss_value,
    msmtfl_fit, sparse_eigenvalues, weighted_lasso_fit, Execution, FnProblem, InnerMode, MsmtflConfig, SolverConfig,
    TaskDataset, WeightMatrix,
};
use ndarray::{array, Array2, Axis};
use rand::Rng;

fn tight() -> SolverConfig {
    SolverConfig {
        rel_tolerance: 1e-12,
        max_iterations: 200_000,
        ..SolverConfig::default()
    }
}

#[test]
fn loss_matches_direct_evaluation() {
    for seed in 0..5 {
        let data = random_dataset(seed, 6, 3, 4..=9);
        let w = gaussian_matrix(&mut rng(100 + seed), 6, 3);
        let ours = loss_value(&data, &weight_matrix(w.clone())).unwrap();
        assert!((ours - loss(&data, w.view())).abs() <= 1e-12 * ours.max(1.0));
    }
}

#[test]
fn gradient_matches_central_differences_on_large_coefficients() {
    let data = random_dataset(7, 5, 2, 6..=6);
    let w = gaussian_matrix(&mut rng(8), 5, 2) * 50.0;
    let g = loss_gradient(&data, &weight_matrix(w.clone())).unwrap();
    let fd = central_difference_gradient(&data, &w, 1e-4);
    let rel = frobenius((&g - &fd).view()) / frobenius(fd.view());
    assert!(rel < 1e-7, "relative error {rel}");
}

#[test]
fn lipschitz_constant_matches_svd() {
    for seed in 0..10 {
        let data = random_dataset(seed, 7, 3, 3..=12);
        let m = data.task_count() as f64;
        let expected = data
            .tasks()
            .iter()
            .map(|t| 2.0 * svd_sigma_max(t.design()).powi(2) / (m * t.samples() as f64))
            .fold(0.0, f64::max);
        let ours = lipschitz_constant(&data).unwrap();
        assert!((ours - expected).abs() <= 1e-5 * expected, "{ours} vs {expected}");
    }
}

#[test]
fn weighted_lasso_matches_coordinate_descent() {
    let data = random_dataset(21, 8, 3, 10..=14);
    let weights = [0.05, 0.0, 0.3, 0.1, 0.02, 0.5, 0.07, 0.0];
    let oracle = coordinate_descent_lasso(&data, &weights, 100_000, 1e-14);
    let oracle_obj = loss(&data, oracle.view()) + weighted_l1(oracle.view(), &weights);
    let w = weighted_lasso_fit(&data, &reg_weights(&weights), &WeightMatrix::zeros(8, 3), &tight()).unwrap();
    let obj = loss(&data, w.view()) + weighted_l1(w.view(), &weights);
    assert!((obj - oracle_obj).abs() < 1e-9, "{obj} vs {oracle_obj}");
}

#[test]
fn per_task_inner_mode_matches_coordinate_descent() {
    let data = random_dataset(22, 8, 3, 10..=14);
    let lambda = 0.04;
    let oracle = coordinate_descent_lasso(&data, &[lambda; 8], 100_000, 1e-14);
    let oracle_obj = loss(&data, oracle.view()) + weighted_l1(oracle.view(), &[lambda; 8]);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = MsmtflConfig {
            inner: tight(),
            inner_mode: InnerMode::PerTask(exec),
            ..MsmtflConfig::new(lambda, f64::MAX).with_stages(1)
        };
        let w = msmtfl_fit(&data, &cfg, None).unwrap().weights;
        let obj = loss(&data, w.view()) + weighted_l1(w.view(), &[lambda; 8]);
        assert!((obj - oracle_obj).abs() < 1e-9, "{exec:?}: {obj} vs {oracle_obj}");
    }
}

#[test]
fn lasso_with_tiny_lambda_matches_least_squares() {
    // n > d: the Lasso path ends at the least-squares fit.
    let data = random_dataset(3, 3, 2, 12..=12);
    let fit = lasso_fit(&data, 1e-12, &tight()).unwrap();
    for (i, t) in data.tasks().iter().enumerate() {
        let ls = least_squares(t.design(), t.response());
        for j in 0..3 {
            assert!((fit.weights.view()[[j, i]] - ls[j]).abs() < 1e-6);
        }
    }
}

#[test]
fn l12_solution_satisfies_group_optimality() {
    let data = random_dataset(5, 10, 3, 8..=10);
    let lambda = 0.5 * l12_critical_lambda(&data);
    let fit = l12_fit(&data, lambda, &tight()).unwrap();
    let g = loss_gradient(&data, &fit.weights).unwrap();
    let mut active = 0;
    for (row, grow) in fit.weights.view().axis_iter(Axis(0)).zip(g.axis_iter(Axis(0))) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            active += 1;
            let residual = &grow + &(&row * (lambda / norm));
            assert!(residual.iter().all(|v| v.abs() < 1e-6), "{residual}");
        } else {
            assert!(grow.dot(&grow).sqrt() <= lambda + 1e-8);
        }
    }
    assert!(active > 0 && active < 10);
}

#[test]
fn dirty_solution_satisfies_optimality() {
    let data = random_dataset(9, 8, 3, 8..=10);
    let (ls, lb) = (0.04, 0.09);
    let fit = dirty_fit(&data, ls, lb, &tight()).unwrap();
    let split = fit.split.as_ref().unwrap();
    let g = loss_gradient(&data, &fit.weights).unwrap();
    for ((s, b), gr) in split
        .sparse
        .axis_iter(Axis(0))
        .zip(split.block.axis_iter(Axis(0)))
        .zip(g.axis_iter(Axis(0)))
    {
        for (sv, gv) in s.iter().zip(gr.iter()) {
            if *sv != 0.0 {
                assert!((gv + ls * sv.signum()).abs() < 1e-6);
            } else {
                assert!(gv.abs() <= ls + 1e-8);
            }
        }
        let l1: f64 = gr.iter().map(|v| v.abs()).sum();
        assert!(l1 <= lb + 1e-6);
        if b.iter().any(|v| *v != 0.0) {
            assert!((l1 - lb).abs() < 1e-6, "active block row needs ||g||_1 = lambda_b, got {l1}");
        }
    }
    assert_eq!(fit.weights.view(), split.sparse.clone() + &split.block);
}

#[test]
fn linf_prox_matches_direct_minimization() {
    let mut r = rng(31);
    for _ in 0..50 {
        let len = r.random_range(1..=4);
        let v = gaussian_vector(&mut r, len) * 3.0;
        let t = r.random_range(0.01..4.0);
        let ours = linf_prox_row(v.view(), t);
        let oracle = linf_prox_oracle(v.view(), t);
        assert!((&ours - &oracle).iter().all(|e| e.abs() < 1e-8), "{ours} vs {oracle}");
    }
}

#[test]
fn l1_ball_projection_is_nearest_feasible_point() {
    let mut r = rng(41);
    for _ in 0..100 {
        let v = gaussian_vector(&mut r, 5) * 2.0;
        let radius = r.random_range(0.1..5.0);
        let p = project_l1_ball(v.view(), radius);
        let l1: f64 = p.iter().map(|x| x.abs()).sum();
        assert!(l1 <= radius + 1e-12);
        let dist = (&p - &v).mapv(|e| e * e).sum();
        for _ in 0..200 {
            let q = gaussian_vector(&mut r, 5);
            let q_l1: f64 = q.iter().map(|x| x.abs()).sum();
            let q = q * (radius * r.random_range(0.0..1.0) / q_l1);
            assert!(dist <= (&q - &v).mapv(|e| e * e).sum() + 1e-12);
        }
    }
}

#[test]
fn group_prox_zeroes_small_rows_and_shrinks_large_ones() {
    let v = array![[0.3, 0.4], [3.0, 4.0]];
    let p = row_group_l2_prox(v.view(), 1.0);
    assert_eq!(p.row(0), array![0.0, 0.0]);
    assert!((&p.row(1) - &array![2.4, 3.2]).iter().all(|e| e.abs() < 1e-15));
}

#[test]
fn sparse_eigenvalues_match_jacobi_oracle() {
    for (seed, (n, d)) in [(6usize, 4usize), (8, 5), (5, 6)].into_iter().enumerate() {
        let mut r = rng(seed as u64);
        let x = gaussian_matrix(&mut r, n, d);
        let data = TaskDataset::new(vec![(x.clone(), gaussian_vector(&mut r, n))]).unwrap();
        for k in 1..=d.min(4) {
            let ours = sparse_eigenvalues(&data, k).unwrap();
            let (hi, lo) = sparse_eigen_oracle(x.view(), k);
            assert!((ours.rho_plus[0] - hi).abs() < 1e-10, "k={k}: {} vs {hi}", ours.rho_plus[0]);
            assert!((ours.rho_minus[0] - lo).abs() < 1e-10, "k={k}: {} vs {lo}", ours.rho_minus[0]);
        }
    }
}

#[test]
fn fista_matches_closed_form_ridge() {
    // min ||x - c||^2 + 0.5 ||x||^2 has solution 2c / 3 (prox of a quadratic).
    let c = array![[1.0, -2.0], [3.0, 0.5]];
    let problem = FnProblem {
        smooth: |x: ndarray::ArrayView2<'_, f64>| (&x - &c).mapv(|e| e * e).sum(),
        gradient: |x: ndarray::ArrayView2<'_, f64>| (&x - &c) * 2.0,
        prox: |v: ndarray::ArrayView2<'_, f64>, t: f64| v.to_owned() / (1.0 + t),
        penalty: |x: ndarray::ArrayView2<'_, f64>| 0.5 * x.mapv(|e| e * e).sum(),
        lipschitz: Some(2.0),
    };
    let res = fista_solve(&problem, Array2::zeros((2, 2)).view(), &tight()).unwrap();
    assert!((&res.solution - &(&c * (2.0 / 3.0))).iter().all(|e| e.abs() < 1e-9));
}

#[test]
fn kkt_residual_is_small_after_each_stage() {
    let data = random_dataset(13, 12, 3, 6..=8);
    let cfg = MsmtflConfig {
        inner: tight(),
        ..MsmtflConfig::new(0.02, 0.1).with_stages(4)
    };
    let fit = msmtfl_fit(&data, &cfg, None).unwrap();
    for (stage, w) in fit.stage_solutions.iter().enumerate() {
        let r = kkt_residual(&data, w, &fit.reg_weights_history[stage]).unwrap();
        assert!(r < 1e-6, "stage {}: {r}", stage + 1);
        assert_eq!(r, fit.stages[stage].kkt_residual);
    }
}
