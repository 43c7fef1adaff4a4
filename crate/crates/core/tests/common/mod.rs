//! Independent reference implementations used as test oracles. None of them
//! call into the solvers they check.

#![allow(dead_code)]

use msmtfl::{RegWeights, TaskDataset, WeightMatrix};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha20Rng, len: usize) -> Array1<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random dataset with Gaussian designs and responses, `n_i` drawn from
/// `samples`.
pub fn random_dataset(seed: u64, dim: usize, tasks: usize, samples: std::ops::RangeInclusive<usize>) -> TaskDataset {
    let mut r = rng(seed);
    let parts = (0..tasks)
        .map(|_| {
            let n = r.random_range(samples.clone());
            (gaussian_matrix(&mut r, n, dim), gaussian_vector(&mut r, n))
        })
        .collect();
    TaskDataset::new(parts).unwrap()
}

/// `sum_i 1/(m n_i) ||X_i w_i - y_i||^2`, written out entry by entry.
pub fn loss(data: &TaskDataset, w: ArrayView2<'_, f64>) -> f64 {
    let m = data.task_count() as f64;
    let mut total = 0.0;
    for (i, t) in data.tasks().iter().enumerate() {
        let x = t.design();
        let n = x.nrows();
        let mut sq = 0.0;
        for r in 0..n {
            let mut pred = 0.0;
            for j in 0..x.ncols() {
                pred += x[[r, j]] * w[[j, i]];
            }
            sq += (pred - t.response()[r]).powi(2);
        }
        total += sq / (m * n as f64);
    }
    total
}

pub fn weighted_l1(w: ArrayView2<'_, f64>, weights: &[f64]) -> f64 {
    w.axis_iter(Axis(0))
        .zip(weights)
        .map(|(row, l)| l * row.iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

pub fn central_difference_gradient(data: &TaskDataset, w: &Array2<f64>, h: f64) -> Array2<f64> {
    let mut g = Array2::zeros(w.dim());
    for idx in ndarray::indices(w.dim()) {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[idx] += h;
        minus[idx] -= h;
        g[idx] = (loss(data, plus.view()) - loss(data, minus.view())) / (2.0 * h);
    }
    g
}

/// Cyclic coordinate descent on the weighted Lasso, one task at a time.
pub fn coordinate_descent_lasso(data: &TaskDataset, weights: &[f64], sweeps: usize, tol: f64) -> Array2<f64> {
    let d = data.dim();
    let m = data.task_count();
    let mut w = Array2::zeros((d, m));
    for (i, t) in data.tasks().iter().enumerate() {
        let x = t.design();
        let y = t.response();
        let c = 1.0 / (m as f64 * x.nrows() as f64);
        let col_sq: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
        let mut wi = Array1::<f64>::zeros(d);
        let mut resid = y.to_owned();
        for _ in 0..sweeps {
            let mut max_change = 0.0_f64;
            for j in 0..d {
                let xj = x.column(j);
                let rho = xj.dot(&resid) + col_sq[j] * wi[j];
                let thr = weights[j] / (2.0 * c);
                let new = rho.signum() * (rho.abs() - thr).max(0.0) / col_sq[j];
                let delta = new - wi[j];
                if delta != 0.0 {
                    resid.scaled_add(-delta, &xj);
                    wi[j] = new;
                }
                max_change = max_change.max(delta.abs());
            }
            if max_change < tol {
                break;
            }
        }
        w.column_mut(i).assign(&wi);
    }
    w
}

/// Per-task least squares through the normal equations (full column rank).
pub fn least_squares(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Array1<f64> {
    let d = x.ncols();
    let gram = nalgebra::DMatrix::from_fn(d, d, |a, b| x.column(a).dot(&x.column(b)));
    let rhs = nalgebra::DVector::from_fn(d, |a, _| x.column(a).dot(&y));
    let sol = gram.cholesky().expect("full column rank").solve(&rhs);
    sol.iter().copied().collect()
}

/// Largest singular value from nalgebra's SVD.
pub fn svd_sigma_max(x: ArrayView2<'_, f64>) -> f64 {
    let m = nalgebra::DMatrix::from_fn(x.nrows(), x.ncols(), |a, b| x[[a, b]]);
    m.singular_values().max()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|k| a[[k, k]]).collect()
}

fn supports(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            go(j + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, d, k, &mut Vec::new(), &mut out);
    out
}

/// `(rho_plus, rho_minus)` of one design straight from the definition:
/// extreme eigenvalues of every Gram submatrix with at most `k` columns.
pub fn sparse_eigen_oracle(x: ArrayView2<'_, f64>, k: usize) -> (f64, f64) {
    let n = x.nrows() as f64;
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for size in 1..=k {
        for s in supports(x.ncols(), size) {
            let g = Array2::from_shape_fn((size, size), |(a, b)| x.column(s[a]).dot(&x.column(s[b])) / n);
            for e in jacobi_eigenvalues(&g) {
                hi = hi.max(e);
                lo = lo.min(e);
            }
        }
    }
    (hi, lo.max(0.0))
}

/// `argmin_x 0.5 ||x - v||^2 + t ||x||_inf` by direct 1-D minimization over
/// `s = ||x||_inf`: for fixed `s` the minimizer clips `v` to `[-s, s]`, and
/// the convex objective in `s` has derivative `t - sum_k max(|v_k| - s, 0)`,
/// whose root is found by bisection.
pub fn linf_prox_oracle(v: ArrayView1<'_, f64>, t: f64) -> Array1<f64> {
    let slope = |s: f64| t - v.iter().map(|a| (a.abs() - s).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())));
    if slope(0.0) >= 0.0 {
        return Array1::zeros(v.len());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    v.mapv(|a| a.clamp(-s, s))
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn reg_weights(values: &[f64]) -> RegWeights {
    RegWeights::new(Array1::from(values.to_vec())).unwrap()
}

pub fn weight_matrix(a: Array2<f64>) -> WeightMatrix {
    WeightMatrix::new(a).unwrap()
}

pub type MatrixFn<T> = Box<dyn Fn(&Array2<f64>) -> T>;

/// A prox operator packaged with an independently written penalty (already
/// scaled) and its domain.
pub struct ProxCase {
    pub name: &'static str,
    pub shape: (usize, usize),
    pub prox: MatrixFn<Array2<f64>>,
    pub penalty: MatrixFn<f64>,
    pub feasible: MatrixFn<bool>,
}

impl ProxCase {
    pub fn objective(&self, x: &Array2<f64>, v: &Array2<f64>) -> f64 {
        0.5 * (x - v).mapv(|e| e * e).sum() + (self.penalty)(x)
    }
}

fn abs_sum(x: ArrayView2<'_, f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn row_max_sum(x: ArrayView2<'_, f64>) -> f64 {
    x.axis_iter(Axis(0))
        .map(|r| r.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        .sum()
}

/// Every prox operator of the crate with random scales drawn from `r`.
pub fn prox_cases(r: &mut ChaCha20Rng) -> Vec<ProxCase> {
    use msmtfl::prox::{dirty_prox, linf_prox_row, project_l1_ball, row_group_l2_prox, weighted_l1_prox};
    let (d, m) = (4, 3);
    let t = r.random_range(0.05..1.0);
    let lambdas: Vec<f64> = (0..d).map(|j| if j == 1 { 0.0 } else { r.random_range(0.1..1.5) }).collect();
    let group = r.random_range(0.1..2.0);
    let radius = r.random_range(0.2..3.0);
    let linf = r.random_range(0.1..2.0);
    let (ls, lb) = (r.random_range(0.1..1.0), r.random_range(0.1..2.0));
    let weights = reg_weights(&lambdas);
    let lam = lambdas.clone();
    vec![
        ProxCase {
            name: "weighted_l1",
            shape: (d, m),
            prox: Box::new(move |v| weighted_l1_prox(v.view(), &weights, t).unwrap()),
            penalty: Box::new(move |x| t * weighted_l1(x.view(), &lam)),
            feasible: Box::new(|_| true),
        },
        ProxCase {
            name: "row_group_l2",
            shape: (d, m),
            prox: Box::new(move |v| row_group_l2_prox(v.view(), group)),
            penalty: Box::new(move |x| {
                group * x.axis_iter(Axis(0)).map(|row| row.dot(&row).sqrt()).sum::<f64>()
            }),
            feasible: Box::new(|_| true),
        },
        ProxCase {
            name: "l1_ball_projection",
            shape: (1, 5),
            prox: Box::new(move |v| project_l1_ball(v.row(0), radius).insert_axis(Axis(0))),
            penalty: Box::new(|_| 0.0),
            feasible: Box::new(move |x| abs_sum(x.view()) <= radius),
        },
        ProxCase {
            name: "linf_row",
            shape: (1, 3),
            prox: Box::new(move |v| linf_prox_row(v.row(0), linf).insert_axis(Axis(0))),
            penalty: Box::new(move |x| linf * row_max_sum(x.view())),
            feasible: Box::new(|_| true),
        },
        ProxCase {
            name: "dirty",
            shape: (d, 2 * m),
            prox: Box::new(move |v| {
                let (s, b) = dirty_prox(
                    v.slice(ndarray::s![.., ..m]),
                    v.slice(ndarray::s![.., m..]),
                    ls,
                    lb,
                    t,
                )
                .unwrap();
                ndarray::concatenate(Axis(1), &[s.view(), b.view()]).unwrap()
            }),
            penalty: Box::new(move |x| {
                t * (ls * abs_sum(x.slice(ndarray::s![.., ..m])) + lb * row_max_sum(x.slice(ndarray::s![.., m..])))
            }),
            feasible: Box::new(|_| true),
        },
    ]
}

/// `true` when no feasible perturbation `p + e` with `|e_k| <= eps` lowers the
/// prox objective; ties are allowed. Infeasible draws count as trials.
pub fn prox_is_optimal(case: &ProxCase, v: &Array2<f64>, r: &mut ChaCha20Rng, trials: usize, eps: f64) -> bool {
    let p = (case.prox)(v);
    let best = case.objective(&p, v);
    (0..trials).all(|_| {
        let q = &p + &Array2::from_shape_simple_fn(p.dim(), || r.random_range(-eps..=eps));
        !(case.feasible)(&q) || case.objective(&q, v) >= best
    })
}
