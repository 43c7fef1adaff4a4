//! Accelerated proximal gradient (FISTA) for `min_x f(x) + g(x)` with smooth
//! `f` and a penalty `g` whose proximal map is available.
//!
//! The solver restarts momentum whenever the composite objective would
//! increase and falls back to a plain proximal-gradient step from the last
//! accepted iterate, so the accepted objective sequence is non-increasing.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Smooth + nonsmooth composite objective over `Array2<f64>` iterates.
pub trait CompositeProblem {
    fn smooth_value(&self, x: ArrayView2<'_, f64>) -> f64;

    fn smooth_value_and_gradient(&self, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>);

    fn penalty_value(&self, x: ArrayView2<'_, f64>) -> f64;

    /// `argmin_z 1/2 ||z - v||^2 + step * g(z)`.
    fn prox(&self, v: ArrayView2<'_, f64>, step: f64) -> Array2<f64>;

    /// Lipschitz constant of the gradient of `f`, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Closure-backed [`CompositeProblem`].
pub struct FnProblem<F, G, P, R> {
    pub smooth: F,
    pub gradient: G,
    pub prox: P,
    pub penalty: R,
    pub lipschitz: Option<f64>,
}

impl<F, G, P, R> CompositeProblem for FnProblem<F, G, P, R>
where
    F: Fn(ArrayView2<'_, f64>) -> f64,
    G: Fn(ArrayView2<'_, f64>) -> Array2<f64>,
    P: Fn(ArrayView2<'_, f64>, f64) -> Array2<f64>,
    R: Fn(ArrayView2<'_, f64>) -> f64,
{
    fn smooth_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        (self.smooth)(x)
    }

    fn smooth_value_and_gradient(&self, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        ((self.smooth)(x), (self.gradient)(x))
    }

    fn penalty_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        (self.penalty)(x)
    }

    fn prox(&self, v: ArrayView2<'_, f64>, step: f64) -> Array2<f64> {
        (self.prox)(v, step)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `1 / L` from the problem, or 1 with backtracking when `L` is unknown.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once `||x_{k+1} - x_k||_F / max(1, ||x_k||_F)` drops below this.
    pub rel_tolerance: f64,
    pub step_size: StepSize,
    /// Halve the step until the quadratic upper bound holds.
    pub backtracking: bool,
    /// Function-value momentum restart.
    pub restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 10_000,
            rel_tolerance: 1e-8,
            step_size: StepSize::Auto,
            backtracking: true,
            restart: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::contract("max_iterations must be at least 1"));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::contract("rel_tolerance must be positive"));
        }
        if let StepSize::Fixed(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::contract("fixed step size must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub solution: Array2<f64>,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Composite objective at the initial point and at every accepted iterate.
    pub objective_trace: Vec<f64>,
}

const BACKTRACK_FACTOR: f64 = 0.5;
const MIN_STEP: f64 = 1e-300;

fn sq_norm(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

fn diff_sq_norm(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|x, y| acc += (x - y) * (x - y));
    acc
}

fn non_finite(what: &str, iteration: usize, step: f64, x: ArrayView2<'_, f64>) -> Error {
    Error::numerical(format!(
        "non-finite {what} at iteration {iteration} (step {step:e}, ||x||_F = {:e})",
        sq_norm(x).sqrt()
    ))
}

/// Runs FISTA from `init`.
pub fn fista_solve<P: CompositeProblem + ?Sized>(
    problem: &P,
    init: ArrayView2<'_, f64>,
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    let mut step = match config.step_size {
        StepSize::Fixed(s) => s,
        StepSize::Auto => match problem.lipschitz() {
            Some(l) if l > 0.0 && l.is_finite() => 1.0 / l,
            _ => 1.0,
        },
    };

    let mut x = init.to_owned();
    let mut fx = problem.smooth_value(x.view()) + problem.penalty_value(x.view());
    if !fx.is_finite() {
        return Err(non_finite("objective", 0, step, x.view()));
    }
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut plain_step = true;
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let (fy, gy) = problem.smooth_value_and_gradient(y.view());
        if !fy.is_finite() {
            return Err(non_finite("smooth value", iterations, step, y.view()));
        }
        let (z, fz_smooth) = loop {
            let z = problem.prox((&y - &(&gy * step)).view(), step);
            let fz = problem.smooth_value(z.view());
            if !config.backtracking {
                break (z, fz);
            }
            let mut linear = 0.0;
            Zip::from(&gy)
                .and(&z)
                .and(&y)
                .for_each(|g, zv, yv| linear += g * (zv - yv));
            let upper = fy + linear + diff_sq_norm(z.view(), y.view()) / (2.0 * step);
            let slack = 8.0 * f64::EPSILON * fy.abs().max(fz.abs());
            if fz.is_finite() && fz <= upper + slack {
                break (z, fz);
            }
            step *= BACKTRACK_FACTOR;
            if step < MIN_STEP {
                return Err(Error::numerical(format!(
                    "backtracking step underflow at iteration {iterations}"
                )));
            }
        };
        let fz = fz_smooth + problem.penalty_value(z.view());
        if !fz.is_finite() {
            return Err(non_finite("objective", iterations, step, z.view()));
        }

        if config.restart && fz > fx {
            if !plain_step {
                // Drop momentum and retry from the last accepted iterate.
                momentum = 1.0;
                y.assign(&x);
                plain_step = true;
                continue;
            }
            // A plain proximal-gradient step that fails to decrease means we
            // are at the floating-point floor of the objective.
            converged = fz - fx <= 1e-12 * fx.abs().max(1.0);
            break;
        }

        let change = diff_sq_norm(z.view(), x.view()).sqrt() / sq_norm(x.view()).sqrt().max(1.0);
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        y = &z + &((&z - &x) * beta);
        plain_step = beta == 0.0;
        x = z;
        fx = fz;
        momentum = next_momentum;
        trace.push(fx);
        if change < config.rel_tolerance {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        solution: x,
        iterations,
        final_objective: fx,
        converged,
        objective_trace: trace,
    })
}
