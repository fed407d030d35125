//! Small dense nonlinear programming: an augmented Lagrangian outer loop for
//! inequality constraints `gⱼ(x) ≥ 0` around a BFGS inner minimizer.
//!
//! Sized for a handful of variables; everything is dense `Vec<f64>`.

use nalgebra::{DMatrix, DVector};

/// Objective, constraint values and their derivatives at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub gradient: Vec<f64>,
    /// `gⱼ(x)`; feasible when every entry is `≥ 0`.
    pub constraints: Vec<f64>,
    /// Row `j` is `∇gⱼ(x)`.
    pub jacobian: Vec<Vec<f64>>,
}

/// A minimization problem `min f(x) s.t. g(x) ≥ 0`.
pub trait Problem {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Evaluation;
}

#[derive(Debug, Clone)]
pub struct AlOptions {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub max_multiplier: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Outer stop: largest constraint violation.
    pub feasibility_tol: f64,
    /// Outer stop: relative Lagrangian gradient norm and complementarity.
    pub stationarity_tol: f64,
}

impl Default for AlOptions {
    fn default() -> Self {
        AlOptions {
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e12,
            max_multiplier: 1e12,
            max_outer: 50,
            max_inner: 2000,
            feasibility_tol: 1e-8,
            stationarity_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlOutcome {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub violation: f64,
    pub stationarity: f64,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest violation `max(0, −gⱼ)`.
pub fn violation(constraints: &[f64]) -> f64 {
    constraints.iter().fold(0.0, |acc, &g| acc.max(-g))
}

/// KKT residual for multipliers `λ ≥ 0`: the larger of the relative
/// Lagrangian gradient norm and the complementarity measure `|min(λⱼ, gⱼ)|`.
pub fn kkt_residual(eval: &Evaluation, multipliers: &[f64]) -> f64 {
    let mut grad = eval.gradient.clone();
    for (row, &lam) in eval.jacobian.iter().zip(multipliers) {
        for (gk, dk) in grad.iter_mut().zip(row) {
            *gk -= lam * dk;
        }
    }
    let stat = inf_norm(&grad) / inf_norm(&eval.gradient).max(1.0);
    let comp = eval
        .constraints
        .iter()
        .zip(multipliers)
        .fold(0.0, |acc: f64, (&g, &lam)| acc.max(lam.min(g.max(0.0)).abs()));
    stat.max(comp)
}

/// `L_A(x) = f(x) + Σⱼ ψ(gⱼ(x), λⱼ, ρ)` with the Powell–Hestenes–Rockafellar
/// term for inequalities. Returns the value and gradient.
fn augmented(eval: &Evaluation, lambda: &[f64], rho: f64) -> (f64, Vec<f64>) {
    let mut value = eval.objective;
    let mut grad = eval.gradient.clone();
    for ((&g, row), &lam) in eval.constraints.iter().zip(&eval.jacobian).zip(lambda) {
        let shifted = lam - rho * g;
        if shifted > 0.0 {
            value += -lam * g + 0.5 * rho * g * g;
            for (gk, dk) in grad.iter_mut().zip(row) {
                *gk -= shifted * dk;
            }
        } else {
            value -= 0.5 * lam * lam / rho;
        }
    }
    (value, grad)
}

/// BFGS on a smooth function. Returns the final point and iteration count.
pub fn bfgs<F>(mut fg: F, x0: &[f64], gtol: f64, max_iter: usize) -> (Vec<f64>, usize)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let identity = |scale: f64| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
    };
    let mut x = x0.to_vec();
    let (mut fx, mut gx) = fg(&x);
    let mut h = identity(1.0);
    let mut fresh = true;
    let mut stalls = 0;
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        if !fx.is_finite() || inf_norm(&gx) <= gtol {
            break;
        }
        let mut dir: Vec<f64> = h.iter().map(|row| -dot(row, &gx)).collect();
        let mut slope = dot(&dir, &gx);
        if slope >= 0.0 {
            h = identity(1.0);
            dir = gx.iter().map(|g| -g).collect();
            slope = dot(&dir, &gx);
            fresh = true;
        }
        // backtracking Armijo search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = fg(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                break;
            }
            h = identity(1.0);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity(scale);
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
        let decrease = fx - fnew;
        if decrease <= 1e-16 * fx.abs().max(1.0) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        x = xn;
        fx = fnew;
        gx = gnew;
        if stalls >= 5 {
            break;
        }
    }
    (x, iters)
}

/// Non-negative least-squares multipliers for the near-active constraints
/// (`gⱼ ≤ active_tol`): minimizes `‖∇f − Σ λⱼ∇gⱼ‖` over `λ ≥ 0` by dropping
/// negative components until none remain.
pub fn refit_multipliers(eval: &Evaluation, active_tol: f64) -> Vec<f64> {
    let n = eval.gradient.len();
    let mut active: Vec<usize> = (0..eval.constraints.len()).filter(|&j| eval.constraints[j] <= active_tol).collect();
    let mut lambda = vec![0.0; eval.constraints.len()];
    while !active.is_empty() {
        let a = DMatrix::from_fn(n, active.len(), |r, c| eval.jacobian[active[c]][r]);
        let b = DVector::from_column_slice(&eval.gradient);
        let Ok(sol) = a.svd(true, true).solve(&b, 1e-14) else {
            break;
        };
        if let Some(worst) = (0..active.len()).filter(|&c| sol[c] < 0.0).min_by(|&p, &q| sol[p].total_cmp(&sol[q])) {
            active.remove(worst);
            continue;
        }
        for (c, &j) in active.iter().enumerate() {
            lambda[j] = sol[c];
        }
        break;
    }
    lambda
}

/// Gauss–Newton projection onto the active constraints: repeatedly applies
/// the minimum-norm step solving `J_A dx = −g_A` over rows that are violated
/// or carry a positive multiplier. Returns the polished point if it reduces
/// the violation.
fn polish_active<P: Problem>(problem: &P, x: &[f64], multipliers: &[f64], target: f64) -> Option<Vec<f64>> {
    let mut current = x.to_vec();
    let mut eval = problem.evaluate(&current);
    let start_violation = violation(&eval.constraints);
    let mut best = start_violation;
    for _ in 0..20 {
        if best <= target {
            break;
        }
        let active: Vec<usize> = (0..eval.constraints.len())
            .filter(|&j| eval.constraints[j] < 0.0 || multipliers.get(j).is_some_and(|&l| l > 0.0))
            .collect();
        if active.is_empty() {
            break;
        }
        let n = current.len();
        let a = DMatrix::from_fn(active.len(), n, |r, c| eval.jacobian[active[r]][c]);
        let b = DVector::from_iterator(active.len(), active.iter().map(|&j| -eval.constraints[j]));
        let Ok(step) = a.svd(true, true).solve(&b, 1e-14) else {
            break;
        };
        let trial: Vec<f64> = current.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
        let trial_eval = problem.evaluate(&trial);
        let v = violation(&trial_eval.constraints);
        if v.is_nan() || v >= best {
            break;
        }
        best = v;
        current = trial;
        eval = trial_eval;
    }
    (best < start_violation).then_some(current)
}

pub fn augmented_lagrangian<P: Problem>(problem: &P, x0: &[f64], opts: &AlOptions) -> AlOutcome {
    let mut x = x0.to_vec();
    let first = problem.evaluate(&x);
    let mut lambda = vec![0.0; first.constraints.len()];
    let mut rho = opts.initial_penalty;
    let mut prev_violation = f64::INFINITY;
    let mut inner_total = 0;
    let mut best_merit = f64::INFINITY;
    let mut outcome = AlOutcome {
        x: x.clone(),
        multipliers: lambda.clone(),
        outer_iterations: 0,
        inner_iterations: 0,
        violation: violation(&first.constraints),
        stationarity: f64::INFINITY,
        converged: false,
    };

    for outer in 1..=opts.max_outer {
        let grad_scale = inf_norm(&problem.evaluate(&x).gradient).max(1.0);
        let gtol = 0.1 * opts.stationarity_tol * grad_scale;
        let (xn, it) = bfgs(
            |z| augmented(&problem.evaluate(z), &lambda, rho),
            &x,
            gtol,
            opts.max_inner,
        );
        inner_total += it;
        x = xn;
        let eval = problem.evaluate(&x);
        let viol = violation(&eval.constraints);
        let updated: Vec<f64> = eval
            .constraints
            .iter()
            .zip(&lambda)
            .map(|(&g, &lam)| (lam - rho * g).max(0.0).min(opts.max_multiplier))
            .collect();
        let mut stat = kkt_residual(&eval, &updated);
        let mut reported = updated.clone();
        if viol <= opts.feasibility_tol.max(1e-6) {
            let refit = refit_multipliers(&eval, opts.feasibility_tol.max(1e-6));
            let refit_stat = kkt_residual(&eval, &refit);
            if refit_stat < stat {
                stat = refit_stat;
                reported = refit;
            }
        }
        lambda = updated;
        let merit = (viol / opts.feasibility_tol).max(stat / opts.stationarity_tol);
        if merit <= best_merit {
            best_merit = merit;
            outcome = AlOutcome {
                x: x.clone(),
                multipliers: reported,
                outer_iterations: outer,
                inner_iterations: inner_total,
                violation: viol,
                stationarity: stat,
                converged: false,
            };
        }
        outcome.outer_iterations = outer;
        outcome.inner_iterations = inner_total;
        if viol <= opts.feasibility_tol && stat <= opts.stationarity_tol {
            outcome.converged = true;
            break;
        }
        if viol > opts.feasibility_tol && viol > 0.25 * prev_violation {
            rho = (rho * opts.penalty_growth).min(opts.max_penalty);
        }
        prev_violation = viol;
    }
    if !outcome.converged && outcome.violation > opts.feasibility_tol {
        if let Some(x) = polish_active(problem, &outcome.x, &outcome.multipliers, opts.feasibility_tol) {
            let eval = problem.evaluate(&x);
            let refit = refit_multipliers(&eval, opts.feasibility_tol.max(1e-6));
            outcome.violation = violation(&eval.constraints);
            outcome.stationarity = kkt_residual(&eval, &refit);
            outcome.multipliers = refit;
            outcome.converged =
                outcome.violation <= opts.feasibility_tol && outcome.stationarity <= opts.stationarity_tol;
            outcome.x = x;
        }
    }
    outcome
}
