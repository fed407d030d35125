//! The incomplete-information contract as a convex program over the required
//! contributions alone.
//!
//! The type-1 participation constraint and the downward adjacent incentive
//! constraints bind at any optimum, which pins the expected reward values to
//! the contributions:
//!
//! ```text
//! t₁ = f₁ + c₁m₁,    tᵢ = tᵢ₋₁ + cᵢ(mᵢ − mᵢ₋₁)
//! ```
//!
//! Substituting leaves `I` variables and three constraint families: ordering
//! (`0 ≤ m₁ ≤ … ≤ m_I`), participation for the lower-cost types, and the
//! conditional budget `tᵢ ≤ 𝔼[v(a(Σnm)) | nᵢ ≥ 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complete::{solve_complete, FairnessSurpluses};
use crate::error::{Error, Result};
use crate::optim::{augmented_lagrangian, kkt_residual, refit_multipliers, violation, AlOptions, Evaluation, Problem};
use crate::reservation::{reserve_all, ReservationPoint};
use crate::summation::CompensatedSum;
use crate::types::{enumerate_with_cap, OutcomeTable, Population, Realization, DEFAULT_ENUM_CAP};

/// One option `(tᵢ, mᵢ)` per type: expected reward value and required data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractMenu {
    pub t: Vec<f64>,
    pub m: Vec<f64>,
}

impl ContractMenu {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Every type offered its own solo option `(ṽ(m̄ᵢ), m̄ᵢ)`.
    pub fn reservation(pop: &Population, res: &[ReservationPoint]) -> Self {
        ContractMenu {
            t: res.iter().map(|r| r.worth(pop.economy())).collect(),
            m: res.iter().map(|r| r.m_bar).collect(),
        }
    }

    /// Whether `m` and `t` are both non-decreasing up to `tol`.
    pub fn is_ordered(&self, tol: f64) -> bool {
        self.m.windows(2).all(|w| w[1] >= w[0] - tol) && self.t.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Expected accuracy of the collectively trained model.
    pub objective: f64,
    pub iterations: usize,
    /// Largest constraint violation in money, divided by `max(1, |f₁|)`.
    pub max_constraint_violation: f64,
    pub stationarity_residual: f64,
    pub status: SolveStatus,
}

/// Expected reward values implied by binding type-1 participation and
/// binding downward adjacent incentive constraints.
///
/// A decreasing `m` is evaluated as given; the audit flags it.
pub fn closed_form_rewards(m: &[f64], f1: f64, costs: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(m.len());
    if m.windows(2).any(|w| w[1] < w[0]) {
        log::warn!("closed-form rewards evaluated on non-monotone contributions {m:?}");
    }
    for (i, (&mi, &ci)) in m.iter().zip(costs).enumerate() {
        let ti = if i == 0 { f1 + ci * mi } else { t[i - 1] + ci * (mi - m[i - 1]) };
        t.push(ti);
    }
    t
}

/// `∂tᵢ/∂mⱼ` for the closed form: `cⱼ − cⱼ₊₁` below the diagonal, `cᵢ` on it.
fn closed_form_jacobian(costs: &[f64]) -> Vec<Vec<f64>> {
    let k = costs.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => costs[j] - costs[j + 1],
                    std::cmp::Ordering::Equal => costs[i],
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// `𝔼[a(Σnm)]` by enumeration.
pub fn objective(pop: &Population, table: &OutcomeTable, m: &[f64]) -> Result<f64> {
    let acc = &pop.economy().accuracy;
    table.expect(|n| acc.value(n.iter().zip(m).map(|(&k, &x)| k as f64 * x).sum()))
}

/// Everything the solver needs from one pass over the outcome table.
#[derive(Debug, Clone)]
pub struct Moments {
    /// `𝔼[a(Σnm)]`
    pub accuracy: f64,
    /// `∂/∂mⱼ 𝔼[a(Σnm)]`
    pub accuracy_grad: Vec<f64>,
    /// `t̄ᵢ = 𝔼[v(a(Σnm)) | nᵢ ≥ 1]`
    pub bound: Vec<f64>,
    /// `∂t̄ᵢ/∂mⱼ`
    pub bound_grad: Vec<Vec<f64>>,
}

#[derive(Clone)]
struct MomentSums {
    acc: CompensatedSum,
    acc_grad: Vec<CompensatedSum>,
    bound: Vec<CompensatedSum>,
    bound_grad: Vec<Vec<CompensatedSum>>,
}

impl MomentSums {
    fn new(k: usize) -> Self {
        MomentSums {
            acc: CompensatedSum::new(),
            acc_grad: vec![CompensatedSum::new(); k],
            bound: vec![CompensatedSum::new(); k],
            bound_grad: vec![vec![CompensatedSum::new(); k]; k],
        }
    }

    fn merge(&mut self, other: &MomentSums) {
        self.acc.merge(&other.acc);
        for (a, b) in self.acc_grad.iter_mut().zip(&other.acc_grad) {
            a.merge(b);
        }
        for (a, b) in self.bound.iter_mut().zip(&other.bound) {
            a.merge(b);
        }
        for (ra, rb) in self.bound_grad.iter_mut().zip(&other.bound_grad) {
            for (a, b) in ra.iter_mut().zip(rb) {
                a.merge(b);
            }
        }
    }
}

const CHUNK: usize = 2048;

pub fn moments(pop: &Population, table: &OutcomeTable, m: &[f64]) -> Moments {
    let k = pop.type_count();
    let econ = pop.economy();
    let accumulate = |chunk: &[Realization]| -> MomentSums {
        let mut s = MomentSums::new(k);
        for r in chunk {
            let pooled = r.pooled(m);
            let a = econ.accuracy.value(pooled);
            let da = econ.accuracy.slope(pooled);
            let p = r.probability;
            let v = econ.valuation.value(a);
            let dv = econ.valuation.derivative(a) * da;
            s.acc.add(p * a);
            for (j, &nj) in r.counts.iter().enumerate() {
                if nj > 0 {
                    s.acc_grad[j].add(p * da * nj as f64);
                }
            }
            for i in 0..k {
                if r.counts[i] == 0 {
                    continue;
                }
                s.bound[i].add(p * v);
                for (j, &nj) in r.counts.iter().enumerate() {
                    if nj > 0 {
                        s.bound_grad[i][j].add(p * dv * nj as f64);
                    }
                }
            }
        }
        s
    };
    let rows = table.realizations();
    let total = if rows.len() > CHUNK {
        let parts: Vec<MomentSums> = rows.par_chunks(CHUNK).map(accumulate).collect();
        let mut total = MomentSums::new(k);
        for p in &parts {
            total.merge(p);
        }
        total
    } else {
        accumulate(rows)
    };
    let presence: Vec<f64> = (0..k).map(|i| table.presence_probability(i)).collect();
    Moments {
        accuracy: total.acc.value(),
        accuracy_grad: total.acc_grad.iter().map(CompensatedSum::value).collect(),
        bound: total.bound.iter().zip(&presence).map(|(s, z)| s.value() / z).collect(),
        bound_grad: total
            .bound_grad
            .iter()
            .zip(&presence)
            .map(|(row, z)| row.iter().map(|s| s.value() / z).collect())
            .collect(),
    }
}

/// The substituted program in scaled variables `x = m / scale`, minimizing
/// `−v(1)·𝔼[a(Σnm)]` so that objective and constraints share monetary units.
pub struct SubstitutedProblem<'a> {
    pop: &'a Population,
    table: &'a OutcomeTable,
    reservation_f: Vec<f64>,
    scale: f64,
    t_jacobian: Vec<Vec<f64>>,
}

impl<'a> SubstitutedProblem<'a> {
    pub fn new(pop: &'a Population, table: &'a OutcomeTable, res: &[ReservationPoint], scale: f64) -> Self {
        SubstitutedProblem {
            pop,
            table,
            reservation_f: res.iter().map(|r| r.f).collect(),
            scale,
            t_jacobian: closed_form_jacobian(pop.costs()),
        }
    }

    /// Constraint rows are ordered: `m₁ ≥ 0`, then ordering `mᵢ ≥ mᵢ₋₁`,
    /// then participation for `i ≥ 2`, then the budget for every `i`.
    pub fn evaluate_m(&self, m: &[f64]) -> Evaluation {
        let k = self.pop.type_count();
        let costs = self.pop.costs();
        let worth_unit = self.pop.economy().valuation.value(1.0);
        let mo = moments(self.pop, self.table, m);
        let t = closed_form_rewards_quiet(m, self.reservation_f[0], costs);

        let mut constraints = Vec::with_capacity(3 * k - 1);
        let mut jacobian = Vec::with_capacity(3 * k - 1);
        let unit = |j: usize, v: f64| -> Vec<f64> {
            let mut row = vec![0.0; k];
            row[j] = v;
            row
        };
        constraints.push(costs[0] * m[0]);
        jacobian.push(unit(0, costs[0]));
        for i in 1..k {
            constraints.push(costs[i] * (m[i] - m[i - 1]));
            let mut row = unit(i, costs[i]);
            row[i - 1] = -costs[i];
            jacobian.push(row);
        }
        for i in 1..k {
            constraints.push(t[i] - costs[i] * m[i] - self.reservation_f[i]);
            let mut row = self.t_jacobian[i].clone();
            row[i] -= costs[i];
            jacobian.push(row);
        }
        for i in 0..k {
            constraints.push(mo.bound[i] - t[i]);
            jacobian.push(mo.bound_grad[i].iter().zip(&self.t_jacobian[i]).map(|(b, d)| b - d).collect());
        }
        Evaluation {
            objective: -worth_unit * mo.accuracy,
            gradient: mo.accuracy_grad.iter().map(|g| -worth_unit * g).collect(),
            constraints,
            jacobian,
        }
    }
}

impl Problem for SubstitutedProblem<'_> {
    fn dim(&self) -> usize {
        self.pop.type_count()
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let m: Vec<f64> = x.iter().map(|xi| xi * self.scale).collect();
        let mut e = self.evaluate_m(&m);
        for g in e.gradient.iter_mut() {
            *g *= self.scale;
        }
        for row in e.jacobian.iter_mut() {
            for d in row.iter_mut() {
                *d *= self.scale;
            }
        }
        e
    }
}

/// The un-substituted program over `(m, t)`, used as a restoration step
/// when the substituted one has no feasible point. Variables are
/// `x = (m / m_scale, t / t_scale)`; rows are `m ≥ 0`, participation for
/// every type, every ordered incentive pair, then the budget.
pub struct FullProblem<'a> {
    pop: &'a Population,
    table: &'a OutcomeTable,
    reservation_f: Vec<f64>,
    m_scale: f64,
    t_scale: f64,
}

impl<'a> FullProblem<'a> {
    pub fn new(
        pop: &'a Population,
        table: &'a OutcomeTable,
        res: &[ReservationPoint],
        m_scale: f64,
        t_scale: f64,
    ) -> Self {
        FullProblem { pop, table, reservation_f: res.iter().map(|r| r.f).collect(), m_scale, t_scale }
    }

    /// Derivatives are with respect to `(m, t)` in natural units.
    pub fn evaluate_menu(&self, m: &[f64], t: &[f64]) -> Evaluation {
        let k = self.pop.type_count();
        let c = self.pop.costs();
        let worth_unit = self.pop.economy().valuation.value(1.0);
        let mo = moments(self.pop, self.table, m);
        let rows = k + k + k * (k - 1) + k;
        let mut constraints = Vec::with_capacity(rows);
        let mut jacobian = Vec::with_capacity(rows);
        let row = |entries: &[(usize, f64)]| -> Vec<f64> {
            let mut r = vec![0.0; 2 * k];
            for &(j, v) in entries {
                r[j] += v;
            }
            r
        };
        for i in 0..k {
            constraints.push(c[i] * m[i]);
            jacobian.push(row(&[(i, c[i])]));
        }
        for i in 0..k {
            constraints.push(t[i] - c[i] * m[i] - self.reservation_f[i]);
            jacobian.push(row(&[(k + i, 1.0), (i, -c[i])]));
        }
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                constraints.push(t[i] - c[i] * m[i] - t[j] + c[i] * m[j]);
                jacobian.push(row(&[(k + i, 1.0), (i, -c[i]), (k + j, -1.0), (j, c[i])]));
            }
        }
        for i in 0..k {
            constraints.push(mo.bound[i] - t[i]);
            let mut r = row(&[(k + i, -1.0)]);
            r[..k].copy_from_slice(&mo.bound_grad[i]);
            jacobian.push(r);
        }
        let mut gradient: Vec<f64> = mo.accuracy_grad.iter().map(|g| -worth_unit * g).collect();
        gradient.extend(std::iter::repeat_n(0.0, k));
        Evaluation { objective: -worth_unit * mo.accuracy, gradient, constraints, jacobian }
    }

    fn scale_derivatives(&self, e: &mut Evaluation) {
        let k = self.pop.type_count();
        let factor = |j: usize| if j < k { self.m_scale } else { self.t_scale };
        for (j, g) in e.gradient.iter_mut().enumerate() {
            *g *= factor(j);
        }
        for r in e.jacobian.iter_mut() {
            for (j, d) in r.iter_mut().enumerate() {
                *d *= factor(j);
            }
        }
    }

    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.pop.type_count();
        (
            x[..k].iter().map(|v| v * self.m_scale).collect(),
            x[k..].iter().map(|v| v * self.t_scale).collect(),
        )
    }
}

impl Problem for FullProblem<'_> {
    fn dim(&self) -> usize {
        2 * self.pop.type_count()
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let (m, t) = self.split(x);
        let mut e = self.evaluate_menu(&m, &t);
        self.scale_derivatives(&mut e);
        e
    }
}

fn closed_form_rewards_quiet(m: &[f64], f1: f64, costs: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = Vec::with_capacity(m.len());
    for (i, (&mi, &ci)) in m.iter().zip(costs).enumerate() {
        t.push(if i == 0 { f1 + ci * mi } else { t[i - 1] + ci * (mi - m[i - 1]) });
    }
    t
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub al: AlOptions,
    pub enum_cap: u128,
    /// Report tolerance for `status = optimal`.
    pub report_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { al: AlOptions::default(), enum_cap: DEFAULT_ENUM_CAP, report_tol: 1e-6 }
    }
}

/// Monetary scale used for every residual: `max(1, |f₁|)`.
pub fn residual_scale(res: &[ReservationPoint]) -> f64 {
    res.first().map_or(1.0, |r| r.f.abs()).max(1.0)
}

/// Solves with default options, enumerating and computing reservations.
pub fn solve_incomplete(pop: &Population) -> Result<(ContractMenu, SolveReport)> {
    let opts = SolverOptions::default();
    let table = enumerate_with_cap(pop, opts.enum_cap)?;
    let res = reserve_all(pop)?;
    solve_incomplete_with(pop, &table, &res, &opts)
}

pub fn solve_incomplete_with(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    opts: &SolverOptions,
) -> Result<(ContractMenu, SolveReport)> {
    let k = pop.type_count();
    if res.len() != k || table.type_count() != k {
        return Err(Error::Domain("reservation points and outcome table must match the population".into()));
    }
    if k == 1 {
        return solve_single_type(pop, table, res, opts);
    }
    let econ = pop.economy();
    let n = pop.participants() as f64;
    let m0 = econ.accuracy.m0();

    // pool everyone at the lowest-cost solo level; lift off the clamp plateau
    let mut start = res[k - 1].m_bar.max(0.0);
    if n * start <= m0 * (1.0 + 1e-6) {
        start = 2.0 * m0 / n;
    }
    let scale = start;
    let problem = SubstitutedProblem::new(pop, table, res, scale);
    let x0 = vec![1.0; k];
    let out = augmented_lagrangian(&problem, &x0, &opts.al);

    // snap round-off breaches of the ordering constraints onto the cone
    let mut m: Vec<f64> = out.x.iter().map(|x| x * scale).collect();
    m[0] = m[0].max(0.0);
    for i in 1..k {
        m[i] = m[i].max(m[i - 1]);
    }
    let eval = problem.evaluate_m(&m);
    let mut scaled_eval = eval.clone();
    for g in scaled_eval.gradient.iter_mut() {
        *g *= scale;
    }
    for row in scaled_eval.jacobian.iter_mut() {
        for d in row.iter_mut() {
            *d *= scale;
        }
    }
    let res_scale = residual_scale(res);
    let viol = violation(&eval.constraints) / res_scale;
    let refit = refit_multipliers(&scaled_eval, 1e-6 * res_scale);
    let stat = kkt_residual(&scaled_eval, &out.multipliers).min(kkt_residual(&scaled_eval, &refit));
    let status = if viol <= opts.report_tol && stat <= opts.report_tol {
        SolveStatus::Optimal
    } else if viol > 1e-3 {
        SolveStatus::Infeasible
    } else {
        SolveStatus::MaxIter
    };
    if status == SolveStatus::Infeasible {
        log::info!("substituted program infeasible (violation {viol:.3e}); restoring from the reservation menu");
        return restore_from_reservation(pop, table, res, opts, start, out.outer_iterations);
    }
    let t = closed_form_rewards(&m, res[0].f, pop.costs());
    let report = SolveReport {
        objective: -eval.objective / econ.valuation.value(1.0),
        iterations: out.outer_iterations,
        max_constraint_violation: viol,
        stationarity_residual: stat,
        status,
    };
    Ok((ContractMenu { t, m }, report))
}

/// Solves the un-substituted program from the reservation menu, which is
/// always feasible for it. Reached only when the binding-constraint
/// substitution leaves no feasible point, which happens when a high-cost
/// type cannot be paid enough to keep the lower-cost types' participation
/// constraints satisfied along the binding chain.
fn restore_from_reservation(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    opts: &SolverOptions,
    m_scale: f64,
    prior_iterations: usize,
) -> Result<(ContractMenu, SolveReport)> {
    let k = pop.type_count();
    let econ = pop.economy();
    let start = ContractMenu::reservation(pop, res);
    let t_scale = start.t.iter().fold(1.0, |acc: f64, &x| acc.max(x.abs()));
    let problem = FullProblem::new(pop, table, res, m_scale, t_scale);
    let mut x0: Vec<f64> = start.m.iter().map(|v| v / m_scale).collect();
    x0.extend(start.t.iter().map(|v| v / t_scale));
    let out = augmented_lagrangian(&problem, &x0, &opts.al);
    let (mut m, t) = problem.split(&out.x);
    for v in m.iter_mut() {
        *v = v.max(0.0);
    }
    let mut eval = problem.evaluate_menu(&m, &t);
    let res_scale = residual_scale(res);
    let viol = violation(&eval.constraints) / res_scale;
    problem.scale_derivatives(&mut eval);
    let refit = refit_multipliers(&eval, 1e-6 * res_scale);
    let stat = kkt_residual(&eval, &out.multipliers).min(kkt_residual(&eval, &refit));
    let status = if viol <= opts.report_tol && stat <= opts.report_tol {
        SolveStatus::Optimal
    } else if viol > 1e-3 {
        SolveStatus::Infeasible
    } else {
        SolveStatus::MaxIter
    };
    debug_assert_eq!(m.len(), k);
    let report = SolveReport {
        objective: -eval.objective / econ.valuation.value(1.0),
        iterations: prior_iterations + out.outer_iterations,
        max_constraint_violation: viol,
        stationarity_residual: stat,
        status,
    };
    Ok((ContractMenu { t, m }, report))
}

/// With one type there is no hidden information: the menu is the
/// complete-information contract for the realization `n = (N)`.
fn solve_single_type(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    opts: &SolverOptions,
) -> Result<(ContractMenu, SolveReport)> {
    let contract = solve_complete(pop, res, &[pop.participants()], &FairnessSurpluses::zeros(1))?;
    let m = contract.dense_contributions();
    let t = closed_form_rewards(&m, res[0].f, pop.costs());
    let problem = SubstitutedProblem::new(pop, table, res, 1.0);
    let eval = problem.evaluate_m(&m);
    // multiplier on the budget row (index 1) from the 1-D stationarity condition
    let budget_slope = eval.jacobian[1][0];
    let lambda_budget = if budget_slope != 0.0 { (eval.gradient[0] / budget_slope).max(0.0) } else { 0.0 };
    let stat = kkt_residual(&eval, &[0.0, lambda_budget]);
    let viol = violation(&eval.constraints) / residual_scale(res);
    let status = if viol <= opts.report_tol && stat <= opts.report_tol { SolveStatus::Optimal } else { SolveStatus::MaxIter };
    let report = SolveReport {
        objective: contract.reward_accuracy,
        iterations: 0,
        max_constraint_violation: viol,
        stationarity_residual: stat,
        status,
    };
    Ok((ContractMenu { t, m }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccuracyKind, AccuracySpec, ModelEconomy, ValuationSpec};
    use crate::types::enumerate;

    fn econ() -> ModelEconomy {
        ModelEconomy::new(
            AccuracySpec::new(AccuracyKind::GeneralizationBoundAdditive, 1.0, 1.0).unwrap(),
            ValuationSpec::linear(100.0).unwrap(),
        )
    }

    #[test]
    fn pooling_collapses_increments() {
        let costs = [0.5, 0.3, 0.2, 0.1];
        let t = closed_form_rewards(&[40.0; 4], 3.0, &costs);
        for ti in t {
            assert!((ti - (3.0 + 0.5 * 40.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_type_closed_form() {
        let e = econ();
        let r = crate::reservation::reserve(&e, 0.02).unwrap();
        assert!((r.f - 55.29).abs() < 0.05);
        let t = closed_form_rewards(&[800.0, 1200.0], r.f, &[0.02, 0.01]);
        assert!((t[0] - (r.f + 16.0)).abs() < 1e-12);
        assert!((t[1] - (r.f + 20.0)).abs() < 1e-12);
        assert!((t[0] - 71.29).abs() < 0.05 && (t[1] - 75.29).abs() < 0.05);
    }

    #[test]
    fn reservation_pooling_recovers_solo_value() {
        let e = econ();
        let r = crate::reservation::reserve(&e, 0.02).unwrap();
        let t = closed_form_rewards(&[r.m_bar; 3], r.f, &[0.02, 0.015, 0.01]);
        assert!((t[0] - e.worth(r.m_bar)).abs() < 1e-12);
    }

    #[test]
    fn objective_simple_cases() {
        let p = Population::new(vec![0.02], vec![1.0], 3, econ()).unwrap();
        let t = enumerate(&p).unwrap();
        assert_eq!(objective(&p, &t, &[400.0]).unwrap(), p.economy().accuracy.value(1200.0));
        assert_eq!(objective(&p, &t, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let p = Population::new(vec![0.3, 0.1, 0.02], vec![0.2, 0.5, 0.3], 4, econ()).unwrap();
        let table = enumerate(&p).unwrap();
        let res = reserve_all(&p).unwrap();
        let prob = SubstitutedProblem::new(&p, &table, &res, 1.0);
        let m = [150.0, 420.0, 900.0];
        let e = prob.evaluate_m(&m);
        for j in 0..3 {
            let h = 1e-4 * m[j];
            let mut up = m;
            let mut dn = m;
            up[j] += h;
            dn[j] -= h;
            let (eu, ed) = (prob.evaluate_m(&up), prob.evaluate_m(&dn));
            let fd = (eu.objective - ed.objective) / (2.0 * h);
            assert!((fd - e.gradient[j]).abs() <= 1e-6 * e.gradient[j].abs().max(1e-9), "obj j={j}");
            for r in 0..e.constraints.len() {
                let fd = (eu.constraints[r] - ed.constraints[r]) / (2.0 * h);
                let an = e.jacobian[r][j];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "row {r} j={j}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn single_type_is_complete_information() {
        let p = Population::new(vec![0.02], vec![1.0], 5, econ()).unwrap();
        let (menu, report) = solve_incomplete(&p).unwrap();
        let res = reserve_all(&p).unwrap();
        let c = solve_complete(&p, &res, &[5], &FairnessSurpluses::zeros(1)).unwrap();
        assert_eq!(menu.m[0], c.contributions[0].unwrap());
        assert_eq!(report.status, SolveStatus::Optimal, "{report:?}");
        let tbar = p.economy().worth(5.0 * menu.m[0]);
        assert!((menu.t[0] - tbar).abs() < 1e-8);
    }

    #[test]
    fn two_type_solve_is_audited_optimal() {
        let p = Population::new(vec![0.02, 0.01], vec![0.5, 0.5], 10, econ()).unwrap();
        let (menu, report) = solve_incomplete(&p).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal, "{report:?}");
        let res = reserve_all(&p).unwrap();
        assert!(menu.m[0] >= res[0].m_bar * (1.0 - 1e-6));
        assert!(menu.m[1] >= menu.m[0]);
        // reservation menu is a feasible lower bound
        let table = enumerate(&p).unwrap();
        let floor = objective(&p, &table, &ContractMenu::reservation(&p, &res).m).unwrap();
        assert!(report.objective >= floor - 1e-8);
    }
}
