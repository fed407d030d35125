//! Menu verification against the full first-moment constraint system and
//! the necessary conditions of an optimal contract.

use serde::Serialize;

use crate::assignment::expected_bound;
use crate::error::{Error, Result};
use crate::first_moment::{residual_scale, ContractMenu};
use crate::reservation::{reserve, ReservationPoint};
use crate::types::{OutcomeTable, Population};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditTolerances {
    pub feasibility: f64,
    pub weak_efficiency: f64,
    pub break_even: f64,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        AuditTolerances { feasibility: 1e-6, weak_efficiency: 1e-5, break_even: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Infeasible,
    Feasible,
    OptimalConditionsMet,
}

/// Every residual is in money divided by `scale = max(1, |f₁|)`; a
/// constraint holds when its residual is `≥ −tol`.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub scale: f64,
    /// `tᵢ − cᵢmᵢ − fᵢ`
    pub ir_residuals: Vec<f64>,
    /// `[i][j] = tᵢ − cᵢmᵢ − (tⱼ − cᵢmⱼ)`
    pub ic_matrix: Vec<Vec<f64>>,
    /// `t̄ᵢ − tᵢ`
    pub bc_residuals: Vec<f64>,
    /// `|tᵢ − cᵢmᵢ − (tᵢ₋₁ − cᵢmᵢ₋₁)|` for `i = 2..I`
    pub dac_binding: Vec<f64>,
    pub ordering_ok: bool,
    /// `|t_I − t̄_I|`
    pub prop7_gap: f64,
    /// `max(|t₁ − c₁m₁ − f₁|, maxⱼ (tⱼ − c₁mⱼ − f₁)⁺)`
    pub prop8_gap: f64,
    pub max_violation: f64,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn min_ir(&self) -> f64 {
        self.ir_residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_ic(&self) -> f64 {
        self.ic_matrix.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_bc(&self) -> f64 {
        self.bc_residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_dac(&self) -> f64 {
        self.dac_binding.iter().copied().fold(0.0, f64::max)
    }
}

pub fn check_full(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    menu: &ContractMenu,
) -> Result<AuditReport> {
    check_full_with(pop, table, res, menu, &AuditTolerances::default())
}

pub fn check_full_with(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    menu: &ContractMenu,
    tol: &AuditTolerances,
) -> Result<AuditReport> {
    let k = pop.type_count();
    if menu.m.len() != k || menu.t.len() != k || res.len() != k {
        return Err(Error::Domain(format!("menu has {} options for {k} types", menu.m.len())));
    }
    let c = pop.costs();
    let (t, m) = (&menu.t, &menu.m);
    let scale = residual_scale(res);

    let ir_residuals: Vec<f64> = (0..k).map(|i| (t[i] - c[i] * m[i] - res[i].f) / scale).collect();
    let ic_matrix: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| ((t[i] - c[i] * m[i]) - (t[j] - c[i] * m[j])) / scale).collect())
        .collect();
    let bounds = (0..k).map(|i| expected_bound(pop, table, menu, i)).collect::<Result<Vec<_>>>()?;
    let bc_residuals: Vec<f64> = bounds.iter().zip(t).map(|(b, ti)| (b - ti) / scale).collect();
    let dac_binding: Vec<f64> =
        (1..k).map(|i| ((t[i] - c[i] * m[i]) - (t[i - 1] - c[i] * m[i - 1])).abs() / scale).collect();
    let ordering_ok = m[0] >= -tol.feasibility
        && (1..k).all(|i| {
            c[i] * (m[i] - m[i - 1]) / scale >= -tol.feasibility && (t[i] - t[i - 1]) / scale >= -tol.feasibility
        });
    let prop7_gap = (t[k - 1] - bounds[k - 1]).abs() / scale;
    let f1 = res[0].f;
    let prop8_gap = (1..k)
        .map(|j| (t[j] - c[0] * m[j] - f1).max(0.0))
        .fold((t[0] - c[0] * m[0] - f1).abs(), f64::max)
        / scale;

    let mins = [
        ir_residuals.iter().copied().fold(f64::INFINITY, f64::min),
        ic_matrix.iter().flatten().copied().fold(f64::INFINITY, f64::min),
        bc_residuals.iter().copied().fold(f64::INFINITY, f64::min),
    ];
    let max_violation = mins.iter().fold(0.0, |acc: f64, &x| acc.max(-x));
    let feasible = mins.iter().all(|&x| x >= -tol.feasibility);
    let verdict = if !feasible {
        Verdict::Infeasible
    } else if ordering_ok && prop7_gap <= tol.weak_efficiency && prop8_gap <= tol.break_even {
        Verdict::OptimalConditionsMet
    } else {
        Verdict::Feasible
    };
    Ok(AuditReport {
        scale,
        ir_residuals,
        ic_matrix,
        bc_residuals,
        dac_binding,
        ordering_ok,
        prop7_gap,
        prop8_gap,
        max_violation,
        verdict,
    })
}

/// Every ordered pair `i ≠ j` satisfies `tᵢ − cᵢmᵢ ≥ tⱼ − cᵢmⱼ − tol`.
pub fn pairwise_ic_holds(costs: &[f64], menu: &ContractMenu, tol: f64) -> bool {
    let (t, m) = (&menu.t, &menu.m);
    (0..costs.len()).all(|i| (0..costs.len()).all(|j| i == j || t[i] - costs[i] * m[i] >= t[j] - costs[i] * m[j] - tol))
}

/// Downward adjacent constraints bind within `tol` and `m` is non-decreasing.
pub fn reduced_form_holds(costs: &[f64], menu: &ContractMenu, tol: f64) -> bool {
    let (t, m) = (&menu.t, &menu.m);
    (1..costs.len()).all(|i| {
        m[i] >= m[i - 1] - tol && ((t[i] - costs[i] * m[i]) - (t[i - 1] - costs[i] * m[i - 1])).abs() <= tol
    })
}

/// Whether the reduced form (binding adjacent downward constraints plus
/// ordered contributions) and the full pairwise incentive system agree on
/// this menu.
pub fn check_theorem1_equivalence(costs: &[f64], menu: &ContractMenu, tol: f64) -> bool {
    pairwise_ic_holds(costs, menu, tol) == reduced_form_holds(costs, menu, tol)
}

/// Appends a new type's solo option `(ṽ(m̄ₗ), m̄ₗ)` to `menu` and reports
/// whether every existing type still prefers its own option and the new
/// option leaves the new type exactly at its reservation utility.
pub fn check_reservation_append(pop: &Population, menu: &ContractMenu, cost: f64, tol: f64) -> Result<bool> {
    if pop.costs().contains(&cost) {
        return Err(Error::Domain(format!("cost {cost} already belongs to an existing type")));
    }
    let econ = pop.economy();
    let outside = reserve(econ, cost)?;
    let (t_new, m_new) = (outside.worth(econ), outside.m_bar);
    let existing_ok = pop
        .costs()
        .iter()
        .enumerate()
        .all(|(i, &c)| menu.t[i] - c * menu.m[i] >= t_new - c * m_new - tol);
    let binds = (t_new - cost * m_new - outside.f).abs() <= tol;
    Ok(existing_ok && binds)
}
