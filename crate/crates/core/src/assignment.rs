//! Proportional assignment: turning a first-moment menu into a reward for
//! every realization.
//!
//! Type `i` receives `rᵢ(n) = v⁻¹((tᵢ / t̄ᵢ) · v(a(Σnm)))`, a fixed fraction
//! of the collective model's value, so that `𝔼[v(rᵢ) | nᵢ ≥ 1] = tᵢ` and no
//! reward ever exceeds the collectively trained model.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::first_moment::ContractMenu;
use crate::types::{OutcomeTable, Population, Realization};

/// Slack allowed on `tᵢ ≤ t̄ᵢ` before a menu is rejected, relative to `max(1, t̄ᵢ)`.
pub const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedRewards {
    pub realization: Realization,
    pub rewards: Vec<f64>,
    pub collective_accuracy: f64,
}

/// `t̄ᵢ = 𝔼[v(a(Σnm)) | nᵢ ≥ 1]`.
pub fn expected_bound(pop: &Population, table: &OutcomeTable, menu: &ContractMenu, i: usize) -> Result<f64> {
    let econ = pop.economy();
    let m = &menu.m;
    table.expect_conditional(i, |n| econ.worth(n.iter().zip(m).map(|(&k, &x)| k as f64 * x).sum()))
}

#[derive(Debug, Clone)]
pub struct ProportionalAssignment<'a> {
    pop: &'a Population,
    m: Vec<f64>,
    bounds: Vec<f64>,
    ratios: Vec<f64>,
}

impl<'a> ProportionalAssignment<'a> {
    pub fn new(pop: &'a Population, table: &OutcomeTable, menu: &ContractMenu) -> Result<Self> {
        let k = pop.type_count();
        if menu.len() != k || menu.t.len() != k {
            return Err(Error::Domain("menu size does not match the population".into()));
        }
        let bounds = (0..k).map(|i| expected_bound(pop, table, menu, i)).collect::<Result<Vec<_>>>()?;
        let mut ratios = Vec::with_capacity(k);
        for (i, (&t, &bound)) in menu.t.iter().zip(&bounds).enumerate() {
            let slack = BUDGET_SLACK * bound.abs().max(1.0);
            if t > bound + slack {
                return Err(Error::ContractViolation(format!(
                    "type {}: expected reward {t} exceeds the conditional bound {bound}",
                    i + 1
                )));
            }
            if t < -slack {
                return Err(Error::ContractViolation(format!("type {}: negative expected reward {t}", i + 1)));
            }
            let ratio = if bound > 0.0 {
                (t / bound).clamp(0.0, 1.0)
            } else if t.abs() <= slack {
                0.0
            } else {
                return Err(Error::ContractViolation(format!(
                    "type {}: expected reward {t} with a zero-value bound",
                    i + 1
                )));
            };
            ratios.push(ratio);
        }
        Ok(ProportionalAssignment { pop, m: menu.m.clone(), bounds, ratios })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn assign(&self, realization: &Realization) -> RealizedRewards {
        let econ = self.pop.economy();
        let collective_accuracy = econ.accuracy.value(realization.pooled(&self.m));
        let value = econ.valuation.value(collective_accuracy);
        let rewards = self
            .ratios
            .iter()
            .map(|&ratio| econ.valuation.inverse(ratio * value).min(collective_accuracy))
            .collect();
        RealizedRewards { realization: realization.clone(), rewards, collective_accuracy }
    }
}

/// Assigns rewards for a single realization.
pub fn assign(
    pop: &Population,
    table: &OutcomeTable,
    menu: &ContractMenu,
    realization: &Realization,
) -> Result<RealizedRewards> {
    if realization.counts.len() != pop.type_count() || realization.counts.iter().sum::<u32>() != pop.participants() {
        return Err(Error::Domain(format!(
            "realization {:?} is not a split of {} participants into {} types",
            realization.counts,
            pop.participants(),
            pop.type_count()
        )));
    }
    Ok(ProportionalAssignment::new(pop, table, menu)?.assign(realization))
}
