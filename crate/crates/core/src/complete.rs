//! The observable-cost benchmark.
//!
//! With costs observable, every present party receives the collectively
//! trained model and contributes until its participation constraint binds:
//!
//! ```text
//! v(a(Σⱼ nⱼ mⱼ)) − cᵢ mᵢ = fᵢ + sᵢ     for every present type i
//! ```
//!
//! Writing `V` for the common reward value, each binding equation gives
//! `mᵢ = (V − fᵢ − sᵢ) / cᵢ`, and the system collapses to the scalar fixed
//! point `ṽ(S(V)) = V` with `S(V) = Σᵢ nᵢ (V − fᵢ − sᵢ) / cᵢ`. The largest
//! root is the contract with the most accurate model.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reservation::ReservationPoint;
use crate::types::Population;

/// Extra utility `sᵢ ≥ 0` granted to each type on top of its reservation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessSurpluses(Vec<f64>);

impl FairnessSurpluses {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(x) = s.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain(format!("surpluses must be non-negative, got {x}")));
        }
        Ok(FairnessSurpluses(s))
    }

    pub fn zeros(types: usize) -> Self {
        FairnessSurpluses(vec![0.0; types])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompleteContract {
    /// Required contribution per type; `None` for types absent from the realization.
    pub contributions: Vec<Option<f64>>,
    pub reward_accuracy: f64,
    pub reward_value: f64,
}

impl CompleteContract {
    /// Contributions with absent types mapped to zero, ready for `Σ nᵢ mᵢ`.
    pub fn dense_contributions(&self) -> Vec<f64> {
        self.contributions.iter().map(|m| m.unwrap_or(0.0)).collect()
    }

    /// `v(a(Σnm)) − cᵢmᵢ − fᵢ − sᵢ` for each present type.
    pub fn ir_residuals(&self, pop: &Population, res: &[ReservationPoint], s: &FairnessSurpluses) -> Vec<Option<f64>> {
        self.contributions
            .iter()
            .enumerate()
            .map(|(i, m)| m.map(|m| self.reward_value - pop.costs()[i] * m - res[i].f - s.0[i]))
            .collect()
    }
}

const MAX_BISECTIONS: usize = 400;
const TANGENCY_ULPS: f64 = 256.0;

pub fn solve_complete(
    pop: &Population,
    res: &[ReservationPoint],
    counts: &[u32],
    s: &FairnessSurpluses,
) -> Result<CompleteContract> {
    let types = pop.type_count();
    if counts.len() != types || res.len() != types || s.0.len() != types {
        return Err(Error::Domain("realization, reservation and surplus lengths must match the type count".into()));
    }
    if counts.iter().all(|&n| n == 0) {
        return Err(Error::Domain("realization has no participants".into()));
    }
    let econ = pop.economy();
    let costs = pop.costs();
    let present: Vec<usize> = (0..types).filter(|&i| counts[i] > 0).collect();

    let floor = |i: usize| res[i].f + s.0[i];
    // S(V) = a·V − b
    let a: f64 = present.iter().map(|&i| counts[i] as f64 / costs[i]).sum();
    let b: f64 = present.iter().map(|&i| counts[i] as f64 * floor(i) / costs[i]).sum();
    let pooled = |v: f64| a * v - b;
    let gap = |v: f64| econ.worth(pooled(v)) - v;
    let gap_slope = |v: f64| econ.worth_slope(pooled(v)) * a - 1.0;

    let v_lo = present.iter().map(|&i| floor(i)).fold(0.0, f64::max);
    let v_hi = econ.worth_cap();
    let finish = |v: f64| -> CompleteContract {
        let contributions: Vec<Option<f64>> = (0..types)
            .map(|i| (counts[i] > 0).then(|| ((v - floor(i)) / costs[i]).max(0.0)))
            .collect();
        let total: f64 = contributions.iter().zip(counts).map(|(m, &n)| n as f64 * m.unwrap_or(0.0)).sum();
        let reward_accuracy = econ.accuracy.value(total);
        CompleteContract { contributions, reward_accuracy, reward_value: econ.valuation.value(reward_accuracy) }
    };

    if v_lo >= v_hi {
        return Err(Error::Infeasible(format!(
            "required floor {v_lo} reaches the value of the best possible model {v_hi}"
        )));
    }

    // ṽ(S(V)) is zero until S(V) clears the clamp boundary, concave after.
    let v_active = (econ.accuracy.m0() + b) / a;
    let start = v_lo.max(v_active * (1.0 + 1e-12));
    let mut peak = start;
    if start < v_hi && gap_slope(start) > 0.0 {
        let (mut lo, mut hi) = (start, v_hi);
        if gap_slope(hi) > 0.0 {
            peak = hi;
        } else {
            for _ in 0..MAX_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if gap_slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            peak = lo;
        }
    }
    let peak = peak.min(v_hi);
    let peak_gap = gap(peak);
    if !peak_gap.is_finite() {
        return Err(Error::Solver(format!("non-finite binding residual at V={peak}")));
    }
    // a lone participant makes the curve tangent to the diagonal at its solo
    // optimum; a peak within rounding of zero is that root, and bisecting
    // from it would only chase the rounding noise
    if peak_gap.abs() <= TANGENCY_ULPS * f64::EPSILON * peak.abs().max(1.0) {
        return Ok(finish(peak));
    }
    if peak_gap < 0.0 {
        if v_lo == 0.0 {
            // nobody needs compensation and pooled effort cannot clear the
            // clamp boundary profitably: the only root is the empty contract
            return Ok(finish(0.0));
        }
        return Err(Error::Infeasible(format!(
            "binding system has no root: best attainable gap is {peak_gap} at V={peak}"
        )));
    }

    let (mut lo, mut hi) = (peak, v_hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish(lo))
}
