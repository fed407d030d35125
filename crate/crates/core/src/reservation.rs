//! Outside options: what a party earns by training alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelEconomy;
use crate::types::Population;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReservationPoint {
    /// Data a party uses when training alone.
    pub m_bar: f64,
    /// Profit of solo training, `ṽ(m̄) − c·m̄`.
    pub f: f64,
}

impl ReservationPoint {
    /// The corner case: the party would not train on its own.
    pub const NONE: ReservationPoint = ReservationPoint { m_bar: 0.0, f: 0.0 };

    /// Value of the solo model, `ṽ(m̄)`.
    pub fn worth(&self, econ: &ModelEconomy) -> f64 {
        econ.worth(self.m_bar)
    }
}

const REL_TOL: f64 = 1e-10;

/// Solves `max_{m ≥ 0} ṽ(m) − c·m`.
///
/// On the active region `ṽ′` is strictly decreasing, so the first-order
/// condition `ṽ′(m) = c` is found by bisection on the slope.
pub fn reserve(econ: &ModelEconomy, c: f64) -> Result<ReservationPoint> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain(format!("cost must be positive and finite, got {c}")));
    }
    let m0 = econ.accuracy.m0();
    let mut lo = m0 * (1.0 + 1e-9);
    if econ.worth_slope(lo) <= c {
        return Ok(ReservationPoint::NONE);
    }
    let mut hi = 10.0 * m0;
    while econ.worth_slope(hi) >= c {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Solver(format!("no slope bracket for cost {c}")));
        }
    }
    while hi - lo > REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if econ.worth_slope(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m_bar = 0.5 * (lo + hi);
    let f = econ.worth(m_bar) - c * m_bar;
    if f <= 0.0 {
        return Ok(ReservationPoint::NONE);
    }
    Ok(ReservationPoint { m_bar, f })
}

/// Reservation points for every type of a population, in type order.
pub fn reserve_all(pop: &Population) -> Result<Vec<ReservationPoint>> {
    pop.costs().iter().map(|&c| reserve(pop.economy(), c)).collect()
}
