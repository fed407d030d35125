//! What hidden costs cost: the coordinator's loss in model value and each
//! type's utility above its observable-cost level.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::complete::{solve_complete, CompleteContract, FairnessSurpluses};
use crate::error::{Error, Result};
use crate::first_moment::ContractMenu;
use crate::reservation::ReservationPoint;
use crate::types::{OutcomeTable, Population};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    /// `𝔼[v(a(Σnm)) − v(a(Σnm_complete))]`; non-positive at an optimum.
    pub information_cost: f64,
    /// `tᵢ − cᵢmᵢ − fᵢ − sᵢ` per type.
    pub information_rent: Vec<f64>,
}

/// Complete-information contracts for every realization of a population,
/// keyed by the count vector.
#[derive(Debug, Clone, Default)]
pub struct CompleteCache {
    contracts: HashMap<Vec<u32>, CompleteContract>,
}

impl CompleteCache {
    pub fn build(
        pop: &Population,
        table: &OutcomeTable,
        res: &[ReservationPoint],
        s: &FairnessSurpluses,
    ) -> Result<Self> {
        let mut cache = CompleteCache::default();
        cache.extend(pop, table, res, s)?;
        Ok(cache)
    }

    /// Solves the realizations not yet cached, in parallel, then inserts them.
    pub fn extend(
        &mut self,
        pop: &Population,
        table: &OutcomeTable,
        res: &[ReservationPoint],
        s: &FairnessSurpluses,
    ) -> Result<()> {
        let missing: Vec<&Vec<u32>> = table
            .realizations()
            .iter()
            .map(|r| &r.counts)
            .filter(|n| !self.contracts.contains_key(*n))
            .collect();
        let solved: Vec<(Vec<u32>, CompleteContract)> = missing
            .par_iter()
            .map(|n| {
                solve_complete(pop, res, n, s)
                    .map(|c| ((*n).clone(), c))
                    .map_err(|e| Error::AtRealization { counts: (*n).clone(), source: Box::new(e) })
            })
            .collect::<Result<_>>()?;
        self.contracts.extend(solved);
        Ok(())
    }

    pub fn get(&self, counts: &[u32]) -> Option<&CompleteContract> {
        self.contracts.get(counts)
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }
}

pub fn information_cost(
    pop: &Population,
    table: &OutcomeTable,
    menu: &ContractMenu,
    cache: &CompleteCache,
) -> Result<f64> {
    let econ = pop.economy();
    let m = &menu.m;
    if let Some(r) = table.realizations().iter().find(|r| cache.get(&r.counts).is_none()) {
        return Err(Error::Domain(format!("no complete-information contract cached for {:?}", r.counts)));
    }
    table.expect(|n| {
        let incomplete = econ.worth(n.iter().zip(m).map(|(&k, &x)| k as f64 * x).sum());
        let complete = cache.get(n).map_or(f64::NAN, |c| c.reward_value);
        incomplete - complete
    })
}

/// Per-participant surplus over the complete-information level. Both the
/// menu option and the benchmark are constant across realizations in which
/// the type is present, so the conditional expectation is the difference
/// itself. Differences within the rounding noise of their operands (which
/// accumulates along the reward chain `t₁ … tᵢ`) are reported as zero.
pub fn information_rent(
    pop: &Population,
    res: &[ReservationPoint],
    menu: &ContractMenu,
    s: &FairnessSurpluses,
    i: usize,
) -> f64 {
    let parts = [menu.t[i], -pop.costs()[i] * menu.m[i], -res[i].f, -s.as_slice()[i]];
    let rent = (parts[0] + parts[1]) + (parts[2] + parts[3]);
    let noise = 4.0 * (i + 2) as f64 * f64::EPSILON * parts.iter().map(|x| x.abs()).sum::<f64>();
    if rent.abs() <= noise {
        0.0
    } else {
        rent
    }
}

pub fn welfare_report(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    menu: &ContractMenu,
    s: &FairnessSurpluses,
) -> Result<WelfareReport> {
    let cache = CompleteCache::build(pop, table, res, s)?;
    welfare_report_cached(pop, table, res, menu, s, &cache)
}

pub fn welfare_report_cached(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    menu: &ContractMenu,
    s: &FairnessSurpluses,
    cache: &CompleteCache,
) -> Result<WelfareReport> {
    let k = pop.type_count();
    if menu.len() != k || res.len() != k || s.as_slice().len() != k {
        return Err(Error::Domain("menu, reservation points and surpluses must match the type count".into()));
    }
    Ok(WelfareReport {
        information_cost: information_cost(pop, table, menu, cache)?,
        information_rent: (0..k).map(|i| information_rent(pop, res, menu, s, i)).collect(),
    })
}
