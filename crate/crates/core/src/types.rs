//! The type space: populations, multinomial realizations of type counts, and
//! exact expectations over all of them.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::ModelEconomy;
use crate::summation::CompensatedSum;

pub const DEFAULT_ENUM_CAP: u128 = 1_000_000;

/// Realizations per parallel partition. Fixed so that sums do not depend on
/// the number of worker threads.
const CHUNK: usize = 2048;

/// A full problem instance. Types are indexed from 0 in code; type 0 has the
/// highest per-unit cost.
#[derive(Debug, Clone, Serialize)]
pub struct Population {
    costs: Vec<f64>,
    probs: Vec<f64>,
    participants: u32,
    economy: ModelEconomy,
}

impl Population {
    pub fn new(costs: Vec<f64>, probs: Vec<f64>, participants: u32, economy: ModelEconomy) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::Domain("at least one type is required".into()));
        }
        if costs.len() != probs.len() {
            return Err(Error::Domain(format!(
                "{} costs but {} probabilities",
                costs.len(),
                probs.len()
            )));
        }
        if participants == 0 {
            return Err(Error::Domain("participant count must be positive".into()));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!("costs must be positive and finite, got {c}")));
        }
        if costs.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Domain(format!("costs must be strictly decreasing, got {costs:?}")));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::Domain(format!("type probabilities must lie in (0, 1], got {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("type probabilities sum to {total}, not 1")));
        }
        Ok(Population { costs, probs, participants, economy })
    }

    pub fn type_count(&self) -> usize {
        self.costs.len()
    }

    pub fn participants(&self) -> u32 {
        self.participants
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn economy(&self) -> &ModelEconomy {
        &self.economy
    }

    /// `P(nᵢ ≥ 1) = 1 − (1 − pᵢ)^N`.
    pub fn presence_probability(&self, i: usize) -> f64 {
        1.0 - (1.0 - self.probs[i]).powi(self.participants as i32)
    }

    /// Number of realizations, `C(N + I − 1, I − 1)`, saturating.
    pub fn realization_count(&self) -> u128 {
        compositions_count(self.participants, self.type_count())
    }
}

pub fn compositions_count(n: u32, parts: usize) -> u128 {
    // C(n + parts - 1, parts - 1) by the multiplicative formula; each
    // intermediate product is itself a binomial coefficient, so the division
    // is exact.
    let k = parts as u128 - 1;
    let mut acc: u128 = 1;
    for j in 1..=k {
        acc = match acc.checked_mul(n as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub counts: Vec<u32>,
    pub probability: f64,
}

impl Realization {
    /// Total data `Σ nᵢ mᵢ` under per-type contributions `m`.
    #[inline]
    pub fn pooled(&self, m: &[f64]) -> f64 {
        self.counts.iter().zip(m).map(|(&n, &x)| n as f64 * x).sum()
    }
}

/// Multinomial pmf evaluated in log space.
pub fn multinomial_pmf(counts: &[u32], probs: &[f64]) -> f64 {
    let n: u32 = counts.iter().sum();
    let mut log_p = ln_gamma(n as f64 + 1.0);
    for (&k, &p) in counts.iter().zip(probs) {
        if k > 0 {
            log_p += k as f64 * p.ln() - ln_gamma(k as f64 + 1.0);
        }
    }
    log_p.exp()
}

/// Every realization of `n ~ Mul(N, p)`, in descending lexicographic order of
/// the count vectors.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeTable {
    participants: u32,
    probs: Vec<f64>,
    realizations: Vec<Realization>,
}

fn push_compositions(remaining: u32, prefix: &mut Vec<u32>, parts: usize, probs: &[f64], out: &mut Vec<Realization>) {
    if prefix.len() + 1 == parts {
        prefix.push(remaining);
        let probability = multinomial_pmf(prefix, probs);
        out.push(Realization { counts: prefix.clone(), probability });
        prefix.pop();
        return;
    }
    for k in (0..=remaining).rev() {
        prefix.push(k);
        push_compositions(remaining - k, prefix, parts, probs, out);
        prefix.pop();
    }
}

pub fn enumerate(pop: &Population) -> Result<OutcomeTable> {
    enumerate_with_cap(pop, DEFAULT_ENUM_CAP)
}

pub fn enumerate_with_cap(pop: &Population, cap: u128) -> Result<OutcomeTable> {
    OutcomeTable::multinomial(pop.participants(), pop.probs(), cap)
}

impl OutcomeTable {
    /// All realizations of `Mul(participants, probs)` without reference to a
    /// population; `probs` are taken as given.
    pub fn multinomial(participants: u32, probs: &[f64], cap: u128) -> Result<Self> {
        if probs.is_empty() || participants == 0 {
            return Err(Error::Domain("need at least one type and one participant".into()));
        }
        let count = compositions_count(participants, probs.len());
        if count > cap {
            return Err(Error::EnumerationCap { count, cap });
        }
        let mut realizations = Vec::with_capacity(count as usize);
        let mut prefix = Vec::with_capacity(probs.len());
        push_compositions(participants, &mut prefix, probs.len(), probs, &mut realizations);
        Ok(OutcomeTable { participants, probs: probs.to_vec(), realizations })
    }

    pub fn realizations(&self) -> &[Realization] {
        &self.realizations
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn type_count(&self) -> usize {
        self.probs.len()
    }

    pub fn participants(&self) -> u32 {
        self.participants
    }

    /// `1 − (1 − pᵢ)^N`.
    pub fn presence_probability(&self, i: usize) -> f64 {
        1.0 - (1.0 - self.probs[i]).powi(self.participants as i32)
    }

    fn weighted_sum<F>(&self, g: F, keep: impl Fn(&Realization) -> bool + Sync) -> Result<f64>
    where
        F: Fn(&[u32]) -> f64 + Sync,
    {
        let partial = |chunk: &[Realization]| -> Result<CompensatedSum> {
            let mut acc = CompensatedSum::new();
            for r in chunk.iter().filter(|r| keep(r)) {
                let value = g(&r.counts);
                if !value.is_finite() {
                    return Err(Error::NonFinite { value, counts: r.counts.clone() });
                }
                acc.add(r.probability * value);
            }
            Ok(acc)
        };
        let partials: Vec<CompensatedSum> = if self.realizations.len() > CHUNK {
            self.realizations.par_chunks(CHUNK).map(partial).collect::<Result<_>>()?
        } else {
            vec![partial(&self.realizations)?]
        };
        let mut total = CompensatedSum::new();
        for p in &partials {
            total.merge(p);
        }
        Ok(total.value())
    }

    /// `𝔼[g(n)]` by exact enumeration.
    pub fn expect<F>(&self, g: F) -> Result<f64>
    where
        F: Fn(&[u32]) -> f64 + Sync,
    {
        self.weighted_sum(g, |_| true)
    }

    /// `𝔼[g(n) | nᵢ ≥ 1]`.
    pub fn expect_conditional<F>(&self, i: usize, g: F) -> Result<f64>
    where
        F: Fn(&[u32]) -> f64 + Sync,
    {
        if i >= self.type_count() {
            return Err(Error::Domain(format!("type index {i} out of range")));
        }
        let s = self.weighted_sum(g, |r| r.counts[i] >= 1)?;
        Ok(s / self.presence_probability(i))
    }
}
