//! The contribution game without a coordinator: every party of type `i`
//! contributes `mᵢ°`, everyone receives the pooled model, and nobody is
//! paid. A profile is an equilibrium when no type gains by deviating.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{OutcomeTable, Population};

/// Gains at or below this are indifference, not a profitable deviation.
pub const GAIN_TOL: f64 = 1e-8;

const BISECTIONS: usize = 200;

/// Symmetric within-type contributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionProfile(Vec<f64>);

impl ContributionProfile {
    pub fn new(m_circ: Vec<f64>) -> Result<Self> {
        if let Some(x) = m_circ.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain(format!("contributions must be finite and non-negative, got {x}")));
        }
        Ok(ContributionProfile(m_circ))
    }

    pub fn zeros(types: usize) -> Self {
        ContributionProfile(vec![0.0; types])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    FailureEquilibrium,
    NoEquilibrium,
    NotEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub best_response: Vec<f64>,
    pub gain: Vec<f64>,
    /// Zero-based indices of types with `gain > GAIN_TOL`.
    pub deviating: Vec<usize>,
    pub classification: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub m: f64,
    pub utility: f64,
    pub gain: f64,
}

/// `U(m) = Σ w · ṽ(m + o) − c·m` over the distinct amounts `o` contributed
/// by the others in realizations where the deviator is present.
struct DeviationUtility<'a> {
    pop: &'a Population,
    cost: f64,
    offsets: Vec<(f64, f64)>,
}

impl<'a> DeviationUtility<'a> {
    fn new(pop: &'a Population, table: &OutcomeTable, profile: &ContributionProfile, i: usize) -> Self {
        let m = profile.as_slice();
        let presence = table.presence_probability(i);
        let mut offsets: Vec<(f64, f64)> = table
            .realizations()
            .iter()
            .filter(|r| r.counts[i] > 0)
            .map(|r| (r.pooled(m) - m[i], r.probability / presence))
            .collect();
        offsets.sort_by(|a, b| a.0.total_cmp(&b.0));
        offsets.dedup_by(|later, kept| {
            let same = later.0 == kept.0;
            if same {
                kept.1 += later.1;
            }
            same
        });
        DeviationUtility { pop, cost: pop.costs()[i], offsets }
    }

    fn value(&self, m: f64) -> f64 {
        let econ = self.pop.economy();
        self.offsets.iter().map(|&(o, w)| w * econ.worth(m + o)).sum::<f64>() - self.cost * m
    }

    fn slope(&self, m: f64) -> f64 {
        let econ = self.pop.economy();
        self.offsets.iter().map(|&(o, w)| w * econ.worth_slope(m + o)).sum::<f64>() - self.cost
    }

    /// The concave pieces of `U` are separated by the points where some
    /// `m + o` crosses the clamp boundary; each piece is maximized at a root
    /// of `U′` or an endpoint.
    fn candidates(&self, upper: f64) -> Vec<f64> {
        let m0 = self.pop.economy().accuracy.m0();
        let mut cuts: Vec<f64> = vec![0.0, upper];
        cuts.extend(self.offsets.iter().map(|&(o, _)| m0 - o).filter(|&b| b > 0.0 && b < upper));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = cuts.clone();
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            let nudge = |x: f64| x.abs().max(1.0) * 1e-12;
            let (lo0, hi0) = (l + nudge(l), r - nudge(r));
            if lo0 >= hi0 || self.slope(lo0) <= 0.0 || self.slope(hi0) >= 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }
}

pub fn best_response(
    pop: &Population,
    table: &OutcomeTable,
    profile: &ContributionProfile,
    i: usize,
) -> Result<BestResponse> {
    let k = pop.type_count();
    if profile.as_slice().len() != k || i >= k {
        return Err(Error::Domain(format!("profile of length {} for {k} types", profile.as_slice().len())));
    }
    let u = DeviationUtility::new(pop, table, profile, i);
    let current = profile.as_slice()[i];
    // beyond this, cost alone exceeds the best model's value and U < U(0)
    let upper = pop.economy().worth_cap() / u.cost;
    let mut candidates = u.candidates(upper);
    candidates.push(current);
    let current_utility = u.value(current);
    let (m, utility) = candidates
        .into_iter()
        .map(|m| (m, u.value(m)))
        .fold((current, current_utility), |best, c| if c.1 > best.1 { c } else { best });
    Ok(BestResponse { m, utility, gain: utility - current_utility })
}

pub fn check_pbe(pop: &Population, table: &OutcomeTable, profile: &ContributionProfile) -> Result<DeviationReport> {
    let responses = (0..pop.type_count())
        .map(|i| best_response(pop, table, profile, i))
        .collect::<Result<Vec<_>>>()?;
    let gain: Vec<f64> = responses.iter().map(|r| r.gain).collect();
    let deviating: Vec<usize> = (0..gain.len()).filter(|&i| gain[i] > GAIN_TOL).collect();
    let classification = if profile.is_zero() && deviating.is_empty() {
        Classification::FailureEquilibrium
    } else {
        if deviating.is_empty() {
            log::warn!("positive profile {:?} admits no profitable deviation", profile.as_slice());
        }
        Classification::NotEquilibrium
    };
    Ok(DeviationReport { best_response: responses.iter().map(|r| r.m).collect(), gain, deviating, classification })
}

/// Verdict for the whole game: positive profiles never survive, so the game
/// has an equilibrium only if the zero profile is one.
pub fn overall_verdict(pop: &Population, table: &OutcomeTable) -> Result<(DeviationReport, Classification)> {
    let report = check_pbe(pop, table, &ContributionProfile::zeros(pop.type_count()))?;
    let verdict = match report.classification {
        Classification::FailureEquilibrium => Classification::FailureEquilibrium,
        _ => Classification::NoEquilibrium,
    };
    Ok((report, verdict))
}
