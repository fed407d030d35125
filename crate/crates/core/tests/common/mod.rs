//! Instance generators and brute-force oracles shared by the integration
//! tests. Nothing here calls the library's enumeration, closed forms or
//! solvers; only the model functions `ṽ`, `a` are borrowed.

#![allow(dead_code)]

use contract_forge::reservation::{reserve_all, ReservationPoint};
use contract_forge::{AccuracyKind, AccuracySpec, ModelEconomy, Population, ValuationSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn econ() -> ModelEconomy {
    ModelEconomy::new(
        AccuracySpec::new(AccuracyKind::GeneralizationBoundAdditive, 1.0, 1.0).unwrap(),
        ValuationSpec::linear(100.0).unwrap(),
    )
}

/// Distinct costs drawn log-uniformly from `[lo, hi]`, sorted decreasing.
pub fn random_costs(rng: &mut ChaCha8Rng, types: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut c: Vec<f64> = (0..types).map(|_| (rng.gen_range(lo.ln()..hi.ln())).exp()).collect();
        c.sort_by(|a, b| b.total_cmp(a));
        if c.windows(2).all(|w| w[0] > w[1] * (1.0 + 1e-3)) {
            return c;
        }
    }
}

/// Probabilities with every entry at least `0.05`.
pub fn random_probs(rng: &mut ChaCha8Rng, types: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..types).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = p[..types - 1].iter().sum();
    p[types - 1] = 1.0 - head;
    p
}

pub fn random_population(
    rng: &mut ChaCha8Rng,
    types: std::ops::RangeInclusive<usize>,
    participants: std::ops::RangeInclusive<u32>,
    cost_range: (f64, f64),
) -> Population {
    let k = rng.gen_range(types);
    let n = rng.gen_range(participants);
    let costs = random_costs(rng, k, cost_range.0, cost_range.1);
    let probs = random_probs(rng, k);
    Population::new(costs, probs, n, econ()).unwrap()
}

/// Every split of `n` participants into `k` types with its multinomial
/// probability, by plain recursion and log-factorials.
pub struct Outcomes {
    pub rows: Vec<(Vec<u32>, f64)>,
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

impl Outcomes {
    pub fn new(n: u32, probs: &[f64]) -> Self {
        fn rec(left: u32, k: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if prefix.len() == k - 1 {
                prefix.push(left);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for x in 0..=left {
                prefix.push(x);
                rec(left - x, k, prefix, out);
                prefix.pop();
            }
        }
        let mut counts = Vec::new();
        rec(n, probs.len(), &mut Vec::new(), &mut counts);
        let rows = counts
            .into_iter()
            .map(|c| {
                let ln = ln_factorial(n)
                    + c.iter().zip(probs).map(|(&x, &p)| x as f64 * p.ln() - ln_factorial(x)).sum::<f64>();
                (c, ln.exp())
            })
            .collect();
        Outcomes { rows }
    }

    pub fn of(pop: &Population) -> Self {
        Self::new(pop.participants(), pop.probs())
    }

    pub fn expect(&self, g: impl Fn(&[u32]) -> f64) -> f64 {
        self.rows.iter().map(|(c, p)| p * g(c)).sum()
    }

    pub fn expect_given(&self, i: usize, g: impl Fn(&[u32]) -> f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (c, p) in &self.rows {
            if c[i] > 0 {
                num += p * g(c);
                den += p;
            }
        }
        num / den
    }
}

pub fn pooled(c: &[u32], m: &[f64]) -> f64 {
    c.iter().zip(m).map(|(&n, &x)| n as f64 * x).sum()
}

/// `𝔼[a(Σnm)]`
pub fn expected_accuracy(pop: &Population, out: &Outcomes, m: &[f64]) -> f64 {
    let acc = &pop.economy().accuracy;
    out.expect(|c| acc.value(pooled(c, m)))
}

/// `t̄ᵢ = 𝔼[ṽ(Σnm) | nᵢ ≥ 1]`
pub fn bound(pop: &Population, out: &Outcomes, m: &[f64], i: usize) -> f64 {
    out.expect_given(i, |c| pop.economy().worth(pooled(c, m)))
}

/// Rewards with type 1 at its outside option and each adjacent downward
/// comparison binding.
pub fn chain_rewards(m: &[f64], f1: f64, costs: &[f64]) -> Vec<f64> {
    let mut t = vec![f1 + costs[0] * m[0]];
    for i in 1..m.len() {
        t.push(t[i - 1] + costs[i] * (m[i] - m[i - 1]));
    }
    t
}

/// Every ordered pair `(i, j)`: `tᵢ − cᵢmᵢ ≥ tⱼ − cᵢmⱼ − tol`.
pub fn ic_brute_force(costs: &[f64], t: &[f64], m: &[f64], tol: f64) -> bool {
    (0..costs.len()).all(|i| (0..costs.len()).all(|j| t[i] - costs[i] * m[i] >= t[j] - costs[i] * m[j] - tol))
}

/// Worst constraint value of the substituted program at `m`, in money:
/// `m₁ ≥ 0`, ordering, participation, budget. Non-negative means feasible.
pub fn substituted_slack(pop: &Population, out: &Outcomes, res: &[ReservationPoint], m: &[f64]) -> f64 {
    let c = pop.costs();
    let t = chain_rewards(m, res[0].f, c);
    let mut worst = c[0] * m[0];
    for i in 1..m.len() {
        worst = worst.min(m[i] - m[i - 1]);
    }
    for i in 0..m.len() {
        worst = worst.min(t[i] - c[i] * m[i] - res[i].f);
        worst = worst.min(bound(pop, out, m, i) - t[i]);
    }
    worst
}

/// Complete-information contract by Gauss–Seidel on the binding
/// participation system `mᵢ = (ṽ(Σnm) − fᵢ)/cᵢ`, started above the largest
/// fixed point so the iterates decrease onto it. Returns contributions of
/// present types (zero otherwise) and the pooled value.
pub fn complete_oracle(pop: &Population, res: &[ReservationPoint], counts: &[u32]) -> (Vec<f64>, f64) {
    let e = pop.economy();
    let c = pop.costs();
    let k = counts.len();
    let mut m: Vec<f64> =
        (0..k).map(|i| if counts[i] > 0 { ((e.worth_cap() - res[i].f) / c[i]).max(0.0) } else { 0.0 }).collect();
    for _ in 0..2_000_000 {
        let mut delta: f64 = 0.0;
        for i in 0..k {
            if counts[i] == 0 {
                continue;
            }
            let v = e.worth(pooled(counts, &m));
            let next = ((v - res[i].f) / c[i]).max(0.0);
            delta = delta.max((next - m[i]).abs());
            m[i] = next;
        }
        if delta <= 1e-13 * m.iter().copied().fold(1.0, f64::max) {
            break;
        }
    }
    let v = e.worth(pooled(counts, &m));
    (m, v)
}

pub fn reservations(pop: &Population) -> Vec<ReservationPoint> {
    reserve_all(pop).unwrap()
}

/// Preset scenario from the shipped JSON.
pub fn preset_population(name: &str) -> Population {
    let text = contract_forge::harness::preset(name).unwrap();
    contract_forge::config::ScenarioConfig::from_json(text).unwrap().population().unwrap()
}

/// Whether some rewards `(t₁, t₂)` make `(m₁, m₂)` feasible for the full
/// two-type program: participation, both comparisons, budgets. With
/// `d = t₂ − t₁` the comparisons read `c₂Δ ≤ d ≤ c₁Δ`, so feasibility is an
/// intersection of intervals.
pub fn two_type_full_feasible(pop: &Population, out: &Outcomes, res: &[ReservationPoint], m: &[f64]) -> bool {
    let c = pop.costs();
    if m[0] < 0.0 || m[1] < 0.0 {
        return false;
    }
    let (l1, u1) = (c[0] * m[0] + res[0].f, bound(pop, out, m, 0));
    let (l2, u2) = (c[1] * m[1] + res[1].f, bound(pop, out, m, 1));
    let dm = m[1] - m[0];
    let (dlo, dhi) = ((c[1] * dm).max(l2 - u1), (c[0] * dm).min(u2 - l1));
    l1 <= u1 && l2 <= u2 && dlo <= dhi
}
