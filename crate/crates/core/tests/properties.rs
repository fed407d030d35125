mod common;

use common::*;
use contract_forge::assignment::ProportionalAssignment;
use contract_forge::audit::{check_reservation_append, check_theorem1_equivalence, pairwise_ic_holds};
use contract_forge::complete::{solve_complete, FairnessSurpluses};
use contract_forge::config::SweepConfig;
use contract_forge::equilibrium::{best_response, ContributionProfile};
use contract_forge::first_moment::{closed_form_rewards, solve_incomplete_with, ContractMenu, SolverOptions};
use contract_forge::harness::{plotdata, preset, run_sweep};
use contract_forge::types::{compositions_count, enumerate};
use contract_forge::welfare::welfare_report;
use contract_forge::{OutcomeTable, Population, Realization};
use proptest::prelude::*;

fn costs_strategy(types: std::ops::RangeInclusive<usize>, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    types
        .prop_flat_map(move |k| prop::collection::vec(lo.ln()..hi.ln(), k))
        .prop_map(|logs| {
            let mut c: Vec<f64> = logs.into_iter().map(f64::exp).collect();
            c.sort_by(|a, b| b.total_cmp(a));
            c
        })
        .prop_filter("distinct costs", |c| c.windows(2).all(|w| w[0] > w[1] * (1.0 + 1e-3)))
}

fn probs_for(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let k = p.len();
        let head: f64 = p[..k - 1].iter().sum();
        p[k - 1] = 1.0 - head;
        p
    })
}

fn population_strategy(
    types: std::ops::RangeInclusive<usize>,
    participants: std::ops::RangeInclusive<u32>,
    lo: f64,
    hi: f64,
) -> impl Strategy<Value = Population> {
    (costs_strategy(types, lo, hi), participants)
        .prop_flat_map(|(c, n)| {
            let k = c.len();
            (Just(c), probs_for(k), Just(n))
        })
        .prop_map(|(c, p, n)| Population::new(c, p, n, econ()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn enumeration_matches_log_factorial_oracle(k in 1usize..=4, n in 1u32..=12, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_probs(&mut r, k);
        let table = OutcomeTable::multinomial(n, &p, u128::MAX).unwrap();
        let oracle = Outcomes::new(n, &p);
        prop_assert_eq!(table.len(), oracle.rows.len());
        prop_assert_eq!(table.len() as u128, compositions_count(n, k));
        let mut seen: Vec<&Vec<u32>> = table.realizations().iter().map(|x| &x.counts).collect();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), table.len());
        for x in table.realizations() {
            prop_assert_eq!(x.counts.iter().sum::<u32>(), n);
            let want = oracle.rows.iter().find(|(c, _)| c == &x.counts).unwrap().1;
            prop_assert!((x.probability - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE));
        }
        let total: f64 = table.realizations().iter().map(|x| x.probability).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn chain_menus_pass_pairwise_comparisons(
        c in costs_strategy(1..=5, 1e-3, 1.0),
        raw in prop::collection::vec(0.0f64..5000.0, 5),
        f1 in 0.0f64..80.0,
    ) {
        let mut m = raw[..c.len()].to_vec();
        m.sort_by(f64::total_cmp);
        let t = closed_form_rewards(&m, f1, &c);
        let oracle_t = chain_rewards(&m, f1, &c);
        for (a, b) in t.iter().zip(&oracle_t) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let tol = 1e-9 * t.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        prop_assert!(ic_brute_force(&c, &t, &m, tol));
        let menu = ContractMenu { t, m };
        prop_assert!(pairwise_ic_holds(&c, &menu, tol));
        prop_assert!(check_theorem1_equivalence(&c, &menu, tol));
    }

    #[test]
    fn incentive_compatible_menus_are_ordered(
        c in costs_strategy(2..=5, 1e-3, 1.0),
        m in prop::collection::vec(0.0f64..5000.0, 5),
        t0 in 0.0f64..100.0,
        jitter in prop::collection::vec(-0.25f64..1.25, 5),
    ) {
        // increments drawn around the band [cᵢΔm, cᵢ₋₁Δm], unordered m allowed
        let k = c.len();
        let m = &m[..k];
        let mut t = vec![t0];
        for i in 1..k {
            let dm = m[i] - m[i - 1];
            let (lo, hi) = ((c[i] * dm).min(c[i - 1] * dm), (c[i] * dm).max(c[i - 1] * dm));
            t.push(t[i - 1] + lo + jitter[i] * (hi - lo));
        }
        prop_assume!(ic_brute_force(&c, &t, m, 0.0));
        prop_assert!(m.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(t.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn proportional_assignment_respects_budget_and_recovers_rewards(
        pop in population_strategy(1..=4, 1..=8, 1e-3, 1.0),
        raw in prop::collection::vec(0.0f64..6000.0, 4),
        ratios in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let k = pop.type_count();
        let mut m = raw[..k].to_vec();
        m.sort_by(f64::total_cmp);
        let out = Outcomes::of(&pop);
        let t: Vec<f64> = (0..k).map(|i| ratios[i] * bound(&pop, &out, &m, i)).collect();
        let menu = ContractMenu { t: t.clone(), m: m.clone() };
        let table = enumerate(&pop).unwrap();
        let rule = ProportionalAssignment::new(&pop, &table, &menu).unwrap();
        let e = pop.economy();
        let assigned: Vec<(Vec<u32>, Vec<f64>)> = out
            .rows
            .iter()
            .map(|(c, p)| (c.clone(), rule.assign(&Realization { counts: c.clone(), probability: *p }).rewards))
            .collect();
        for (c, r) in &assigned {
            let cap = e.accuracy.value(pooled(c, &m));
            prop_assert!(r.iter().all(|&x| x <= cap));
        }
        for i in 0..k {
            let recovered = out.expect_given(i, |c| {
                e.valuation.value(assigned.iter().find(|(n, _)| n == c).unwrap().1[i])
            });
            prop_assert!((recovered - t[i]).abs() <= 1e-8, "type {}: {} vs {}", i + 1, recovered, t[i]);
        }
    }

    #[test]
    fn complete_contract_matches_fixed_point_oracle(
        pop in population_strategy(1..=4, 2..=8, 1e-3, 1.0),
        seed in any::<u64>(),
    ) {
        let res = reservations(&pop);
        let s = FairnessSurpluses::zeros(pop.type_count());
        let out = Outcomes::of(&pop);
        let (counts, _) = &out.rows[(seed % out.rows.len() as u64) as usize];
        let k = solve_complete(&pop, &res, counts, &s).unwrap();
        let (m, v) = complete_oracle(&pop, &res, counts);
        prop_assert!((k.reward_value - v).abs() <= 1e-6 * v.max(1.0), "{} vs {}", k.reward_value, v);
        for (i, got) in k.contributions.iter().enumerate() {
            match got {
                Some(x) => {
                    prop_assert!((x - m[i]).abs() <= 1e-6 * m[i].max(1.0));
                    let utility = k.reward_value - pop.costs()[i] * x;
                    prop_assert!((utility - res[i].f).abs() <= 1e-8);
                }
                None => prop_assert_eq!(counts[i], 0),
            }
        }
    }

    #[test]
    fn fairness_never_raises_accuracy(
        pop in population_strategy(1..=3, 2..=6, 1e-3, 0.3),
        seed in any::<u64>(),
        extra in 0.0f64..10.0,
    ) {
        let res = reservations(&pop);
        let out = Outcomes::of(&pop);
        let (counts, _) = &out.rows[(seed % out.rows.len() as u64) as usize];
        let k = pop.type_count();
        let i = (seed / 7 % k as u64) as usize;
        let base = solve_complete(&pop, &res, counts, &FairnessSurpluses::zeros(k));
        let mut s = vec![0.0; k];
        s[i] = extra;
        let raised = solve_complete(&pop, &res, counts, &FairnessSurpluses::new(s).unwrap());
        if let (Ok(a), Ok(b)) = (base, raised) {
            prop_assert!(b.reward_accuracy <= a.reward_accuracy + 1e-12);
        }
    }

    #[test]
    fn best_response_matches_grid_oracle(
        pop in population_strategy(1..=3, 1..=8, 1e-3, 1.0),
        profile in prop::collection::vec(0.0f64..3000.0, 3),
        who in 0usize..3,
    ) {
        let k = pop.type_count();
        let i = who % k;
        let m = profile[..k].to_vec();
        let table = enumerate(&pop).unwrap();
        let br = best_response(&pop, &table, &ContributionProfile::new(m.clone()).unwrap(), i).unwrap();
        prop_assert!(br.gain >= -1e-10);
        let out = Outcomes::of(&pop);
        let e = pop.economy();
        let c = pop.costs()[i];
        let u = |x: f64| out.expect_given(i, |n| e.worth(pooled(n, &m) - m[i] + x)) - c * x;
        let upper = e.worth_cap() / c;
        const STEPS: usize = 4000;
        let step = upper / STEPS as f64;
        let (mut arg, mut best) = (0.0, f64::NEG_INFINITY);
        for j in 0..=STEPS {
            let x = j as f64 * step;
            if u(x) > best {
                best = u(x);
                arg = x;
            }
        }
        // refine inside the neighbouring cells by golden section
        let (mut a, mut b) = ((arg - step).max(0.0), arg + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (x1, x2) = (b - g * (b - a), a + g * (b - a));
            if u(x1) >= u(x2) { b = x2 } else { a = x1 }
        }
        let best = best.max(u(0.5 * (a + b))).max(u(m[i]));
        prop_assert!((br.utility - best).abs() <= 1e-6, "reported {} oracle {}", br.utility, best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn appending_an_outside_option_keeps_incentives(
        pop in population_strategy(1..=4, 1..=6, 1e-3, 1.0),
        new_cost in (1e-3f64).ln()..0.0,
    ) {
        let new_cost = new_cost.exp();
        prop_assume!(pop.costs().iter().all(|&c| (c - new_cost).abs() > 1e-9));
        let table = enumerate(&pop).unwrap();
        let res = reservations(&pop);
        let (menu, _) = solve_incomplete_with(&pop, &table, &res, &SolverOptions::default()).unwrap();
        prop_assert!(check_reservation_append(&pop, &menu, new_cost, 1e-9).unwrap());
    }
}

#[test]
fn expectation_is_independent_of_thread_count() {
    let p = [0.1, 0.2, 0.3, 0.4];
    let table = OutcomeTable::multinomial(30, &p, u128::MAX).unwrap();
    assert!(table.len() > 5000);
    let e = econ();
    let m = [120.0, 340.0, 560.0, 780.0];
    let g = |n: &[u32]| e.worth(n.iter().zip(&m).map(|(&k, &x)| k as f64 * x).sum());
    let at = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (table.expect(g).unwrap(), table.expect_conditional(2, g).unwrap()))
    };
    let one = at(1);
    for threads in [2, 3, 8] {
        assert_eq!(at(threads), one);
    }
}

#[test]
fn information_cost_matches_oracle() {
    let mut r = rng(31);
    for _ in 0..6 {
        let pop = random_population(&mut r, 2..=3, 2..=8, (1e-3, 0.2));
        let table = enumerate(&pop).unwrap();
        let res = reservations(&pop);
        let (menu, _) = solve_incomplete_with(&pop, &table, &res, &SolverOptions::default()).unwrap();
        let w = welfare_report(&pop, &table, &res, &menu, &FairnessSurpluses::zeros(pop.type_count())).unwrap();
        let out = Outcomes::of(&pop);
        let e = pop.economy();
        let oracle = out.expect(|c| e.worth(pooled(c, &menu.m)) - complete_oracle(&pop, &res, c).1);
        assert!((w.information_cost - oracle).abs() <= 1e-6, "{} vs {}", w.information_cost, oracle);
        assert!(w.information_cost <= 1e-8);
        for i in 0..pop.type_count() {
            let rent = menu.t[i] - pop.costs()[i] * menu.m[i] - res[i].f;
            assert!((w.information_rent[i] - rent).abs() <= 1e-9);
        }
    }
}

fn sweep() -> (SweepConfig, Vec<contract_forge::harness::SweepRow>) {
    let cfg = SweepConfig::from_json(preset("sweep").unwrap()).unwrap();
    let rows = run_sweep(&cfg).unwrap();
    (cfg, rows)
}

#[test]
fn sweep_rents_follow_the_reward_chain() {
    let (cfg, rows) = sweep();
    let (c1, c2) = (cfg.base.population.costs[0], cfg.base.population.costs[1]);
    let res = reservations(&cfg.cell(0.5, 2).unwrap().population().unwrap());
    for row in &rows {
        assert_eq!(row.rent1, 0.0, "{row:?}");
        assert!(row.rent2 >= -1e-8, "{row:?}");
        if row.pooling {
            let expected = res[0].f - res[1].f + (c1 - c2) * row.m2;
            assert!((row.rent2 - expected).abs() <= 1e-6, "{row:?} expected {expected}");
        }
    }
}

#[test]
fn sweep_trends() {
    let (cfg, rows) = sweep();
    // pooling becomes more common as the high-cost type becomes more likely
    let pooled_per_p1: Vec<usize> =
        cfg.p1_grid.iter().map(|&p| rows.iter().filter(|r| r.p1 == p && r.pooling).count()).collect();
    assert!(pooled_per_p1.windows(2).all(|w| w[1] >= w[0]), "{pooled_per_p1:?}");
    assert!(pooled_per_p1[0] == 0 && *pooled_per_p1.last().unwrap() == cfg.n_grid.len());
    // with a rare high-cost type the options separate further as N grows
    let spread: Vec<f64> = rows.iter().filter(|r| r.p1 == 0.1).map(|r| r.m2 - r.m1).collect();
    assert!(spread.windows(2).all(|w| w[1] >= w[0]), "{spread:?}");
}

#[test]
fn plot_series_geometry() {
    let pop = preset_population("scenario3");
    let table = enumerate(&pop).unwrap();
    let res = reservations(&pop);
    let (menu, _) = solve_incomplete_with(&pop, &table, &res, &SolverOptions::default()).unwrap();
    let points = plotdata(&pop, &table, &res, &menu).unwrap();
    let series = |name: &str| -> Vec<(f64, f64)> {
        points.iter().filter(|p| p.series == name).map(|p| (p.x, p.y)).collect()
    };
    let line_at = |pts: &[(f64, f64)], x: f64| {
        let ((x0, y0), (x1, y1)) = (pts[0], pts[pts.len() - 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    let e = pop.economy();
    let k = pop.type_count();
    for i in 0..k {
        let line = series(&format!("reservation_{}", i + 1));
        assert!((line_at(&line, res[i].m_bar) - e.worth(res[i].m_bar)).abs() <= 1e-8);
    }
    let own = series("reservation_1");
    assert!((line_at(&own, menu.m[0]) - menu.t[0]).abs() <= 1e-8);
    let cap = series("max_award");
    assert!((line_at(&cap, menu.m[k - 1]) - menu.t[k - 1]).abs() <= 1e-5);
}
