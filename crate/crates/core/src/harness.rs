//! End-to-end runs behind the command line: scenarios, sweeps, plot data
//! and the non-equivalence demonstration, plus their CSV/JSON renderings.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::{expected_bound, ProportionalAssignment};
use crate::audit::{check_full, AuditReport};
use crate::complete::{solve_complete, CompleteContract};
use crate::config::{ScenarioConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::first_moment::{solve_incomplete_with, ContractMenu, SolveReport, SolveStatus};
use crate::reservation::{reserve_all, ReservationPoint};
use crate::types::{enumerate_with_cap, OutcomeTable, Population, Realization, DEFAULT_ENUM_CAP};
use crate::welfare::{welfare_report, WelfareReport};

pub const PRESET_NAMES: [&str; 5] = ["scenario1", "scenario2", "scenario3", "two-type", "sweep"];

pub fn preset(name: &str) -> Result<&'static str> {
    Ok(match name {
        "scenario1" => include_str!("../presets/scenario1.json"),
        "scenario2" => include_str!("../presets/scenario2.json"),
        "scenario3" => include_str!("../presets/scenario3.json"),
        "two-type" => include_str!("../presets/two-type.json"),
        "sweep" => include_str!("../presets/sweep.json"),
        _ => {
            return Err(Error::Config(format!("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", "))))
        }
    })
}

/// Ten significant digits, plain decimal notation where that stays short.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.9e}");
    let (_, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-6..16).contains(&exp) {
        return sci;
    }
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (9 - exp).max(0) as usize;
    let fixed = format!("{rounded:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Everything a single scenario run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub name: Option<String>,
    pub status: SolveStatus,
    pub solve: SolveReport,
    pub menu: ContractMenu,
    pub reservation: Vec<ReservationPoint>,
    pub audit: AuditReport,
    pub welfare: WelfareReport,
    #[serde(skip)]
    pub costs: Vec<f64>,
    #[serde(skip)]
    pub probs: Vec<f64>,
}

/// Population, outcome table and reservation points for a config.
pub fn prepare(cfg: &ScenarioConfig) -> Result<(Population, OutcomeTable, Vec<ReservationPoint>)> {
    let pop = cfg.population()?;
    let table = enumerate_with_cap(&pop, cfg.solver.enum_cap)?;
    let res = reserve_all(&pop)?;
    Ok((pop, table, res))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let (pop, table, res) = prepare(cfg)?;
    let (menu, solve) = solve_incomplete_with(&pop, &table, &res, &cfg.solver.options())?;
    let audit = check_full(&pop, &table, &res, &menu)?;
    let welfare = welfare_report(&pop, &table, &res, &menu, &cfg.surpluses()?)?;
    Ok(ScenarioOutcome {
        name: cfg.name.clone(),
        status: solve.status,
        solve,
        menu,
        reservation: res,
        audit,
        welfare,
        costs: pop.costs().to_vec(),
        probs: pop.probs().to_vec(),
    })
}

impl ScenarioOutcome {
    pub fn menu_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = (0..self.menu.len())
            .map(|i| {
                vec![
                    (i + 1).to_string(),
                    fmt_sig(self.costs[i]),
                    fmt_sig(self.probs[i]),
                    fmt_sig(self.menu.m[i]),
                    fmt_sig(self.menu.t[i]),
                    fmt_sig(self.reservation[i].m_bar),
                    fmt_sig(self.reservation[i].f),
                    fmt_sig(self.welfare.information_rent[i]),
                ]
            })
            .collect();
        csv_string(&["type", "cost", "prob", "m", "t", "m_bar", "f", "rent"], &rows)
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("menu.csv"), self.menu_csv()?)?;
        std::fs::write(dir.join("report.json"), self.report_json() + "\n")?;
        Ok(())
    }
}

pub fn reservation_csv(pop: &Population, res: &[ReservationPoint]) -> Result<String> {
    let rows: Vec<Vec<String>> = res
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                fmt_sig(pop.costs()[i]),
                fmt_sig(r.m_bar),
                fmt_sig(r.f),
                fmt_sig(r.worth(pop.economy())),
            ]
        })
        .collect();
    csv_string(&["type", "cost", "m_bar", "f", "value"], &rows)
}

pub fn complete_csv(pop: &Population, counts: &[u32], contract: &CompleteContract) -> Result<String> {
    let rows: Vec<Vec<String>> = (0..pop.type_count())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                fmt_sig(pop.costs()[i]),
                counts[i].to_string(),
                contract.contributions[i].map_or(String::new(), fmt_sig),
                fmt_sig(contract.reward_accuracy),
                fmt_sig(contract.reward_value),
            ]
        })
        .collect();
    csv_string(&["type", "cost", "count", "m", "reward_accuracy", "reward_value"], &rows)
}

/// Parses `"3,2"`-style count vectors and checks them against the population.
pub fn parse_realization(pop: &Population, text: &str) -> Result<Vec<u32>> {
    let counts: Vec<u32> = text
        .split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|e| Error::Config(format!("bad count {s:?}: {e}"))))
        .collect::<Result<_>>()?;
    if counts.len() != pop.type_count() || counts.iter().sum::<u32>() != pop.participants() {
        return Err(Error::Config(format!(
            "realization {counts:?} must have {} entries summing to {}",
            pop.type_count(),
            pop.participants()
        )));
    }
    Ok(counts)
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad value {s:?}: {e}"))))
        .collect()
}

pub fn solve_complete_at(cfg: &ScenarioConfig, counts: &[u32]) -> Result<String> {
    let pop = cfg.population()?;
    let res = reserve_all(&pop)?;
    let contract = solve_complete(&pop, &res, counts, &cfg.surpluses()?)?;
    complete_csv(&pop, counts, &contract)
}

pub fn assignment_csv(
    pop: &Population,
    table: &OutcomeTable,
    menu: &ContractMenu,
    counts: &[u32],
) -> Result<String> {
    let pa = ProportionalAssignment::new(pop, table, menu)?;
    let realization = Realization { counts: counts.to_vec(), probability: crate::types::multinomial_pmf(counts, pop.probs()) };
    let out = pa.assign(&realization);
    let rows: Vec<Vec<String>> = (0..pop.type_count())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                counts[i].to_string(),
                fmt_sig(pa.bounds()[i]),
                fmt_sig(pa.ratios()[i]),
                fmt_sig(out.rewards[i]),
                fmt_sig(out.collective_accuracy),
            ]
        })
        .collect();
    csv_string(&["type", "count", "bound", "ratio", "reward", "collective_accuracy"], &rows)
}

/// Reads a menu from JSON (`{"t": [...], "m": [...]}`) or from a CSV with
/// `m` and `t` columns, such as `menu.csv`.
pub fn load_menu(path: &Path) -> Result<ContractMenu> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        return serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())));
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("menu CSV lacks a {name:?} column")))
    };
    let (mi, ti) = (col("m")?, col("t")?);
    let mut menu = ContractMenu { t: Vec::new(), m: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            record[j].trim().parse().map_err(|e| Error::Config(format!("bad number {:?}: {e}", &record[j])))
        };
        menu.m.push(num(mi)?);
        menu.t.push(num(ti)?);
    }
    Ok(menu)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p1: f64,
    pub participants: u32,
    pub m1: f64,
    pub m2: f64,
    pub t1: f64,
    pub t2: f64,
    pub pooling: bool,
    pub information_cost: f64,
    pub rent1: f64,
    pub rent2: f64,
    pub status: SolveStatus,
}

pub fn is_pooling(m1: f64, m2: f64) -> bool {
    (m2 - m1).abs() <= 1e-6 * m2.abs().max(1.0)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut rows = cfg
        .cells()
        .par_iter()
        .map(|&(p1, n)| {
            let out = run_scenario(&cfg.cell(p1, n)?)?;
            let (m, t) = (&out.menu.m, &out.menu.t);
            Ok(SweepRow {
                p1,
                participants: n,
                m1: m[0],
                m2: m[1],
                t1: t[0],
                t2: t[1],
                pooling: is_pooling(m[0], m[1]),
                information_cost: out.welfare.information_cost,
                rent1: out.welfare.information_rent[0],
                rent2: out.welfare.information_rent[1],
                status: out.status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.p1.total_cmp(&b.p1).then(a.participants.cmp(&b.participants)));
    Ok(rows)
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Infeasible => "infeasible",
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_sig(r.p1),
                r.participants.to_string(),
                fmt_sig(r.m1),
                fmt_sig(r.m2),
                fmt_sig(r.t1),
                fmt_sig(r.t2),
                r.pooling.to_string(),
                fmt_sig(r.information_cost),
                fmt_sig(r.rent1),
                fmt_sig(r.rent2),
                status_name(r.status).to_string(),
            ]
        })
        .collect();
    csv_string(
        &["p1", "n", "m1", "m2", "t1", "t2", "pooling", "information_cost", "rent1", "rent2", "status"],
        &body,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonEquivalence {
    /// `argmax 𝔼[g]` over `m₁ ∈ [0, 5]`.
    pub linear_argmax: f64,
    /// `argmax 𝔼[√g]` over `m₁ ∈ [0, 5]`.
    pub sqrt_argmax: f64,
    /// The closed-form `405/97`.
    pub sqrt_argmax_exact: f64,
    pub argmaxes_differ: bool,
}

/// Two participants, `p = (0.6, 0.4)`, `g = n₁m₁ + n₂(5 − m₁)`: maximizing
/// the expected pooled data and the expected concave value of it pick
/// different contributions.
pub fn run_demo_nonequivalence() -> Result<NonEquivalence> {
    const UPPER: f64 = 5.0;
    const STEPS: u32 = 50_000;
    let table = OutcomeTable::multinomial(2, &[0.6, 0.4], DEFAULT_ENUM_CAP)?;
    let g = |n: &[u32], m1: f64| n[0] as f64 * m1 + n[1] as f64 * (UPPER - m1);
    let argmax = |h: &(dyn Fn(f64) -> f64 + Sync)| -> Result<f64> {
        let mut best = (0.0, f64::NEG_INFINITY);
        for j in 0..=STEPS {
            let m1 = UPPER * j as f64 / STEPS as f64;
            let value = table.expect(|n| h(g(n, m1)))?;
            if value > best.1 {
                best = (m1, value);
            }
        }
        // golden-section polish inside the neighbouring grid cells
        let step = UPPER / STEPS as f64;
        let (mut a, mut b) = ((best.0 - step).max(0.0), (best.0 + step).min(UPPER));
        let objective = |m1: f64| table.expect(|n| h(g(n, m1)));
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let (x1, x2) = (b - ratio * (b - a), a + ratio * (b - a));
            if objective(x1)? >= objective(x2)? {
                b = x2;
            } else {
                a = x1;
            }
        }
        let polished = 0.5 * (a + b);
        Ok(if objective(polished)? > best.1 { polished } else { best.0 })
    };
    let linear_argmax = argmax(&|x| x)?;
    let sqrt_argmax = argmax(&|x: f64| x.max(0.0).sqrt())?;
    Ok(NonEquivalence {
        linear_argmax,
        sqrt_argmax,
        sqrt_argmax_exact: 405.0 / 97.0,
        argmaxes_differ: (linear_argmax - sqrt_argmax).abs() > 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

const PLOT_SAMPLES: usize = 100;

/// Long-format series for the reward-versus-contribution picture: menu
/// options, the reward schedule through them, the solo value curve, each
/// type's reservation and isoprofit lines, and the largest awardable value.
pub fn plotdata(
    pop: &Population,
    table: &OutcomeTable,
    res: &[ReservationPoint],
    menu: &ContractMenu,
) -> Result<Vec<PlotPoint>> {
    let k = pop.type_count();
    let econ = pop.economy();
    let c = pop.costs();
    let m_max = 1.25 * menu.m.iter().chain(res.iter().map(|r| &r.m_bar)).fold(1.0, |a: f64, &b| a.max(b));
    let grid: Vec<f64> = (0..=PLOT_SAMPLES).map(|j| m_max * j as f64 / PLOT_SAMPLES as f64).collect();
    let mut out = Vec::new();
    let mut push = |series: String, x: f64, y: f64| out.push(PlotPoint { series, x, y });

    let mut schedule: Vec<(f64, f64)> = menu.m.iter().copied().zip(menu.t.iter().copied()).collect();
    schedule.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    schedule.dedup();
    for &(x, y) in &schedule {
        push("reward_curve".into(), x, y);
    }
    for i in 0..k {
        push(format!("option_{}", i + 1), menu.m[i], menu.t[i]);
    }
    let max_award = expected_bound(pop, table, menu, k - 1)?;
    for &x in &grid {
        push("solo_value".into(), x, econ.worth(x));
        push("max_award".into(), x, max_award);
        for i in 0..k {
            push(format!("reservation_{}", i + 1), x, res[i].f + c[i] * x);
            push(format!("isoprofit_{}", i + 1), x, (menu.t[i] - c[i] * menu.m[i]) + c[i] * x);
        }
    }
    out.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    Ok(out)
}

pub fn plot_csv(points: &[PlotPoint]) -> Result<String> {
    let rows: Vec<Vec<String>> = points.iter().map(|p| vec![p.series.clone(), fmt_sig(p.x), fmt_sig(p.y)]).collect();
    csv_string(&["series", "x", "y"], &rows)
}
