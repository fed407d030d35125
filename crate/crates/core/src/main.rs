use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use contract_forge::audit::check_full;
use contract_forge::config::{ScenarioConfig, SweepConfig};
use contract_forge::equilibrium::{check_pbe, overall_verdict, Classification, ContributionProfile, DeviationReport};
use contract_forge::first_moment::{solve_incomplete_with, ContractMenu, SolveStatus};
use contract_forge::harness::{self, ScenarioOutcome};
use contract_forge::welfare::welfare_report;
use contract_forge::{Error, Result};

const THREADS_VAR: &str = "CONTRACT_FORGE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "contract-forge", version, about = "Optimal contracts for collaborative ML with model rewards")]
struct Cli {
    /// Scenario (or sweep) configuration, a single JSON document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Violation and stationarity bound for an optimal solve.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Largest number of type realizations to enumerate.
    #[arg(long = "enum-cap", global = true)]
    enum_cap: Option<u128>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Complete,
    Incomplete,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solo contribution and profit for every type.
    Reservation,
    /// Solve the observable-cost benchmark or the hidden-cost menu.
    Solve {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Per-type counts such as `4,6`; required for complete mode.
        #[arg(long)]
        realization: Option<String>,
    },
    /// Rewards for one realization under proportional assignment.
    Assign {
        #[arg(long)]
        realization: String,
        /// Menu to assign from (JSON or menu CSV); solved if omitted.
        #[arg(long)]
        menu: Option<PathBuf>,
    },
    /// Check a menu against every constraint and optimality condition.
    Audit {
        #[arg(long)]
        menu: PathBuf,
    },
    /// Information cost and rents of the optimal menu.
    Welfare,
    /// Two-type grid over p1 and N; uses the built-in grid without --config.
    Sweep,
    /// Run a built-in scenario preset.
    Scenario {
        /// scenario1, scenario2, scenario3 or two-type
        name: String,
    },
    /// Deviation analysis of a symmetric contribution profile.
    PbeCheck {
        /// Per-type contributions such as `0,0`.
        #[arg(long)]
        profile: String,
    },
    /// Expected data versus expected concave value of data.
    DemoNonequivalence,
    /// Long-format series for the reward-contribution plot.
    Plotdata {
        #[arg(long)]
        menu: Option<PathBuf>,
    },
}

/// Failure after outputs were produced: a solve that did not reach optimality.
struct SolverFailure(String);

enum Failure {
    Error(Error),
    Solver(SolverFailure),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads().map_err(Failure::from).and_then(|()| run(&cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Solver(SolverFailure(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {threads} worker threads: {e}")))
}

fn apply_overrides(cli: &Cli, cfg: &mut ScenarioConfig) -> Result<()> {
    if let Some(tol) = cli.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {tol}")));
        }
        cfg.solver.tolerance = tol;
    }
    if let Some(cap) = cli.enum_cap {
        cfg.solver.enum_cap = cap;
    }
    Ok(())
}

fn scenario_config(cli: &Cli) -> Result<ScenarioConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    apply_overrides(cli, &mut cfg)?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ScenarioConfig>) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.output.dir.clone()))
}

/// Writes `content` to `dir/file`, or prints it when no directory is set.
fn emit(dir: Option<&Path>, file: &str, content: &str) -> Result<()> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            let path = d.join(file);
            std::fs::write(&path, content)?;
            println!("wrote {}", path.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output") + "\n"
}

fn require_optimal(status: SolveStatus, violation: f64, stationarity: f64) -> CliResult {
    if status == SolveStatus::Optimal {
        return Ok(());
    }
    Err(Failure::Solver(SolverFailure(format!(
        "solver finished with status {status:?} (violation {violation:.3e}, stationarity {stationarity:.3e})"
    ))))
}

fn finish_scenario(out: &ScenarioOutcome, dir: Option<&Path>) -> CliResult {
    match dir {
        Some(d) => {
            out.write(d)?;
            println!("wrote {}", d.join("menu.csv").display());
            println!("wrote {}", d.join("report.json").display());
        }
        None => print!("{}", out.menu_csv()?),
    }
    require_optimal(out.status, out.solve.max_constraint_violation, out.solve.stationarity_residual)
}

fn solved_menu(cfg: &ScenarioConfig, given: Option<&PathBuf>) -> std::result::Result<ContractMenu, Failure> {
    if let Some(path) = given {
        return Ok(harness::load_menu(path)?);
    }
    let (pop, table, res) = harness::prepare(cfg)?;
    let (menu, report) = solve_incomplete_with(&pop, &table, &res, &cfg.solver.options())?;
    require_optimal(report.status, report.max_constraint_violation, report.stationarity_residual)?;
    Ok(menu)
}

#[derive(Serialize)]
struct PbeOutput {
    profile: Vec<f64>,
    report: DeviationReport,
    verdict: Classification,
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Reservation => {
            let cfg = scenario_config(cli)?;
            let pop = cfg.population()?;
            let res = contract_forge::reservation::reserve_all(&pop)?;
            emit(out_dir(cli, Some(&cfg)).as_deref(), "reservation.csv", &harness::reservation_csv(&pop, &res)?)?;
        }
        Command::Solve { mode: Mode::Complete, realization } => {
            let cfg = scenario_config(cli)?;
            let pop = cfg.population()?;
            let text = realization
                .as_deref()
                .ok_or_else(|| Error::Config("--realization is required for --mode complete".into()))?;
            let counts = harness::parse_realization(&pop, text)?;
            emit(out_dir(cli, Some(&cfg)).as_deref(), "complete.csv", &harness::solve_complete_at(&cfg, &counts)?)?;
        }
        Command::Solve { mode: Mode::Incomplete, .. } => {
            let cfg = scenario_config(cli)?;
            let out = harness::run_scenario(&cfg)?;
            finish_scenario(&out, out_dir(cli, Some(&cfg)).as_deref())?;
        }
        Command::Scenario { name } => {
            let mut cfg = ScenarioConfig::from_json(harness::preset(name)?)?;
            if name == "sweep" {
                return Err(Error::Config("the sweep preset runs with the `sweep` subcommand".into()).into());
            }
            apply_overrides(cli, &mut cfg)?;
            let out = harness::run_scenario(&cfg)?;
            finish_scenario(&out, out_dir(cli, Some(&cfg)).as_deref())?;
        }
        Command::Assign { realization, menu } => {
            let cfg = scenario_config(cli)?;
            let pop = cfg.population()?;
            let counts = harness::parse_realization(&pop, realization)?;
            let menu = solved_menu(&cfg, menu.as_ref())?;
            let (_, table, _) = harness::prepare(&cfg)?;
            let csv = harness::assignment_csv(&pop, &table, &menu, &counts)?;
            emit(out_dir(cli, Some(&cfg)).as_deref(), "assignment.csv", &csv)?;
        }
        Command::Audit { menu } => {
            let cfg = scenario_config(cli)?;
            let menu = harness::load_menu(menu)?;
            let (pop, table, res) = harness::prepare(&cfg)?;
            if menu.len() != pop.type_count() || menu.t.len() != pop.type_count() {
                return Err(Error::Config(format!("menu has {} options for {} types", menu.len(), pop.type_count())).into());
            }
            let report = check_full(&pop, &table, &res, &menu)?;
            emit(out_dir(cli, Some(&cfg)).as_deref(), "audit.json", &json(&report))?;
        }
        Command::Welfare => {
            let cfg = scenario_config(cli)?;
            let (pop, table, res) = harness::prepare(&cfg)?;
            let (menu, report) = solve_incomplete_with(&pop, &table, &res, &cfg.solver.options())?;
            let welfare = welfare_report(&pop, &table, &res, &menu, &cfg.surpluses()?)?;
            emit(out_dir(cli, Some(&cfg)).as_deref(), "welfare.json", &json(&welfare))?;
            require_optimal(report.status, report.max_constraint_violation, report.stationarity_residual)?;
        }
        Command::Sweep => {
            let mut cfg = match &cli.config {
                Some(path) => SweepConfig::load(path)?,
                None => SweepConfig::from_json(harness::preset("sweep")?)?,
            };
            apply_overrides(cli, &mut cfg.base)?;
            let rows = harness::run_sweep(&cfg)?;
            emit(out_dir(cli, Some(&cfg.base)).as_deref(), "sweep.csv", &harness::sweep_csv(&rows)?)?;
            if let Some(bad) = rows.iter().find(|r| r.status != SolveStatus::Optimal) {
                return Err(Failure::Solver(SolverFailure(format!(
                    "cell p1={} N={} finished with status {:?}",
                    bad.p1, bad.participants, bad.status
                ))));
            }
        }
        Command::PbeCheck { profile } => {
            let cfg = scenario_config(cli)?;
            let (pop, table, _) = harness::prepare(&cfg)?;
            let values = harness::parse_values(profile)?;
            if values.len() != pop.type_count() {
                return Err(Error::Config(format!("profile has {} values for {} types", values.len(), pop.type_count())).into());
            }
            let profile = ContributionProfile::new(values)?;
            let (report, verdict) = if profile.is_zero() {
                overall_verdict(&pop, &table)?
            } else {
                let report = check_pbe(&pop, &table, &profile)?;
                let verdict = report.classification;
                (report, verdict)
            };
            let output = PbeOutput { profile: profile.as_slice().to_vec(), report, verdict };
            emit(out_dir(cli, Some(&cfg)).as_deref(), "pbe.json", &json(&output))?;
        }
        Command::DemoNonequivalence => {
            let demo = harness::run_demo_nonequivalence()?;
            emit(cli.out.as_deref(), "nonequivalence.json", &json(&demo))?;
        }
        Command::Plotdata { menu } => {
            let cfg = scenario_config(cli)?;
            let menu = solved_menu(&cfg, menu.as_ref())?;
            let (pop, table, res) = harness::prepare(&cfg)?;
            if menu.len() != pop.type_count() || menu.t.len() != pop.type_count() {
                return Err(Error::Config(format!("menu has {} options for {} types", menu.len(), pop.type_count())).into());
            }
            let points = harness::plotdata(&pop, &table, &res, &menu)?;
            emit(out_dir(cli, Some(&cfg)).as_deref(), "plotdata.csv", &harness::plot_csv(&points)?)?;
        }
    }
    Ok(())
}
