//! JSON configuration: one document per scenario or sweep, unknown fields
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complete::FairnessSurpluses;
use crate::error::{Error, Result};
use crate::first_moment::SolverOptions;
use crate::model::{AccuracyKind, AccuracySpec, ModelEconomy, ValuationKind, ValuationSpec};
use crate::types::{Population, DEFAULT_ENUM_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    /// Number of types `I`; optional, checked against `costs` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<usize>,
    pub participants: u32,
    pub costs: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyConfig {
    pub kind: AccuracyKind,
    pub k: f64,
    pub a_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationConfig {
    pub kind: ValuationKind,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Violation and stationarity bound for reporting a solve as optimal.
    pub tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub enum_cap: u128,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig { tolerance: d.report_tol, max_outer: d.al.max_outer, max_inner: d.al.max_inner, enum_cap: DEFAULT_ENUM_CAP }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        let mut o = SolverOptions { report_tol: self.tolerance, enum_cap: self.enum_cap, ..Default::default() };
        o.al.max_outer = self.max_outer;
        o.al.max_inner = self.max_inner;
        o
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub population: PopulationConfig,
    pub accuracy: AccuracyConfig,
    pub valuation: ValuationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surpluses: Option<Vec<f64>>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.population()?;
        cfg.surpluses()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn economy(&self) -> Result<ModelEconomy> {
        let accuracy = AccuracySpec::new(self.accuracy.kind, self.accuracy.k, self.accuracy.a_opt)?;
        let valuation = match self.valuation.kind {
            ValuationKind::Linear => ValuationSpec::linear(self.valuation.slope)?,
        };
        Ok(ModelEconomy::new(accuracy, valuation))
    }

    pub fn population(&self) -> Result<Population> {
        let p = &self.population;
        if let Some(types) = p.types {
            if types != p.costs.len() {
                return Err(Error::Config(format!("types = {types} but {} costs given", p.costs.len())));
            }
        }
        Population::new(p.costs.clone(), p.probs.clone(), p.participants, self.economy()?)
    }

    pub fn surpluses(&self) -> Result<FairnessSurpluses> {
        let k = self.population.costs.len();
        match &self.surpluses {
            None => Ok(FairnessSurpluses::zeros(k)),
            Some(s) if s.len() == k => FairnessSurpluses::new(s.clone()),
            Some(s) => Err(Error::Config(format!("{} surpluses for {k} types", s.len()))),
        }
    }
}

fn default_p1_grid() -> Vec<f64> {
    (1..=9).map(|j| j as f64 / 10.0).collect()
}

fn default_n_grid() -> Vec<u32> {
    vec![2, 5, 10, 20, 50, 100]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ScenarioConfig,
    #[serde(default = "default_p1_grid")]
    pub p1_grid: Vec<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<u32>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.base.population.costs.len() != 2 {
            return Err(Error::Config("sweeps need a two-type base population".into()));
        }
        if self.p1_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        if let Some(p) = self.p1_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Config(format!("p1 grid value {p} outside (0, 1)")));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::Config("participant counts must be positive".into()));
        }
        for (p1, n) in self.cells() {
            self.cell(p1, n)?;
        }
        Ok(())
    }

    /// Every `(p₁, N)` pair, sorted.
    pub fn cells(&self) -> Vec<(f64, u32)> {
        let mut out: Vec<(f64, u32)> =
            self.p1_grid.iter().flat_map(|&p| self.n_grid.iter().map(move |&n| (p, n))).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.dedup();
        out
    }

    /// The base scenario with `p = (p₁, 1 − p₁)` and `N` participants.
    pub fn cell(&self, p1: f64, n: u32) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        cfg.population.probs = vec![p1, 1.0 - p1];
        cfg.population.participants = n;
        cfg.population()?;
        Ok(cfg)
    }
}
