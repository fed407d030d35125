//! Accuracy and valuation functions, and their composition.
//!
//! The accuracy of a model trained on `m` units of data follows a
//! generalization bound that is clamped at zero for small `m`. The clamp
//! boundary `m₀` is computed once when the spec is built; every solver in the
//! crate restricts its smooth reasoning to `m > m₀`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the generalization bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyKind {
    /// `a(m) = a_opt − √(2k(2+ln(m/k)) + 4) / √m`
    GeneralizationBound,
    /// `a(m) = a_opt − (√(2k(2+ln(m/k))) + 4) / √m`
    ///
    /// Same terms with the constant added outside the root; gives
    /// reservation points of 715.6 and 1148.4 units at costs 0.02 and 0.01.
    /// All shipped presets use this form.
    GeneralizationBoundAdditive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracySpec {
    kind: AccuracyKind,
    k: f64,
    a_opt: f64,
    m0: f64,
}

const M0_TOL: f64 = 1e-10;

impl AccuracySpec {
    pub fn new(kind: AccuracyKind, k: f64, a_opt: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!("task difficulty k must be positive, got {k}")));
        }
        if !(a_opt > 0.0 && a_opt <= 1.0) {
            return Err(Error::Domain(format!("a_opt must lie in (0, 1], got {a_opt}")));
        }
        let mut spec = AccuracySpec { kind, k, a_opt, m0: 0.0 };
        spec.m0 = spec.find_clamp_boundary()?;
        Ok(spec)
    }

    pub fn kind(&self) -> AccuracyKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn a_opt(&self) -> f64 {
        self.a_opt
    }

    /// Largest data amount at which the bound is still clamped to zero.
    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// The raw (unclamped) bound. Only meaningful for `m ≥ k·e⁻²`.
    fn bound(&self, m: f64) -> f64 {
        let log_term = 2.0 * self.k * (2.0 + (m / self.k).ln());
        match self.kind {
            AccuracyKind::GeneralizationBound => self.a_opt - ((log_term + 4.0) / m).sqrt(),
            AccuracyKind::GeneralizationBoundAdditive => {
                self.a_opt - (log_term.max(0.0).sqrt() + 4.0) / m.sqrt()
            }
        }
    }

    fn bound_slope(&self, m: f64) -> f64 {
        let log_term = 2.0 * self.k * (2.0 + (m / self.k).ln());
        match self.kind {
            AccuracyKind::GeneralizationBound => {
                let h = log_term + 4.0;
                (h - 2.0 * self.k) / (2.0 * m * m.sqrt() * h.sqrt())
            }
            AccuracyKind::GeneralizationBoundAdditive => {
                let root = log_term.sqrt();
                (0.5 * (root + 4.0) - self.k / root) / (m * m.sqrt())
            }
        }
    }

    fn find_clamp_boundary(&self) -> Result<f64> {
        let mut lo = self.k * (-2.0f64).exp();
        let mut hi = 1e6 * self.k;
        if self.bound(lo) >= 0.0 || self.bound(hi) <= 0.0 {
            return Err(Error::Domain(format!(
                "accuracy bound has no sign change on [{lo}, {hi}] for k={}, a_opt={}",
                self.k, self.a_opt
            )));
        }
        while hi - lo > M0_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.bound(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Accuracy at any real `m`; zero on `(-∞, m₀]`.
    pub fn value(&self, m: f64) -> f64 {
        if m <= self.m0 {
            0.0
        } else {
            self.bound(m).max(0.0)
        }
    }

    /// Derivative of [`value`](Self::value); zero on the clamped region.
    pub fn slope(&self, m: f64) -> f64 {
        if m <= self.m0 {
            0.0
        } else {
            self.bound_slope(m)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationKind {
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationSpec {
    kind: ValuationKind,
    slope: f64,
}

impl ValuationSpec {
    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::Domain(format!("valuation slope must be positive, got {slope}")));
        }
        Ok(ValuationSpec { kind: ValuationKind::Linear, slope })
    }

    pub fn kind(&self) -> ValuationKind {
        self.kind
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            ValuationKind::Linear => self.slope * x,
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match self.kind {
            ValuationKind::Linear => y / self.slope,
        }
    }

    pub fn derivative(&self, _x: f64) -> f64 {
        match self.kind {
            ValuationKind::Linear => self.slope,
        }
    }
}

/// The pair (accuracy, valuation) shared by every party.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEconomy {
    pub accuracy: AccuracySpec,
    pub valuation: ValuationSpec,
}

fn check_data_amount(m: f64) -> Result<()> {
    if m.is_finite() && m >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("data amount must be finite and non-negative, got {m}")))
    }
}

impl ModelEconomy {
    pub fn new(accuracy: AccuracySpec, valuation: ValuationSpec) -> Self {
        ModelEconomy { accuracy, valuation }
    }

    pub fn accuracy(&self, m: f64) -> Result<f64> {
        check_data_amount(m)?;
        Ok(self.accuracy.value(m))
    }

    pub fn accuracy_slope(&self, m: f64) -> Result<f64> {
        check_data_amount(m)?;
        Ok(self.accuracy.slope(m))
    }

    pub fn valuation(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("accuracy level must lie in [0, 1], got {x}")));
        }
        Ok(self.valuation.value(x))
    }

    pub fn valuation_inverse(&self, y: f64) -> Result<f64> {
        let top = self.valuation.value(1.0);
        if !(0.0..=top).contains(&y) {
            return Err(Error::Domain(format!("monetary value must lie in [0, {top}], got {y}")));
        }
        Ok(self.valuation.inverse(y))
    }

    /// `ṽ(m) = v(a(m))`, total over the reals.
    pub fn worth(&self, m: f64) -> f64 {
        self.valuation.value(self.accuracy.value(m))
    }

    /// `ṽ′(m)`, total over the reals.
    pub fn worth_slope(&self, m: f64) -> f64 {
        let a = self.accuracy.value(m);
        self.valuation.derivative(a) * self.accuracy.slope(m)
    }

    /// Supremum of `ṽ`, the value of a model at `a_opt`.
    pub fn worth_cap(&self) -> f64 {
        self.valuation.value(self.accuracy.a_opt())
    }
}
