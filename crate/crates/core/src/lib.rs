//! Optimal contracts for collaborative machine learning where the rewards are
//! trained models of varying accuracy.
//!
//! The pipeline: build a [`Population`](types::Population), compute each
//! type's outside option with [`reservation`], solve the observable-cost
//! benchmark with [`complete`] or the hidden-cost menu with [`first_moment`],
//! turn a menu into per-realization rewards with [`assignment`], and check
//! everything with [`audit`]. [`welfare`] compares the two information
//! regimes and [`equilibrium`] analyses the game without a contract.

pub mod assignment;
pub mod audit;
pub mod complete;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod first_moment;
pub mod harness;
pub mod model;
pub mod optim;
pub mod reservation;
pub mod summation;
pub mod types;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{AccuracyKind, AccuracySpec, ModelEconomy, ValuationSpec};
pub use types::{OutcomeTable, Population, Realization};
