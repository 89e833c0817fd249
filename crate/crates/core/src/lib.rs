//! Buffer-fill analysis for mobile constant-bit-rate ATM sources.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] and [`scenario`]: scenario inputs, validation and the scenario file format.
//! * [`dwell`]: cell-residence time distributions for new and handed-off calls.
//! * [`holding`]: channel holding time, its exponential fit and the handoff fixed point.
//! * [`equilibrium`]: birth-death equilibrium of busy channels at one base station.
//! * [`fluid`]: the on-off fluid buffer model, fixed and mobile-weighted.
//! * [`oracle`]: brute-force Monte Carlo references for the analytic results.
//! * [`sim`]: discrete-event simulator of a square array of base stations.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dwell;
pub mod equilibrium;
pub mod error;
pub mod fluid;
pub mod holding;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use params::{DerivedRates, ScenarioParams, ValidationReport};
