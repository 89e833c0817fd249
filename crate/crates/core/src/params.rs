//! Scenario parameters shared by the analytic modules and the simulator.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Traffic, mobility and geometry inputs for one scenario.
///
/// Units are abstract: distances in whatever unit `v_max` is expressed in,
/// times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    /// New-call rate density, calls per second per unit area.
    pub lambda_r: f64,
    /// Call completion rate; the mean call duration is `1 / mu_m`.
    pub mu_m: f64,
    /// Maximum mobile speed, distance per second.
    pub v_max: f64,
    /// Channels per base station.
    pub channels: usize,
    /// Radius of the circle approximating one cell area.
    pub cell_radius: f64,
    /// Distance between adjacent base stations.
    pub base_spacing: f64,
    /// Base stations per side of the square array.
    pub grid_side: usize,
}

impl ScenarioParams {
    /// Builds parameters whose cell radius is half the base spacing.
    pub fn with_spacing(
        lambda_r: f64,
        mu_m: f64,
        v_max: f64,
        channels: usize,
        base_spacing: f64,
        grid_side: usize,
    ) -> Self {
        Self {
            lambda_r,
            mu_m,
            v_max,
            channels,
            cell_radius: base_spacing / 2.0,
            base_spacing,
            grid_side,
        }
    }

    pub fn base_count(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn validate(&self) -> ValidationReport {
        fn check(field: &'static str, ok: bool, message: String) -> Option<Violation> {
            (!ok).then_some(Violation { field, message })
        }
        let positive = |field, value: f64| {
            check(
                field,
                value.is_finite() && value > 0.0,
                format!("must be finite and > 0, got {value}"),
            )
        };
        let failures = [
            positive("lambda_R", self.lambda_r),
            positive("mu_M", self.mu_m),
            // v_max = 0 is the immobile limit: no cell is ever left during a call.
            check(
                "v_max",
                self.v_max.is_finite() && self.v_max >= 0.0,
                format!("must be finite and >= 0, got {}", self.v_max),
            ),
            positive("cell_radius", self.cell_radius),
            positive("base_spacing", self.base_spacing),
            check("channels", self.channels >= 1, "must be >= 1".into()),
            check("grid_side", self.grid_side >= 1, "must be >= 1".into()),
        ];
        ValidationReport {
            failures: failures.into_iter().flatten().collect(),
        }
    }

    pub fn derive(&self) -> Result<DerivedRates> {
        self.validate().into_result()?;
        Ok(DerivedRates {
            lambda_r: self.lambda_r,
            lambda_cell: self.lambda_r * PI * self.cell_radius * self.cell_radius,
            gamma_o: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Outcome of [`ScenarioParams::validate`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub failures: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn names(&self, field: &str) -> bool {
        self.failures.iter().any(|v| v.field == field)
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                self.failures.iter().map(ToString::to_string).collect(),
            ))
        }
    }
}

/// Which new-call rate drives the per-cell birth-death chain.
///
/// `PerCell` multiplies the rate density by the cell area, which is
/// dimensionally consistent. `PaperLiteral` feeds the density straight into
/// the up-rate, as the closed-form equilibrium is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMode {
    #[default]
    PerCell,
    PaperLiteral,
}

impl RateMode {
    pub fn name(self) -> &'static str {
        match self {
            RateMode::PerCell => "per-cell",
            RateMode::PaperLiteral => "paper-literal",
        }
    }
}

impl std::str::FromStr for RateMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per-cell" => Ok(RateMode::PerCell),
            "paper-literal" => Ok(RateMode::PaperLiteral),
            other => Err(format!("unknown rate mode `{other}` (per-cell | paper-literal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub lambda_r: f64,
    /// New-call attempt rate into one cell, `lambda_R * pi * R^2`.
    pub lambda_cell: f64,
    /// Handoff-to-new-call attempt ratio; known once the handoff rate is.
    pub gamma_o: Option<f64>,
}

impl DerivedRates {
    pub fn new_call_rate(&self, mode: RateMode) -> f64 {
        match mode {
            RateMode::PerCell => self.lambda_cell,
            RateMode::PaperLiteral => self.lambda_r,
        }
    }

    pub fn with_handoff_rate(mut self, lambda_rh: f64, mode: RateMode) -> Self {
        self.gamma_o = Some(lambda_rh / self.new_call_rate(mode));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ScenarioParams {
        ScenarioParams {
            lambda_r: 0.06,
            mu_m: 1.0 / 40.0,
            v_max: 0.03,
            channels: 3,
            cell_radius: 1.0,
            base_spacing: 2.0,
            grid_side: 3,
        }
    }

    #[test]
    fn example_values_validate() {
        assert!(example().validate().is_ok());
    }

    #[test]
    fn zero_channels_is_named() {
        let p = ScenarioParams {
            channels: 0,
            ..example()
        };
        let r = p.validate();
        assert_eq!(r.failures.len(), 1);
        assert!(r.names("channels"));
    }

    #[test]
    fn negative_radius_is_named() {
        let p = ScenarioParams {
            cell_radius: -1.0,
            ..example()
        };
        assert!(p.validate().names("cell_radius"));
    }

    #[test]
    fn validate_does_not_mutate() {
        let p = ScenarioParams {
            grid_side: 0,
            ..example()
        };
        let before = p;
        let _ = p.validate();
        assert_eq!(p, before);
    }

    #[test]
    fn lambda_cell_from_density() {
        let d = example().derive().unwrap();
        assert!((d.lambda_cell - 0.06 * PI).abs() < 1e-15);
        assert!((d.lambda_cell - 0.1885).abs() < 1e-4);

        let unit = ScenarioParams {
            lambda_r: 1.0 / PI,
            ..example()
        };
        assert!((unit.derive().unwrap().lambda_cell - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_density_fails_derive() {
        let p = ScenarioParams {
            lambda_r: 0.0,
            ..example()
        };
        assert!(matches!(p.derive(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn derive_scales_linearly_and_quadratically() {
        let base = example().derive().unwrap().lambda_cell;
        let twice_rate = ScenarioParams {
            lambda_r: 0.12,
            ..example()
        };
        let twice_radius = ScenarioParams {
            cell_radius: 2.0,
            ..example()
        };
        assert!((twice_rate.derive().unwrap().lambda_cell - 2.0 * base).abs() < 1e-14);
        assert!((twice_radius.derive().unwrap().lambda_cell - 4.0 * base).abs() < 1e-14);
        assert_eq!(example().derive().unwrap(), example().derive().unwrap());
    }

    #[test]
    fn default_radius_is_half_spacing() {
        let p = ScenarioParams::with_spacing(0.06, 0.025, 0.03, 3, 2.5, 3);
        assert_eq!(p.cell_radius, 1.25);
        assert_eq!(p.base_count(), 9);
    }

    #[test]
    fn gamma_o_uses_selected_rate() {
        let d = example().derive().unwrap();
        let literal = d.with_handoff_rate(0.12, RateMode::PaperLiteral);
        assert!((literal.gamma_o.unwrap() - 2.0).abs() < 1e-12);
        let per_cell = d.with_handoff_rate(0.06 * PI, RateMode::PerCell);
        assert!((per_cell.gamma_o.unwrap() - 1.0).abs() < 1e-12);
    }
}
