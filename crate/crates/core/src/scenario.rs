//! Flat `key=value` scenario files shared by the analysis and the simulator.
//!
//! ```text
//! # light-load example
//! lambda_R = 0.06
//! mu_M = 0.025
//! v_max = 0.03
//! channels = 3
//! base_spacing = 2
//! grid_side = 3
//! ```
//!
//! Lines starting with `#` are comments. Every key may appear at most once and
//! unknown keys are rejected with their line number. The analytic rates and the
//! simulator's inputs come in pairs (`lambda_R`/`exp_pulse_mean`,
//! `mu_M`/`mean_session_length`); when only one member of a pair is given the
//! other is derived from it, so either side of the tool can run from a minimal
//! file.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::ScenarioParams;
use crate::sim::SimConfig;

pub const KEYS: [&str; 12] = [
    "lambda_R",
    "mu_M",
    "v_max",
    "channels",
    "cell_radius",
    "base_spacing",
    "grid_side",
    "exp_pulse_mean",
    "mean_session_length",
    "delta_time",
    "sim_duration",
    "seed",
];

/// Step length used when the file does not set `delta_time`.
pub const DEFAULT_DELTA_TIME: f64 = 1.0;
/// Simulated horizon, in mean session lengths beyond the warmup, used when
/// the file does not set `sim_duration`.
pub const DEFAULT_SESSIONS: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub exp_pulse_mean: f64,
    pub mean_session_length: f64,
    pub delta_time: f64,
    pub sim_duration: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<&'static str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Scenario {
                line,
                message: format!("expected key=value, got `{trimmed}`"),
            })?;
            let key = key.trim();
            let known = KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::Scenario {
                line,
                message: format!("unknown key `{key}`"),
            })?;
            if let Some((first, _)) = values.insert(known, (line, value.trim())) {
                return Err(Error::Scenario {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
        }
        Self::from_values(&values)
    }

    fn from_values(values: &BTreeMap<&'static str, (usize, &str)>) -> Result<Self> {
        fn get<T: std::str::FromStr>(
            values: &BTreeMap<&'static str, (usize, &str)>,
            key: &'static str,
        ) -> Result<Option<T>> {
            values
                .get(key)
                .map(|&(line, v)| {
                    v.parse::<T>().map_err(|_| Error::Scenario {
                        line,
                        message: format!("`{key}` has malformed value `{v}`"),
                    })
                })
                .transpose()
        }
        let missing = |key: &str| Error::Scenario {
            line: 0,
            message: format!("missing required key `{key}`"),
        };

        let v_max: f64 = get(values, "v_max")?.ok_or_else(|| missing("v_max"))?;
        let channels: usize = get(values, "channels")?.ok_or_else(|| missing("channels"))?;
        let grid_side: usize = get(values, "grid_side")?.ok_or_else(|| missing("grid_side"))?;
        let base_spacing: f64 = get(values, "base_spacing")?.ok_or_else(|| missing("base_spacing"))?;
        let cell_radius: f64 = get(values, "cell_radius")?.unwrap_or(base_spacing / 2.0);
        let area = coverage_area(grid_side, base_spacing);

        let (lambda_r, exp_pulse_mean) = match (get::<f64>(values, "lambda_R")?, get::<f64>(values, "exp_pulse_mean")?)
        {
            (Some(l), Some(e)) => (l, e),
            (Some(l), None) => (l, 1.0 / (l * area)),
            (None, Some(e)) => (1.0 / (e * area), e),
            (None, None) => return Err(missing("lambda_R or exp_pulse_mean")),
        };
        let (mu_m, mean_session_length) =
            match (get::<f64>(values, "mu_M")?, get::<f64>(values, "mean_session_length")?) {
                (Some(m), Some(s)) => (m, s),
                (Some(m), None) => (m, 1.0 / m),
                (None, Some(s)) => (1.0 / s, s),
                (None, None) => return Err(missing("mu_M or mean_session_length")),
            };
        let delta_time = get(values, "delta_time")?.unwrap_or(DEFAULT_DELTA_TIME);
        let sim_duration = get(values, "sim_duration")?
            .unwrap_or((crate::sim::WARMUP_SESSIONS + DEFAULT_SESSIONS) * mean_session_length);
        let seed = get(values, "seed")?.unwrap_or(0);

        let scenario = Self {
            params: ScenarioParams {
                lambda_r,
                mu_m,
                v_max,
                channels,
                cell_radius,
                base_spacing,
                grid_side,
            },
            exp_pulse_mean,
            mean_session_length,
            delta_time,
            sim_duration,
            seed,
        };
        scenario.check_simulation_keys()?;
        Ok(scenario)
    }

    fn check_simulation_keys(&self) -> Result<()> {
        let mut bad = Vec::new();
        // An infinite pulse mean is allowed: it switches arrivals off.
        if !(self.exp_pulse_mean > 0.0) {
            bad.push(format!("exp_pulse_mean: must be > 0, got {}", self.exp_pulse_mean));
        }
        for (name, v) in [
            ("mean_session_length", self.mean_session_length),
            ("delta_time", self.delta_time),
            ("sim_duration", self.sim_duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name}: must be finite and > 0, got {v}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    /// Area of the union of the arrival disks (radius `base_spacing / 2`).
    pub fn coverage_area(&self) -> f64 {
        coverage_area(self.params.grid_side, self.params.base_spacing)
    }

    /// New-call density implied by the simulator's arrival stream: one
    /// arrival per `exp_pulse_mean` seconds spread over the covered area.
    pub fn lambda_r_dimensional(&self) -> f64 {
        1.0 / (self.exp_pulse_mean * self.coverage_area())
    }

    /// `1 / (Exp Pulse Mean * Total Cell Area * B)`, dividing by the base
    /// count a second time (the literal reading of the arrival-rate formula).
    pub fn lambda_r_literal(&self) -> f64 {
        self.lambda_r_dimensional() / self.params.base_count() as f64
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(
            self.params.grid_side,
            self.params.base_spacing,
            self.params.channels,
            self.exp_pulse_mean,
            self.mean_session_length,
            self.delta_time,
            self.params.v_max,
            self.sim_duration,
            self.seed,
        )
    }

    /// Renders the scenario back into file form; `parse(render(s)) == s`.
    pub fn render(&self) -> String {
        let p = &self.params;
        format!(
            "lambda_R = {}\nmu_M = {}\nv_max = {}\nchannels = {}\ncell_radius = {}\nbase_spacing = {}\n\
             grid_side = {}\nexp_pulse_mean = {}\nmean_session_length = {}\ndelta_time = {}\n\
             sim_duration = {}\nseed = {}\n",
            p.lambda_r,
            p.mu_m,
            p.v_max,
            p.channels,
            p.cell_radius,
            p.base_spacing,
            p.grid_side,
            self.exp_pulse_mean,
            self.mean_session_length,
            self.delta_time,
            self.sim_duration,
            self.seed
        )
    }
}

/// Disks of radius `D / 2` centred on a square array with spacing `D` touch
/// but never overlap, so the union area is `B * pi * (D / 2)^2`.
pub fn coverage_area(grid_side: usize, base_spacing: f64) -> f64 {
    (grid_side * grid_side) as f64 * PI * (base_spacing / 2.0).powi(2)
}
