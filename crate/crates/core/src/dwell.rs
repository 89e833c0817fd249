//! Cell dwell-time distributions.
//!
//! A new call starts at a point uniform on a disk of radius `R`, heads in a
//! uniform direction at a speed uniform on `(0, v_max]`, and leaves the cell
//! when it crosses the boundary. A handed-off call enters across the boundary
//! at an angle uniform on `(-pi/2, pi/2)` and travels the chord `2R cos(theta)`.
//!
//! Both distances have closed-form densities,
//!
//! ```text
//! new call:  f_Z(z) = sqrt(4R^2 - z^2) / (pi R^2),     0 <= z <= 2R
//! handoff:   f_Z(z) = 2 / (pi sqrt(4R^2 - z^2)),        0 <= z <= 2R
//! ```
//!
//! and with `T = Z / V`, `V ~ U(0, v_max]`, the CDF is
//! `E[(1 - Z / (v_max t))^+]`, which integrates in closed form. The speed
//! density reaches down to zero, so neither dwell time has a finite mean.

use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_to_infinity, Tolerance};

/// A nonnegative random lifetime with an evaluable CDF and density.
pub trait Lifetime {
    fn cdf(&self, t: f64) -> f64;
    fn pdf(&self, t: f64) -> f64;
    /// Points where the density has a kink, used to seed quadrature.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Typical time over which the distribution varies.
    fn time_scale(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DwellDistribution {
    /// Residence of a call that starts inside the cell.
    NewCall { radius: f64, v_max: f64 },
    /// Residence after entering the cell by handoff.
    Handoff { radius: f64, v_max: f64 },
    /// Memoryless residence with the given rate.
    Exponential { rate: f64 },
    /// The mobile never leaves; the CDF is identically zero.
    Immobile,
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            detail: format!("must be finite and > 0, got {v}"),
        })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "t",
            detail: format!("time must be >= 0, got {t}"),
        })
    }
}

impl DwellDistribution {
    pub fn new_call(radius: f64, v_max: f64) -> Result<Self> {
        check_positive("cell_radius", radius)?;
        check_positive("v_max", v_max)?;
        Ok(Self::NewCall { radius, v_max })
    }

    pub fn handoff(radius: f64, v_max: f64) -> Result<Self> {
        check_positive("cell_radius", radius)?;
        check_positive("v_max", v_max)?;
        Ok(Self::Handoff { radius, v_max })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        check_positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    /// Time to cross the cell diameter at full speed; both geometric
    /// densities have a kink here.
    fn crossing_time(&self) -> Option<f64> {
        match *self {
            Self::NewCall { radius, v_max } | Self::Handoff { radius, v_max } => Some(2.0 * radius / v_max),
            _ => None,
        }
    }
}

/// `2R - sqrt(4R^2 - a^2)` without cancellation for small `a`.
fn chord_deficit(two_r: f64, a: f64) -> f64 {
    let w = (two_r * two_r - a * a).max(0.0).sqrt();
    a * a / (two_r + w)
}

/// `int_0^a z sqrt(4R^2 - z^2) dz = (8R^3 - w^3) / 3`.
fn first_moment_new(two_r: f64, a: f64) -> f64 {
    let w = (two_r * two_r - a * a).max(0.0).sqrt();
    chord_deficit(two_r, a) * (two_r * two_r + two_r * w + w * w) / 3.0
}

impl Lifetime for DwellDistribution {
    fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::NewCall { radius, v_max } => {
                let two_r = 2.0 * radius;
                let s = v_max * t;
                let a = s.min(two_r);
                let w = (two_r * two_r - a * a).max(0.0).sqrt();
                let area = 0.5 * a * w + 0.5 * two_r * two_r * (a / two_r).min(1.0).asin();
                let moment = first_moment_new(two_r, a);
                ((area - moment / s) / (PI * radius * radius)).clamp(0.0, 1.0)
            }
            Self::Handoff { radius, v_max } => {
                let two_r = 2.0 * radius;
                let s = v_max * t;
                let a = s.min(two_r);
                let mass = (a / two_r).min(1.0).asin();
                let moment = chord_deficit(two_r, a);
                (FRAC_2_PI * (mass - moment / s)).clamp(0.0, 1.0)
            }
            Self::Exponential { rate } => -(-rate * t).exp_m1(),
            Self::Immobile => 0.0,
        }
    }

    fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::NewCall { radius, v_max } => {
                if t == 0.0 {
                    return v_max / (PI * radius);
                }
                let two_r = 2.0 * radius;
                let a = (v_max * t).min(two_r);
                first_moment_new(two_r, a) / (PI * radius * radius * v_max * t * t)
            }
            Self::Handoff { radius, v_max } => {
                if t == 0.0 {
                    return v_max / (2.0 * PI * radius);
                }
                let two_r = 2.0 * radius;
                let a = (v_max * t).min(two_r);
                FRAC_2_PI * chord_deficit(two_r, a) / (v_max * t * t)
            }
            Self::Exponential { rate } => rate * (-rate * t).exp(),
            Self::Immobile => 0.0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.crossing_time().into_iter().collect()
    }

    fn time_scale(&self) -> f64 {
        match *self {
            Self::NewCall { radius, v_max } | Self::Handoff { radius, v_max } => radius / v_max,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Immobile => f64::INFINITY,
        }
    }
}

/// `F_Tn(t)` for a new call. Accepts the new-call geometric kind and the
/// exponential and immobile stand-ins.
pub fn tn_cdf(t: f64, d: &DwellDistribution) -> Result<f64> {
    check_time(t)?;
    if matches!(d, DwellDistribution::Handoff { .. }) {
        return Err(Error::OutOfRange {
            name: "dwell",
            detail: "handoff geometry passed where a new-call dwell is required".into(),
        });
    }
    Ok(d.cdf(t))
}

/// `F_Th(t)` after a handoff. Accepts the handoff geometric kind and the
/// exponential and immobile stand-ins.
pub fn th_cdf(t: f64, d: &DwellDistribution) -> Result<f64> {
    check_time(t)?;
    if matches!(d, DwellDistribution::NewCall { .. }) {
        return Err(Error::OutOfRange {
            name: "dwell",
            detail: "new-call geometry passed where a handoff dwell is required".into(),
        });
    }
    Ok(d.cdf(t))
}

/// `E[exp(-mu T)]`: the probability that an exponential(`mu`) call outlasts
/// the dwell `T`. Evaluated by quadrature against the dwell density.
pub fn survival_transform(d: &DwellDistribution, mu: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    if matches!(d, DwellDistribution::Immobile) {
        return Ok(0.0);
    }
    let mut breaks = d.breakpoints();
    breaks.push(1.0 / mu);
    let scale = d.time_scale().min(1.0 / mu);
    let r = integrate_to_infinity(
        |t| (-mu * t).exp() * d.pdf(t),
        0.0,
        scale,
        &breaks,
        Tolerance::new(1e-13, 1e-11),
    )?;
    Ok(r.value.clamp(0.0, 1.0))
}
