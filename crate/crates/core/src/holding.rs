//! Channel holding time and the handoff-rate fixed point.
//!
//! A channel acquired by a new call is held for `min(T_M, T_n)`, one acquired
//! by a handoff for `min(T_M, T_h)`, where `T_M ~ Exp(mu_M)` is the remaining
//! call duration. Mixing the two by accepted traffic gives
//!
//! ```text
//! F_TH(t) = 1 - e^{-mu_M t} + e^{-mu_M t} / (1 + gamma_c) * (F_Tn(t) + gamma_c F_Th(t))
//! ```
//!
//! which is fitted by an exponential with the same mean. The handoff rate
//! and the fitted rate depend on each other through blocking, so they are
//! found by iteration.

use crate::dwell::{survival_transform, DwellDistribution, Lifetime};
use crate::equilibrium::ChannelEquilibrium;
use crate::error::{Error, Result};
use crate::params::{RateMode, ScenarioParams};
use crate::quadrature::{integrate_to_infinity, Tolerance};

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

fn call_cdf(t: f64, mu_m: f64) -> f64 {
    -(-mu_m * t).exp_m1()
}

/// `F_THn(t) = F_TM(t) + F_Tn(t) (1 - F_TM(t))`.
pub fn fthn_cdf(t: f64, mu_m: f64, dwell_n: &DwellDistribution) -> Result<f64> {
    check_time(t)?;
    let fm = call_cdf(t, mu_m);
    Ok(fm + dwell_n.cdf(t) * (1.0 - fm))
}

/// `F_THh(t) = F_TM(t) + F_Th(t) (1 - F_TM(t))`.
pub fn fthh_cdf(t: f64, mu_m: f64, dwell_h: &DwellDistribution) -> Result<f64> {
    check_time(t)?;
    let fm = call_cdf(t, mu_m);
    Ok(fm + dwell_h.cdf(t) * (1.0 - fm))
}

/// Channel holding time distribution for a given accepted handoff ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingTime {
    pub mu_m: f64,
    pub gamma_c: f64,
    pub dwell_n: DwellDistribution,
    pub dwell_h: DwellDistribution,
}

impl HoldingTime {
    pub fn new(mu_m: f64, gamma_c: f64, dwell_n: DwellDistribution, dwell_h: DwellDistribution) -> Result<Self> {
        if !(mu_m.is_finite() && mu_m > 0.0) {
            return Err(Error::OutOfRange {
                name: "mu_M",
                detail: format!("must be finite and > 0, got {mu_m}"),
            });
        }
        if !(gamma_c >= 0.0) {
            return Err(Error::OutOfRange {
                name: "gamma_c",
                detail: format!("must be >= 0, got {gamma_c}"),
            });
        }
        Ok(Self {
            mu_m,
            gamma_c,
            dwell_n,
            dwell_h,
        })
    }

    fn weights(&self) -> (f64, f64) {
        if self.gamma_c.is_infinite() {
            (0.0, 1.0)
        } else {
            let w = 1.0 / (1.0 + self.gamma_c);
            (w, self.gamma_c * w)
        }
    }

    /// `1 - F_TH(t)` evaluated without cancellation.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let (wn, wh) = self.weights();
        let mix = wn * self.dwell_n.cdf(t) + wh * self.dwell_h.cdf(t);
        (-self.mu_m * t).exp() * (1.0 - mix)
    }

    /// Mean holding time in closed form from the dwell transforms:
    /// `(1 - (P_N + gamma_c P_H) / (1 + gamma_c)) / mu_M`.
    pub fn mean_from_transforms(&self) -> Result<f64> {
        let (wn, wh) = self.weights();
        let pn = survival_transform(&self.dwell_n, self.mu_m)?;
        let ph = survival_transform(&self.dwell_h, self.mu_m)?;
        Ok((1.0 - wn * pn - wh * ph) / self.mu_m)
    }
}

impl Lifetime for HoldingTime {
    fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (wn, wh) = self.weights();
        let decay = (-self.mu_m * t).exp();
        let density = wn * self.dwell_n.pdf(t) + wh * self.dwell_h.pdf(t);
        let mass = wn * self.dwell_n.cdf(t) + wh * self.dwell_h.cdf(t);
        self.mu_m * decay + decay * density - self.mu_m * decay * mass
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.dwell_n.breakpoints();
        b.extend(self.dwell_h.breakpoints());
        b.push(1.0 / self.mu_m);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn time_scale(&self) -> f64 {
        (1.0 / self.mu_m)
            .min(self.dwell_n.time_scale())
            .min(self.dwell_h.time_scale())
    }
}

/// `F_TH(t)`.
pub fn fth_cdf(
    t: f64,
    mu_m: f64,
    gamma_c: f64,
    dwell_n: &DwellDistribution,
    dwell_h: &DwellDistribution,
) -> Result<f64> {
    check_time(t)?;
    Ok(HoldingTime::new(mu_m, gamma_c, *dwell_n, *dwell_h)?.cdf(t))
}

/// `f_TH(t)`, the derivative of [`fth_cdf`].
pub fn fth_pdf(
    t: f64,
    mu_m: f64,
    gamma_c: f64,
    dwell_n: &DwellDistribution,
    dwell_h: &DwellDistribution,
) -> Result<f64> {
    check_time(t)?;
    Ok(HoldingTime::new(mu_m, gamma_c, *dwell_n, *dwell_h)?.pdf(t))
}

/// Exponential rate whose mean matches the lifetime: the `mu_H` for which
/// `int_0^inf [(1 - F(t)) - e^{-mu_H t}] dt = 0`.
pub fn fit_mu_h(fth: &dyn Lifetime) -> Result<f64> {
    let scale = fth.time_scale();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Quadrature { error: f64::INFINITY });
    }
    let mean = integrate_to_infinity(
        |t| 1.0 - fth.cdf(t),
        0.0,
        scale,
        &fth.breakpoints(),
        Tolerance::new(1e-14, 1e-12),
    )?;
    if !(mean.value.is_finite() && mean.value > 0.0) {
        return Err(Error::Quadrature { error: mean.error });
    }
    Ok(1.0 / mean.value)
}

/// Same as [`fit_mu_h`], using the cancellation-free survival of a
/// [`HoldingTime`].
pub fn fit_holding(h: &HoldingTime) -> Result<f64> {
    let mean = integrate_to_infinity(
        |t| h.survival(t),
        0.0,
        h.time_scale(),
        &h.breakpoints(),
        Tolerance::new(1e-14, 1e-12),
    )?;
    Ok(1.0 / mean.value)
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub mode: RateMode,
    pub max_iterations: usize,
    pub rel_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            mode: RateMode::PerCell,
            max_iterations: 200,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldingTimeSolution {
    /// New-call attempt rate into the cell, as selected by the rate mode.
    pub new_call_rate: f64,
    pub lambda_rh: f64,
    pub mu_h: f64,
    pub gamma_c: f64,
    pub lambda_rc: f64,
    pub lambda_rhc: f64,
    pub p_block: f64,
    pub p_handoff_fail: f64,
    /// Probability a new call outlasts its first dwell.
    pub p_n: f64,
    /// Probability a handed-off call outlasts its dwell.
    pub p_h: f64,
    pub iterations: usize,
    pub converged: bool,
    pub equilibrium: ChannelEquilibrium,
}

impl HoldingTimeSolution {
    pub fn mean_holding(&self) -> f64 {
        1.0 / self.mu_h
    }

    pub fn gamma_o(&self) -> f64 {
        self.lambda_rh / self.new_call_rate
    }
}

/// Signature of the equilibrium coupling: `(new_call_rate, lambda_rh, mu_h, channels)`.
pub type Coupling<'a> = dyn Fn(f64, f64, f64, usize) -> Result<ChannelEquilibrium> + 'a;

/// Up-rate `new_call_rate + lambda_rh`, down-rate `j * mu_h`.
pub fn standard_coupling(new_call_rate: f64, lambda_rh: f64, mu_h: f64, channels: usize) -> Result<ChannelEquilibrium> {
    ChannelEquilibrium::new(new_call_rate + lambda_rh, mu_h, channels)
}

/// Handoff attempts per second into a cell: every accepted call in the cell
/// eventually produces a geometric number of further handoffs,
/// `lambda_Rh = lambda_Rc P_N / (1 - P_H (1 - P_fh))`.
pub fn handoff_attempt_rate(lambda_rc: f64, p_n: f64, p_h: f64, p_fh: f64) -> Result<f64> {
    let cascade = p_h * (1.0 - p_fh);
    if cascade >= 1.0 {
        return Err(Error::UnstableHandoff(cascade));
    }
    Ok(lambda_rc * p_n / (1.0 - cascade))
}

fn rel_change(old: f64, new: f64) -> f64 {
    let scale = old.abs().max(new.abs());
    if scale == 0.0 {
        0.0
    } else {
        (new - old).abs() / scale
    }
}

/// Solves for `(lambda_Rh, mu_H)`.
///
/// Each sweep computes the handoff attempt rate from the flow balance
/// `lambda_Rh = lambda_Rc P_N / (1 - P_H (1 - P_fh))`, refits `mu_H` to the
/// holding time at the resulting `gamma_c`, and updates the blocking
/// probabilities from the coupled channel equilibrium. Updates are halved
/// towards the previous iterate once a component starts to oscillate.
pub fn solve_fixed_point(
    params: &ScenarioParams,
    dwell_n: &DwellDistribution,
    dwell_h: &DwellDistribution,
    coupling: &Coupling<'_>,
    opts: FixedPointOptions,
) -> Result<HoldingTimeSolution> {
    let rates = params.derive()?;
    let new_call_rate = rates.new_call_rate(opts.mode);
    let mu_m = params.mu_m;
    let channels = params.channels;

    let p_n = survival_transform(dwell_n, mu_m)?;
    let p_h = survival_transform(dwell_h, mu_m)?;

    let mut lambda_rh = 0.0;
    let mut mu_h = mu_m;
    let mut equilibrium = coupling(new_call_rate, lambda_rh, mu_h, channels)?;
    let mut p_block = equilibrium.blocking();
    let mut prev_delta = (0.0f64, 0.0f64);
    let mut damped = (false, false);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let p_fh = p_block;
        let lambda_rc = new_call_rate * (1.0 - p_block);
        let mut next_rh = handoff_attempt_rate(lambda_rc, p_n, p_h, p_fh)?;
        let delta_rh = next_rh - lambda_rh;
        damped.0 |= delta_rh * prev_delta.0 < 0.0;
        if damped.0 {
            next_rh = 0.5 * lambda_rh + 0.5 * next_rh;
        }

        let gamma_c = if lambda_rc > 0.0 {
            next_rh * (1.0 - p_fh) / lambda_rc
        } else {
            0.0
        };
        let holding = HoldingTime::new(mu_m, gamma_c, *dwell_n, *dwell_h)?;
        let mut next_mu = fit_holding(&holding)?;
        let delta_mu = next_mu - mu_h;
        damped.1 |= delta_mu * prev_delta.1 < 0.0;
        if damped.1 {
            next_mu = 0.5 * mu_h + 0.5 * next_mu;
        }
        prev_delta = (delta_rh, delta_mu);

        let change = rel_change(lambda_rh, next_rh).max(rel_change(mu_h, next_mu));
        lambda_rh = next_rh;
        mu_h = next_mu;
        equilibrium = coupling(new_call_rate, lambda_rh, mu_h, channels)?;
        p_block = equilibrium.blocking();
        if change < opts.rel_tol && iterations > 1 {
            converged = true;
            break;
        }
    }

    let lambda_rc = new_call_rate * (1.0 - p_block);
    let lambda_rhc = lambda_rh * (1.0 - p_block);
    Ok(HoldingTimeSolution {
        new_call_rate,
        lambda_rh,
        mu_h,
        gamma_c: if lambda_rc > 0.0 { lambda_rhc / lambda_rc } else { 0.0 },
        lambda_rc,
        lambda_rhc,
        p_block,
        p_handoff_fail: p_block,
        p_n,
        p_h,
        iterations,
        converged,
        equilibrium,
    })
}

/// Fixed point with the geometric dwell models and the standard coupling.
///
/// `v_max = 0` selects the immobile dwell, for which no handoff ever occurs.
pub fn analyze(params: &ScenarioParams, mode: RateMode) -> Result<HoldingTimeSolution> {
    let (dn, dh) = if params.v_max == 0.0 {
        (DwellDistribution::Immobile, DwellDistribution::Immobile)
    } else {
        (
            DwellDistribution::new_call(params.cell_radius, params.v_max)?,
            DwellDistribution::handoff(params.cell_radius, params.v_max)?,
        )
    };
    solve_fixed_point(
        params,
        &dn,
        &dh,
        &standard_coupling,
        FixedPointOptions {
            mode,
            ..Default::default()
        },
    )
}
