//! Birth-death equilibrium of busy channels at one base station.
//!
//! Births arrive at `up_rate` while a channel is free; each busy channel is
//! released at rate `mu_h`. The stationary law is the truncated Poisson
//! `P_j ∝ (up_rate / mu_h)^j / j!`, evaluated through the ratio
//! `P_{j+1} / P_j = up_rate / ((j + 1) mu_h)` so large `C` cannot overflow.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEquilibrium {
    probs: Vec<f64>,
    pub up_rate: f64,
    pub mu_h: f64,
}

impl ChannelEquilibrium {
    pub fn new(up_rate: f64, mu_h: f64, channels: usize) -> Result<Self> {
        if !(up_rate.is_finite() && up_rate >= 0.0) {
            return Err(Error::OutOfRange {
                name: "up_rate",
                detail: format!("must be finite and >= 0, got {up_rate}"),
            });
        }
        if !(mu_h.is_finite() && mu_h > 0.0) {
            return Err(Error::OutOfRange {
                name: "mu_H",
                detail: format!("must be finite and > 0, got {mu_h}"),
            });
        }
        if channels < 1 {
            return Err(Error::OutOfRange {
                name: "channels",
                detail: "must be >= 1".into(),
            });
        }
        let load = up_rate / mu_h;
        let mut probs = vec![0.0; channels + 1];
        if load == 0.0 {
            probs[0] = 1.0;
            return Ok(Self { probs, up_rate, mu_h });
        }
        // Ratio recurrence in log space, shifted by the peak before exponentiating.
        let mut logs = Vec::with_capacity(channels + 1);
        let mut acc = 0.0;
        logs.push(acc);
        for j in 0..channels {
            acc += (load / (j + 1) as f64).ln();
            logs.push(acc);
        }
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (p, l) in probs.iter_mut().zip(&logs) {
            *p = (l - peak).exp();
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { probs, up_rate, mu_h })
    }

    /// Builds an equilibrium directly from an occupancy vector, e.g. an
    /// empirical one. Rates are left at zero/one since they are unknown.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::OutOfRange {
                name: "probs",
                detail: "need at least two finite nonnegative entries".into(),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfRange {
                name: "probs",
                detail: format!("must sum to 1, got {total}"),
            });
        }
        Ok(Self {
            probs,
            up_rate: f64::NAN,
            mu_h: f64::NAN,
        })
    }

    pub fn channels(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P_j`, zero outside `0..=C`.
    pub fn prob(&self, j: usize) -> f64 {
        self.probs.get(j).copied().unwrap_or(0.0)
    }

    /// `P_{j >= i} = sum_{j=i}^{C} P_j`.
    pub fn tail_at_least(&self, i: usize) -> Result<f64> {
        if i > self.channels() {
            return Err(Error::OutOfRange {
                name: "i",
                detail: format!("must be <= C = {}, got {i}", self.channels()),
            });
        }
        if i == 0 {
            return Ok(1.0);
        }
        Ok(self.probs[i..].iter().sum())
    }

    /// Probability that all channels are busy; used for both new-call
    /// blocking and handoff failure.
    pub fn blocking(&self) -> f64 {
        self.probs[self.channels()]
    }

    pub fn mean_busy(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, p)| j as f64 * p).sum()
    }
}

/// Half the L1 distance between two occupancy vectors; missing entries count as zero.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    0.5 * (0..n)
        .map(|j| (a.get(j).copied().unwrap_or(0.0) - b.get(j).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
