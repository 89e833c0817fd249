//! Brute-force Monte Carlo references for the analytic results.
//!
//! Standard errors come from batch means over consecutive, equal-length
//! batches of the run.

use rand::Rng;
use rand_distr::Exp1;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub const BATCHES: usize = 100;

/// Time-weighted occupancy of a birth-death chain.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEstimate {
    pub probs: Vec<f64>,
    pub stderr: Vec<f64>,
    pub events: u64,
    pub seed: u64,
}

/// Exact-jump simulation of the channel chain: births at `up_rate` below
/// `channels`, deaths at `j * mu_h`.
pub fn simulate_birth_death(
    up_rate: f64,
    mu_h: f64,
    channels: usize,
    events: u64,
    seed: u64,
) -> Result<OccupancyEstimate> {
    if events < 10_000 {
        return Err(Error::OutOfRange {
            name: "events",
            detail: format!("need at least 1e4 events, got {events}"),
        });
    }
    if !(up_rate >= 0.0 && mu_h > 0.0 && channels >= 1) {
        return Err(Error::OutOfRange {
            name: "rates",
            detail: format!("up_rate {up_rate}, mu_H {mu_h}, channels {channels}"),
        });
    }
    let states = channels + 1;
    if up_rate == 0.0 {
        let mut probs = vec![0.0; states];
        probs[0] = 1.0;
        return Ok(OccupancyEstimate {
            probs,
            stderr: vec![0.0; states],
            events,
            seed,
        });
    }

    let mut rng = seeded(seed);
    let per_batch = events / BATCHES as u64;
    let mut batch_time = vec![0.0; states];
    let mut batch_fracs: Vec<Vec<f64>> = Vec::with_capacity(BATCHES);
    let mut total_time = vec![0.0; states];
    let mut j = 0usize;
    for e in 0..events {
        let birth = if j < channels { up_rate } else { 0.0 };
        let death = j as f64 * mu_h;
        let rate = birth + death;
        let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
        batch_time[j] += hold;
        total_time[j] += hold;
        if rng.random::<f64>() * rate < birth {
            j += 1;
        } else {
            j -= 1;
        }
        if per_batch > 0 && (e + 1) % per_batch == 0 && batch_fracs.len() < BATCHES {
            let t: f64 = batch_time.iter().sum();
            batch_fracs.push(batch_time.iter().map(|v| v / t).collect());
            batch_time.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let t: f64 = total_time.iter().sum();
    let probs: Vec<f64> = total_time.iter().map(|v| v / t).collect();
    let stderr = (0..states)
        .map(|k| batch_stderr(batch_fracs.iter().map(|b| b[k])))
        .collect();
    Ok(OccupancyEstimate {
        probs,
        stderr,
        events,
        seed,
    })
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn batch_stderr(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.len() < 2 {
        return f64::NAN;
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Estimates of `Pr[b > x]` at fixed query levels.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub levels: Vec<f64>,
    pub estimates: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Counted (post burn-in) time steps.
    pub samples: u64,
    /// Batches behind each standard error.
    pub batches: usize,
    pub seed: u64,
}

impl OracleEstimate {
    /// Half-width of the two-sided confidence band at normal quantile `z`.
    pub fn half_width(&self, k: usize, z: f64) -> f64 {
        z * self.stderr[k]
    }

    /// Two-sided confidence interval at level `1 - alpha` for level `k`.
    ///
    /// Normal batch-means band when the batches vary. When every batch saw
    /// no exceedance (or only exceedances) the band degenerates, so the
    /// exact bound for `B` independent `[0, 1]` batch fractions is used:
    /// `Pr[all zero] <= (1 - mean)^B`, giving the upper limit `1 - alpha^(1/B)`.
    pub fn interval(&self, k: usize, alpha: f64) -> (f64, f64) {
        let est = self.estimates[k];
        let se = self.stderr[k];
        if se > 0.0 {
            let h = normal_quantile(1.0 - alpha / 2.0) * se;
            return ((est - h).max(0.0), (est + h).min(1.0));
        }
        let edge = 1.0 - alpha.powf(1.0 / self.batches.max(1) as f64);
        if est <= 0.0 {
            (0.0, edge)
        } else if est >= 1.0 {
            (1.0 - edge, 1.0)
        } else {
            (est, est)
        }
    }

    pub fn covers(&self, k: usize, value: f64, alpha: f64) -> bool {
        let (lo, hi) = self.interval(k, alpha);
        value >= lo && value <= hi
    }

    /// Inverse-variance weighted combination of independent replications at
    /// the same levels. Entries with zero standard error fall back to sample-count weights.
    pub fn merge(parts: &[OracleEstimate]) -> Option<OracleEstimate> {
        let first = parts.first()?;
        let levels = first.levels.clone();
        let mut estimates = Vec::with_capacity(levels.len());
        let mut stderr = Vec::with_capacity(levels.len());
        for k in 0..levels.len() {
            let weights: Vec<f64> = parts
                .iter()
                .map(|p| {
                    let s = p.stderr[k];
                    if s > 0.0 {
                        1.0 / (s * s)
                    } else {
                        p.samples as f64
                    }
                })
                .collect();
            let wsum: f64 = weights.iter().sum();
            estimates.push(parts.iter().zip(&weights).map(|(p, w)| w * p.estimates[k]).sum::<f64>() / wsum);
            let all_positive = parts.iter().all(|p| p.stderr[k] > 0.0);
            stderr.push(if all_positive { wsum.sqrt().recip() } else { 0.0 });
        }
        Some(OracleEstimate {
            levels,
            estimates,
            stderr,
            samples: parts.iter().map(|p| p.samples).sum(),
            batches: parts.iter().map(|p| p.batches).sum(),
            seed: first.seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FluidRun {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub query_levels: Vec<f64>,
}

impl FluidRun {
    fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// Running tallies of `b > x` per batch.
struct Tally {
    levels: Vec<f64>,
    per_batch: u64,
    current: Vec<u64>,
    in_batch: u64,
    batches: Vec<Vec<f64>>,
    total: Vec<u64>,
    counted: u64,
}

impl Tally {
    fn new(levels: &[f64], counted_steps: u64) -> Self {
        Self {
            levels: levels.to_vec(),
            per_batch: (counted_steps / BATCHES as u64).max(1),
            current: vec![0; levels.len()],
            in_batch: 0,
            batches: Vec::with_capacity(BATCHES),
            total: vec![0; levels.len()],
            counted: 0,
        }
    }

    #[inline]
    fn record(&mut self, b: f64) {
        for (k, x) in self.levels.iter().enumerate() {
            if b > *x {
                self.current[k] += 1;
            }
        }
        self.in_batch += 1;
        self.counted += 1;
        if self.in_batch == self.per_batch {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.in_batch == 0 {
            return;
        }
        let n = self.in_batch as f64;
        self.batches.push(self.current.iter().map(|&c| c as f64 / n).collect());
        for (t, c) in self.total.iter_mut().zip(self.current.iter_mut()) {
            *t += *c;
            *c = 0;
        }
        self.in_batch = 0;
    }

    fn finish(mut self, seed: u64) -> OracleEstimate {
        // A short trailing batch would bias the batch variance; fold it into the totals only.
        for (t, c) in self.total.iter_mut().zip(&self.current) {
            *t += *c;
        }
        let n = self.counted.max(1) as f64;
        let estimates: Vec<f64> = self.total.iter().map(|&c| c as f64 / n).collect();
        let stderr = (0..self.levels.len())
            .map(|k| batch_stderr(self.batches.iter().map(|b| b[k])))
            .collect();
        OracleEstimate {
            levels: self.levels,
            estimates,
            stderr,
            samples: self.counted,
            batches: self.batches.len(),
            seed,
        }
    }
}

fn check_run(run: &FluidRun, max_rate: f64) -> Result<()> {
    if !(run.dt > 0.0 && run.horizon > run.dt) {
        return Err(Error::OutOfRange {
            name: "dt",
            detail: format!("need 0 < dt < horizon, got dt {} horizon {}", run.dt, run.horizon),
        });
    }
    if max_rate * run.dt >= 0.1 {
        return Err(Error::OutOfRange {
            name: "dt",
            detail: format!(
                "per-step transition probability {} must stay below 0.1",
                max_rate * run.dt
            ),
        });
    }
    Ok(())
}

fn burn_in(steps: u64) -> u64 {
    steps / 100
}

/// Fixed-step simulation of `n` on-off sources feeding a buffer drained at
/// rate `c`. The number of sources on moves up with probability
/// `(n - i) lambda dt` and down with probability `i dt` per step.
pub fn simulate_fluid_fixed(n: usize, lambda_on: f64, c: f64, run: &FluidRun) -> Result<OracleEstimate> {
    let max_rate = (0..=n)
        .map(|i| (n - i) as f64 * lambda_on + i as f64)
        .fold(0.0, f64::max);
    check_run(run, max_rate)?;
    let steps = run.steps();
    let warm = burn_in(steps);
    let mut tally = Tally::new(&run.query_levels, steps - warm);
    let mut rng = seeded(run.seed);
    let dt = run.dt;
    let up_p: Vec<f64> = (0..=n).map(|i| (n - i) as f64 * lambda_on * dt).collect();
    let down_p: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let drift: Vec<f64> = (0..=n).map(|i| (i as f64 - c) * dt).collect();

    let mut on = 0usize;
    let mut b = 0.0f64;
    for step in 0..steps {
        b = (b + drift[on]).max(0.0);
        if step >= warm {
            tally.record(b);
        }
        let u: f64 = rng.random();
        if u < up_p[on] {
            on += 1;
        } else if u < up_p[on] + down_p[on] {
            on -= 1;
        }
    }
    Ok(tally.finish(run.seed))
}

/// Rates of the birth-death chain that sets how many sources are present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationRates {
    pub up_rate: f64,
    pub mu_h: f64,
    pub channels: usize,
}

/// Like [`simulate_fluid_fixed`], but the number of attached sources `j`
/// follows the channel chain. Sources join in the off state and a departure
/// removes a uniformly chosen source, on or off.
pub fn simulate_fluid_mobile(pop: PopulationRates, lambda_on: f64, c: f64, run: &FluidRun) -> Result<OracleEstimate> {
    let big_c = pop.channels;
    let max_rate = pop.up_rate + big_c as f64 * (pop.mu_h + lambda_on.max(1.0));
    check_run(run, max_rate)?;
    let steps = run.steps();
    let warm = burn_in(steps);
    let mut tally = Tally::new(&run.query_levels, steps - warm);
    let mut rng = seeded(run.seed);
    let dt = run.dt;

    let (mut present, mut on) = (0usize, 0usize);
    let mut b = 0.0f64;
    for step in 0..steps {
        b = (b + (on as f64 - c) * dt).max(0.0);
        if step >= warm {
            tally.record(b);
        }
        debug_assert!(on <= present && present <= big_c);
        let off = present - on;
        let arrive = if present < big_c { pop.up_rate * dt } else { 0.0 };
        let leave_on = on as f64 * pop.mu_h * dt;
        let leave_off = off as f64 * pop.mu_h * dt;
        let turn_on = off as f64 * lambda_on * dt;
        let turn_off = on as f64 * dt;

        let mut u: f64 = rng.random();
        if u < arrive {
            present += 1;
            continue;
        }
        u -= arrive;
        if u < leave_on {
            present -= 1;
            on -= 1;
            continue;
        }
        u -= leave_on;
        if u < leave_off {
            present -= 1;
            continue;
        }
        u -= leave_off;
        if u < turn_on {
            on += 1;
            continue;
        }
        u -= turn_on;
        if u < turn_off {
            on -= 1;
        }
    }
    Ok(tally.finish(run.seed))
}
