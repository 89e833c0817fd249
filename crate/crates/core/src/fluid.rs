//! Equilibrium buffer content fed by on-off fluid sources.
//!
//! `N` independent sources alternate between off periods of mean `1/lambda`
//! and on periods of mean one; an on source emits at unit rate and the buffer
//! drains at rate `c`. With `F_i(x)` the stationary probability that `i`
//! sources are on and the content is at most `x`, the balance equations read
//!
//! ```text
//! D dF/dx = M F,   D = diag(i - c),
//! M[i][i-1] = (N - i + 1) lambda,  M[i][i+1] = i + 1,  M[i][i] = -((N - i) lambda + i)
//! ```
//!
//! Solutions are spanned by `e^{z x} phi` with `z D phi = M phi`. Bounded
//! solutions keep only `z <= 0`; the coefficients of the negative modes are
//! fixed by `F_i(0) = 0` in every overload state `i > c`.
//!
//! Two mobile variants scale this by the channel occupancy `P_j` at the base
//! station: a literal one weighting state `i` by `P_{j=i}`, and a
//! quasi-stationary mixture `sum_j P_j F^{(N=j)}(x)`.

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::ChannelEquilibrium;
use crate::error::{Error, Result};

const INTEGER_GUARD: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-9;
const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluidMode {
    Fixed,
    MobileLiteral,
    MobileMixture,
}

impl FluidMode {
    pub fn name(self) -> &'static str {
        match self {
            FluidMode::Fixed => "fixed",
            FluidMode::MobileLiteral => "literal",
            FluidMode::MobileMixture => "mixture",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidModel {
    /// `N` in fixed mode, `C` (the most sources a base can carry) otherwise.
    pub n_sources: usize,
    /// Off-to-on rate; the on-to-off rate is one.
    pub lambda_on: f64,
    /// Drain rate in units of one source's peak rate.
    pub service_rate: f64,
    pub mode: FluidMode,
    pub channel_eq: Option<ChannelEquilibrium>,
}

impl FluidModel {
    pub fn fixed(n_sources: usize, lambda_on: f64, service_rate: f64) -> Self {
        Self {
            n_sources,
            lambda_on,
            service_rate,
            mode: FluidMode::Fixed,
            channel_eq: None,
        }
    }

    pub fn mobile(mode: FluidMode, channel_eq: ChannelEquilibrium, lambda_on: f64, service_rate: f64) -> Self {
        Self {
            n_sources: channel_eq.channels(),
            lambda_on,
            service_rate,
            mode,
            channel_eq: Some(channel_eq),
        }
    }

    pub fn on_probability(&self) -> f64 {
        self.lambda_on / (1.0 + self.lambda_on)
    }

    pub fn validate(&self) -> Result<()> {
        validate_parts(self.n_sources, self.lambda_on, self.service_rate)?;
        if self.mode != FluidMode::Fixed && self.channel_eq.is_none() {
            return Err(Error::OutOfRange {
                name: "channel_eq",
                detail: "mobile modes need a channel equilibrium".into(),
            });
        }
        Ok(())
    }
}

fn validate_parts(n: usize, lambda_on: f64, c: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::OutOfRange {
            name: "n_sources",
            detail: "must be >= 1".into(),
        });
    }
    if !(lambda_on.is_finite() && lambda_on > 0.0) {
        return Err(Error::OutOfRange {
            name: "lambda_on",
            detail: format!("must be finite and > 0, got {lambda_on}"),
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::OutOfRange {
            name: "service_rate",
            detail: format!("must be finite and > 0, got {c}"),
        });
    }
    let nearest = c.round();
    if nearest <= n as f64 && (c - nearest).abs() < INTEGER_GUARD {
        return Err(Error::IntegerServiceRate(c));
    }
    let mean_input = n as f64 * lambda_on / (1.0 + lambda_on);
    if mean_input >= c {
        return Err(Error::UnstableFluid {
            mean_input,
            service_rate: c,
        });
    }
    Ok(())
}

/// Drift diagonal and source-count generator of the balance equations.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidMatrices {
    pub drift: DVector<f64>,
    pub generator: DMatrix<f64>,
}

impl FluidMatrices {
    pub fn drift_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.drift)
    }
}

pub fn build_matrices(n: usize, lambda_on: f64, service_rate: f64) -> Result<FluidMatrices> {
    let nearest = service_rate.round();
    if nearest >= 0.0 && nearest <= n as f64 && (service_rate - nearest).abs() < INTEGER_GUARD {
        return Err(Error::IntegerServiceRate(service_rate));
    }
    let size = n + 1;
    let drift = DVector::from_fn(size, |i, _| i as f64 - service_rate);
    let mut generator = DMatrix::zeros(size, size);
    for i in 0..size {
        let up = (n - i) as f64 * lambda_on;
        let down = i as f64;
        generator[(i, i)] = -(up + down);
        if i < n {
            generator[(i + 1, i)] = up;
        }
        if i > 0 {
            generator[(i - 1, i)] = down;
        }
    }
    Ok(FluidMatrices { drift, generator })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub z: f64,
    pub phi: DVector<f64>,
}

impl EigenPair {
    pub fn residual(&self, m: &FluidMatrices) -> f64 {
        let lhs = &m.generator * &self.phi;
        let rhs = self.phi.component_mul(&m.drift) * self.z;
        (lhs - rhs).amax()
    }
}

fn null_vector(a: DMatrix<f64>) -> DVector<f64> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    v_t.row(k).transpose()
}

/// All eigenpairs of `z D phi = M phi`, ascending in `z`.
///
/// The zero eigenvalue is pinned to exactly `0.0` with its eigenvector scaled
/// to a probability vector; other eigenvectors are scaled to unit max-norm
/// with a positive largest component.
pub fn solve_eigen(m: &FluidMatrices) -> Result<Vec<EigenPair>> {
    if m.drift.iter().any(|d| d.abs() < INTEGER_GUARD) {
        return Err(Error::Eigen("drift matrix is singular".into()));
    }
    let inv_drift = m.drift.map(|d| 1.0 / d);
    let mut a = m.generator.clone();
    for (mut row, s) in a.row_iter_mut().zip(inv_drift.iter()) {
        row *= *s;
    }
    let mut zs: Vec<f64> = a
        .eigenvalues()
        .ok_or_else(|| Error::Eigen("complex eigenvalues in a birth-death pencil".into()))?
        .iter()
        .copied()
        .collect();
    zs.sort_by(f64::total_cmp);

    let scale = a.amax().max(1.0);
    let zero_idx = zs
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Eigen("empty pencil".into()))?;
    if zs[zero_idx].abs() > 1e-8 * scale {
        return Err(Error::Eigen(format!("no zero eigenvalue (closest {})", zs[zero_idx])));
    }
    zs[zero_idx] = 0.0;

    let drift_mat = m.drift_matrix();
    let mut pairs = Vec::with_capacity(zs.len());
    for &z in &zs {
        let mut phi = null_vector(&m.generator - &drift_mat * z);
        if z == 0.0 {
            let total = phi.sum();
            phi /= total;
        } else {
            let k = phi.iamax();
            let top = phi[k];
            phi /= top;
        }
        let pair = EigenPair { z, phi };
        let res = pair.residual(m);
        if !(res < RESIDUAL_TOL) {
            return Err(Error::Eigen(format!("residual {res:.3e} at z = {z}")));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let mut out = Vec::with_capacity(n + 1);
    let mut term = q.powi(n as i32);
    out.push(term);
    for i in 0..n {
        term *= (n - i) as f64 / (i + 1) as f64 * p / q;
        out.push(term);
    }
    out
}

/// Probability that `i` of `N` sources are on, `i = 0..=N`.
pub fn stationary_fixed(n: usize, lambda_on: f64) -> Result<Vec<f64>> {
    if !(lambda_on.is_finite() && lambda_on > 0.0) {
        return Err(Error::OutOfRange {
            name: "lambda_on",
            detail: format!("must be finite and > 0, got {lambda_on}"),
        });
    }
    Ok(binomial_pmf(n, lambda_on / (1.0 + lambda_on)))
}

/// `F_i(inf) = sum_{j >= i} P_j Binom(i; j, lambda / (1 + lambda))`: the
/// number of sources on when `j` mobiles are attached with probability `P_j`.
pub fn stationary_mobile(eq: &ChannelEquilibrium, lambda_on: f64) -> Result<Vec<f64>> {
    let c = eq.channels();
    let mut out = vec![0.0; c + 1];
    for j in 0..=c {
        let pj = eq.prob(j);
        if pj == 0.0 {
            continue;
        }
        for (i, b) in stationary_fixed(j, lambda_on)?.into_iter().enumerate() {
            out[i] += pj * b;
        }
    }
    Ok(out)
}

/// The printed mobile stationary formula taken verbatim:
/// `sum_{j=1}^{C} P_j binom(C, j) p^j (1 - p)^{C - j}`, which has no
/// dependence on `i`, so every entry carries the same value.
pub fn stationary_mobile_printed(eq: &ChannelEquilibrium, lambda_on: f64) -> Result<Vec<f64>> {
    let c = eq.channels();
    let binom = stationary_fixed(c, lambda_on)?;
    let value: f64 = (1..=c).map(|j| eq.prob(j) * binom[j]).sum();
    Ok(vec![value; c + 1])
}

/// Spectral solution for one source population.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectral {
    pub n_sources: usize,
    pub service_rate: f64,
    pub eigenpairs: Vec<EigenPair>,
    pub stationary: Vec<f64>,
    /// `(z_k, a_k, phi_k)` for the negative eigenvalues, with any state
    /// weighting already applied to `phi_k`.
    pub modes: Vec<(f64, f64, DVector<f64>)>,
}

impl Spectral {
    fn states(&self) -> usize {
        self.n_sources + 1
    }

    fn f_at(&self, x: f64, out: &mut [f64], weight: f64) {
        for (i, s) in self.stationary.iter().enumerate() {
            let mut v = *s;
            for (z, a, phi) in &self.modes {
                v += a * (z * x).exp() * phi[i];
            }
            out[i] += weight * v;
        }
    }

    /// `1 - sum_i F_i(x)` summed mode by mode, so it stays accurate deep in the tail.
    fn survivor(&self, x: f64) -> f64 {
        let g: f64 = self
            .modes
            .iter()
            .map(|(z, a, phi)| -a * (z * x).exp() * phi.sum())
            .sum();
        let mass: f64 = self.stationary.iter().sum();
        (g + 1.0 - mass).max(0.0)
    }

    pub fn overload_states(&self) -> std::ops::RangeInclusive<usize> {
        overload_start(self.service_rate)..=self.n_sources
    }
}

fn overload_start(c: f64) -> usize {
    c.ceil() as usize
}

/// Solves the boundary system `sum_k a_k w_i phi_k,i = -Finf_i` over the
/// overload states. Rows with zero weight fall back to the unweighted
/// condition so the system stays square and nonsingular.
fn spectral_solution(n: usize, lambda_on: f64, c: f64, weights: Option<&[f64]>) -> Result<Spectral> {
    let matrices = build_matrices(n, lambda_on, c)?;
    let eigenpairs = solve_eigen(&matrices)?;
    let mut stationary = binomial_pmf(n, lambda_on / (1.0 + lambda_on));
    if let Some(w) = weights {
        for (s, wi) in stationary.iter_mut().zip(w) {
            *s *= wi;
        }
        let total: f64 = stationary.iter().sum();
        if total > 0.0 {
            stationary.iter_mut().for_each(|s| *s /= total);
        }
    }

    let negative: Vec<&EigenPair> = eigenpairs.iter().filter(|p| p.z < 0.0).collect();
    let start = overload_start(c);
    let rows: Vec<usize> = (start..=n).collect();
    if negative.len() != rows.len() {
        return Err(Error::Eigen(format!(
            "{} negative eigenvalues for {} overload states",
            negative.len(),
            rows.len()
        )));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let phis: Vec<DVector<f64>> = negative
        .iter()
        .map(|p| DVector::from_fn(n + 1, |i, _| p.phi[i] * weight(i)))
        .collect();

    let k = rows.len();
    let mut modes = Vec::with_capacity(k);
    if k > 0 {
        let mut sys = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for (r, &i) in rows.iter().enumerate() {
            let w = weight(i);
            for (col, p) in negative.iter().enumerate() {
                sys[(r, col)] = if w > 0.0 { p.phi[i] * w } else { p.phi[i] };
            }
            rhs[r] = if w > 0.0 { -stationary[i] } else { 0.0 };
        }
        let coeffs = sys.clone().lu().solve(&rhs).ok_or(Error::SingularBoundary)?;
        let resid = (&sys * &coeffs - &rhs).amax();
        if !(resid < BOUNDARY_TOL) {
            return Err(Error::SingularBoundary);
        }
        for ((p, a), phi) in negative.iter().zip(coeffs.iter()).zip(phis) {
            modes.push((p.z, *a, phi));
        }
    }
    Ok(Spectral {
        n_sources: n,
        service_rate: c,
        eigenpairs,
        stationary,
        modes,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Solved {
    Single(Spectral),
    /// `(P_j, solution with j sources)`; `None` means no source can overload.
    Mixture(Vec<(f64, usize, Option<Spectral>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub mode: FluidMode,
    pub lambda_on: f64,
    pub service_rate: f64,
    states: usize,
    solved: Solved,
}

pub fn solve_buffer(model: &FluidModel) -> Result<FluidSolution> {
    model.validate()?;
    let n = model.n_sources;
    let (lambda, c) = (model.lambda_on, model.service_rate);
    let solved = match model.mode {
        FluidMode::Fixed => Solved::Single(spectral_solution(n, lambda, c, None)?),
        FluidMode::MobileLiteral => {
            let eq = model.channel_eq.as_ref().expect("validated");
            Solved::Single(spectral_solution(n, lambda, c, Some(eq.probs()))?)
        }
        FluidMode::MobileMixture => {
            let eq = model.channel_eq.as_ref().expect("validated");
            let mut parts = Vec::new();
            for j in 0..=n {
                let pj = eq.prob(j);
                if pj == 0.0 {
                    continue;
                }
                let sub = if (j as f64) > c {
                    Some(spectral_solution(j, lambda, c, None)?)
                } else {
                    None
                };
                parts.push((pj, j, sub));
            }
            Solved::Mixture(parts)
        }
    };
    Ok(FluidSolution {
        mode: model.mode,
        lambda_on: lambda,
        service_rate: c,
        states: n + 1,
        solved,
    })
}

impl FluidSolution {
    pub fn states(&self) -> usize {
        self.states
    }

    /// Spectral data, for the single-population modes.
    pub fn spectral(&self) -> Option<&Spectral> {
        match &self.solved {
            Solved::Single(s) => Some(s),
            Solved::Mixture(_) => None,
        }
    }

    pub fn stationary(&self) -> Vec<f64> {
        match &self.solved {
            Solved::Single(s) => s.stationary.clone(),
            Solved::Mixture(parts) => {
                let mut out = vec![0.0; self.states];
                for (pj, j, _) in parts {
                    for (i, b) in binomial_pmf(*j, self.lambda_on / (1.0 + self.lambda_on))
                        .iter()
                        .enumerate()
                    {
                        out[i] += pj * b;
                    }
                }
                out
            }
        }
    }

    /// `F_i(x)` for every state `i`; `x` is clamped at zero.
    pub fn f_at(&self, x: f64) -> Vec<f64> {
        let x = x.max(0.0);
        let mut out = vec![0.0; self.states];
        match &self.solved {
            Solved::Single(s) => s.f_at(x, &mut out, 1.0),
            Solved::Mixture(parts) => {
                let p = self.lambda_on / (1.0 + self.lambda_on);
                for (pj, j, sub) in parts {
                    match sub {
                        Some(s) => s.f_at(x, &mut out[..s.states()], *pj),
                        None => {
                            for (i, b) in binomial_pmf(*j, p).iter().enumerate() {
                                out[i] += pj * b;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `G(x)`: probability that the buffer content exceeds `x`.
    pub fn survivor(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::OutOfRange {
                name: "x",
                detail: format!("buffer level must be >= 0, got {x}"),
            });
        }
        Ok(match &self.solved {
            Solved::Single(s) => s.survivor(x),
            Solved::Mixture(parts) => parts
                .iter()
                .map(|(pj, _, sub)| sub.as_ref().map_or(0.0, |s| pj * s.survivor(x)))
                .sum(),
        })
    }

    /// Slowest decay rate of the survivor tail, `min |z_k|` over retained modes.
    pub fn decay_rate(&self) -> Option<f64> {
        let modes: Box<dyn Iterator<Item = &(f64, f64, DVector<f64>)>> = match &self.solved {
            Solved::Single(s) => Box::new(s.modes.iter()),
            Solved::Mixture(parts) => Box::new(parts.iter().filter_map(|p| p.2.as_ref()).flat_map(|s| s.modes.iter())),
        };
        modes.map(|m| m.0.abs()).min_by(f64::total_cmp)
    }
}

/// Joint probability that at least `i` mobiles are attached and `i` sources
/// are on with content at most `x`, taking the two as independent.
pub fn mobile_joint(eq: &ChannelEquilibrium, sol: &FluidSolution, i: usize, x: f64) -> Result<f64> {
    if i >= sol.states() {
        return Err(Error::OutOfRange {
            name: "i",
            detail: format!("state {i} outside 0..{}", sol.states()),
        });
    }
    if !(x >= 0.0) {
        return Err(Error::OutOfRange {
            name: "x",
            detail: format!("buffer level must be >= 0, got {x}"),
        });
    }
    Ok(eq.tail_at_least(i)? * sol.f_at(x)[i])
}
