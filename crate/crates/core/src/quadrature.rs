//! Globally adaptive 15-point Gauss-Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-12)
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, bisecting the worst segment until the
/// summed error estimate meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    integrate_pieces(&f, &[a, b], tol)
}

/// Like [`integrate`] but starts from the given breakpoints, which should
/// include the kinks of the integrand. `points` must be sorted.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: Tolerance) -> Result<Integral> {
    let mut heap: BinaryHeap<Segment> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(f, w[0], w[1]))
        .collect();
    loop {
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature { error: f64::NAN });
        }
        if error <= tol.target(value) {
            return Ok(Integral { value, error });
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { error });
        }
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Segment has shrunk to adjacent floats; accept what we have.
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod(f, worst.a, mid));
        heap.push(kronrod(f, mid, worst.b));
    }
}

/// Integrates `f` over `[a, inf)` using `t = a + scale * u / (1 - u)`.
///
/// `breaks` are kinks of `f` in `t`; they are mapped to `u` so the adaptive
/// stage starts with them as segment boundaries. `scale` should be near the
/// length over which `f` decays.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    let mapped = |u: f64| {
        let one_minus = 1.0 - u;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let t = a + scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        let v = f(t) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut points = vec![0.0];
    let mut inner: Vec<f64> = breaks
        .iter()
        .filter(|&&t| t > a && t.is_finite())
        .map(|&t| (t - a) / (t - a + scale))
        .collect();
    inner.sort_by(f64::total_cmp);
    points.extend(inner);
    points.push(1.0);
    integrate_pieces(&mapped, &points, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_to_infinity(|t| (-2.0 * t).exp(), 0.0, 0.5, &[], Tolerance::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn long_scale_tail_with_kink() {
        // integral of e^{-t/40} * min(t, 3)
        let f = |t: f64| (-t / 40.0).exp() * t.min(3.0);
        let r = integrate_to_infinity(f, 0.0, 40.0, &[3.0], Tolerance::default()).unwrap();
        let mu: f64 = 1.0 / 40.0;
        let exact = (1.0 - (-3.0 * mu).exp()) / (mu * mu);
        assert!((r.value - exact).abs() < 1e-9 * exact, "{} vs {}", r.value, exact);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let r = integrate(|x| x.sqrt(), 0.0, 1.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }
}
