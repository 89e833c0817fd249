//! Cross-checks between the spectral fluid solution and the fixed-step
//! Monte Carlo buffer simulation.

use mobfluid::equilibrium::ChannelEquilibrium;
use mobfluid::fluid::{solve_buffer, FluidMode, FluidModel};
use mobfluid::oracle::{simulate_fluid_fixed, simulate_fluid_mobile, FluidRun, PopulationRates};

const LEVELS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn run(horizon: f64, seed: u64) -> FluidRun {
    FluidRun {
        horizon,
        dt: 1e-3,
        seed,
        query_levels: LEVELS.to_vec(),
    }
}

#[test]
fn fixed_solution_within_oracle_band() {
    for (n, lambda, c, seed) in [(2, 1.0, 1.5 - 1e-3, 1u64), (3, 0.5, 1.5, 2), (4, 0.4, 2.5, 3)] {
        let sol = solve_buffer(&FluidModel::fixed(n, lambda, c)).unwrap();
        let est = simulate_fluid_fixed(n, lambda, c, &run(20_000.0, seed)).unwrap();
        for (k, &x) in LEVELS.iter().enumerate() {
            let g = sol.survivor(x).unwrap();
            assert!(
                est.covers(k, g, 0.01),
                "N={n} lambda={lambda} c={c} x={x}: analytic {g:.6} oracle {:.6} band {:?}",
                est.estimates[k],
                est.interval(k, 0.01)
            );
        }
    }
}

/// Largest absolute gap between the mixture solution and the mobile oracle.
fn mixture_gap(mu_h: f64, horizon: f64, seed: u64) -> f64 {
    // Offered load 2 Erlangs on three channels, at varying speed.
    let up = 2.0 * mu_h;
    let eq = ChannelEquilibrium::new(up, mu_h, 3).unwrap();
    let mix = solve_buffer(&FluidModel::mobile(FluidMode::MobileMixture, eq, 0.5, 1.5)).unwrap();
    let pop = PopulationRates {
        up_rate: up,
        mu_h,
        channels: 3,
    };
    let est = simulate_fluid_mobile(pop, 0.5, 1.5, &run(horizon, seed)).unwrap();
    LEVELS
        .iter()
        .enumerate()
        .map(|(k, &x)| (mix.survivor(x).unwrap() - est.estimates[k]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn mixture_gap_closes_as_population_slows() {
    // The quasi-stationary mixture is exact only when sources live much
    // longer than an on-off cycle: a source that joins silent and leaves
    // early spends less than lambda / (1 + lambda) of its life on.
    let fast = mixture_gap(1.0, 20_000.0, 17);
    let medium = mixture_gap(0.1, 50_000.0, 18);
    let slow = mixture_gap(0.01, 200_000.0, 19);
    assert!(fast > medium && medium > slow, "gaps {fast} {medium} {slow}");
    assert!(slow < 0.01, "slow-population gap {slow}");
}
