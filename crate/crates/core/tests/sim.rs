//! Behaviour of the cellular simulator against closed forms and its own invariants.

use mobfluid::equilibrium::{total_variation, ChannelEquilibrium};
use mobfluid::sim::{
    empirical_equilibrium, empirical_holding, nearest_base, quality_ok, quality_threshold, run, Grid, SimConfig,
    SimStats,
};

fn erlang_b(a: f64, c: usize) -> f64 {
    (1..=c).fold(1.0, |b, k| a * b / (k as f64 + a * b))
}

/// One base, three channels, offered load 2 Erlangs, essentially immobile.
fn erlang_config(seed: u64) -> SimConfig {
    SimConfig::new(1, 2.0, 3, 20.0, 40.0, 1.0, 1e-9, 400.0 + 1.2e6, seed)
}

#[test]
fn no_arrivals_leaves_channels_idle() {
    let cfg = SimConfig::new(2, 1.0, 3, f64::INFINITY, 40.0, 1.0, 0.03, 1000.0, 1);
    let stats = run(&cfg).unwrap();
    assert_eq!(empirical_equilibrium(&stats).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    assert_eq!(stats.counters.arrivals, 0);
    assert!(empirical_holding(&stats, 10).is_err());
}

#[test]
fn nearest_base_examples() {
    let grid = Grid { side: 2, spacing: 2.0 };
    assert_eq!(nearest_base([2.0, 2.0], &grid), 3);
    assert_eq!(nearest_base([0.0, 0.0], &grid), 0);
    // midpoint between bases 0 and 1
    assert_eq!(nearest_base([1.0, 0.0], &grid), 0);
    // midpoint between bases 1 and 3
    assert_eq!(nearest_base([2.0, 1.0], &grid), 1);
    let k = nearest_base([0.4, 1.7], &grid);
    assert_eq!(grid.position(k), [0.0, 2.0]);
}

#[test]
fn quality_threshold_examples() {
    assert!((quality_threshold(2.0) - 1.154_700_538_379_251_5).abs() < 1e-15);
    assert!((quality_threshold(2.0) - (2.0 / 3.0) * (4.0f64 - 1.0).sqrt()).abs() < 1e-15);
    assert!(quality_ok([0.0, 0.0], [0.0, 0.0], 2.0));
    assert!(!quality_ok([1.2, 0.0], [0.0, 0.0], 2.0));
    assert!(quality_ok([quality_threshold(2.0), 0.0], [0.0, 0.0], 2.0));
}

#[test]
fn immobile_holding_is_session_length() {
    let cfg = SimConfig::new(1, 2.0, 1000, 4.0, 40.0, 1.0, 0.0, 400.0 + 45_000.0, 5);
    let stats = run(&cfg).unwrap();
    let (mean, hist) = empirical_holding(&stats, 20).unwrap();
    assert!(stats.holding_samples.len() >= 10_000, "{}", stats.holding_samples.len());
    assert!((mean - 40.0).abs() < 0.05 * 40.0, "mean {mean}");
    assert_eq!(
        hist.iter().map(|b| b.count).sum::<u64>() as usize,
        stats.holding_samples.len()
    );
    assert_eq!(stats.counters.handoff_attempts, 0);
    assert_eq!(stats.counters.new_call_blocks, 0);
}

#[test]
fn single_base_matches_erlang_b() {
    let stats = run(&erlang_config(11)).unwrap();
    let n = stats.counters.arrivals as f64;
    let b = stats.blocking_fraction().unwrap();
    let exact = erlang_b(2.0, 3);
    assert!((exact - 0.2105).abs() < 5e-5);
    let se = (exact * (1.0 - exact) / n).sqrt();
    assert!((b - exact).abs() < 3.0 * se, "blocking {b} vs {exact} ± {se}");

    let emp = empirical_equilibrium(&stats).unwrap();
    let eq = ChannelEquilibrium::new(2.0, 1.0, 3).unwrap();
    let tv = total_variation(&emp, eq.probs());
    assert!(tv < 0.05, "tv {tv}");
    assert!((emp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn arrival_rate_is_consistent() {
    let cfg = erlang_config(3);
    let stats = run(&cfg).unwrap();
    let expected = stats.observed_time / cfg.exp_pulse_mean;
    let got = stats.counters.arrivals as f64;
    assert!((got - expected).abs() < 3.0 * expected.sqrt(), "{got} vs {expected}");
}

fn mobile_config(seed: u64) -> SimConfig {
    SimConfig::new(3, 1.0, 3, 2.5, 40.0, 1.0, 0.05, 400.0 + 20_000.0, seed)
}

#[test]
fn deterministic_per_seed() {
    let a = run(&mobile_config(42)).unwrap();
    let b = run(&mobile_config(42)).unwrap();
    assert_eq!(a, b);
    let c = run(&mobile_config(43)).unwrap();
    assert_ne!(a.holding_samples, c.holding_samples);
}

#[test]
fn counters_and_channels_are_consistent() {
    let stats = run(&mobile_config(8)).unwrap();
    let k = &stats.counters;
    assert!(k.handoff_attempts > 0, "scenario should exercise handoffs");
    assert!(k.handoff_failures <= k.handoff_attempts);
    assert!(k.new_call_blocks <= k.arrivals);
    assert!(stats.peak_busy <= stats.channels);
    assert_eq!(stats.occupancy_time.len(), stats.channels + 1);
    let emp = empirical_equilibrium(&stats).unwrap();
    assert!((emp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(stats.holding_samples.iter().all(|s| *s >= 0.0));
}

#[test]
fn merge_pools_replications() {
    let parts: Vec<SimStats> = (0..3).map(|s| run(&mobile_config(100 + s)).unwrap()).collect();
    let all = SimStats::merge(&parts).unwrap();
    assert_eq!(
        all.counters.arrivals,
        parts.iter().map(|p| p.counters.arrivals).sum::<u64>()
    );
    assert!((all.observed_time - 3.0 * parts[0].observed_time).abs() < 1e-6);
    let emp = empirical_equilibrium(&all).unwrap();
    assert!((emp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(SimStats::merge(&[]).is_err());
}

#[test]
fn rejects_invalid_configs() {
    let mut cfg = mobile_config(1);
    cfg.warmup = cfg.sim_duration;
    assert!(run(&cfg).is_err());
    let cfg = SimConfig::new(0, 1.0, 3, 2.5, 40.0, 1.0, 0.05, 100.0, 1);
    assert!(run(&cfg).is_err());
    let cfg = SimConfig::new(3, 1.0, 3, 2.5, 40.0, -1.0, 0.05, 100.0, 1);
    assert!(run(&cfg).is_err());
}
