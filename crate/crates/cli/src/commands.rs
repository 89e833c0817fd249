//! The four subcommands. Each returns its exit code or an error that maps to one.

use std::fs;
use std::path::Path;
use std::time::Instant;

use mobfluid::equilibrium::total_variation;
use mobfluid::fluid::{solve_buffer, FluidMode, FluidModel, FluidSolution};
use mobfluid::holding::{analyze as solve_holding, HoldingTimeSolution};
use mobfluid::oracle::{
    simulate_birth_death, simulate_fluid_fixed, simulate_fluid_mobile, FluidRun, OracleEstimate, PopulationRates,
    BATCHES,
};
use mobfluid::params::RateMode;
use mobfluid::scenario::Scenario;
use mobfluid::sim::{empirical_equilibrium, empirical_holding, run as run_sim, Heading};

use crate::output::{num, read_diagnostics, RunManifest, Table};
use crate::CliError;

pub const DEFAULT_LAMBDA_ON: f64 = 0.5;
/// Buffer levels at which the fluid oracles estimate `G(x)`.
pub const ORACLE_LEVELS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
/// Buffer grid spacing; the oracle levels lie on the grid.
const BUFFER_STEP: f64 = 0.05;
const HOLDING_BINS: usize = 50;
const ORACLE_DT: f64 = 1e-3;
const ORACLE_ALPHA: f64 = 0.01;
const DEFAULT_EVENTS: u64 = 1_000_000;
const DEFAULT_STEPS: u64 = 10_000_000;
const TV_THRESHOLD: f64 = 0.05;
const HOLDING_THRESHOLD: f64 = 0.10;

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn default_service_rate(channels: usize) -> f64 {
    (channels / 2) as f64 + 0.5
}

fn finish(mut manifest: RunManifest, started: Instant, code: u8) -> Result<u8, CliError> {
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.note("exit_code", code);
    manifest.write()?;
    Ok(code)
}

fn holding_table(sol: &HoldingTimeSolution) -> Table {
    let mut t = Table::new([
        "lambda_Rh",
        "mu_H",
        "gamma_c",
        "P_B",
        "P_fh",
        "P_C",
        "lambda_Rc",
        "lambda_Rhc",
        "P_N",
        "P_H",
        "new_call_rate",
        "iterations",
        "converged",
    ]);
    let p_c = sol.equilibrium.blocking();
    t.push(vec![
        num(sol.lambda_rh),
        num(sol.mu_h),
        num(sol.gamma_c),
        num(sol.p_block),
        num(sol.p_handoff_fail),
        num(p_c),
        num(sol.lambda_rc),
        num(sol.lambda_rhc),
        num(sol.p_n),
        num(sol.p_h),
        num(sol.new_call_rate),
        sol.iterations.to_string(),
        sol.converged.to_string(),
    ]);
    t
}

fn pj_table(probs: &[f64], column: &str) -> Table {
    let mut t = Table::new(["j", column]);
    for (j, p) in probs.iter().enumerate() {
        t.push(vec![j.to_string(), num(*p)]);
    }
    t
}

/// `G(x)` and the per-state distributions on a grid reaching past `G < 1e-6`.
fn buffer_table(sol: &FluidSolution) -> Result<Table, CliError> {
    let reach = sol.decay_rate().map_or(0.0, |z| 1e6f64.ln() / z.abs());
    let x_max = reach.clamp(ORACLE_LEVELS[4], 200.0);
    let points = (x_max / BUFFER_STEP).ceil() as usize;
    let states = sol.states();
    let mut t = Table::new(
        ["x".to_string(), "G".to_string()]
            .into_iter()
            .chain((0..states).map(|i| format!("F_{i}"))),
    );
    for k in 0..=points {
        let x = k as f64 * BUFFER_STEP;
        let mut row = vec![num(x), num(sol.survivor(x)?)];
        row.extend(sol.f_at(x).into_iter().map(num));
        t.push(row);
    }
    Ok(t)
}

pub fn analyze(
    scenario_path: &Path,
    out: &Path,
    mode: &str,
    lambda_on: f64,
    service_rate: Option<f64>,
) -> Result<u8, CliError> {
    let started = Instant::now();
    let mode: RateMode = mode.parse().map_err(CliError::Input)?;
    let scenario = Scenario::load(scenario_path)?;
    scenario.params.validate().into_result()?;
    prepare(out)?;
    let mut manifest = RunManifest::new("analyze", Some(scenario_path), out);
    manifest.note("rate_mode", mode.name());

    let sol = match solve_holding(&scenario.params, mode) {
        Ok(sol) => sol,
        Err(e) => {
            manifest.note("holding", format!("error: {e}"));
            eprintln!("error: {e}");
            return finish(manifest, started, 2);
        }
    };
    manifest.note("holding_iterations", sol.iterations);
    manifest.note("holding_converged", sol.converged);
    manifest.emit("holding.csv", &holding_table(&sol))?;
    manifest.emit("pj.csv", &pj_table(sol.equilibrium.probs(), "probability"))?;

    let c = service_rate.unwrap_or_else(|| default_service_rate(scenario.params.channels));
    manifest.note("lambda_on", lambda_on);
    manifest.note("service_rate", c);
    let models = [
        ("buffer.csv", FluidModel::fixed(scenario.params.channels, lambda_on, c)),
        (
            "buffer_mixture.csv",
            FluidModel::mobile(FluidMode::MobileMixture, sol.equilibrium.clone(), lambda_on, c),
        ),
        (
            "buffer_literal.csv",
            FluidModel::mobile(FluidMode::MobileLiteral, sol.equilibrium.clone(), lambda_on, c),
        ),
    ];
    let mut model_error = !sol.converged;
    for (name, model) in models {
        match solve_buffer(&model)
            .map_err(CliError::from)
            .and_then(|s| buffer_table(&s))
        {
            Ok(table) => manifest.emit(name, &table)?,
            Err(e) => {
                manifest.note(&format!("{name}_error"), &e);
                eprintln!("error: {name}: {e}");
                model_error = true;
            }
        }
    }
    if !sol.converged {
        eprintln!(
            "error: handoff fixed point did not converge in {} iterations",
            sol.iterations
        );
    }
    println!(
        "lambda_Rh = {:.6}, mu_H = {:.6}, P_B = P_C = {:.6}, iterations = {}",
        sol.lambda_rh, sol.mu_h, sol.p_block, sol.iterations
    );
    finish(manifest, started, if model_error { 2 } else { 0 })
}

pub fn simulate(scenario_path: &Path, out: &Path, seed: Option<u64>, mode: &str) -> Result<u8, CliError> {
    let started = Instant::now();
    let heading: Heading = mode.parse().map_err(CliError::Input)?;
    let scenario = Scenario::load(scenario_path)?;
    let mut cfg = scenario.sim_config().with_heading(heading);
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    prepare(out)?;
    let mut manifest = RunManifest::new("simulate", Some(scenario_path), out);
    manifest.seed = Some(cfg.seed);
    manifest.note("heading", heading.name());
    manifest.note("warmup", cfg.warmup);

    let stats = run_sim(&cfg)?;
    let pj = empirical_equilibrium(&stats)?;
    manifest.emit("sim_pj.csv", &pj_table(&pj, "time_fraction"))?;

    let mut hist_table = Table::new(["bin_low", "bin_high", "count"]);
    let mut counters = Table::new(["name", "value"]);
    for (name, v) in stats.counters.named() {
        counters.push(vec![name.into(), v.to_string()]);
    }
    counters.push(vec!["holding_samples".into(), stats.holding_samples.len().to_string()]);
    match empirical_holding(&stats, HOLDING_BINS) {
        Ok((mean, bins)) => {
            for b in bins {
                hist_table.push(vec![num(b.low), num(b.high), b.count.to_string()]);
            }
            counters.push(vec!["holding_mean".into(), num(mean)]);
        }
        Err(e) => manifest.note("holding", format!("empty statistics: {e}")),
    }
    if let Some(b) = stats.blocking_fraction() {
        counters.push(vec!["blocking_fraction".into(), num(b)]);
    }
    counters.push(vec!["observed_time".into(), num(stats.observed_time)]);
    counters.push(vec![
        "lambda_R_dimensional".into(),
        num(scenario.lambda_r_dimensional()),
    ]);
    counters.push(vec!["lambda_R_literal".into(), num(scenario.lambda_r_literal())]);
    manifest.emit("sim_holding.csv", &hist_table)?;
    manifest.emit("sim_counters.csv", &counters)?;
    println!(
        "arrivals = {}, completions = {}, holding samples = {}",
        stats.counters.arrivals,
        stats.counters.completions,
        stats.holding_samples.len()
    );
    finish(manifest, started, 0)
}

fn oracle_table(est: &OracleEstimate) -> Table {
    let mut t = Table::new(["x", "estimate", "stderr", "samples"]);
    for k in 0..est.levels.len() {
        t.push(vec![
            num(est.levels[k]),
            num(est.estimates[k]),
            num(est.stderr[k]),
            est.samples.to_string(),
        ]);
    }
    t
}

#[allow(clippy::too_many_arguments)]
pub fn oracle(
    scenario_path: &Path,
    out: &Path,
    mode: &str,
    samples: Option<u64>,
    seed: Option<u64>,
    lambda_on: f64,
    service_rate: Option<f64>,
) -> Result<u8, CliError> {
    let started = Instant::now();
    if !matches!(mode, "fixed" | "mobile" | "birth-death") {
        return Err(CliError::Input(format!(
            "unknown oracle mode `{mode}` (fixed | mobile | birth-death)"
        )));
    }
    let scenario = Scenario::load(scenario_path)?;
    scenario.params.validate().into_result()?;
    prepare(out)?;
    let seed = seed.unwrap_or(scenario.seed);
    let channels = scenario.params.channels;
    let c = service_rate.unwrap_or_else(|| default_service_rate(channels));
    let mut manifest = RunManifest::new("oracle", Some(scenario_path), out);
    manifest.seed = Some(seed);
    manifest.note("mode", mode);

    if mode == "fixed" {
        let steps = samples.unwrap_or(DEFAULT_STEPS);
        let run = fluid_run(steps, seed);
        let est = simulate_fluid_fixed(channels, lambda_on, c, &run)?;
        manifest.note("lambda_on", lambda_on);
        manifest.note("service_rate", c);
        manifest.emit("oracle.csv", &oracle_table(&est))?;
        return finish(manifest, started, 0);
    }

    let sol = solve_holding(&scenario.params, RateMode::PerCell)?;
    let eq = &sol.equilibrium;
    if mode == "birth-death" {
        let events = samples.unwrap_or(DEFAULT_EVENTS);
        let est = simulate_birth_death(eq.up_rate, eq.mu_h, channels, events, seed)?;
        let mut t = Table::new(["x", "estimate", "stderr", "samples"]);
        for (j, (p, se)) in est.probs.iter().zip(&est.stderr).enumerate() {
            t.push(vec![num(j as f64), num(*p), num(*se), est.events.to_string()]);
        }
        let tv = total_variation(&est.probs, eq.probs());
        manifest.note("tv_to_analytic", num(tv));
        manifest.emit("oracle.csv", &t)?;
        println!("TV(oracle, analytic P_j) = {tv:.3e}");
    } else {
        let steps = samples.unwrap_or(DEFAULT_STEPS);
        let pop = PopulationRates {
            up_rate: eq.up_rate,
            mu_h: eq.mu_h,
            channels,
        };
        let est = simulate_fluid_mobile(pop, lambda_on, c, &fluid_run(steps, seed))?;
        manifest.note("lambda_on", lambda_on);
        manifest.note("service_rate", c);
        manifest.emit("oracle.csv", &oracle_table(&est))?;
    }
    finish(manifest, started, 0)
}

fn fluid_run(steps: u64, seed: u64) -> FluidRun {
    FluidRun {
        horizon: steps as f64 * ORACLE_DT,
        dt: ORACLE_DT,
        seed,
        query_levels: ORACLE_LEVELS.to_vec(),
    }
}

fn find(dirs: &[&Path], names: &[&str]) -> Option<std::path::PathBuf> {
    names
        .iter()
        .flat_map(|n| dirs.iter().map(move |d| d.join(n)))
        .find(|p| p.exists())
}

fn read_pj(path: &Path) -> Result<Vec<f64>, CliError> {
    let t = Table::read(path)?;
    let column = if t.column("probability").is_some() {
        "probability"
    } else {
        "time_fraction"
    };
    t.floats(column, path)
}

/// Mean holding time from `holding.csv` (as `1 / mu_H`) or from simulator counters.
fn read_holding_mean(dir: &Path) -> Result<f64, CliError> {
    let analytic = dir.join("holding.csv");
    if analytic.exists() {
        let t = Table::read(&analytic)?;
        let mu = t.floats("mu_H", &analytic)?;
        return mu
            .first()
            .map(|m| 1.0 / m)
            .ok_or_else(|| CliError::io(&analytic, "no rows"));
    }
    let counters = dir.join("sim_counters.csv");
    Table::read(&counters)?
        .lookup("holding_mean")
        .ok_or_else(|| CliError::io(&counters, "no `holding_mean` entry"))
}

pub fn compare(analysis: &Path, sim: &Path, out: &Path) -> Result<u8, CliError> {
    let started = Instant::now();
    let analytic_pj_path = find(&[analysis], &["pj.csv", "sim_pj.csv"])
        .ok_or_else(|| CliError::io(analysis, "neither pj.csv nor sim_pj.csv found"))?;
    let analytic_pj = read_pj(&analytic_pj_path)?;
    let empirical_pj = read_pj(&sim.join("sim_pj.csv"))?;
    let analytic_mean = read_holding_mean(analysis)?;
    let sim_counters = sim.join("sim_counters.csv");
    let sim_mean = Table::read(&sim_counters)?
        .lookup("holding_mean")
        .ok_or_else(|| CliError::io(&sim_counters, "no `holding_mean` entry"))?;
    prepare(out)?;

    let mut manifest = RunManifest::new("compare", None, out);
    manifest.note("analysis_dir", analysis.display());
    manifest.note("sim_dir", sim.display());
    let mut t = Table::new(["metric", "value", "threshold", "pass", "gating"]);
    let tv = total_variation(&analytic_pj, &empirical_pj);
    let rel = (sim_mean - analytic_mean).abs() / analytic_mean;
    let tv_ok = tv < TV_THRESHOLD;
    let rel_ok = rel < HOLDING_THRESHOLD;
    t.push(vec![
        "tv_pj".into(),
        num(tv),
        num(TV_THRESHOLD),
        tv_ok.to_string(),
        "true".into(),
    ]);
    t.push(vec![
        "holding_mean_rel_error".into(),
        num(rel),
        num(HOLDING_THRESHOLD),
        rel_ok.to_string(),
        "true".into(),
    ]);
    compare_oracle(analysis, sim, &mut t)?;
    manifest.emit("compare.csv", &t)?;
    println!("TV = {tv:.4} (< {TV_THRESHOLD}), holding mean relative error = {rel:.4} (< {HOLDING_THRESHOLD})");
    finish(manifest, started, if tv_ok && rel_ok { 0 } else { 3 })
}

/// Adds per-level `G(x)` differences against an oracle run found in either directory.
fn compare_oracle(analysis: &Path, sim: &Path, t: &mut Table) -> Result<(), CliError> {
    let Some(oracle_dir) = [sim, analysis].into_iter().find(|d| d.join("oracle.csv").exists()) else {
        return Ok(());
    };
    let mode = read_diagnostics(oracle_dir)
        .and_then(|d| d.get("mode").cloned())
        .unwrap_or_else(|| "fixed".into());
    let buffer = match mode.as_str() {
        "fixed" => "buffer.csv",
        "mobile" => "buffer_mixture.csv",
        _ => return Ok(()),
    };
    let buffer_path = analysis.join(buffer);
    if !buffer_path.exists() {
        return Ok(());
    }
    let oracle_path = oracle_dir.join("oracle.csv");
    let o = Table::read(&oracle_path)?;
    let levels = o.floats("x", &oracle_path)?;
    let samples = o.floats("samples", &oracle_path)?;
    let est = OracleEstimate {
        estimates: o.floats("estimate", &oracle_path)?,
        stderr: o.floats("stderr", &oracle_path)?,
        samples: samples.first().copied().unwrap_or(0.0) as u64,
        batches: BATCHES,
        seed: 0,
        levels,
    };
    let b = Table::read(&buffer_path)?;
    let xs = b.floats("x", &buffer_path)?;
    let gs = b.floats("G", &buffer_path)?;
    for (k, &x) in est.levels.iter().enumerate() {
        let Some(i) = xs.iter().position(|v| (v - x).abs() < 1e-9) else {
            continue;
        };
        let (lo, hi) = est.interval(k, ORACLE_ALPHA);
        let diff = gs[i] - est.estimates[k];
        t.push(vec![
            format!("G_diff@{x}"),
            num(diff),
            num((hi - lo) / 2.0),
            est.covers(k, gs[i], ORACLE_ALPHA).to_string(),
            "false".into(),
        ]);
    }
    Ok(())
}
