//! Simulator of a square array of base stations serving mobile calls.
//!
//! Each mobile makes exactly one call. It appears uniformly inside the area
//! covered by the cells, takes a channel at its nearest base or is blocked,
//! and then walks: every `delta_time` seconds it moves `speed * delta_time`
//! in a direction drawn uniformly from north, south, east and west. Its speed
//! is drawn once, uniformly on `(0, v_max]`. (A straight-line heading is
//! available as an option, see [`Heading`].) After each move the signal
//! quality to the serving base is checked; once it fails the call is handed
//! to the nearest base, or dropped if that base has no free channel. A call
//! whose position is beyond the quality range of every base leaves the
//! system. Completions happen at their exact exponential times; movement
//! and handoffs happen on the global `delta_time` grid.
//!
//! Statistics cover `[warmup, sim_duration]` only: a time-weighted histogram
//! of busy channels pooled over all bases, the channel holding intervals
//! acquired after the warmup, and event counters.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};

/// How a mobile chooses its direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Heading {
    /// North, south, east or west, redrawn uniformly at every step.
    #[default]
    CompassPerStep,
    /// A uniform angle drawn once per call and kept: the straight-line
    /// motion the analytic dwell distributions assume.
    Straight,
}

impl Heading {
    pub fn name(self) -> &'static str {
        match self {
            Heading::CompassPerStep => "compass",
            Heading::Straight => "straight",
        }
    }
}

impl std::str::FromStr for Heading {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "compass" => Ok(Heading::CompassPerStep),
            "straight" => Ok(Heading::Straight),
            other => Err(format!("unknown heading `{other}` (compass | straight)")),
        }
    }
}

/// Default warmup, in mean session lengths.
pub const WARMUP_SESSIONS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub grid_side: usize,
    pub base_spacing: f64,
    pub channels_per_base: usize,
    /// Mean time between arrivals anywhere in the system; infinite disables arrivals.
    pub exp_pulse_mean: f64,
    pub mean_session_length: f64,
    pub delta_time: f64,
    pub v_max: f64,
    pub sim_duration: f64,
    pub seed: u64,
    pub warmup: f64,
    pub heading: Heading,
}

impl SimConfig {
    /// Configuration with the default warmup of ten mean session lengths,
    /// clipped to half the run when the run is shorter than that.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid_side: usize,
        base_spacing: f64,
        channels_per_base: usize,
        exp_pulse_mean: f64,
        mean_session_length: f64,
        delta_time: f64,
        v_max: f64,
        sim_duration: f64,
        seed: u64,
    ) -> Self {
        let warmup = (WARMUP_SESSIONS * mean_session_length).min(0.5 * sim_duration);
        Self {
            grid_side,
            base_spacing,
            channels_per_base,
            exp_pulse_mean,
            mean_session_length,
            delta_time,
            v_max,
            sim_duration,
            seed,
            warmup,
            heading: Heading::default(),
        }
    }

    pub fn with_heading(mut self, heading: Heading) -> Self {
        self.heading = heading;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.grid_side < 1 {
            bad.push("grid_side: must be >= 1".to_string());
        }
        if self.channels_per_base < 1 {
            bad.push("channels_per_base: must be >= 1".to_string());
        }
        if !(self.exp_pulse_mean > 0.0) {
            bad.push(format!("exp_pulse_mean: must be > 0, got {}", self.exp_pulse_mean));
        }
        for (name, v) in [
            ("base_spacing", self.base_spacing),
            ("mean_session_length", self.mean_session_length),
            ("delta_time", self.delta_time),
            ("sim_duration", self.sim_duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name}: must be finite and > 0, got {v}"));
            }
        }
        if !(self.v_max.is_finite() && self.v_max >= 0.0) {
            bad.push(format!("v_max: must be finite and >= 0, got {}", self.v_max));
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0 && self.warmup < self.sim_duration) {
            bad.push(format!(
                "warmup: must lie in [0, sim_duration = {}), got {}",
                self.sim_duration, self.warmup
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    pub fn base_count(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Offered load per base in Erlangs: arrivals spread evenly over the
    /// bases, each holding for one mean session.
    pub fn offered_load_per_base(&self) -> f64 {
        self.mean_session_length / (self.exp_pulse_mean * self.base_count() as f64)
    }
}

/// Square array of base stations: base `k` sits at
/// `((k % side) * spacing, (k / side) * spacing)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub side: usize,
    pub spacing: f64,
}

impl Grid {
    pub fn position(&self, k: usize) -> [f64; 2] {
        [
            (k % self.side) as f64 * self.spacing,
            (k / self.side) as f64 * self.spacing,
        ]
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }
}

fn exponential(rng: &mut SimRng, mean: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    mean * e
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Index of the base closest to `position`; ties go to the lowest index.
pub fn nearest_base(position: [f64; 2], grid: &Grid) -> usize {
    let mut best = (0, f64::INFINITY);
    for k in 0..grid.len() {
        let d = distance(position, grid.position(k));
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Largest acceptable distance to the serving base, `(2/3) sqrt(D^2 - (D/2)^2) = D / sqrt(3)`.
pub fn quality_threshold(base_spacing: f64) -> f64 {
    base_spacing / 3f64.sqrt()
}

/// Whether the channel quality is acceptable; the threshold itself counts as acceptable.
pub fn quality_ok(position: [f64; 2], base_position: [f64; 2], base_spacing: f64) -> bool {
    distance(position, base_position) <= quality_threshold(base_spacing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub arrivals: u64,
    pub new_call_blocks: u64,
    pub handoff_attempts: u64,
    pub handoff_failures: u64,
    pub completions: u64,
    pub coverage_exits: u64,
}

impl Counters {
    pub fn named(&self) -> [(&'static str, u64); 6] {
        [
            ("arrivals", self.arrivals),
            ("new_call_blocks", self.new_call_blocks),
            ("handoff_attempts", self.handoff_attempts),
            ("handoff_failures", self.handoff_failures),
            ("completions", self.completions),
            ("coverage_exits", self.coverage_exits),
        ]
    }

    fn add(&mut self, other: &Counters) {
        self.arrivals += other.arrivals;
        self.new_call_blocks += other.new_call_blocks;
        self.handoff_attempts += other.handoff_attempts;
        self.handoff_failures += other.handoff_failures;
        self.completions += other.completions;
        self.coverage_exits += other.coverage_exits;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub channels: usize,
    pub bases: usize,
    /// Base-seconds spent with `j` busy channels, summed over all bases.
    pub occupancy_time: Vec<f64>,
    /// Length of the observation window (seconds, not base-seconds).
    pub observed_time: f64,
    /// Channel holding intervals that started after the warmup and ended
    /// before the horizon, in order of their end.
    pub holding_samples: Vec<f64>,
    pub counters: Counters,
    /// Most channels ever simultaneously busy at one base.
    pub peak_busy: usize,
}

impl SimStats {
    fn empty(channels: usize, bases: usize) -> Self {
        Self {
            channels,
            bases,
            occupancy_time: vec![0.0; channels + 1],
            observed_time: 0.0,
            holding_samples: Vec::new(),
            counters: Counters::default(),
            peak_busy: 0,
        }
    }

    /// Pools independent replications of the same system; occupancy is
    /// weighted by each run's observed time.
    pub fn merge(parts: &[SimStats]) -> Result<SimStats> {
        let first = parts
            .first()
            .ok_or(Error::EmptyStatistics("no replications to merge"))?;
        if parts
            .iter()
            .any(|p| p.channels != first.channels || p.bases != first.bases)
        {
            return Err(Error::OutOfRange {
                name: "parts",
                detail: "replications describe different systems".into(),
            });
        }
        let mut out = SimStats::empty(first.channels, first.bases);
        for p in parts {
            for (a, b) in out.occupancy_time.iter_mut().zip(&p.occupancy_time) {
                *a += b;
            }
            out.observed_time += p.observed_time;
            out.holding_samples.extend_from_slice(&p.holding_samples);
            out.counters.add(&p.counters);
            out.peak_busy = out.peak_busy.max(p.peak_busy);
        }
        Ok(out)
    }

    /// Fraction of arrivals blocked at admission.
    pub fn blocking_fraction(&self) -> Option<f64> {
        (self.counters.arrivals > 0).then(|| self.counters.new_call_blocks as f64 / self.counters.arrivals as f64)
    }
}

/// Time-weighted fractions of busy-channel counts pooled over all bases.
pub fn empirical_equilibrium(stats: &SimStats) -> Result<Vec<f64>> {
    let total = stats.observed_time * stats.bases as f64;
    if !(total > 0.0) {
        return Err(Error::EmptyStatistics("no observation time after warmup"));
    }
    Ok(stats.occupancy_time.iter().map(|t| t / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingBin {
    pub low: f64,
    pub high: f64,
    pub count: u64,
}

/// Sample mean of the holding intervals and a histogram with `bins` equal
/// bins spanning `[0, max sample]`.
pub fn empirical_holding(stats: &SimStats, bins: usize) -> Result<(f64, Vec<HoldingBin>)> {
    let samples = &stats.holding_samples;
    if samples.is_empty() {
        return Err(Error::EmptyStatistics("no completed channel holding intervals"));
    }
    if bins == 0 {
        return Err(Error::OutOfRange {
            name: "bins",
            detail: "must be >= 1".into(),
        });
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let top = samples.iter().copied().fold(0.0, f64::max);
    let width = if top > 0.0 { top / bins as f64 } else { 1.0 };
    let mut hist: Vec<HoldingBin> = (0..bins)
        .map(|b| HoldingBin {
            low: b as f64 * width,
            high: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &s in samples {
        let b = ((s / width) as usize).min(bins - 1);
        hist[b].count += 1;
    }
    Ok((mean, hist))
}

#[derive(Debug, Clone, Copy)]
struct MobileHost {
    position: [f64; 2],
    speed: f64,
    /// Unit direction for straight-line travel; unused for compass steps.
    direction: [f64; 2],
    base: usize,
    acquired_at: f64,
    generation: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival,
    Completion { slot: usize, generation: u64 },
    Step,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event; insertion order breaks ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct World {
    cfg: SimConfig,
    grid: Grid,
    rng: SimRng,
    events: BinaryHeap<Event>,
    seq: u64,
    slots: Vec<Option<MobileHost>>,
    free: Vec<usize>,
    generation: u64,
    busy: Vec<usize>,
    /// Number of bases currently at each busy count.
    bases_at: Vec<usize>,
    clock: f64,
    stats: SimStats,
}

impl World {
    fn new(cfg: SimConfig) -> Self {
        let grid = Grid {
            side: cfg.grid_side,
            spacing: cfg.base_spacing,
        };
        let mut bases_at = vec![0; cfg.channels_per_base + 1];
        bases_at[0] = grid.len();
        Self {
            cfg,
            grid,
            rng: seeded(cfg.seed),
            events: BinaryHeap::new(),
            seq: 0,
            slots: Vec::new(),
            free: Vec::new(),
            generation: 0,
            busy: vec![0; grid.len()],
            bases_at,
            clock: 0.0,
            stats: SimStats::empty(cfg.channels_per_base, grid.len()),
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        if time <= self.cfg.sim_duration {
            self.seq += 1;
            self.events.push(Event {
                time,
                seq: self.seq,
                kind,
            });
        }
    }

    fn observing(&self) -> bool {
        self.clock >= self.cfg.warmup
    }

    /// Moves the clock to `time`, crediting the elapsed observed time to the
    /// current occupancy levels.
    fn advance(&mut self, time: f64) {
        let from = self.clock.max(self.cfg.warmup);
        if time > from {
            let dt = time - from;
            for (acc, &n) in self.stats.occupancy_time.iter_mut().zip(&self.bases_at) {
                *acc += dt * n as f64;
            }
            self.stats.observed_time += dt;
        }
        self.clock = time;
    }

    fn set_busy(&mut self, base: usize, busy: usize) {
        assert!(
            busy <= self.cfg.channels_per_base,
            "channel conservation violated at base {base}"
        );
        self.bases_at[self.busy[base]] -= 1;
        self.bases_at[busy] += 1;
        self.busy[base] = busy;
        self.stats.peak_busy = self.stats.peak_busy.max(busy);
    }

    fn try_acquire(&mut self, base: usize) -> bool {
        if self.busy[base] < self.cfg.channels_per_base {
            self.set_busy(base, self.busy[base] + 1);
            true
        } else {
            false
        }
    }

    fn release(&mut self, mobile: &MobileHost) {
        self.set_busy(mobile.base, self.busy[mobile.base] - 1);
        if mobile.acquired_at >= self.cfg.warmup {
            self.stats.holding_samples.push(self.clock - mobile.acquired_at);
        }
    }

    fn sample_position(&mut self) -> [f64; 2] {
        let d = self.cfg.base_spacing;
        let half = d / 2.0;
        let span = (self.cfg.grid_side - 1) as f64 * d + d;
        loop {
            let p = [
                -half + span * self.rng.random::<f64>(),
                -half + span * self.rng.random::<f64>(),
            ];
            let k = nearest_base(p, &self.grid);
            if distance(p, self.grid.position(k)) <= half {
                return p;
            }
        }
    }

    fn on_arrival(&mut self) {
        let position = self.sample_position();
        let speed = self.cfg.v_max * (1.0 - self.rng.random::<f64>());
        let direction = match self.cfg.heading {
            Heading::CompassPerStep => [0.0, 0.0],
            Heading::Straight => {
                let angle = std::f64::consts::TAU * self.rng.random::<f64>();
                [angle.cos(), angle.sin()]
            }
        };
        let session: f64 = exponential(&mut self.rng, self.cfg.mean_session_length);
        let next: f64 = exponential(&mut self.rng, self.cfg.exp_pulse_mean);
        self.schedule(self.clock + next, EventKind::Arrival);

        let observing = self.observing();
        if observing {
            self.stats.counters.arrivals += 1;
        }
        let base = nearest_base(position, &self.grid);
        if !self.try_acquire(base) {
            if observing {
                self.stats.counters.new_call_blocks += 1;
            }
            return;
        }
        self.generation += 1;
        let mobile = MobileHost {
            position,
            speed,
            direction,
            base,
            acquired_at: self.clock,
            generation: self.generation,
        };
        let slot = match self.free.pop() {
            Some(s) => {
                self.slots[s] = Some(mobile);
                s
            }
            None => {
                self.slots.push(Some(mobile));
                self.slots.len() - 1
            }
        };
        self.schedule(
            self.clock + session,
            EventKind::Completion {
                slot,
                generation: mobile.generation,
            },
        );
    }

    fn end_call(&mut self, slot: usize) {
        if let Some(m) = self.slots[slot].take() {
            self.release(&m);
            self.free.push(slot);
        }
    }

    fn on_completion(&mut self, slot: usize, generation: u64) {
        if self.slots[slot].is_some_and(|m| m.generation == generation) {
            self.end_call(slot);
            if self.observing() {
                self.stats.counters.completions += 1;
            }
        }
    }

    fn on_step(&mut self) {
        let step = self.cfg.delta_time;
        let threshold = quality_threshold(self.cfg.base_spacing);
        let observing = self.observing();
        for slot in 0..self.slots.len() {
            let Some(mut m) = self.slots[slot] else { continue };
            let dist = m.speed * step;
            match self.cfg.heading {
                Heading::CompassPerStep => match self.rng.random_range(0..4u8) {
                    0 => m.position[1] += dist,
                    1 => m.position[1] -= dist,
                    2 => m.position[0] += dist,
                    _ => m.position[0] -= dist,
                },
                Heading::Straight => {
                    m.position[0] += dist * m.direction[0];
                    m.position[1] += dist * m.direction[1];
                }
            }
            if quality_ok(m.position, self.grid.position(m.base), self.cfg.base_spacing) {
                self.slots[slot] = Some(m);
                continue;
            }
            let target = nearest_base(m.position, &self.grid);
            if distance(m.position, self.grid.position(target)) > threshold {
                self.end_call(slot);
                if observing {
                    self.stats.counters.coverage_exits += 1;
                }
                continue;
            }
            if observing {
                self.stats.counters.handoff_attempts += 1;
            }
            if self.try_acquire(target) {
                self.release(&m);
                m.base = target;
                m.acquired_at = self.clock;
                self.slots[slot] = Some(m);
            } else {
                self.end_call(slot);
                if observing {
                    self.stats.counters.handoff_failures += 1;
                }
            }
        }
        self.schedule(self.clock + step, EventKind::Step);
    }
}

/// Runs one replication.
pub fn run(cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    let mut world = World::new(*cfg);
    if cfg.exp_pulse_mean.is_finite() {
        let first: f64 = exponential(&mut world.rng, cfg.exp_pulse_mean);
        world.schedule(first, EventKind::Arrival);
    }
    if cfg.v_max > 0.0 {
        world.schedule(cfg.delta_time, EventKind::Step);
    }
    while let Some(ev) = world.events.pop() {
        world.advance(ev.time);
        match ev.kind {
            EventKind::Arrival => world.on_arrival(),
            EventKind::Completion { slot, generation } => world.on_completion(slot, generation),
            EventKind::Step => world.on_step(),
        }
    }
    world.advance(cfg.sim_duration);
    Ok(world.stats)
}
