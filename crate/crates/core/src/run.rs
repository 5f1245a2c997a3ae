//! Running a configured society to completion and summarizing ensembles.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, ensure_valid, ConfigError, ModelConfig};
use crate::metrics::{snapshot_metrics, TickMetrics};
use crate::model::{self, Agent, InteractionOutcome, SocietyState, StopCondition, StopReason};
use crate::stochastics::RandomStream;

/// A society together with the stream and configuration driving it.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ModelConfig,
    state: SocietyState,
    stream: RandomStream,
}

/// What one call to [`Simulation::step`] produced.
#[derive(Debug, Clone)]
pub struct TickReport {
    pub outcomes: Vec<InteractionOutcome>,
    pub metrics: TickMetrics,
}

impl Simulation {
    /// Validate `config` and initialize a society from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ConfigError> {
        ensure_valid(&config)?;
        let mut config = config;
        config.engine.seed = seed;
        let mut stream = RandomStream::new(seed);
        let state = model::init_society(&config, &mut stream);
        Ok(Self { config, state, stream })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn state(&self) -> &SocietyState {
        &self.state
    }

    pub fn stream(&self) -> &RandomStream {
        &self.stream
    }

    pub fn seed(&self) -> u64 {
        self.stream.seed()
    }

    pub fn stopped(&self) -> Option<StopCondition> {
        self.state.stopped
    }

    /// Swap in a new configuration between ticks. Callers must not change
    /// structural parameters; the society keeps its agents.
    pub fn replace_config(&mut self, config: ModelConfig) -> Result<(), ConfigError> {
        ensure_valid(&config)?;
        let seed = self.config.engine.seed;
        self.config = config;
        self.config.engine.seed = seed;
        Ok(())
    }

    pub fn metrics(&self, outcomes: &[InteractionOutcome]) -> TickMetrics {
        let mut m = snapshot_metrics(self.state.tick, &self.state.agents, &self.config, outcomes);
        m.stop = self.state.stopped.map(|s| s.kind);
        m
    }

    /// Advance one tick. Returns `None` once the society has stopped.
    pub fn step(&mut self) -> Option<TickReport> {
        if self.state.stopped.is_some() {
            return None;
        }
        let outcomes = model::tick(&mut self.state, &self.config, &mut self.stream);
        let metrics = self.metrics(&outcomes);
        Some(TickReport { outcomes, metrics })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: u64,
    pub seed: u64,
    /// Metrics of the freshly initialized society (tick 0).
    pub initial: TickMetrics,
    /// One entry per executed tick, `1..=stop.tick_reached`.
    pub series: Vec<TickMetrics>,
    pub stop: StopCondition,
    pub final_agents: Vec<Agent>,
}

impl RunResult {
    pub fn final_metrics(&self) -> &TickMetrics {
        self.series.last().unwrap_or(&self.initial)
    }

    pub fn outline(&self) -> RunOutline {
        let last = self.final_metrics();
        RunOutline {
            seed: self.seed,
            stop: self.stop,
            final_mean_c1_all: last.all.mean_c1,
            final_mean_c2_all: last.all.mean_c2,
        }
    }
}

/// Run until a stop condition fires or `max_ticks` ticks have elapsed. The
/// `seed` and `max_ticks` arguments override the config's engine values.
pub fn run(config: &ModelConfig, seed: u64, max_ticks: u64) -> Result<RunResult, ConfigError> {
    let mut config = config.clone();
    config.engine.max_ticks = max_ticks;
    let mut sim = Simulation::new(config, seed)?;
    let initial = sim.metrics(&[]);
    let mut series = Vec::new();
    let stop = loop {
        match sim.step() {
            Some(report) => series.push(report.metrics),
            None => unreachable!("stopped societies end the loop below"),
        }
        if let Some(stop) = sim.stopped() {
            break stop;
        }
        if sim.state().tick >= max_ticks {
            let stop = StopCondition { kind: StopReason::TickLimit, tick_reached: sim.state().tick };
            if let Some(last) = series.last_mut() {
                last.stop = Some(StopReason::TickLimit);
            }
            break stop;
        }
    };
    Ok(RunResult {
        config_hash: config_hash(sim.config()),
        seed,
        initial,
        series,
        stop,
        final_agents: sim.state().agents.clone(),
    })
}

/// The parts of a run an ensemble summary needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutline {
    pub seed: u64,
    pub stop: StopCondition,
    pub final_mean_c1_all: f64,
    pub final_mean_c2_all: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StopCounts {
    pub no_potential_perpetrators: u32,
    pub no_negative_reactors: u32,
    pub polarization_deadlock: u32,
    pub tick_limit: u32,
}

impl StopCounts {
    pub fn get(&self, reason: StopReason) -> u32 {
        match reason {
            StopReason::NoPotentialPerpetrators => self.no_potential_perpetrators,
            StopReason::NoNegativeReactors => self.no_negative_reactors,
            StopReason::PolarizationDeadlock => self.polarization_deadlock,
            StopReason::TickLimit => self.tick_limit,
        }
    }

    fn bump(&mut self, reason: StopReason) {
        match reason {
            StopReason::NoPotentialPerpetrators => self.no_potential_perpetrators += 1,
            StopReason::NoNegativeReactors => self.no_negative_reactors += 1,
            StopReason::PolarizationDeadlock => self.polarization_deadlock += 1,
            StopReason::TickLimit => self.tick_limit += 1,
        }
    }

    pub fn total(&self) -> u32 {
        StopReason::ALL.iter().map(|r| self.get(*r)).sum()
    }

    /// Most frequent reason; ties go to the earlier reason.
    pub fn modal(&self) -> StopReason {
        let mut best = StopReason::NoPotentialPerpetrators;
        for r in StopReason::ALL {
            if self.get(r) > self.get(best) {
                best = r;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickSpread {
    pub min: u64,
    pub median: f64,
    pub max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSpread {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub runs: u32,
    pub base_seed: u64,
    pub stop_counts: StopCounts,
    pub end_tick: TickSpread,
    pub final_mean_c1_all: MeanSpread,
    pub final_mean_c2_all: MeanSpread,
    /// Per-run outlines, sorted by seed.
    pub outlines: Vec<RunOutline>,
}

impl EnsembleSummary {
    /// Aggregate outlines in any order; the result only depends on the set.
    ///
    /// # Panics
    ///
    /// If `outlines` is empty.
    pub fn from_outlines(mut outlines: Vec<RunOutline>) -> Self {
        assert!(!outlines.is_empty(), "an ensemble needs at least one run");
        outlines.sort_by_key(|o| o.seed);
        let mut stop_counts = StopCounts::default();
        for o in &outlines {
            stop_counts.bump(o.stop.kind);
        }
        let mut ticks: Vec<u64> = outlines.iter().map(|o| o.stop.tick_reached).collect();
        ticks.sort_unstable();
        let n = ticks.len();
        let median = if n % 2 == 1 {
            ticks[n / 2] as f64
        } else {
            (ticks[n / 2 - 1] as f64 + ticks[n / 2] as f64) / 2.0
        };
        let spread = |f: fn(&RunOutline) -> f64| {
            let xs: Vec<f64> = outlines.iter().map(f).collect();
            mean_spread(&xs)
        };
        Self {
            runs: n as u32,
            base_seed: outlines[0].seed,
            stop_counts,
            end_tick: TickSpread { min: ticks[0], median, max: ticks[n - 1] },
            final_mean_c1_all: spread(|o| o.final_mean_c1_all),
            final_mean_c2_all: spread(|o| o.final_mean_c2_all),
            outlines,
        }
    }

    pub fn fraction(&self, reason: StopReason) -> f64 {
        f64::from(self.stop_counts.get(reason)) / f64::from(self.runs)
    }
}

fn mean_spread(xs: &[f64]) -> MeanSpread {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std_dev = if xs.len() < 2 {
        0.0
    } else {
        libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
    };
    MeanSpread { mean, std_dev }
}

/// Run seeds `base_seed..base_seed + runs` one after another.
pub fn ensemble(config: &ModelConfig, base_seed: u64, runs: u32) -> Result<EnsembleSummary, ConfigError> {
    ensure_valid(config)?;
    let outlines = (0..u64::from(runs.max(1)))
        .map(|i| run(config, base_seed.wrapping_add(i), config.engine.max_ticks).map(|r| r.outline()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleSummary::from_outlines(outlines))
}
