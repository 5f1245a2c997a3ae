//! Interactive session: a simulation driven by steering commands.
//!
//! Parameter changes are queued and applied at the next tick boundary, so a
//! tick always runs under a single configuration. Structural parameters
//! (population, margin size, initial distributions, seed) only change
//! through `setup` or `load_scenario`.
//!
//! Messages are tagged with a `type` field and carry the protocol version
//! in `v`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{validate, ConfigError, ConfigKey, ModelConfig, Violation};
use crate::deltas::Group;
use crate::metrics::TickMetrics;
use crate::model::{Agent, InteractionOutcome, Reaction, StopReason};
use crate::run::Simulation;
use crate::scenario::ScenarioSource;

pub const PROTOCOL_VERSION: u32 = 1;

/// `set_param` key that changes the play speed rather than the model.
pub const TICK_RATE_KEY: &str = "tick_rate";

/// Maximum ticks a single `step` may request.
pub const MAX_STEP: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    /// Re-initialize from the current configuration. Without a seed, the
    /// previous seed plus one is used.
    Setup {
        #[serde(default)]
        seed: Option<u64>,
    },
    Play,
    Pause,
    Step { n: u32 },
    SetParam { key: String, value: ParamValue },
    /// Replace the whole configuration and set up with the current seed.
    LoadScenario { name: String },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Setup { .. } => "setup",
            Command::Play => "play",
            Command::Pause => "pause",
            Command::Step { .. } => "step",
            Command::SetParam { .. } => "set_param",
            Command::LoadScenario { .. } => "load_scenario",
        }
    }
}

/// A parameter value as sent by clients: JSON number or string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Integer(u64),
    Number(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Integer(v) => write!(f, "{v}"),
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

/// A command as it travels over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    pub v: u32,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Paused,
    Playing,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session has stopped ({}); only setup or load_scenario are accepted", .0.label())]
    Stopped(StopReason),
    #[error("`{0}` can only change through setup")]
    Structural(String),
    #[error("step count must be between 1 and {MAX_STEP}, got {0}")]
    BadStep(u32),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub v: u32,
    pub command: String,
    pub message: String,
    /// Tick at whose start a queued change takes effect.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effective_tick: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopView {
    pub kind: StopReason,
    pub label: String,
    pub tick: u64,
}

/// One microaggression of the tick, perpetrator to reactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionView {
    pub perpetrator: u32,
    pub reactor: u32,
    pub reaction: Reaction,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accepted: Option<bool>,
}

/// Full session state after setup or a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEvent {
    pub v: u32,
    pub session: String,
    pub tick: u64,
    pub seed: u64,
    pub mode: Mode,
    pub stop: Option<StopView>,
    pub agents: Vec<Agent>,
    pub interactions: Vec<InteractionView>,
    pub metrics: TickMetrics,
    /// Generator words consumed so far; lets clients line traces up.
    pub draw_count: u64,
}

impl StateEvent {
    /// `"<non_marginalized> + <marginalized> = <total>"`.
    pub fn population_monitor(&self) -> String {
        let p = self.agents.iter().filter(|a| a.group == Group::NonMarginalized).count();
        let m = self.agents.len() - p;
        format!("{p} + {m} = {}", self.agents.len())
    }
}

/// Everything the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateEvent),
    Ack(Ack),
    Error { v: u32, command: Option<String>, message: String, violations: Vec<Violation> },
}

impl ServerMessage {
    pub fn error(command: Option<&str>, err: &SessionError) -> Self {
        let violations = match err {
            SessionError::Config(ConfigError::Invalid(v)) => v.clone(),
            _ => Vec::new(),
        };
        ServerMessage::Error {
            v: PROTOCOL_VERSION,
            command: command.map(str::to_owned),
            message: err.to_string(),
            violations,
        }
    }

    /// Stop events must survive back-pressure.
    pub fn is_critical(&self) -> bool {
        match self {
            ServerMessage::State(e) => e.stop.is_some(),
            _ => true,
        }
    }
}

/// Acknowledgement plus whatever state events the command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub ack: Ack,
    pub events: Vec<StateEvent>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    sim: Simulation,
    pending: Vec<(ConfigKey, String)>,
    mode: Mode,
    tick_rate: f64,
    last_outcomes: Vec<InteractionOutcome>,
}

impl Session {
    pub fn new(id: impl Into<String>, config: ModelConfig, seed: u64) -> Result<Self, ConfigError> {
        Ok(Self {
            id: id.into(),
            sim: Simulation::new(config, seed)?,
            pending: Vec::new(),
            mode: Mode::Paused,
            tick_rate: 10.0,
            last_outcomes: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn tick_rate(&self) -> f64 {
        self.tick_rate
    }

    /// Ticks per second while playing; clamped to `[0.1, 1000]`.
    pub fn set_tick_rate(&mut self, rate: f64) {
        self.tick_rate = if rate.is_nan() { 10.0 } else { rate.clamp(0.1, 1000.0) };
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    /// Configuration the next tick will run under.
    pub fn effective_config(&self) -> ModelConfig {
        let mut config = self.sim.config().clone();
        for (key, value) in &self.pending {
            key.write(&mut config, value).expect("queued values were checked");
        }
        config
    }

    pub fn handle_message(
        &mut self,
        message: ClientMessage,
        scenarios: &dyn ScenarioSource,
    ) -> Result<Reply, SessionError> {
        if message.v != PROTOCOL_VERSION {
            return Err(SessionError::Version(message.v));
        }
        self.handle_command(message.command, scenarios)
    }

    pub fn handle_command(
        &mut self,
        command: Command,
        scenarios: &dyn ScenarioSource,
    ) -> Result<Reply, SessionError> {
        let name = command.name();
        if let Some(stop) = self.sim.stopped() {
            if !matches!(command, Command::Setup { .. } | Command::LoadScenario { .. }) {
                return Err(SessionError::Stopped(stop.kind));
            }
        }
        let ack = |message: String| Ack {
            v: PROTOCOL_VERSION,
            command: name.to_owned(),
            message,
            effective_tick: None,
        };
        match command {
            Command::Setup { seed } => {
                let seed = seed.unwrap_or_else(|| self.sim.seed().wrapping_add(1));
                let config = self.effective_config();
                self.reset(config, seed)?;
                Ok(Reply { ack: ack(format!("society set up with seed {seed}")), events: alloc::vec![self.emit_state()] })
            }
            Command::LoadScenario { name: scenario } => {
                let loaded = scenarios.scenario(&scenario)?;
                self.reset(loaded.config, self.sim.seed())?;
                Ok(Reply {
                    ack: ack(format!("loaded scenario {}: {}", loaded.name, loaded.description)),
                    events: alloc::vec![self.emit_state()],
                })
            }
            Command::Play => {
                self.mode = Mode::Playing;
                Ok(Reply { ack: ack("playing".into()), events: Vec::new() })
            }
            Command::Pause => {
                self.mode = Mode::Paused;
                Ok(Reply { ack: ack("paused".into()), events: Vec::new() })
            }
            Command::Step { n } => {
                let mut events = Vec::with_capacity(n.min(1024) as usize);
                let ack = self.step_with(n, &mut |e| events.push(e))?;
                Ok(Reply { ack, events })
            }
            Command::SetParam { key, value } if key == TICK_RATE_KEY => {
                let rate: f64 = value
                    .to_string()
                    .trim()
                    .parse()
                    .ok()
                    .filter(|r: &f64| r.is_finite() && *r > 0.0)
                    .ok_or_else(|| ConfigError::InvalidValue {
                        key: key.clone(),
                        value: value.to_string(),
                        reason: "expected a positive number of ticks per second",
                        line: None,
                    })?;
                self.set_tick_rate(rate);
                Ok(Reply { ack: ack(format!("tick_rate = {}", self.tick_rate)), events: Vec::new() })
            }
            Command::SetParam { key, value } => {
                let value = value.to_string();
                let parsed = ConfigKey::parse(&key)
                    .ok_or_else(|| ConfigError::UnknownKey { key: key.clone(), line: None })?;
                if parsed.is_structural() {
                    return Err(SessionError::Structural(key));
                }
                let mut candidate = self.effective_config();
                parsed.write(&mut candidate, &value)?;
                let violations = validate(&candidate);
                if !violations.is_empty() {
                    return Err(ConfigError::Invalid(violations).into());
                }
                self.pending.push((parsed, value.trim().to_owned()));
                let effective = self.sim.state().tick + 1;
                let mut a = ack(format!("{key} = {} queued", value.trim()));
                a.effective_tick = Some(effective);
                Ok(Reply { ack: a, events: Vec::new() })
            }
        }
    }

    /// Advance up to `n` ticks, handing each event to `sink`, then pause.
    /// Stops early when the society reaches a stop condition.
    pub fn step_with(&mut self, n: u32, sink: &mut dyn FnMut(StateEvent)) -> Result<Ack, SessionError> {
        if let Some(stop) = self.sim.stopped() {
            return Err(SessionError::Stopped(stop.kind));
        }
        if n == 0 || n > MAX_STEP {
            return Err(SessionError::BadStep(n));
        }
        let mut done = 0;
        for _ in 0..n {
            match self.advance() {
                Some(event) => {
                    done += 1;
                    sink(event);
                }
                None => break,
            }
        }
        self.mode = Mode::Paused;
        let message = match self.sim.stopped() {
            Some(stop) => format!("advanced {done} ticks; {}", stop.kind.label()),
            None => format!("advanced {done} ticks"),
        };
        Ok(Ack { v: PROTOCOL_VERSION, command: "step".to_owned(), message, effective_tick: None })
    }

    fn reset(&mut self, config: ModelConfig, seed: u64) -> Result<(), ConfigError> {
        self.sim = Simulation::new(config, seed)?;
        self.pending.clear();
        self.last_outcomes.clear();
        self.mode = Mode::Paused;
        Ok(())
    }

    /// Apply queued parameters, run one tick and describe the result.
    /// Returns `None` when the society has already stopped. Reaching a stop
    /// condition pauses the session.
    pub fn advance(&mut self) -> Option<StateEvent> {
        if self.sim.stopped().is_some() {
            return None;
        }
        if !self.pending.is_empty() {
            let config = self.effective_config();
            self.pending.clear();
            self.sim.replace_config(config).expect("queued config was validated");
        }
        let report = self.sim.step()?;
        self.last_outcomes = report.outcomes;
        if self.sim.stopped().is_some() {
            self.mode = Mode::Paused;
        }
        Some(self.emit_state())
    }

    /// Snapshot of the current state.
    pub fn emit_state(&self) -> StateEvent {
        let state = self.sim.state();
        StateEvent {
            v: PROTOCOL_VERSION,
            session: self.id.clone(),
            tick: state.tick,
            seed: self.sim.seed(),
            mode: self.mode,
            stop: state.stopped.map(|s| StopView {
                kind: s.kind,
                label: s.kind.label().to_owned(),
                tick: s.tick_reached,
            }),
            agents: state.agents.clone(),
            interactions: self
                .last_outcomes
                .iter()
                .filter_map(|o| {
                    o.reaction.map(|reaction| InteractionView {
                        perpetrator: o.initiator_id,
                        reactor: o.partner_id,
                        reaction,
                        accepted: o.accepted,
                    })
                })
                .collect(),
            metrics: self.sim.metrics(&self.last_outcomes),
            draw_count: self.sim.stream().draw_count(),
        }
    }
}
