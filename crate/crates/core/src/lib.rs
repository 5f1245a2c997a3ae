//! Deterministic agent-based model of microaggressions in a society with
//! one marginalized group.
//!
//! Agents hold two convictions in percent: `c1`, agreement that
//! microaggressions do not constitute a wrong, and `c2`, agreement that
//! members of the marginalized group are overly sensitive. Each tick every
//! agent initiates one encounter; agents with high `c1` may commit a
//! microaggression, the partner reacts positively, neutrally or negatively
//! depending on its own `c1`, and both update their convictions from a delta
//! table. Background noise then nudges everyone, and the run ends once no
//! potential perpetrators or no negative reactors remain, or the society is
//! polarized.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI, and the
//! session server live in the `convicta` crate.

#![no_std]

extern crate alloc;

pub mod analytic;
pub mod config;
pub mod deltas;
pub mod metrics;
pub mod model;
pub mod run;
pub mod scenario;
pub mod session;
pub mod stochastics;

pub use config::{parse_config, serialize_config, validate, ConfigError, ConfigKey, ModelConfig, Thresholds, Violation};
pub use deltas::{Conviction, DeltaTable, Group};
pub use metrics::{snapshot_metrics, TickMetrics};
pub use model::{Agent, InteractionOutcome, Reaction, SocietyState, StopCondition, StopReason};
pub use run::{ensemble, run, EnsembleSummary, RunResult, Simulation};
pub use scenario::{load_scenario, Scenario, ScenarioSource};
pub use stochastics::RandomStream;
