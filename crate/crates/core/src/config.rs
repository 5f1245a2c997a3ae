//! Model configuration and its flat `key = value` text format.
//!
//! Every model parameter is addressed by its slider name (`action_threshold`,
//! `p_c1_mean`, `m_c2_on_negative_rejected_from_p`, ...). Engine settings
//! that have no slider counterpart live under the `engine_` prefix.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deltas::{Conviction, DeltaEvent, DeltaKey, DeltaTable, Group};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub action: f64,
    pub positive: f64,
    pub negative: f64,
}

impl Thresholds {
    /// Mean of the per-event Poisson cutoff for acting: halfway between the
    /// threshold and 100.
    pub fn action_lambda(&self) -> f64 {
        self.action + (100.0 - self.action) / 2.0
    }

    pub fn positive_lambda(&self) -> f64 {
        self.positive + (100.0 - self.positive) / 2.0
    }

    /// Halfway between 0 and the negative threshold.
    pub fn negative_lambda(&self) -> f64 {
        self.negative / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mean: f64,
    pub deviation: f64,
}

/// Normal parameters per group and conviction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvictionParams([[NormalParams; 2]; 2]);

impl ConvictionParams {
    pub fn new(p_c1: NormalParams, p_c2: NormalParams, m_c1: NormalParams, m_c2: NormalParams) -> Self {
        Self([[p_c1, p_c2], [m_c1, m_c2]])
    }

    pub fn zero() -> Self {
        let z = NormalParams { mean: 0.0, deviation: 0.0 };
        Self([[z; 2]; 2])
    }

    pub fn get(&self, group: Group, conviction: Conviction) -> NormalParams {
        self.0[group as usize][conviction as usize]
    }

    pub fn get_mut(&mut self, group: Group, conviction: Conviction) -> &mut NormalParams {
        &mut self.0[group as usize][conviction as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    pub seed: u64,
    pub max_ticks: u64,
    /// Upper edge of the low pole for the polarization deadlock check.
    pub deadlock_low: f64,
    /// Lower edge of the high pole.
    pub deadlock_high: f64,
}

pub const DEFAULT_MAX_TICKS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub population: u32,
    pub margin_size: f64,
    pub stealth: f64,
    pub critical_faculty: f64,
    pub thresholds: Thresholds,
    pub init: ConvictionParams,
    pub noise: ConvictionParams,
    pub deltas: DeltaTable,
    pub engine: EngineParams,
}

impl Default for ModelConfig {
    /// The reference validation configuration with `p_c1_mean = 45`.
    fn default() -> Self {
        let n = |mean, deviation| NormalParams { mean, deviation };
        let mut deltas = DeltaTable::zero();
        for (name, value) in DEFAULT_DELTAS {
            let key = DeltaKey::parse(name).expect("default delta key");
            deltas.set(key, *value);
        }
        Self {
            population: 500,
            margin_size: 10.5,
            stealth: 1.0,
            critical_faculty: 50.0,
            thresholds: Thresholds { action: 66.6, positive: 50.0, negative: 15.0 },
            init: ConvictionParams::new(n(45.0, 20.0), n(33.3, 33.3), n(20.0, 20.0), n(1.0, 1.0)),
            noise: ConvictionParams::new(n(0.0, 1.5), n(0.0, 1.0), n(0.0, 1.5), n(0.0, 1.0)),
            deltas,
            engine: EngineParams {
                seed: 0,
                max_ticks: DEFAULT_MAX_TICKS,
                deadlock_low: 5.0,
                deadlock_high: 95.0,
            },
        }
    }
}

const DEFAULT_DELTAS: &[(&str, f64)] = &[
    ("p_c1_on_idle", -0.1),
    ("p_c2_on_idle", -0.1),
    ("m_c1_on_idle", -0.1),
    ("m_c2_on_idle", -0.1),
    ("p_c1_on_positive_to_p", 2.5),
    ("p_c1_on_positive_from_p", 5.0),
    ("p_c1_on_positive_to_m", 2.5),
    ("p_c1_on_positive_from_m", 5.0),
    ("m_c1_on_positive_to_p", 2.5),
    ("m_c1_on_positive_from_p", 5.0),
    ("m_c1_on_positive_to_m", 2.5),
    ("m_c1_on_positive_from_m", 5.0),
    ("p_c1_on_neutral_to_p", 1.0),
    ("p_c1_on_neutral_from_p", 2.5),
    ("p_c1_on_neutral_to_m", 2.0),
    ("p_c1_on_neutral_from_m", 2.5),
    ("m_c1_on_neutral_to_p", 1.0),
    ("m_c1_on_neutral_from_p", 2.5),
    ("m_c1_on_neutral_to_m", 2.0),
    ("m_c1_on_neutral_from_m", 2.5),
    ("p_c1_on_negative_to_p", -5.0),
    ("p_c1_on_negative_accepted_from_p", -10.0),
    ("p_c1_on_negative_rejected_from_p", 15.0),
    ("p_c1_on_negative_to_m", -10.0),
    ("p_c1_on_negative_accepted_from_m", -10.0),
    ("p_c1_on_negative_rejected_from_m", 30.0),
    ("p_c2_on_negative_to_p", -10.0),
    ("p_c2_on_negative_accepted_from_p", -10.0),
    ("p_c2_on_negative_rejected_from_p", 0.0),
    ("p_c2_on_negative_to_m", -50.0),
    ("p_c2_on_negative_accepted_from_m", -50.0),
    ("p_c2_on_negative_rejected_from_m", 50.0),
    ("m_c1_on_negative_to_p", -5.0),
    ("m_c1_on_negative_accepted_from_p", -10.0),
    ("m_c1_on_negative_rejected_from_p", 15.0),
    ("m_c1_on_negative_to_m", -10.0),
    ("m_c1_on_negative_accepted_from_m", -10.0),
    ("m_c1_on_negative_rejected_from_m", 30.0),
    ("m_c2_on_negative_to_p", -10.0),
    ("m_c2_on_negative_accepted_from_p", -10.0),
    ("m_c2_on_negative_rejected_from_p", 0.0),
    ("m_c2_on_negative_to_m", -50.0),
    ("m_c2_on_negative_accepted_from_m", -50.0),
    ("m_c2_on_negative_rejected_from_m", 50.0),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown configuration key `{key}`{}", at_line(*line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("invalid value `{value}` for `{key}`{}: {reason}", at_line(*line))]
    InvalidValue { key: String, value: String, reason: &'static str, line: Option<usize> },
    #[error("line {line}: `{key}` given more than once")]
    DuplicateKey { key: String, line: usize },
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" on line {l}")).unwrap_or_default()
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// A broken configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub key: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.rule)
    }
}

/// Addressable configuration parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigKey {
    Population,
    MarginSize,
    Stealth,
    CriticalFaculty,
    ActionThreshold,
    PositiveThreshold,
    NegativeThreshold,
    InitMean(Group, Conviction),
    InitDeviation(Group, Conviction),
    NoiseMean(Group, Conviction),
    NoiseDeviation(Group, Conviction),
    Delta(DeltaKey),
    EngineSeed,
    EngineMaxTicks,
    EngineDeadlockLow,
    EngineDeadlockHigh,
}

impl ConfigKey {
    /// Every key, in canonical serialization order.
    pub fn all() -> Vec<ConfigKey> {
        use ConfigKey::*;
        let mut keys = alloc::vec![
            Population,
            MarginSize,
            Stealth,
            CriticalFaculty,
            ActionThreshold,
            PositiveThreshold,
            NegativeThreshold,
        ];
        for g in Group::ALL {
            for c in Conviction::ALL {
                keys.push(InitMean(g, c));
                keys.push(InitDeviation(g, c));
            }
        }
        for g in Group::ALL {
            for c in Conviction::ALL {
                keys.push(NoiseMean(g, c));
                keys.push(NoiseDeviation(g, c));
            }
        }
        keys.extend(DeltaKey::all().into_iter().map(Delta));
        keys.extend([EngineSeed, EngineMaxTicks, EngineDeadlockLow, EngineDeadlockHigh]);
        keys
    }

    pub fn name(&self) -> String {
        use ConfigKey::*;
        match self {
            Population => "population".into(),
            MarginSize => "margin_size".into(),
            Stealth => "stealth".into(),
            CriticalFaculty => "critical_faculty".into(),
            ActionThreshold => "action_threshold".into(),
            PositiveThreshold => "positive_threshold".into(),
            NegativeThreshold => "negative_threshold".into(),
            InitMean(g, c) => format!("{}_{}_mean", g.prefix(), c.name()),
            InitDeviation(g, c) => format!("{}_{}_deviation", g.prefix(), c.name()),
            NoiseMean(g, c) => format!("{}_{}_noise_mean", g.prefix(), c.name()),
            NoiseDeviation(g, c) => format!("{}_{}_noise_deviation", g.prefix(), c.name()),
            Delta(key) => key.name(),
            EngineSeed => "engine_seed".into(),
            EngineMaxTicks => "engine_max_ticks".into(),
            EngineDeadlockLow => "engine_deadlock_low".into(),
            EngineDeadlockHigh => "engine_deadlock_high".into(),
        }
    }

    pub fn parse(name: &str) -> Option<ConfigKey> {
        if let Some(delta) = DeltaKey::parse(name) {
            return Some(ConfigKey::Delta(delta));
        }
        ConfigKey::all().into_iter().find(|k| !matches!(k, ConfigKey::Delta(_)) && k.name() == name)
    }

    /// Structural keys shape the society at setup and cannot change mid-run.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            ConfigKey::Population
                | ConfigKey::MarginSize
                | ConfigKey::InitMean(..)
                | ConfigKey::InitDeviation(..)
                | ConfigKey::EngineSeed
        )
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, ConfigKey::Population | ConfigKey::EngineSeed | ConfigKey::EngineMaxTicks)
    }

    /// Heading the key is grouped under in config files.
    pub fn section(&self) -> &'static str {
        section_of(self)
    }

    /// Inclusive range accepted by [`validate`]; the upper bound of
    /// deviations and integer keys is unbounded.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ConfigKey::NoiseMean(..) | ConfigKey::Delta(_) => (-100.0, 100.0),
            ConfigKey::InitDeviation(..) | ConfigKey::NoiseDeviation(..) => (0.0, f64::INFINITY),
            ConfigKey::Population | ConfigKey::EngineMaxTicks => (1.0, f64::INFINITY),
            ConfigKey::EngineSeed => (0.0, f64::INFINITY),
            _ => (0.0, 100.0),
        }
    }

    /// Current value, formatted as it appears in config files.
    pub fn read(&self, config: &ModelConfig) -> String {
        match self {
            ConfigKey::Population => config.population.to_string(),
            ConfigKey::EngineSeed => config.engine.seed.to_string(),
            ConfigKey::EngineMaxTicks => config.engine.max_ticks.to_string(),
            _ => format!("{}", self.real_value(config)),
        }
    }

    /// Parse `text` and store it. Range checks are left to [`validate`].
    pub fn write(&self, config: &mut ModelConfig, text: &str) -> Result<(), ConfigError> {
        let text = text.trim();
        let invalid = |reason| ConfigError::InvalidValue {
            key: self.name(),
            value: text.to_owned(),
            reason,
            line: None,
        };
        if self.is_integer() {
            let value: u64 = text.parse().map_err(|_| invalid("expected a non-negative integer"))?;
            match self {
                ConfigKey::Population => {
                    config.population = u32::try_from(value).map_err(|_| invalid("population too large"))?
                }
                ConfigKey::EngineSeed => config.engine.seed = value,
                _ => config.engine.max_ticks = value,
            }
            return Ok(());
        }
        let value: f64 = text.parse().map_err(|_| invalid("expected a number"))?;
        if !value.is_finite() {
            return Err(invalid("expected a finite number"));
        }
        *self.real_slot(config) = value;
        Ok(())
    }

    fn real_value(&self, config: &ModelConfig) -> f64 {
        use ConfigKey::*;
        match *self {
            MarginSize => config.margin_size,
            Stealth => config.stealth,
            CriticalFaculty => config.critical_faculty,
            ActionThreshold => config.thresholds.action,
            PositiveThreshold => config.thresholds.positive,
            NegativeThreshold => config.thresholds.negative,
            InitMean(g, c) => config.init.get(g, c).mean,
            InitDeviation(g, c) => config.init.get(g, c).deviation,
            NoiseMean(g, c) => config.noise.get(g, c).mean,
            NoiseDeviation(g, c) => config.noise.get(g, c).deviation,
            Delta(key) => config.deltas.get(key),
            EngineDeadlockLow => config.engine.deadlock_low,
            EngineDeadlockHigh => config.engine.deadlock_high,
            Population | EngineSeed | EngineMaxTicks => unreachable!("integer key"),
        }
    }

    fn real_slot<'a>(&self, config: &'a mut ModelConfig) -> &'a mut f64 {
        use ConfigKey::*;
        match *self {
            MarginSize => &mut config.margin_size,
            Stealth => &mut config.stealth,
            CriticalFaculty => &mut config.critical_faculty,
            ActionThreshold => &mut config.thresholds.action,
            PositiveThreshold => &mut config.thresholds.positive,
            NegativeThreshold => &mut config.thresholds.negative,
            InitMean(g, c) => &mut config.init.get_mut(g, c).mean,
            InitDeviation(g, c) => &mut config.init.get_mut(g, c).deviation,
            NoiseMean(g, c) => &mut config.noise.get_mut(g, c).mean,
            NoiseDeviation(g, c) => &mut config.noise.get_mut(g, c).deviation,
            Delta(key) => config.deltas.get_mut(key),
            EngineDeadlockLow => &mut config.engine.deadlock_low,
            EngineDeadlockHigh => &mut config.engine.deadlock_high,
            Population | EngineSeed | EngineMaxTicks => unreachable!("integer key"),
        }
    }
}

impl ModelConfig {
    pub fn get(&self, key: &str) -> Option<String> {
        ConfigKey::parse(key).map(|k| k.read(self))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = ConfigKey::parse(key)
            .ok_or_else(|| ConfigError::UnknownKey { key: key.to_owned(), line: None })?;
        k.write(self, value)
    }

    /// Count of marginalized agents: `floor(population * margin_size / 100)`.
    pub fn marginalized_count(&self) -> u32 {
        let exact = f64::from(self.population) * self.margin_size / 100.0;
        // guard against 10.5% of 200 landing a hair under 21
        libm::floor(exact + 1e-9).clamp(0.0, f64::from(self.population)) as u32
    }

    pub fn deadlock_poles(&self) -> (f64, f64) {
        (self.engine.deadlock_low, self.engine.deadlock_high)
    }
}

/// Parse the flat `key = value` format on top of [`ModelConfig::default`].
pub fn parse_config(text: &str) -> Result<ModelConfig, ConfigError> {
    parse_config_onto(ModelConfig::default(), text)
}

/// Like [`parse_config`], overlaying onto `base` instead of the defaults.
pub fn parse_config_onto(mut config: ModelConfig, text: &str) -> Result<ModelConfig, ConfigError> {
    let mut seen: Vec<ConfigKey> = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Parse { line, message: "missing key".into() });
        }
        let parsed = ConfigKey::parse(key)
            .ok_or_else(|| ConfigError::UnknownKey { key: key.to_owned(), line: Some(line) })?;
        if seen.contains(&parsed) {
            return Err(ConfigError::DuplicateKey { key: key.to_owned(), line });
        }
        seen.push(parsed);
        parsed.write(&mut config, value).map_err(|e| match e {
            ConfigError::InvalidValue { key, value, reason, .. } => {
                ConfigError::InvalidValue { key, value, reason, line: Some(line) }
            }
            other => other,
        })?;
    }
    Ok(config)
}

/// Canonical text form: every key once, grouped by section.
pub fn serialize_config(config: &ModelConfig) -> String {
    let mut out = String::new();
    let mut section = "";
    for key in ConfigKey::all() {
        let heading = key.section();
        if heading != section {
            if !section.is_empty() {
                out.push('\n');
            }
            out.push_str("# ");
            out.push_str(heading);
            out.push('\n');
            section = heading;
        }
        out.push_str(&format!("{} = {}\n", key.name(), key.read(config)));
    }
    out
}

fn section_of(key: &ConfigKey) -> &'static str {
    use ConfigKey::*;
    match key {
        Population | MarginSize | Stealth | CriticalFaculty => "general",
        ActionThreshold | PositiveThreshold | NegativeThreshold => "thresholds",
        InitMean(..) | InitDeviation(..) => "conviction initialization",
        NoiseMean(..) | NoiseDeviation(..) => "noise",
        Delta(d) => match d.event {
            DeltaEvent::Idle => "idle",
            DeltaEvent::PositiveTo | DeltaEvent::PositiveFrom => "positive reactions",
            DeltaEvent::NeutralTo | DeltaEvent::NeutralFrom => "neutral reactions",
            _ => "negative reactions",
        },
        EngineSeed | EngineMaxTicks | EngineDeadlockLow | EngineDeadlockHigh => "engine",
    }
}

/// All broken invariants; empty when the configuration is usable.
pub fn validate(config: &ModelConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |key: String, rule: String| out.push(Violation { key, rule });

    if config.population == 0 {
        push("population".into(), "must be at least 1".into());
    }
    if config.engine.max_ticks == 0 {
        push("engine_max_ticks".into(), "must be at least 1".into());
    }
    for key in ConfigKey::all() {
        if key.is_integer() {
            continue;
        }
        let value = key.real_value(config);
        let (lo, hi) = key.bounds();
        if !(value >= lo && value <= hi) || value.is_nan() {
            let rule = if hi.is_infinite() {
                format!("must be finite and non-negative, got {value}")
            } else {
                format!("must lie in [{lo}, {hi}], got {value}")
            };
            push(key.name(), rule);
        } else if hi.is_infinite() && !value.is_finite() {
            push(key.name(), format!("must be finite, got {value}"));
        }
    }
    let t = &config.thresholds;
    if !(t.negative < t.positive) {
        push(
            "negative_threshold".into(),
            format!("must be below positive_threshold ({} >= {})", t.negative, t.positive),
        );
    }
    let (low, high) = config.deadlock_poles();
    if !(low < high) {
        push(
            "engine_deadlock_low".into(),
            format!("must be below engine_deadlock_high ({low} >= {high})"),
        );
    }
    out
}

/// Validate, turning violations into an error.
pub fn ensure_valid(config: &ModelConfig) -> Result<(), ConfigError> {
    let violations = validate(config);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

/// FNV-1a over the canonical text, seed excluded, so every run of an
/// ensemble shares one hash.
pub fn config_hash(config: &ModelConfig) -> u64 {
    let mut unseeded = config.clone();
    unseeded.engine.seed = 0;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in serialize_config(&unseeded).bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
