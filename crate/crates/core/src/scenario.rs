//! Named, described configurations.
//!
//! A scenario file is a config file whose leading comment block (up to the
//! first blank or non-comment line) is the scenario's description.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{parse_config, ConfigError, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub config: ModelConfig,
}

const BUNDLED: [(&str, &str); 3] = [
    ("default", include_str!("../scenarios/default.conf")),
    ("trial1", include_str!("../scenarios/trial1.conf")),
    ("trial2", include_str!("../scenarios/trial2.conf")),
];

/// Source of scenarios by name.
pub trait ScenarioSource {
    fn scenario(&self, name: &str) -> Result<Scenario, ConfigError>;
}

/// The scenarios compiled into this crate.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bundled;

impl ScenarioSource for Bundled {
    fn scenario(&self, name: &str) -> Result<Scenario, ConfigError> {
        load_scenario(name)
    }
}

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn load_scenario(name: &str) -> Result<Scenario, ConfigError> {
    let text = bundled_text(name).ok_or_else(|| ConfigError::UnknownScenario(name.to_owned()))?;
    parse_scenario(name, text)
}

pub fn bundled_scenarios() -> Vec<Scenario> {
    bundled_names().map(|n| load_scenario(n).expect("bundled scenario parses")).collect()
}

pub fn parse_scenario(name: &str, text: &str) -> Result<Scenario, ConfigError> {
    Ok(Scenario {
        name: name.to_owned(),
        description: description_of(text),
        config: parse_config(text)?,
    })
}

fn description_of(text: &str) -> String {
    let mut lines = Vec::new();
    for line in text.lines() {
        let Some(comment) = line.trim_start().strip_prefix('#') else { break };
        lines.push(comment.strip_prefix(' ').unwrap_or(comment).trim_end());
    }
    lines.join("\n").trim().to_owned()
}
