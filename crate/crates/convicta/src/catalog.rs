//! Scenario lookup: bundled scenarios plus `*.conf` files from a directory.
//!
//! The directory comes from `CONVICTA_SCENARIO_DIR` unless given explicitly.
//! A file's stem is its scenario name; bundled names take precedence.

use std::fs;
use std::path::{Path, PathBuf};

use convicta_core::config::ConfigError;
use convicta_core::scenario::{self, Scenario, ScenarioSource};

pub const SCENARIO_DIR_ENV: &str = "CONVICTA_SCENARIO_DIR";

#[derive(Debug, Clone, Default)]
pub struct ScenarioCatalog {
    dir: Option<PathBuf>,
}

impl ScenarioCatalog {
    pub fn bundled_only() -> Self {
        Self { dir: None }
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    pub fn from_env() -> Self {
        Self { dir: std::env::var_os(SCENARIO_DIR_ENV).map(PathBuf::from) }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn user_files(&self) -> Vec<(String, PathBuf)> {
        let Some(dir) = &self.dir else { return Vec::new() };
        let Ok(entries) = fs::read_dir(dir) else { return Vec::new() };
        let mut files: Vec<(String, PathBuf)> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "conf"))
            .filter_map(|p| {
                let stem = p.file_stem()?.to_str()?.to_owned();
                (scenario::bundled_text(&stem).is_none()).then_some((stem, p))
            })
            .collect();
        files.sort();
        files
    }

    /// All scenario names: bundled first, then directory files by name.
    pub fn names(&self) -> Vec<String> {
        scenario::bundled_names()
            .map(str::to_owned)
            .chain(self.user_files().into_iter().map(|(n, _)| n))
            .collect()
    }

    /// Every scenario that loads, with the errors of those that do not.
    pub fn list(&self) -> (Vec<Scenario>, Vec<(String, ConfigError)>) {
        let mut ok = Vec::new();
        let mut bad = Vec::new();
        for name in self.names() {
            match self.scenario(&name) {
                Ok(s) => ok.push(s),
                Err(e) => bad.push((name, e)),
            }
        }
        (ok, bad)
    }
}

impl ScenarioSource for ScenarioCatalog {
    fn scenario(&self, name: &str) -> Result<Scenario, ConfigError> {
        if let Some(text) = scenario::bundled_text(name) {
            return scenario::parse_scenario(name, text);
        }
        let path = self
            .user_files()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| ConfigError::UnknownScenario(name.to_owned()))?;
        let text = fs::read_to_string(&path).map_err(|e| ConfigError::Parse {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        scenario::parse_scenario(name, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_scenarios_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tiny.conf"), "# A tiny society.\n\npopulation = 20\n").unwrap();
        fs::write(dir.path().join("trial1.conf"), "population = 3\n").unwrap();
        fs::write(dir.path().join("broken.conf"), "population = many\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let cat = ScenarioCatalog::with_dir(dir.path());
        assert_eq!(cat.names(), ["default", "trial1", "trial2", "broken", "tiny"]);
        let tiny = cat.scenario("tiny").unwrap();
        assert_eq!(tiny.config.population, 20);
        assert_eq!(tiny.description, "A tiny society.");
        assert_eq!(cat.scenario("trial1").unwrap().config.population, 500);
        let (ok, bad) = cat.list();
        assert_eq!(ok.len(), 4);
        assert_eq!(bad[0].0, "broken");
        assert!(matches!(cat.scenario("notes"), Err(ConfigError::UnknownScenario(_))));
    }

    #[test]
    fn missing_directory_means_bundled_only() {
        let cat = ScenarioCatalog::with_dir("/nonexistent/convicta");
        assert_eq!(cat.names(), ScenarioCatalog::bundled_only().names());
    }
}
