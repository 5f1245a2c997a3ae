//! Human-readable (`key: value`) and JSON summaries of runs and ensembles.

use std::fmt::Write as _;

use convicta_core::run::{EnsembleSummary, RunResult};
use convicta_core::{StopReason, TickMetrics};
use serde::Serialize;

/// Headline numbers of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub stop_kind: StopReason,
    pub stop_label: String,
    pub stop_tick: u64,
    pub population: u32,
    pub marginalized: u32,
    pub initial: TickMetrics,
    pub final_metrics: TickMetrics,
}

impl RunSummary {
    pub fn new(scenario: &str, result: &RunResult) -> Self {
        let last = result.final_metrics();
        Self {
            scenario: scenario.to_owned(),
            seed: result.seed,
            config_hash: format!("{:016x}", result.config_hash),
            stop_kind: result.stop.kind,
            stop_label: result.stop.kind.label().to_owned(),
            stop_tick: result.stop.tick_reached,
            population: last.all.count,
            marginalized: last.m.count,
            initial: result.initial.clone(),
            final_metrics: last.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}: {v}");
        };
        kv("scenario", self.scenario.clone());
        kv("seed", self.seed.to_string());
        kv("config_hash", self.config_hash.clone());
        kv("stop", self.stop_label.clone());
        kv("stop_kind", self.stop_kind.id().to_owned());
        kv("stop_tick", self.stop_tick.to_string());
        kv(
            "population",
            format!(
                "{} + {} = {}",
                self.population - self.marginalized,
                self.marginalized,
                self.population
            ),
        );
        for (prefix, m) in [("initial", &self.initial), ("final", &self.final_metrics)] {
            for (slice, s) in [("all", &m.all), ("p", &m.p), ("m", &m.m)] {
                kv(&format!("{prefix}_mean_c1_{slice}"), format!("{:.4}", s.mean_c1));
                kv(&format!("{prefix}_mean_c2_{slice}"), format!("{:.4}", s.mean_c2));
                kv(
                    &format!("{prefix}_pct_potential_perpetrators_{slice}"),
                    format!("{:.4}", s.pct_potential_perpetrators),
                );
                kv(
                    &format!("{prefix}_pct_positive_reactors_{slice}"),
                    format!("{:.4}", s.pct_positive_reactors),
                );
                kv(
                    &format!("{prefix}_pct_negative_reactors_{slice}"),
                    format!("{:.4}", s.pct_negative_reactors),
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn ensemble_text(scenario: &str, summary: &EnsembleSummary) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("scenario", scenario.to_owned());
    kv("runs", summary.runs.to_string());
    kv("base_seed", summary.base_seed.to_string());
    for reason in StopReason::ALL {
        kv(
            &format!("stop_{}", reason.id()),
            format!("{} ({:.1}%)", summary.stop_counts.get(reason), 100.0 * summary.fraction(reason)),
        );
    }
    kv("modal_stop", summary.stop_counts.modal().label().to_owned());
    kv("end_tick_min", summary.end_tick.min.to_string());
    kv("end_tick_median", format!("{}", summary.end_tick.median));
    kv("end_tick_max", summary.end_tick.max.to_string());
    kv("final_mean_c1_all_mean", format!("{:.4}", summary.final_mean_c1_all.mean));
    kv("final_mean_c1_all_sd", format!("{:.4}", summary.final_mean_c1_all.std_dev));
    kv("final_mean_c2_all_mean", format!("{:.4}", summary.final_mean_c2_all.mean));
    kv("final_mean_c2_all_sd", format!("{:.4}", summary.final_mean_c2_all.std_dev));
    out
}

#[derive(Serialize)]
struct EnsembleJson<'a> {
    scenario: &'a str,
    #[serde(flatten)]
    summary: &'a EnsembleSummary,
}

pub fn ensemble_json(scenario: &str, summary: &EnsembleSummary) -> String {
    serde_json::to_string_pretty(&EnsembleJson { scenario, summary }).expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use convicta_core::{ensemble, run, ModelConfig};

    fn small() -> ModelConfig {
        let mut c = ModelConfig::default();
        c.population = 60;
        c.engine.max_ticks = 40;
        c
    }

    #[test]
    fn run_summary_text_and_json() {
        let r = run(&small(), 5, 40).unwrap();
        let s = RunSummary::new("custom", &r);
        let text = s.to_text();
        assert!(text.contains("seed: 5\n"));
        assert!(text.contains(&format!("stop_tick: {}\n", r.stop.tick_reached)));
        assert!(text.contains("population: 54 + 6 = 60\n"), "{text}");
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["seed"], 5);
        assert_eq!(v["stop_label"], r.stop.kind.label());
    }

    #[test]
    fn ensemble_summary_text_and_json() {
        let s = ensemble(&small(), 3, 4).unwrap();
        let text = ensemble_text("x", &s);
        assert!(text.contains("runs: 4\n"));
        assert!(text.contains("base_seed: 3\n"));
        let v: serde_json::Value = serde_json::from_str(&ensemble_json("x", &s)).unwrap();
        assert_eq!(v["scenario"], "x");
        assert_eq!(v["runs"], 4);
        assert_eq!(v["outlines"].as_array().unwrap().len(), 4);
    }
}
