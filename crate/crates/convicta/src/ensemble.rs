//! Ensembles run in parallel on a dedicated thread pool.
//!
//! Seeds are `base_seed..base_seed + runs`; results are returned in seed
//! order, so the output does not depend on the number of workers.

use convicta_core::config::{ensure_valid, ConfigError};
use convicta_core::run::{run, EnsembleSummary, RunResult};
use convicta_core::ModelConfig;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub summary: EnsembleSummary,
    /// One result per seed, in seed order.
    pub results: Vec<RunResult>,
}

/// Run `runs` seeds with `workers` threads (0 picks the number of CPUs).
pub fn run_ensemble(
    config: &ModelConfig,
    base_seed: u64,
    runs: u32,
    workers: usize,
) -> Result<EnsembleOutput, ConfigError> {
    ensure_valid(config)?;
    let runs = runs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool starts");
    let max_ticks = config.engine.max_ticks;
    let results = pool.install(|| {
        (0..u64::from(runs))
            .into_par_iter()
            .map(|i| run(config, base_seed.wrapping_add(i), max_ticks))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = EnsembleSummary::from_outlines(results.iter().map(RunResult::outline).collect());
    Ok(EnsembleOutput { summary, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use convicta_core::ensemble;

    #[test]
    fn worker_count_does_not_matter() {
        let mut c = ModelConfig::default();
        c.population = 80;
        c.engine.max_ticks = 200;
        let one = run_ensemble(&c, 10, 6, 1).unwrap();
        let four = run_ensemble(&c, 10, 6, 4).unwrap();
        assert_eq!(one.summary, four.summary);
        assert_eq!(one.results, four.results);
        assert_eq!(one.summary, ensemble(&c, 10, 6).unwrap());
        assert_eq!(one.results.iter().map(|r| r.seed).collect::<Vec<_>>(), (10..16).collect::<Vec<_>>());
    }
}
