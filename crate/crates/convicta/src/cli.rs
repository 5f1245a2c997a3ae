//! The `convicta` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use convicta_core::config::{parse_config, serialize_config, validate, ConfigError, ModelConfig};
use convicta_core::scenario::ScenarioSource;
use convicta_core::run;

use crate::catalog::ScenarioCatalog;
use crate::csv_io::write_csv;
use crate::ensemble::run_ensemble;
use crate::report::{ensemble_json, ensemble_text, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "convicta", version, about = "Agent-based simulation of microaggressions in a society")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its series and summary.
    Run(RunArgs),
    /// Run many seeds and summarize how they ended.
    Ensemble(EnsembleArgs),
    /// List scenarios, or print one scenario's full configuration.
    Scenarios {
        /// Scenario to print.
        name: Option<String>,
    },
    /// Check a configuration and print its violations.
    Validate(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Named scenario (bundled or from $CONVICTA_SCENARIO_DIR). Defaults to `default`.
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Seed; defaults to the configuration's `engine_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tick budget; defaults to the configuration's `engine_max_ticks`.
    #[arg(long)]
    pub max_ticks: Option<u64>,
    /// Output directory; defaults to `./out/<scenario>-<seed>/`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of runs; seeds are `seed..seed+runs`.
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    pub parallel: usize,
}

/// A resolved configuration and the name outputs are labelled with.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub name: String,
    pub config: ModelConfig,
}

impl ConfigArgs {
    /// Load the file or scenario and apply overrides, without validating.
    pub fn load(&self, catalog: &dyn ScenarioSource) -> Result<Loaded> {
        let (name, mut config) = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                let config = parse_config(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config").to_owned();
                (stem, config)
            }
            None => {
                let name = self.scenario.as_deref().unwrap_or("default");
                (name.to_owned(), catalog.scenario(name)?.config)
            }
        };
        for o in &self.overrides {
            let Some((key, value)) = o.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{o}`");
            };
            config.set(key.trim(), value.trim()).with_context(|| format!("--set {o}"))?;
        }
        Ok(Loaded { name, config })
    }
}

impl RunArgs {
    fn resolve(&self, catalog: &dyn ScenarioSource) -> Result<(Loaded, u64)> {
        let mut loaded = self.config.load(catalog)?;
        if let Some(max) = self.max_ticks {
            loaded.config.engine.max_ticks = max;
        }
        let seed = self.seed.unwrap_or(loaded.config.engine.seed);
        loaded.config.engine.seed = seed;
        check(&loaded.config)?;
        Ok((loaded, seed))
    }
}

fn check(config: &ModelConfig) -> Result<()> {
    let violations = validate(config);
    if violations.is_empty() {
        return Ok(());
    }
    Err(ConfigError::Invalid(violations).into())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn out_dir(explicit: &Option<PathBuf>, default: String) -> Result<PathBuf> {
    let dir = explicit.clone().unwrap_or_else(|| Path::new("out").join(default));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

/// Execute a parsed command, writing human output to `stdout`.
pub fn execute(cli: Cli, catalog: &ScenarioCatalog, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let (loaded, seed) = args.resolve(catalog)?;
            let dir = out_dir(&args.out, format!("{}-{seed}", loaded.name))?;
            let result = run(&loaded.config, seed, loaded.config.engine.max_ticks)?;
            let mut csv = Vec::new();
            write_csv(&result.series, &mut csv)?;
            write_file(&dir.join("series.csv"), &csv)?;
            let summary = RunSummary::new(&loaded.name, &result);
            let text = summary.to_text();
            write_file(&dir.join("summary"), text.as_bytes())?;
            write_file(&dir.join("summary.json"), summary.to_json().as_bytes())?;
            write!(stdout, "{text}")?;
            writeln!(stdout, "output: {}", dir.display())?;
        }
        Command::Ensemble(args) => {
            let (loaded, seed) = args.run.resolve(catalog)?;
            let dir = out_dir(&args.run.out, format!("{}-ensemble-{seed}", loaded.name))?;
            let output = run_ensemble(&loaded.config, seed, args.runs, args.parallel)?;
            for r in &output.results {
                let mut csv = Vec::new();
                write_csv(&r.series, &mut csv)?;
                write_file(&dir.join(format!("run-{}.csv", r.seed)), &csv)?;
            }
            let text = ensemble_text(&loaded.name, &output.summary);
            write_file(&dir.join("ensemble_summary"), text.as_bytes())?;
            write_file(&dir.join("ensemble_summary.json"), ensemble_json(&loaded.name, &output.summary).as_bytes())?;
            write!(stdout, "{text}")?;
            writeln!(stdout, "output: {}", dir.display())?;
        }
        Command::Scenarios { name: Some(name) } => {
            let s = catalog.scenario(&name)?;
            for line in s.description.lines() {
                writeln!(stdout, "# {line}")?;
            }
            writeln!(stdout)?;
            write!(stdout, "{}", serialize_config(&s.config))?;
        }
        Command::Scenarios { name: None } => {
            let (scenarios, broken) = catalog.list();
            for s in &scenarios {
                writeln!(stdout, "{}", s.name)?;
                for line in s.description.lines() {
                    writeln!(stdout, "    {line}")?;
                }
            }
            if let Some((name, err)) = broken.first() {
                bail!("scenario `{name}` does not load: {err}");
            }
        }
        Command::Validate(args) => {
            let loaded = args.load(catalog)?;
            check(&loaded.config)?;
            writeln!(stdout, "{}: ok", loaded.name)?;
        }
    }
    Ok(())
}

/// Format an error for the terminal; violations go one per line.
pub fn render_error(err: &anyhow::Error) -> String {
    if let Some(ConfigError::Invalid(violations)) = err.downcast_ref::<ConfigError>() {
        let mut msg = String::from("error: invalid configuration");
        for v in violations {
            msg.push_str(&format!("\n  {v}"));
        }
        return msg;
    }
    let mut msg = format!("error: {err}");
    for cause in err.chain().skip(1) {
        msg.push_str(&format!("\n  caused by: {cause}"));
    }
    msg
}
