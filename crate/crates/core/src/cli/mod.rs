//! Command-line front end: configuration schema, task dispatch and outputs.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::{load_config, parse_config, save_config, RunConfig, Task};
pub use run::{config_hash, run, JobStatus, RunManifest, CODE_VERSION};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Couplings,
    GainCurve,
    BetaSweep,
    GridSweep,
    ConvergenceMap,
    Imperfection,
    Stability,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Couplings => "couplings",
            Verb::GainCurve => "gain-curve",
            Verb::BetaSweep => "beta-sweep",
            Verb::GridSweep => "grid-sweep",
            Verb::ConvergenceMap => "convergence-map",
            Verb::Imperfection => "imperfection",
            Verb::Stability => "stability",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jpa-sim", version, about = "Simulate and optimize ring-modulator parametric amplifiers")]
pub struct Cli {
    pub verb: Verb,
    /// JSON run configuration; its task kind must match the verb.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config; default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Steady-state cache directory (overrides the config).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Saturation criterion in dB (overrides the config).
    #[arg(long)]
    pub criterion_db: Option<f64>,
    /// Reuse journaled job results from a previous run in the same output directory.
    #[arg(long)]
    pub resume: bool,
}

impl Cli {
    /// Loads the config and applies the command-line overrides.
    pub fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = load_config(&self.config)?;
        if cfg.task.verb() != self.verb.name() {
            return Err(Error::Config(format!(
                "config task is {} but the verb is {}",
                cfg.task.verb(),
                self.verb.name()
            )));
        }
        if let Some(j) = self.jobs {
            cfg.jobs = Some(j);
        }
        if let Some(c) = &self.cache {
            cfg.cache = Some(c.clone());
        }
        if let Some(c) = self.criterion_db {
            if !(c > 0.0) {
                return Err(Error::Config(format!("--criterion-db must be positive, got {c}")));
            }
            cfg.plan.curve.criterion_db = c;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}
