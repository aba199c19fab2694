//! Run configuration: JSON, unknown keys rejected, defaults filled in.
//!
//! Circuit parameters are SI (Hz, rad/s, A); flux bias in radians; powers in
//! dBm. Everything else is converted at the module boundaries.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, CouplingMethod};
use crate::error::{Error, Result};
use crate::optimizer::{Imperfection, Slice, SweepPlan};
use crate::perturbation::{PerturbativeModel, SaturationRoute};
use crate::dynamics::ModelSpec;
use crate::units::TWO_PI;

fn default_circuit() -> CircuitParams {
    CircuitParams::baseline(3.5)
}

fn default_phi_exts() -> Vec<f64> {
    vec![TWO_PI]
}

fn default_alphas() -> Vec<f64> {
    vec![0.0]
}

fn default_method() -> CouplingMethod {
    CouplingMethod::Analytic
}

fn default_route() -> SaturationRoute {
    SaturationRoute::Exact
}

fn default_inv_p() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Template circuit; sweeps override `beta` and `zeta` per point.
    #[serde(default = "default_circuit")]
    pub circuit: CircuitParams,
    /// Dynamics model, integrator, pump search and curve settings.
    #[serde(default)]
    pub plan: SweepPlan,
    pub task: Task,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Couplings {
        betas: Vec<f64>,
        #[serde(default = "default_phi_exts")]
        phi_exts: Vec<f64>,
        #[serde(default = "default_method")]
        method: CouplingMethod,
    },
    Stability {
        betas: Vec<f64>,
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
    },
    /// Gain curve of the template circuit at its optimized pump. An empty
    /// power list scans until the criterion is crossed.
    GainCurve {
        #[serde(default)]
        powers_dbm: Vec<f64>,
    },
    /// Saturation flux versus `beta` on resonance, per dynamics model and per
    /// perturbative model.
    BetaSweep {
        betas: Vec<f64>,
        #[serde(default = "default_inv_p")]
        inv_p: f64,
        #[serde(default)]
        time_domain: Vec<ModelSpec>,
        #[serde(default)]
        perturbative: Vec<PerturbativeModel>,
        #[serde(default = "default_route")]
        route: SaturationRoute,
    },
    GridSweep {
        betas: Vec<f64>,
        inv_ps: Vec<f64>,
    },
    ConvergenceMap {
        betas: Vec<f64>,
        inv_ps: Vec<f64>,
    },
    Imperfection {
        imperfection: Imperfection,
        slice: Slice,
    },
}

impl Task {
    pub const VERBS: [&'static str; 7] =
        ["couplings", "stability", "gain-curve", "beta-sweep", "grid-sweep", "convergence-map", "imperfection"];

    pub fn verb(&self) -> &'static str {
        match self {
            Task::Couplings { .. } => "couplings",
            Task::Stability { .. } => "stability",
            Task::GainCurve { .. } => "gain-curve",
            Task::BetaSweep { .. } => "beta-sweep",
            Task::GridSweep { .. } => "grid-sweep",
            Task::ConvergenceMap { .. } => "convergence-map",
            Task::Imperfection { .. } => "imperfection",
        }
    }

    /// Fields without defaults, for error messages.
    pub fn required_fields(verb: &str) -> &'static [&'static str] {
        match verb {
            "couplings" | "stability" => &["betas"],
            "gain-curve" => &[],
            "beta-sweep" => &["betas"],
            "grid-sweep" | "convergence-map" => &["betas", "inv_ps"],
            "imperfection" => &["imperfection", "slice"],
            _ => &[],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        self.plan.model.validate()?;
        let nonempty = |name: &str, v: &[f64]| {
            if v.is_empty() {
                Err(Error::Config(format!("task.{name}: must not be empty")))
            } else {
                Ok(())
            }
        };
        match &self.task {
            Task::Couplings { betas, phi_exts, .. } => {
                nonempty("betas", betas)?;
                nonempty("phi_exts", phi_exts)
            }
            Task::Stability { betas, alphas } => {
                nonempty("betas", betas)?;
                nonempty("alphas", alphas)
            }
            Task::GainCurve { .. } => Ok(()),
            Task::BetaSweep { betas, time_domain, perturbative, .. } => {
                nonempty("betas", betas)?;
                for m in time_domain {
                    m.validate()?;
                }
                if time_domain.is_empty() && perturbative.is_empty() {
                    return Err(Error::Config("task: beta-sweep needs time_domain or perturbative models".into()));
                }
                Ok(())
            }
            Task::GridSweep { betas, inv_ps } | Task::ConvergenceMap { betas, inv_ps } => {
                nonempty("betas", betas)?;
                nonempty("inv_ps", inv_ps)
            }
            Task::Imperfection { slice, .. } => match slice {
                Slice::Beta { betas, .. } => nonempty("slice.betas", betas),
                Slice::InvP { inv_ps, .. } => nonempty("slice.inv_ps", inv_ps),
            },
        }
    }
}

/// Parses and validates a config. Schema errors carry the offending path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut msg = format!("{path}: {inner}");
        if path == "task" || path.starts_with("task.") {
            msg.push_str(&format!("; task.kind is one of {}", Task::VERBS.join(", ")));
            for v in Task::VERBS {
                let req = Task::required_fields(v);
                if !req.is_empty() {
                    msg.push_str(&format!("; {v} requires {}", req.join(", ")));
                }
            }
        }
        Error::Config(msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn save_config(path: impl AsRef<Path>, cfg: &RunConfig) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}
