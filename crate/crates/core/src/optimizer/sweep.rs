//! Grid sweeps over `(beta, 1/p)`, truncation-order maps and imperfection slices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::ResultCache;
use super::curve::{scan_saturation, CurveOptions, SaturationKind};
use super::pump::{optimize_pump, PumpConfig, PumpSearch, Simulator};
use crate::circuit::CircuitParams;
use crate::dynamics::{flux_from_power, ModelSpec, SteadyOptions};
use crate::error::Result;
use crate::units::dbm_to_watts;

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub model: ModelSpec,
    pub steady: SteadyOptions,
    pub search: PumpSearch,
    pub curve: CurveOptions,
    /// Also compute the minimum truncation order at each point.
    pub min_order: bool,
    pub order_tol_db: f64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            model: ModelSpec::full(),
            steady: SteadyOptions::default(),
            search: PumpSearch::default(),
            curve: CurveOptions::default(),
            min_order: false,
            order_tol_db: 0.3,
        }
    }
}

/// One grid point; `sat_power_dbm` is empty where the target gain is unreachable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub inv_p: f64,
    pub phi_ext: f64,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(with = "crate::dynamics::steady::nan_as_null")]
    pub delta: f64,
    #[serde(with = "crate::dynamics::steady::nan_as_null")]
    pub eps_p: f64,
    #[serde(with = "crate::dynamics::steady::nan_as_null")]
    pub amp_pump: f64,
    pub sat_power_dbm: Option<f64>,
    pub sat_kind: Option<SaturationKind>,
    pub min_order: Option<u8>,
    pub converged: bool,
    pub reachable: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Row with the highest saturation power.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.sat_power_dbm.is_some())
            .max_by(|a, b| a.sat_power_dbm.unwrap().total_cmp(&b.sat_power_dbm.unwrap()))
    }

    pub fn get(&self, beta: f64, inv_p: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| (r.beta - beta).abs() < 1e-9 && (r.inv_p - inv_p).abs() < 1e-9)
    }
}

/// Smallest order in `3..=8` whose small-signal gain at `pump` lies within
/// `tol_db` of `target_db`; 9 when none does.
pub fn min_truncation_order(sim: &Simulator, pump: &PumpConfig, target_db: f64, tol_db: f64, probe_dbm: f64) -> Result<u8> {
    let probe = flux_from_power(dbm_to_watts(probe_dbm), &sim.params)?;
    let drive = pump.drive(&sim.params, probe)?;
    for n in 3..=8u8 {
        let r = sim.with_model(ModelSpec::soft(n)).run(&drive)?;
        if r.converged && !r.diverged && (r.gain_db - target_db).abs() <= tol_db {
            return Ok(n);
        }
    }
    Ok(9)
}

fn row_for(params: &CircuitParams, pump: Option<&PumpConfig>) -> SweepRow {
    SweepRow {
        beta: params.beta,
        inv_p: params.inv_p(),
        phi_ext: params.phi_ext,
        gamma: params.gamma_a,
        alpha: params.alpha,
        delta: pump.map_or(f64::NAN, |p| p.delta),
        eps_p: pump.map_or(f64::NAN, |p| p.eps_p),
        amp_pump: pump.map_or(f64::NAN, |p| p.amp_pump),
        sat_power_dbm: None,
        sat_kind: None,
        min_order: None,
        converged: false,
        reachable: pump.is_some_and(|p| p.reachable),
        error: None,
    }
}

/// Optimize the pump, scan the gain curve and extract the saturation power.
/// Failures are recorded in the row instead of returned.
pub fn sweep_point(params: &CircuitParams, plan: &SweepPlan, cache: Option<&ResultCache>) -> SweepRow {
    let mut sim = Simulator::new(*params, plan.model).with_opts(plan.steady);
    sim.cache = cache;
    let pump = match optimize_pump(&sim, &plan.search) {
        Ok(p) => p,
        Err(e) => return SweepRow { error: Some(e.to_string()), ..row_for(params, None) },
    };
    let mut row = row_for(params, Some(&pump));
    if !pump.reachable {
        return row;
    }
    match scan_saturation(&sim, &pump, &plan.curve) {
        Ok(c) => {
            row.sat_power_dbm = c.saturation_power_dbm;
            row.sat_kind = c.saturation_kind;
            row.converged = !c.flagged;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if plan.min_order {
        match min_truncation_order(&sim, &pump, plan.search.target_gain_db, plan.order_tol_db, plan.search.probe_power_dbm) {
            Ok(n) => row.min_order = Some(n),
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    row
}

/// Every `(beta, 1/p)` combination of the template circuit, in parallel.
/// Rows come back in grid order regardless of scheduling.
pub fn sweep_grid(
    betas: &[f64],
    inv_ps: &[f64],
    template: &CircuitParams,
    plan: &SweepPlan,
    cache: Option<&ResultCache>,
) -> SweepResult {
    let points: Vec<CircuitParams> = betas
        .iter()
        .flat_map(|&b| inv_ps.iter().map(move |&ip| CircuitParams { beta: b, ..template.with_inv_p(ip) }))
        .collect();
    let rows = points.par_iter().map(|p| sweep_point(p, plan, cache)).collect();
    SweepResult { rows }
}

/// Deviation from the ideal circuit. The circuit stays sized at
/// `reference_phi_ext`; only the operating point changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Imperfection {
    FluxBias { phi_ext: f64 },
    /// Same decay rate (rad/s) on all three modes.
    Gamma { gamma: f64 },
    Stray { alpha: f64 },
}

impl Imperfection {
    pub fn apply(&self, p: &CircuitParams) -> CircuitParams {
        match *self {
            Imperfection::FluxBias { phi_ext } => CircuitParams { phi_ext, ..*p },
            Imperfection::Gamma { gamma } => p.with_gamma(gamma),
            Imperfection::Stray { alpha } => CircuitParams { alpha, ..*p },
        }
    }
}

/// One-dimensional cut of the `(beta, 1/p)` plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "along", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Slice {
    Beta { inv_p: f64, betas: Vec<f64> },
    InvP { beta: f64, inv_ps: Vec<f64> },
}

pub fn imperfection_study(
    template: &CircuitParams,
    imperfection: &Imperfection,
    slice: &Slice,
    plan: &SweepPlan,
    cache: Option<&ResultCache>,
) -> SweepResult {
    let base = imperfection.apply(template);
    match slice {
        Slice::Beta { inv_p, betas } => sweep_grid(betas, &[*inv_p], &base, plan, cache),
        Slice::InvP { beta, inv_ps } => sweep_grid(&[*beta], inv_ps, &base, plan, cache),
    }
}
