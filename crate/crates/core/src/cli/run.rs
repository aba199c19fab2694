//! Task dispatch, per-job journaling and output files.
//!
//! Every job result is journaled under `<out>/jobs/<key>.json`, keyed by a
//! hash of the code version, the plan and the job inputs. With `resume` the
//! journal is read back instead of recomputing, so an interrupted run can be
//! continued and produces the same CSV as an uninterrupted one.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{RunConfig, Task};
use crate::circuit::stability::STABILITY_SEED;
use crate::circuit::{coupling_table, stability_and_nulling, CircuitParams, CouplingMethod, CouplingTable};
use crate::dynamics::{flux_from_power, power_from_flux, ModelSpec};
use crate::error::{Error, Result};
use crate::optimizer::{
    gain_curve, optimize_pump, scan_saturation, sweep_point, GainCurve, PumpConfig, PumpSearch, ResultCache,
    SaturationKind, Simulator, SweepPlan, SweepRow,
};
use crate::perturbation::{saturation_estimate, PerturbativeModel, SaturationRoute};
use crate::units::{dbm_to_watts, watts_to_dbm};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub label: String,
    pub ok: bool,
    /// Read back from the journal rather than computed in this run.
    pub resumed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: String,
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub config: RunConfig,
    /// Integrator, search and curve tolerances in force.
    pub tolerances: SweepPlan,
    /// Seed of the stability multi-start, when the task uses it.
    pub seed: Option<u64>,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
    pub jobs: Vec<JobStatus>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn failed_jobs(&self) -> usize {
        self.jobs.iter().filter(|j| !j.ok).count()
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    hex(&Sha256::digest(serde_json::to_vec(cfg).expect("config serializes")))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

trait JobRow: Serialize + DeserializeOwned + Send {
    fn error(&self) -> Option<&str>;
}

struct Ctx<'a> {
    verb: &'static str,
    plan: &'a SweepPlan,
    journal: PathBuf,
    resume: bool,
}

impl Ctx<'_> {
    fn key<J: Serialize>(&self, job: &J) -> String {
        let v = serde_json::json!({ "version": CODE_VERSION, "verb": self.verb, "plan": self.plan, "job": job });
        hex(&Sha256::digest(serde_json::to_vec(&v).expect("job serializes")))
    }

    fn load<R: DeserializeOwned>(&self, key: &str) -> Option<R> {
        let text = std::fs::read_to_string(self.journal.join(format!("{key}.json"))).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn store<R: Serialize>(&self, key: &str, row: &R) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.journal)?;
        serde_json::to_writer(&mut tmp, row)?;
        tmp.persist(self.journal.join(format!("{key}.json"))).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Runs `jobs` in parallel; results come back in job order.
    fn run<J, R, F>(&self, jobs: &[(String, J)], f: F) -> Result<(Vec<R>, Vec<JobStatus>)>
    where
        J: Serialize + Sync,
        R: JobRow,
        F: Fn(&J) -> R + Sync,
    {
        let out: Vec<Result<(R, JobStatus)>> = jobs
            .par_iter()
            .map(|(label, job)| {
                let id = self.key(job);
                let (row, resumed) = match self.resume.then(|| self.load::<R>(&id)).flatten() {
                    Some(r) => (r, true),
                    None => {
                        let r = f(job);
                        self.store(&id, &r)?;
                        (r, false)
                    }
                };
                let error = row.error().map(str::to_owned);
                Ok((row, JobStatus { id, label: label.clone(), ok: error.is_none(), resumed, error }))
            })
            .collect();
        let mut rows = Vec::with_capacity(out.len());
        let mut status = Vec::with_capacity(out.len());
        for r in out {
            let (row, s) = r?;
            rows.push(row);
            status.push(s);
        }
        Ok((rows, status))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CouplingRecord {
    beta: f64,
    zeta: f64,
    alpha: f64,
    phi_ext: f64,
    table: Option<CouplingTable>,
    error: Option<String>,
}

impl JobRow for CouplingRecord {
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StabilityRecord {
    beta: f64,
    alpha: f64,
    phi_ext: f64,
    stable: Option<bool>,
    degeneracy: Option<usize>,
    ground_energy: Option<f64>,
    nulling_flux: Option<f64>,
    error: Option<String>,
}

impl JobRow for StabilityRecord {
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CurveRecord {
    pump: Option<PumpConfig>,
    curve: Option<GainCurve>,
    error: Option<String>,
}

impl JobRow for CurveRecord {
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum BetaModel {
    TimeDomain { model: ModelSpec },
    Perturbative { model: PerturbativeModel, route: SaturationRoute },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BetaRecord {
    beta: f64,
    inv_p: f64,
    model: String,
    route: String,
    sat_flux: Option<f64>,
    sat_power_dbm: Option<f64>,
    sat_kind: Option<SaturationKind>,
    amp_pump: Option<f64>,
    converged: bool,
    reliable: Option<bool>,
    error: Option<String>,
}

impl JobRow for BetaRecord {
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

impl JobRow for SweepRow {
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

fn model_label(m: &ModelSpec) -> String {
    let pump = match m.pump {
        crate::dynamics::PumpModel::Soft => "soft",
        crate::dynamics::PumpModel::Stiff => "stiff",
    };
    let mut s = format!("{pump}-{}", m.truncation);
    if m.extra_kerr_ab != 0.0 {
        s.push_str(&format!("+kab{}", m.extra_kerr_ab));
    }
    s
}

fn time_domain_saturation(params: &CircuitParams, model: &ModelSpec, plan: &SweepPlan, cache: &ResultCache) -> BetaRecord {
    let mut rec = BetaRecord {
        beta: params.beta,
        inv_p: params.inv_p(),
        model: model_label(model),
        route: "time-domain".into(),
        sat_flux: None,
        sat_power_dbm: None,
        sat_kind: None,
        amp_pump: None,
        converged: false,
        reliable: None,
        error: None,
    };
    let sim = Simulator::new(*params, *model).with_opts(plan.steady).with_cache(cache);
    let search = PumpSearch { resonant_only: true, ..plan.search };
    let res = optimize_pump(&sim, &search).and_then(|pump| {
        rec.amp_pump = Some(pump.amp_pump);
        if !pump.reachable {
            return Err(Error::NotBracketed("target gain unreachable".into()));
        }
        scan_saturation(&sim, &pump, &plan.curve)
    });
    match res {
        Ok(c) => {
            rec.converged = !c.flagged;
            rec.sat_kind = c.saturation_kind;
            rec.sat_power_dbm = c.saturation_power_dbm;
            rec.sat_flux = c.saturation_power_dbm.and_then(|p| flux_from_power(dbm_to_watts(p), params).ok());
            if c.saturation_power_dbm.is_none() {
                rec.error = Some("no saturation crossing in the scanned range".into());
            }
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

fn perturbative_saturation(params: &CircuitParams, model: PerturbativeModel, route: SaturationRoute, plan: &SweepPlan) -> BetaRecord {
    let g0 = 10f64.powf(plan.search.target_gain_db / 10.0);
    let mut rec = BetaRecord {
        beta: params.beta,
        inv_p: params.inv_p(),
        model: model.name().into(),
        route: match route {
            SaturationRoute::Exact => "exact",
            SaturationRoute::HighGain => "high-gain",
        }
        .into(),
        sat_flux: None,
        sat_power_dbm: None,
        sat_kind: None,
        amp_pump: None,
        converged: true,
        reliable: None,
        error: None,
    };
    match saturation_estimate(model, route, params, g0, plan.curve.criterion_db) {
        Ok(est) => {
            rec.sat_flux = Some(est.flux);
            rec.reliable = Some(est.reliable);
            rec.sat_power_dbm = power_from_flux(est.flux, params).ok().map(watts_to_dbm);
        }
        Err(e) => {
            rec.converged = false;
            rec.error = Some(e.to_string());
        }
    }
    rec
}

fn point_params(template: &CircuitParams, beta: f64, inv_p: f64) -> CircuitParams {
    CircuitParams { beta, ..template.with_inv_p(inv_p) }
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_couplings(path: &Path, rows: &[CouplingRecord]) -> Result<()> {
    const NAMES: [&str; 15] =
        ["g", "k_aa", "k_bb", "k_cc", "k_ab", "k_ac", "k_bc", "h_a", "h_b", "h_c", "l_aa", "l_bb", "p_a", "p_b", "p_c"];
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["beta", "zeta", "alpha", "phi_ext"];
    header.extend(NAMES);
    header.push("error");
    w.write_record(&header)?;
    for r in rows {
        let vals = r.table.map(|t| {
            [t.g, t.k_aa, t.k_bb, t.k_cc, t.k_ab, t.k_ac, t.k_bc, t.h_a, t.h_b, t.h_c, t.l_aa, t.l_bb, t.p_a, t.p_b, t.p_c]
        });
        let mut rec = vec![r.beta.to_string(), r.zeta.to_string(), r.alpha.to_string(), r.phi_ext.to_string()];
        rec.extend((0..NAMES.len()).map(|i| opt(vals.map(|v| v[i]))));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn best_summary(rows: &[SweepRow]) -> serde_json::Value {
    let best = rows
        .iter()
        .filter(|r| r.sat_power_dbm.is_some())
        .max_by(|a, b| a.sat_power_dbm.unwrap().total_cmp(&b.sat_power_dbm.unwrap()));
    match best {
        Some(r) => serde_json::json!({
            "best_beta": r.beta,
            "best_inv_p": r.inv_p,
            "best_sat_power_dbm": r.sat_power_dbm,
            "best_sat_kind": r.sat_kind,
        }),
        None => serde_json::json!({ "best_beta": null }),
    }
}

/// Executes the configured task, writing `<verb>.csv` and `manifest.json`
/// into `out`. Individual job failures are recorded, not returned.
pub fn run(cfg: &RunConfig, out: &Path, resume: bool) -> Result<RunManifest> {
    cfg.validate()?;
    let started = now_unix();
    let journal = out.join("jobs");
    std::fs::create_dir_all(&journal)?;
    let cache = match &cfg.cache {
        Some(dir) => ResultCache::on_disk(dir)?,
        None => ResultCache::in_memory(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let verb = cfg.task.verb();
    let ctx = Ctx { verb, plan: &cfg.plan, journal, resume };
    let csv_name = format!("{verb}.csv");
    let csv_path = out.join(&csv_name);
    let plan = &cfg.plan;
    let template = &cfg.circuit;
    let mut seed = None;

    let (jobs, summary) = pool.install(|| -> Result<(Vec<JobStatus>, serde_json::Value)> {
        match &cfg.task {
            Task::Couplings { betas, phi_exts, method } => {
                let jobs: Vec<(String, (CircuitParams, CouplingMethod))> = betas
                    .iter()
                    .flat_map(|&b| phi_exts.iter().map(move |&ph| (b, ph)))
                    .map(|(b, ph)| (format!("beta={b} phi_ext={ph}"), (CircuitParams { beta: b, phi_ext: ph, ..*template }, *method)))
                    .collect();
                let (rows, st) = ctx.run(&jobs, |(p, m)| {
                    let r = coupling_table(p, *m);
                    CouplingRecord {
                        beta: p.beta,
                        zeta: p.zeta,
                        alpha: p.alpha,
                        phi_ext: p.phi_ext,
                        table: r.as_ref().ok().copied(),
                        error: r.err().map(|e| e.to_string()),
                    }
                })?;
                write_couplings(&csv_path, &rows)?;
                Ok((st, serde_json::Value::Null))
            }
            Task::Stability { betas, alphas } => {
                seed = Some(STABILITY_SEED);
                let jobs: Vec<(String, CircuitParams)> = betas
                    .iter()
                    .flat_map(|&b| alphas.iter().map(move |&a| (b, a)))
                    .map(|(b, a)| (format!("beta={b} alpha={a}"), CircuitParams { beta: b, alpha: a, ..*template }))
                    .collect();
                let (rows, st) = ctx.run(&jobs, |p| match stability_and_nulling(p) {
                    Ok(r) => StabilityRecord {
                        beta: p.beta,
                        alpha: p.alpha,
                        phi_ext: p.phi_ext,
                        stable: Some(r.stable),
                        degeneracy: Some(r.degeneracy),
                        ground_energy: Some(r.ground_energy),
                        nulling_flux: r.nulling_flux,
                        error: None,
                    },
                    Err(e) => StabilityRecord {
                        beta: p.beta,
                        alpha: p.alpha,
                        phi_ext: p.phi_ext,
                        stable: None,
                        degeneracy: None,
                        ground_energy: None,
                        nulling_flux: None,
                        error: Some(e.to_string()),
                    },
                })?;
                write_csv(&csv_path, &rows)?;
                Ok((st, serde_json::Value::Null))
            }
            Task::GainCurve { powers_dbm } => {
                let jobs = vec![("curve".to_string(), (*template, powers_dbm.clone()))];
                let (rows, st) = ctx.run(&jobs, |(p, powers)| {
                    let sim = Simulator::new(*p, plan.model).with_opts(plan.steady).with_cache(&cache);
                    let mut rec = CurveRecord { pump: None, curve: None, error: None };
                    let res = optimize_pump(&sim, &plan.search).and_then(|pump| {
                        rec.pump = Some(pump);
                        if !pump.reachable {
                            return Err(Error::NotBracketed("target gain unreachable".into()));
                        }
                        if powers.is_empty() {
                            scan_saturation(&sim, &pump, &plan.curve)
                        } else {
                            gain_curve(&sim, &pump, powers, plan.curve.criterion_db)
                        }
                    });
                    match res {
                        Ok(c) => rec.curve = Some(c),
                        Err(e) => rec.error = Some(e.to_string()),
                    }
                    rec
                })?;
                let rec = &rows[0];
                let points = rec.curve.as_ref().map(|c| c.points.clone()).unwrap_or_default();
                write_csv(&csv_path, &points)?;
                let summary = serde_json::json!({
                    "pump": rec.pump,
                    "small_signal_gain_db": rec.curve.as_ref().map(|c| c.small_signal_gain_db),
                    "sat_power_dbm": rec.curve.as_ref().and_then(|c| c.saturation_power_dbm),
                    "sat_kind": rec.curve.as_ref().and_then(|c| c.saturation_kind),
                    "flagged": rec.curve.as_ref().map(|c| c.flagged),
                });
                Ok((st, summary))
            }
            Task::BetaSweep { betas, inv_p, time_domain, perturbative, route } => {
                let models: Vec<BetaModel> = time_domain
                    .iter()
                    .map(|&m| BetaModel::TimeDomain { model: m })
                    .chain(perturbative.iter().map(|&m| BetaModel::Perturbative { model: m, route: *route }))
                    .collect();
                let jobs: Vec<(String, (CircuitParams, BetaModel))> = models
                    .iter()
                    .flat_map(|m| betas.iter().map(move |&b| (b, *m)))
                    .map(|(b, m)| (format!("beta={b} {m:?}"), (point_params(template, b, *inv_p), m)))
                    .collect();
                let (rows, st) = ctx.run(&jobs, |(p, m)| match m {
                    BetaModel::TimeDomain { model } => time_domain_saturation(p, model, plan, &cache),
                    BetaModel::Perturbative { model, route } => perturbative_saturation(p, *model, *route, plan),
                })?;
                write_csv(&csv_path, &rows)?;
                Ok((st, serde_json::Value::Null))
            }
            Task::GridSweep { betas, inv_ps } | Task::ConvergenceMap { betas, inv_ps } => {
                let min_order = matches!(cfg.task, Task::ConvergenceMap { .. }) || plan.min_order;
                let jobs: Vec<(String, CircuitParams)> = betas
                    .iter()
                    .flat_map(|&b| inv_ps.iter().map(move |&ip| (b, ip)))
                    .map(|(b, ip)| (format!("beta={b} inv_p={ip}"), point_params(template, b, ip)))
                    .collect();
                let point_plan = SweepPlan { min_order, ..*plan };
                let (rows, st) = ctx.run(&jobs, |p| sweep_point(p, &point_plan, Some(&cache)))?;
                write_csv(&csv_path, &rows)?;
                Ok((st, best_summary(&rows)))
            }
            Task::Imperfection { imperfection, slice } => {
                let base = imperfection.apply(template);
                let pts: Vec<(f64, f64)> = match slice {
                    crate::optimizer::Slice::Beta { inv_p, betas } => betas.iter().map(|&b| (b, *inv_p)).collect(),
                    crate::optimizer::Slice::InvP { beta, inv_ps } => inv_ps.iter().map(|&ip| (*beta, ip)).collect(),
                };
                let jobs: Vec<(String, CircuitParams)> = pts
                    .iter()
                    .map(|&(b, ip)| (format!("beta={b} inv_p={ip}"), point_params(&base, b, ip)))
                    .collect();
                let (rows, st) = ctx.run(&jobs, |p| sweep_point(p, plan, Some(&cache)))?;
                write_csv(&csv_path, &rows)?;
                Ok((st, best_summary(&rows)))
            }
        }
    })?;

    let manifest = RunManifest {
        task: verb.to_string(),
        config_hash: config_hash(cfg),
        code_version: CODE_VERSION.to_string(),
        started_unix: started,
        finished_unix: now_unix(),
        config: cfg.clone(),
        tolerances: *plan,
        seed,
        outputs: vec![csv_name],
        jobs,
        summary,
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
