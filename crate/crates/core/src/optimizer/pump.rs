//! Two-stage pump search: detunings that maximize small-signal gain at a fixed
//! pump amplitude, then the amplitude that meets the target gain.

use serde::{Deserialize, Serialize};

use super::cache::{cache_key, ResultCache};
use crate::circuit::{mode_frequencies, CircuitParams};
use crate::dynamics::{flux_from_power, integrate_to_steady_state, DriveConfig, ModelSpec, SteadyOptions, SteadyStateResult};
use crate::error::{Error, Result};
use crate::linear::{pump_for_gain, threshold_pump_amp};
use crate::units::dbm_to_watts;

/// One circuit and model with integration settings and an optional cache.
#[derive(Debug, Clone, Copy)]
pub struct Simulator<'c> {
    pub params: CircuitParams,
    pub model: ModelSpec,
    pub opts: SteadyOptions,
    pub cache: Option<&'c ResultCache>,
}

impl<'c> Simulator<'c> {
    pub fn new(params: CircuitParams, model: ModelSpec) -> Self {
        Self { params, model, opts: SteadyOptions::default(), cache: None }
    }

    pub fn with_cache(mut self, cache: &'c ResultCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_opts(mut self, opts: SteadyOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn with_model(mut self, model: ModelSpec) -> Self {
        self.model = model;
        self
    }

    pub fn run(&self, drive: &DriveConfig) -> Result<SteadyStateResult> {
        self.run_with(drive, &self.opts)
    }

    pub fn run_with(&self, drive: &DriveConfig, opts: &SteadyOptions) -> Result<SteadyStateResult> {
        let Some(cache) = self.cache else {
            return integrate_to_steady_state(drive, &self.params, &self.model, opts);
        };
        let key = cache_key(&self.params, &self.model, drive, opts);
        if let Some(r) = cache.get(&key) {
            return Ok(r);
        }
        let r = integrate_to_steady_state(drive, &self.params, &self.model, opts)?;
        cache.insert(&key, r)?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    /// Signal detuning from the operating signal-mode frequency, rad/s.
    pub delta: f64,
    /// Pump detuning from the sum of operating mode frequencies, rad/s.
    pub eps_p: f64,
    pub amp_pump: f64,
    /// NaN when the target could not be reached.
    #[serde(with = "crate::dynamics::steady::nan_as_null")]
    pub achieved_gain_db: f64,
    pub reachable: bool,
    /// Small-signal gain fell while the pump grew during the amplitude search.
    pub non_monotone: bool,
}

impl PumpConfig {
    /// On-resonance pump with amplitude `amp_pump`.
    pub fn resonant(amp_pump: f64) -> Self {
        Self { delta: 0.0, eps_p: 0.0, amp_pump, achieved_gain_db: f64::NAN, reachable: true, non_monotone: false }
    }

    pub fn drive(&self, params: &CircuitParams, amp_signal: f64) -> Result<DriveConfig> {
        let (wa, wb, _) = mode_frequencies(params)?;
        Ok(DriveConfig {
            omega_s: wa + self.delta,
            omega_p: wa + wb + self.eps_p,
            amp_signal,
            amp_pump: self.amp_pump,
            amp_idler: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSearch {
    pub target_gain_db: f64,
    pub gain_tol_db: f64,
    /// Points per axis of the stage-1 detuning grid.
    pub grid_points: usize,
    /// Simplex stopping size as a fraction of `gamma_a`.
    pub refine_tol: f64,
    pub max_refine_evals: usize,
    pub max_alternations: usize,
    /// Input power for small-signal runs.
    pub probe_power_dbm: f64,
    /// Convergence tolerance of the stage-1 runs.
    pub coarse_tol: f64,
    /// Skip detuning search and stay on resonance.
    pub resonant_only: bool,
}

impl Default for PumpSearch {
    fn default() -> Self {
        Self {
            target_gain_db: 20.0,
            gain_tol_db: 0.05,
            grid_points: 11,
            refine_tol: 1e-3,
            max_refine_evals: 60,
            max_alternations: 3,
            probe_power_dbm: -140.0,
            coarse_tol: 1e-3,
            resonant_only: false,
        }
    }
}

/// Small-signal gain in dB, or `None` when the run does not settle.
fn small_signal_gain(sim: &Simulator, pump: &PumpConfig, probe: f64, opts: &SteadyOptions) -> Result<Option<f64>> {
    let r = sim.run_with(&pump.drive(&sim.params, probe)?, opts)?;
    Ok((r.converged && !r.diverged).then_some(r.gain_db))
}

/// Stage 1: detunings maximizing small-signal gain at fixed amplitude.
///
/// With `grid`, an exhaustive grid over `delta in +-gamma_a`,
/// `eps_p in +-(gamma_a + gamma_b)/2` seeds the simplex; otherwise the simplex
/// starts from the current detunings with half a grid cell as its size.
pub fn maximize_detuning(sim: &Simulator, pump: &PumpConfig, search: &PumpSearch, grid: bool) -> Result<PumpConfig> {
    let probe = flux_from_power(dbm_to_watts(search.probe_power_dbm), &sim.params)?;
    let opts = SteadyOptions { tol: search.coarse_tol, ..sim.opts };
    let ga = sim.params.gamma_a;
    let (span_d, span_e) = (ga, 0.5 * (ga + sim.params.gamma_b));
    let n = search.grid_points.max(2);
    let (cell_d, cell_e) = (2.0 * span_d / (n - 1) as f64, 2.0 * span_e / (n - 1) as f64);
    let eval = |d: f64, e: f64| -> Result<f64> {
        let cfg = PumpConfig { delta: d, eps_p: e, ..*pump };
        Ok(small_signal_gain(sim, &cfg, probe, &opts)?.unwrap_or(f64::NEG_INFINITY))
    };
    let mut start = (pump.delta, pump.eps_p);
    let mut step = (0.5 * cell_d, 0.5 * cell_e);
    if grid {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let d = -span_d + cell_d * i as f64;
                let e = -span_e + cell_e * j as f64;
                let g = eval(d, e)?;
                if g > best.0 {
                    best = (g, d, e);
                }
            }
        }
        if best.0 == f64::NEG_INFINITY {
            return Err(Error::NotBracketed("no detuning on the grid gives a settled gain".into()));
        }
        start = (best.1, best.2);
        step = (cell_d, cell_e);
    }
    // the simplex works in units of gamma_a
    let scale = ga;
    let f = |x: [f64; 2]| -> Result<f64> { Ok(-eval(x[0] * scale, x[1] * scale)?) };
    let (x, _) = nelder_mead(f, [start.0 / scale, start.1 / scale], [step.0 / scale, step.1 / scale], search.refine_tol, search.max_refine_evals)?;
    Ok(PumpConfig { delta: x[0] * scale, eps_p: x[1] * scale, ..*pump })
}

/// Minimizes `f` from `x0` with initial simplex steps `step`; stops when every
/// vertex lies within `xtol` of the best one or after `max_evals` evaluations.
pub fn nelder_mead<F>(mut f: F, x0: [f64; 2], step: [f64; 2], xtol: f64, max_evals: usize) -> Result<([f64; 2], f64)>
where
    F: FnMut([f64; 2]) -> Result<f64>,
{
    let mut s = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut v = [f(s[0])?, f(s[1])?, f(s[2])?];
    let mut evals = 3;
    let lin = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    loop {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = idx.map(|i| s[i]);
        v = idx.map(|i| v[i]);
        let size = s[1..].iter().map(|p| (p[0] - s[0][0]).abs().max((p[1] - s[0][1]).abs())).fold(0.0, f64::max);
        if size <= xtol || evals >= max_evals {
            return Ok((s[0], v[0]));
        }
        let c = lin(s[0], s[1], 0.5);
        let r = lin(c, s[2], -1.0);
        let fr = f(r)?;
        evals += 1;
        if fr < v[0] {
            let e = lin(c, s[2], -2.0);
            let fe = f(e)?;
            evals += 1;
            (s[2], v[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < v[1] {
            (s[2], v[2]) = (r, fr);
        } else {
            let k = if fr < v[2] { lin(c, r, 0.5) } else { lin(c, s[2], 0.5) };
            let fk = f(k)?;
            evals += 1;
            if fk < v[2].min(fr) {
                (s[2], v[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    s[i] = lin(s[0], s[i], 0.5);
                    v[i] = f(s[i])?;
                }
                evals += 2;
            }
        }
    }
}

/// Stage 2: pump amplitude at fixed detunings meeting the target gain.
///
/// Unsettled runs count as above target. The bracket is limited to twice the
/// analytic three-wave threshold; exhausting it marks the target unreachable.
pub fn tune_amplitude(sim: &Simulator, pump: &PumpConfig, search: &PumpSearch) -> Result<PumpConfig> {
    let probe = flux_from_power(dbm_to_watts(search.probe_power_dbm), &sim.params)?;
    let target = search.target_gain_db;
    let amp_max = 2.0 * threshold_pump_amp(&sim.params)?;
    let mut non_monotone = false;
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut eval = |amp: f64| -> Result<Option<f64>> {
        let g = small_signal_gain(sim, &PumpConfig { amp_pump: amp, ..*pump }, probe, &sim.opts)?;
        if let Some(g) = g {
            if seen.iter().any(|&(a, ga)| (a < amp && ga > g + 0.01) || (a > amp && ga + 0.01 < g)) {
                non_monotone = true;
            }
            seen.push((amp, g));
        }
        Ok(g)
    };
    let unreachable = |non_monotone| PumpConfig { achieved_gain_db: f64::NAN, reachable: false, non_monotone, ..*pump };
    let done = |amp: f64, g: f64, non_monotone| PumpConfig {
        amp_pump: amp,
        achieved_gain_db: g,
        reachable: true,
        non_monotone,
        ..*pump
    };

    // bracket [lo, hi] with gain(lo) < target <= gain(hi) or unsettled at hi
    let start = if pump.amp_pump > 0.0 { pump.amp_pump.min(amp_max) } else { amp_max * 0.5 };
    let (mut lo, mut glo): (f64, f64);
    let (mut hi, mut ghi): (f64, Option<f64>);
    let g0 = eval(start)?;
    if let Some(g) = g0.filter(|g| (g - target).abs() <= search.gain_tol_db) {
        return Ok(done(start, g, non_monotone));
    }
    if g0.is_some_and(|g| g < target) {
        (lo, glo) = (start, g0.unwrap());
        let mut x = start;
        loop {
            if x >= amp_max {
                return Ok(unreachable(non_monotone));
            }
            x = (x * 1.05).min(amp_max);
            let g = eval(x)?;
            match g {
                Some(g) if g < target - search.gain_tol_db => (lo, glo) = (x, g),
                Some(g) if g <= target + search.gain_tol_db => return Ok(done(x, g, non_monotone)),
                _ => {
                    (hi, ghi) = (x, g);
                    break;
                }
            }
        }
    } else {
        (hi, ghi) = (start, g0);
        let mut x = start;
        loop {
            x *= 0.95;
            let g = eval(x)?;
            match g {
                Some(g) if g < target - search.gain_tol_db => {
                    (lo, glo) = (x, g);
                    break;
                }
                Some(g) if g <= target + search.gain_tol_db => return Ok(done(x, g, non_monotone)),
                _ => (hi, ghi) = (x, g),
            }
            if x < 1e-6 * amp_max {
                return Ok(unreachable(non_monotone));
            }
        }
    }
    // regula falsi with the Illinois correction on settled brackets, bisection otherwise
    let mut fl = glo - target;
    let mut fh = ghi.map(|g| g - target);
    let mut last_low: Option<bool> = None;
    for _ in 0..60 {
        let x = match fh {
            Some(fh) => lo + (fl / (fl - fh)).clamp(0.05, 0.95) * (hi - lo),
            None => 0.5 * (lo + hi),
        };
        let g = eval(x)?;
        match g {
            Some(g) if (g - target).abs() <= search.gain_tol_db => return Ok(done(x, g, non_monotone)),
            Some(g) if g < target => {
                (lo, fl) = (x, g - target);
                if last_low == Some(true) {
                    fh = fh.map(|v| 0.5 * v);
                }
                last_low = Some(true);
            }
            _ => {
                (hi, fh) = (x, g.map(|g| g - target));
                if last_low == Some(false) {
                    fl *= 0.5;
                }
                last_low = Some(false);
            }
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(unreachable(non_monotone))
}

/// Alternates amplitude tuning and detuning maximization until the detunings
/// stop moving by more than a tenth of a grid cell.
pub fn optimize_pump(sim: &Simulator, search: &PumpSearch) -> Result<PumpConfig> {
    let guess = pump_for_gain(10f64.powf(search.target_gain_db / 10.0), &sim.params)?;
    let mut pump = tune_amplitude(sim, &PumpConfig::resonant(guess), search)?;
    if search.resonant_only || !pump.reachable {
        return Ok(pump);
    }
    let n = search.grid_points.max(2) as f64 - 1.0;
    let cell = 2.0 * sim.params.gamma_a / n;
    for round in 0..search.max_alternations {
        let moved = maximize_detuning(sim, &pump, search, round == 0)?;
        let shift = (moved.delta - pump.delta).abs().max((moved.eps_p - pump.eps_p).abs());
        pump = tune_amplitude(sim, &moved, search)?;
        if !pump.reachable || shift <= 0.1 * cell {
            break;
        }
    }
    Ok(pump)
}
