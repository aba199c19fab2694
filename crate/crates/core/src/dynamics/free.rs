//! Undriven, undamped evolution and its conserved energy.

use ode_solvers::dop853::Dop853;
use ode_solvers::OutputType;

use super::model::{energy_series, DriveConfig, Force, ModelSpec, PumpModel};
use super::rhs::{Rhs, State, TIME};
use crate::circuit::jet::Jet;
use crate::circuit::{mode_frequencies, CircuitParams, InnerSolver};
use crate::error::{Error, Result};
use crate::units::per_ns;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeRun {
    /// `[a, b, c, va, vb, vc]` at the end, velocities per ns.
    pub state: [f64; 6],
    pub energy0: f64,
    /// Largest `|H(t) - H(0)| / |H(0)|` over the sampled periods.
    pub max_rel_drift: f64,
}

/// Conserved energy of the undamped soft-pump equations, in units of the
/// junction energy: `va^2/(4 w0a^2) + vb^2/(4 w0b^2) + vc^2/(2 w0c^2) + E`.
pub fn mode_energy(
    force: &Force,
    series: Option<&Jet>,
    w0sq: [f64; 3],
    y: &[f64; 6],
    solver: &mut InnerSolver,
) -> Result<f64> {
    let kinetic = y[3] * y[3] / (4.0 * w0sq[0]) + y[4] * y[4] / (4.0 * w0sq[1]) + y[5] * y[5] / (2.0 * w0sq[2]);
    Ok(kinetic + force.energy([y[0], y[1], y[2]], solver, series)?)
}

/// Integrates from `y0` for `periods` signal-mode periods with damping and
/// drives removed, sampling the energy once per period.
pub fn free_evolution(
    params: &CircuitParams,
    model: &ModelSpec,
    y0: [f64; 6],
    periods: u32,
    rtol: f64,
    atol: f64,
) -> Result<FreeRun> {
    if model.pump != PumpModel::Soft {
        return Err(Error::InvalidParameter("the stiff pump is an external drive; no conserved energy".into()));
    }
    let force = Force::new(params, model)?;
    let series = energy_series(params, model)?;
    let (wa, wb, _) = mode_frequencies(params)?;
    let idle = DriveConfig { omega_s: wa, omega_p: wa + wb, amp_signal: 0.0, amp_pump: 0.0, amp_idler: 0.0 };
    let rhs = Rhs::new(&force, params, model, &idle)?.undamped();
    let w0sq = rhs.omega0_sq();
    let period = std::f64::consts::TAU / per_ns(wa);
    let t_end = period * periods as f64;

    let mut y = State::zeros();
    for k in 0..6 {
        y[k] = y0[k];
    }
    let mut solver = InnerSolver::new();
    let energy0 = mode_energy(&force, series.as_ref(), w0sq, &y0, &mut solver)?;
    let mut ode = Dop853::from_param(
        &rhs, 0.0, t_end, period, y, rtol, atol,
        0.9, 0.0, 0.333, 6.0, period, 0.0, u32::MAX, u32::MAX, OutputType::Sparse,
    );
    let res = ode.integrate();
    if let Some(e) = rhs.take_error() {
        return Err(e);
    }
    res.map_err(|e| Error::Integration(e.to_string()))?;
    let (_, ys) = ode.results().get();
    let mut drift: f64 = 0.0;
    let mut last = y0;
    for s in ys {
        debug_assert!(s[TIME].is_finite());
        let m = [s[0], s[1], s[2], s[3], s[4], s[5]];
        let e = mode_energy(&force, series.as_ref(), w0sq, &m, &mut solver)?;
        drift = drift.max((e - energy0).abs() / energy0.abs());
        last = m;
    }
    Ok(FreeRun { state: last, energy0, max_rel_drift: drift })
}
