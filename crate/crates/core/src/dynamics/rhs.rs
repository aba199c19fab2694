use std::cell::{Cell, RefCell};
use std::f64::consts::{PI, SQRT_2};

use ode_solvers::{SVector, System};

use super::model::{DriveConfig, Force, ModelSpec, PumpModel};
use crate::circuit::{derive_elements, CircuitParams, InnerSolver};
use crate::error::{Error, Result};
use crate::units::per_ns;

/// `[a, b, c, va, vb, vc]`, three complex projection accumulators, then time.
///
/// Time is carried as a state so the system is autonomous for the solver: the
/// Dop853 tableau shipped by `ode_solvers` 0.6 has the wrong node for stage 12,
/// which only matters when the right-hand side reads its time argument.
pub type State = SVector<f64, 13>;

pub const TIME: usize = 12;

/// Right-hand side of the driven, damped mode equations in nanoseconds.
///
/// `a'' = -2 w0a^2 dE/da - g_a a' + 2 g_a d/dt a_in`, same for `b`, and
/// `c'' = -w0c^2 dE/dc - g_c c' + sqrt(2) g_c d/dt c_in`. The stiff pump
/// replaces the `c` force by its linear part `w_c^2 c`.
pub struct Rhs<'f> {
    force: &'f Force,
    solver: RefCell<InnerSolver>,
    error: RefCell<Option<Error>>,
    w0sq: [f64; 3],
    gamma: [f64; 3],
    stiff_wc2: Option<f64>,
    w: [f64; 3],
    amp: [f64; 3],
    ramp: f64,
    window: Cell<(f64, f64)>,
    max_abs: Cell<f64>,
    limit: f64,
}

impl<'f> Rhs<'f> {
    pub fn new(force: &'f Force, params: &CircuitParams, spec: &ModelSpec, drive: &DriveConfig) -> Result<Self> {
        let el = derive_elements(params)?;
        let ns2 = 1e-18;
        let stiff_wc2 = match spec.pump {
            PumpModel::Stiff => Some(per_ns(el.omega_c).powi(2)),
            PumpModel::Soft => None,
        };
        let wp = per_ns(drive.omega_p);
        Ok(Self {
            force,
            solver: RefCell::new(InnerSolver::new()),
            error: RefCell::new(None),
            w0sq: el.omega0_sq.map(|v| v * ns2),
            gamma: [per_ns(params.gamma_a), per_ns(params.gamma_b), per_ns(params.gamma_c)],
            stiff_wc2,
            w: [per_ns(drive.omega_s), per_ns(drive.omega_i()), wp],
            amp: [drive.amp_signal, drive.amp_idler, drive.amp_pump],
            ramp: 0.0,
            window: Cell::new((0.0, f64::INFINITY)),
            max_abs: Cell::new(0.0),
            limit: f64::INFINITY,
        })
    }

    /// Pump ramp duration in ns (`sin^2` envelope).
    pub fn with_ramp(mut self, ramp_ns: f64) -> Self {
        self.ramp = ramp_ns;
        self
    }

    /// Drops all three damping terms (and with them the input coupling).
    pub fn undamped(mut self) -> Self {
        self.gamma = [0.0; 3];
        self
    }

    /// `w0^2` of the three modes in rad^2/ns^2.
    pub fn omega0_sq(&self) -> [f64; 3] {
        self.w0sq
    }

    /// Stops integration once `|a|` or `|b|` exceeds `limit`.
    pub fn with_limit(mut self, limit: f64) -> Self {
        self.limit = limit;
        self
    }

    pub fn omegas_ns(&self) -> [f64; 3] {
        self.w
    }

    /// Sets the Hann projection window `[t0, t0 + len)`.
    pub fn set_window(&self, t0: f64, len: f64) {
        self.window.set((t0, len));
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs.get()
    }

    pub fn take_error(&self) -> Option<Error> {
        self.error.borrow_mut().take()
    }

    fn envelope(&self, t: f64) -> (f64, f64) {
        if t >= self.ramp || self.ramp <= 0.0 {
            return (1.0, 0.0);
        }
        let x = 0.5 * PI * t / self.ramp;
        let s = x.sin();
        (s * s, 0.5 * PI / self.ramp * (2.0 * x).sin())
    }

    /// Time derivative of the three input fluxes.
    fn input_rates(&self, t: f64) -> [f64; 3] {
        let [ws, wi, wp] = self.w;
        let [as_, ai, ap] = self.amp;
        let (r, dr) = self.envelope(t);
        let (sp, cp) = (wp * t).sin_cos();
        [
            -2.0 * as_ * ws * (ws * t).sin(),
            -2.0 * ai * wi * (wi * t).sin(),
            2.0 * ap * (dr * cp - r * wp * sp),
        ]
    }

    /// Mechanical part: derivative of `[a, b, c, va, vb, vc]`.
    pub fn mechanics(&self, t: f64, y: &[f64; 6]) -> Result<[f64; 6]> {
        let f = self.force.eval([y[0], y[1], y[2]], &mut self.solver.borrow_mut())?;
        let rates = self.input_rates(t);
        let g = self.gamma;
        let fc = match self.stiff_wc2 {
            Some(wc2) => wc2 * y[2],
            None => self.w0sq[2] * f[2],
        };
        Ok([
            y[3],
            y[4],
            y[5],
            -2.0 * self.w0sq[0] * f[0] - g[0] * y[3] + 2.0 * g[0] * rates[0],
            -2.0 * self.w0sq[1] * f[1] - g[1] * y[4] + 2.0 * g[1] * rates[1],
            -fc - g[2] * y[5] + SQRT_2 * g[2] * rates[2],
        ])
    }
}

impl System<f64, State> for &Rhs<'_> {
    fn system(&self, _t: f64, y: &State, dy: &mut State) {
        let t = y[TIME];
        dy[TIME] = 1.0;
        let mech = [y[0], y[1], y[2], y[3], y[4], y[5]];
        match self.mechanics(t, &mech) {
            Ok(d) => {
                for k in 0..6 {
                    dy[k] = d[k];
                }
            }
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                dy.fill(f64::NAN);
                dy[TIME] = 1.0;
                return;
            }
        }
        let (t0, len) = self.window.get();
        let wt = 1.0 - (2.0 * PI * (t - t0) / len).cos();
        for k in 0..3 {
            let (s, c) = (self.w[k] * t).sin_cos();
            dy[6 + 2 * k] = wt * y[k] * c;
            dy[7 + 2 * k] = wt * y[k] * s;
        }
    }

    fn solout(&mut self, _t: f64, y: &State, _dy: &State) -> bool {
        let m = y[0].abs().max(y[1].abs()).max(y[2].abs());
        if m > self.max_abs.get() {
            self.max_abs.set(m);
        }
        let bad = !y.iter().all(|v| v.is_finite());
        bad || y[0].abs() > self.limit || y[1].abs() > self.limit || self.error.borrow().is_some()
    }
}

/// Derivative of `[a, b, c, va, vb, vc]` at time `t` (ns).
pub fn rhs(state: [f64; 6], t: f64, drive: &DriveConfig, params: &CircuitParams, model: &ModelSpec) -> Result<[f64; 6]> {
    let force = Force::new(params, model)?;
    Rhs::new(&force, params, model, drive)?.mechanics(t, &state)
}
