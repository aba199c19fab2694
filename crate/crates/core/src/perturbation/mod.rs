//! Classical perturbation theory in powers of the signal input.
//!
//! The generic route is [`Engine`], a harmonic balance of the truncated
//! equations of motion solved order by order. The printed drive vectors of the
//! three analysed models are kept as separate functions and the closed-form
//! saturation fluxes are their high-gain limits.

mod engine;
mod series;

pub use engine::{Corrections, Engine};
pub use series::Series;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{coupling_table, derive_elements, CircuitParams, CouplingMethod, CouplingTable};
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::linear::{phi_c_for_gain, scattering_matrix, PumpPoint};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Criterion used by [`sop3_corrections`] for its saturation estimate.
pub const DEFAULT_CRITERION_DB: f64 = 0.1;

/// Pump-mode response at the sum and difference of the signal and idler tones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseFactors {
    pub f_sigma: Complex64,
    pub f_delta: Complex64,
    /// rad/s
    pub sigma: f64,
    /// rad/s
    pub delta: f64,
}

/// Kerr-like signal-idler coupling generated by the soft pump mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCouplings {
    pub k_eff: Complex64,
    /// Two-photon-loss-like part with no Kerr counterpart.
    pub q_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerturbativeModel {
    /// Soft pump, three-wave coupling, series to third order.
    #[serde(rename = "SoP3-o3")]
    Sop3O3,
    #[serde(rename = "SoP3-o5")]
    Sop3O5,
    /// Stiff pump, energy to fifth degree, series to third order.
    #[serde(rename = "StP5-o3")]
    Stp5O3,
    #[serde(rename = "StP5-o5")]
    Stp5O5,
    /// Stiff pump, energy to seventh degree, series to fifth order.
    #[serde(rename = "StP7")]
    Stp7,
}

impl PerturbativeModel {
    pub const ALL: [PerturbativeModel; 5] = [Self::Sop3O3, Self::Sop3O5, Self::Stp5O3, Self::Stp5O5, Self::Stp7];

    pub fn spec(self) -> ModelSpec {
        match self {
            Self::Sop3O3 | Self::Sop3O5 => ModelSpec::soft(3),
            Self::Stp5O3 | Self::Stp5O5 => ModelSpec::stiff(5),
            Self::Stp7 => ModelSpec::stiff(7),
        }
    }

    pub fn order(self) -> u8 {
        match self {
            Self::Sop3O3 | Self::Stp5O3 => 3,
            _ => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sop3O3 => "SoP3-o3",
            Self::Sop3O5 => "SoP3-o5",
            Self::Stp5O3 => "StP5-o3",
            Self::Stp5O5 => "StP5-o5",
            Self::Stp7 => "StP7",
        }
    }
}

impl std::fmt::Display for PerturbativeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PerturbativeModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown perturbative model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationRoute {
    /// Solve the gain criterion with the series corrections, any gain.
    Exact,
    /// Closed-form large-gain limit.
    HighGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub phi1: Complex64,
    pub phi3: Complex64,
    pub phi5: Complex64,
    pub model: PerturbativeModel,
    /// Input flux amplitude at the criterion crossing.
    pub saturation_flux: f64,
    pub criterion_db: f64,
    /// False once successive corrections stop decreasing.
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationEstimate {
    pub flux: f64,
    pub reliable: bool,
}

/// `f_x = w_c^2 / (w_c^2 - x^2 - i g_c x)` at the sum and difference tones.
pub fn response_factors(params: &CircuitParams, omega_s: f64, omega_i: f64) -> Result<ResponseFactors> {
    let el = derive_elements(params)?;
    let wc2 = el.omega_c * el.omega_c;
    let f = |x: f64| wc2 / Complex64::new(wc2 - x * x, -params.gamma_c * x);
    let (sigma, delta) = (omega_s + omega_i, omega_s - omega_i);
    Ok(ResponseFactors { f_sigma: f(sigma), f_delta: f(delta), sigma, delta })
}

pub fn kerr_from_factors(g: f64, f: &ResponseFactors) -> GeneratedCouplings {
    GeneratedCouplings {
        k_eff: 0.25 * g * g * (f.f_delta + f.f_sigma.re),
        q_eff: 0.25 * g * g * f.f_sigma.im,
    }
}

/// Generated coupling at the resonant tones `w_s = w_a`, `w_i = w_b`.
pub fn generated_kerr(params: &CircuitParams) -> Result<GeneratedCouplings> {
    let el = derive_elements(params)?;
    let g = coupling_table(params, CouplingMethod::Analytic)?.g;
    Ok(kerr_from_factors(g, &response_factors(params, el.omega_a, el.omega_b)?))
}

/// Relative amplitude change `10^(-criterion/20) - 1` of a gain drop.
pub fn epsilon(criterion_db: f64) -> f64 {
    10f64.powf(-criterion_db / 20.0) - 1.0
}

/// Resonant first-order signal and conjugate idler with the bare three-wave pump.
struct Printed {
    m: [[Complex64; 2]; 2],
    c: Complex64,
    a1: Complex64,
    b1: Complex64,
    table: CouplingTable,
}

impl Printed {
    fn new(amp: f64, params: &CircuitParams, g0: f64) -> Result<Self> {
        let el = derive_elements(params)?;
        let table = coupling_table(params, CouplingMethod::Analytic)?;
        let c = Complex64::new(phi_c_for_gain(g0, params)?, 0.0);
        let s = scattering_matrix(&PumpPoint { phi_c: c, omega_p: el.omega_a + el.omega_b }, params)?;
        let ga = table.g * el.omega0_sq[0] / (el.omega_a * el.omega_a);
        let gb = table.g * el.omega0_sq[1] / (el.omega_b * el.omega_b);
        let m = [[Complex64::new(s.g_tilde_a, 0.0), -2.0 * I * ga * c], [2.0 * I * gb * c.conj(), Complex64::new(s.g_tilde_b, 0.0)]];
        Ok(Self { m, c, a1: (s.s11 + 1.0) * amp, b1: s.s21 * amp, table })
    }

    /// `M^-1 diag(i, -i) d`, signal row.
    fn apply(&self, d: [Complex64; 2]) -> Complex64 {
        let [[m11, m12], [m21, m22]] = self.m;
        let det = m11 * m22 - m12 * m21;
        (m22 * (I * d[0]) - m12 * (-I * d[1])) / det
    }
}

/// Third-order signal correction of the soft-pump three-wave model from its
/// effective drive vector.
fn sop3_phi3_printed(p: &Printed, params: &CircuitParams) -> Result<Complex64> {
    let el = derive_elements(params)?;
    let f = response_factors(params, el.omega_a, el.omega_b)?;
    let g2 = p.table.g * p.table.g;
    let (a, bc) = (p.a1, p.b1);
    let d = [
        2.0 * g2 * (f.f_delta + f.f_sigma) * a * bc.norm_sqr(),
        2.0 * g2 * (f.f_delta + f.f_sigma.conj()) * bc * a.norm_sqr(),
    ];
    Ok(p.apply(d))
}

/// Soft-pump three-wave corrections at resonance, pumped for gain `g0`.
///
/// `phi3` comes from the effective drive vector with the exact `M^-1`; `phi5`
/// from the order-by-order engine, which also supplies the saturation flux at
/// [`DEFAULT_CRITERION_DB`].
pub fn sop3_corrections(amp_signal: f64, params: &CircuitParams, g0: f64) -> Result<PerturbationResult> {
    let p = Printed::new(amp_signal, params, g0)?;
    let phi3 = sop3_phi3_printed(&p, params)?;
    let model = PerturbativeModel::Sop3O5;
    let engine = Engine::with_gain(params, &model.spec(), g0, 5)?;
    let sol = engine.solve()?;
    let phi5 = sol.signal[5] * amp_signal.powi(5);
    let est = exact_saturation(&sol, 5, DEFAULT_CRITERION_DB)?;
    Ok(PerturbationResult {
        phi1: p.a1,
        phi3,
        phi5,
        model,
        saturation_flux: est.flux,
        criterion_db: DEFAULT_CRITERION_DB,
        reliable: est.reliable && phi3.norm() < p.a1.norm() && phi5.norm() <= phi3.norm(),
    })
}

/// Third-order signal correction of the stiff-pump fifth-degree model from its
/// drive vector, pumped for gain `g0` by the three-wave term alone.
pub fn stp5_third_order(amp_signal: f64, params: &CircuitParams, g0: f64) -> Result<Complex64> {
    let p = Printed::new(amp_signal, params, g0)?;
    let (ha, hb) = (p.table.h_a, p.table.h_b);
    let (a, bc, c) = (p.a1, p.b1, p.c);
    let b = bc.conj();
    let d = [
        12.0 * ha * c * a.norm_sqr() * bc + 6.0 * ha * c.conj() * a * a * b + 6.0 * hb * c * b.norm_sqr() * bc,
        6.0 * ha * c.conj() * a.norm_sqr() * a + 12.0 * hb * c.conj() * b.norm_sqr() * a + 6.0 * hb * c * bc * bc * a.conj(),
    ];
    Ok(-p.apply(d))
}

/// Fifth-order signal correction from the `l_aa` term of the seventh-degree
/// energy, pumped for gain `g0`.
pub fn stp7_fifth_order(amp_signal: f64, params: &CircuitParams, g0: f64) -> Result<Complex64> {
    let p = Printed::new(amp_signal, params, g0)?;
    let l = p.table.l_aa;
    let (a, bc, c) = (p.a1, p.b1, p.c);
    let a2 = a.norm_sqr();
    let d = [
        20.0 * a2 * (3.0 * l * a2 * bc * c + 2.0 * l * a * a * bc.conj() * c.conj()),
        20.0 * a2 * (l * a2 * a * c.conj()),
    ];
    Ok(p.apply(d))
}

/// Smallest input amplitude where the gain moves by `criterion_db` from its
/// small-signal value, using the series through `order`.
pub fn exact_saturation(sol: &Corrections, order: usize, criterion_db: f64) -> Result<SaturationEstimate> {
    if !(criterion_db > 0.0 && criterion_db.is_finite()) {
        return Err(Error::InvalidParameter(format!("criterion must be positive, got {criterion_db}")));
    }
    let g0 = sol.gain(1e-300, 1);
    let crossed = |amp: f64| (10.0 * (sol.gain(amp, order) / g0).log10()).abs() >= criterion_db;
    let a1 = sol.signal[1].norm();
    let scale = (3..=order)
        .step_by(2)
        .filter(|&n| sol.signal[n].norm() > 0.0)
        .map(|n| (a1 / sol.signal[n].norm()).powf(1.0 / (n as f64 - 1.0)))
        .fold(f64::INFINITY, f64::min);
    if !scale.is_finite() {
        return Err(Error::NotBracketed("no nonlinear correction through this order".into()));
    }
    let mut lo = 1e-6 * scale;
    if crossed(lo) {
        return Err(Error::NotBracketed("criterion crossed at vanishing input".into()));
    }
    let mut hi = f64::NAN;
    while lo < 1e4 * scale {
        let next = lo * 1.02;
        if crossed(next) {
            hi = next;
            break;
        }
        lo = next;
    }
    if hi.is_nan() {
        return Err(Error::NotBracketed("gain criterion never reached".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if crossed(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let amp = 0.5 * (lo + hi);
    let mags: Vec<f64> = (1..=order).step_by(2).map(|n| sol.signal[n].norm() * amp.powi(n as i32)).collect();
    let reliable = mags.windows(2).all(|w| w[1] < w[0]);
    Ok(SaturationEstimate { flux: amp, reliable })
}

/// Closed-form large-gain saturation flux.
pub fn high_gain_saturation(model: PerturbativeModel, params: &CircuitParams, g0: f64, criterion_db: f64) -> Result<f64> {
    let el = derive_elements(params)?;
    let t = coupling_table(params, CouplingMethod::Analytic)?;
    let eps = epsilon(criterion_db).abs();
    let (ga, gb) = (params.gamma_a / el.omega_a, params.gamma_b / el.omega_b);
    let f = response_factors(params, el.omega_a, el.omega_b)?;
    let v = match model {
        PerturbativeModel::Sop3O3 => g0.powf(-0.75) * eps.sqrt() * gb.sqrt() / t.g * f.f_sigma.im.abs().powf(-0.5),
        PerturbativeModel::Sop3O5 => {
            g0.powf(-0.625) * gb.sqrt() / t.g * (0.5 * eps / (f.f_sigma + f.f_delta).re.abs()).powf(0.25)
        }
        PerturbativeModel::Stp5O3 => (eps * t.g / (4.0 * t.h_a.abs()) * (1.0 + ga / gb)).sqrt() * g0.powf(-0.75),
        PerturbativeModel::Stp7 => (t.g / t.l_aa.abs()).powf(0.25) * g0.powf(-0.625),
        PerturbativeModel::Stp5O5 => {
            return Err(Error::InvalidParameter("StP5-o5 has no closed form; use the exact route".into()))
        }
    };
    Ok(v)
}

/// Saturation flux of `model` at resonance and gain `g0` by either route.
pub fn saturation_estimate(
    model: PerturbativeModel,
    route: SaturationRoute,
    params: &CircuitParams,
    g0: f64,
    criterion_db: f64,
) -> Result<SaturationEstimate> {
    match route {
        SaturationRoute::HighGain => {
            Ok(SaturationEstimate { flux: high_gain_saturation(model, params, g0, criterion_db)?, reliable: g0 >= 100.0 })
        }
        SaturationRoute::Exact => {
            let sol = Engine::with_gain(params, &model.spec(), g0, model.order())?.solve()?;
            exact_saturation(&sol, model.order() as usize, criterion_db)
        }
    }
}

/// Saturation flux by the exact route.
pub fn saturation_flux_perturbative(
    model: PerturbativeModel,
    params: &CircuitParams,
    g0: f64,
    criterion_db: f64,
) -> Result<f64> {
    Ok(saturation_estimate(model, SaturationRoute::Exact, params, g0, criterion_db)?.flux)
}

#[cfg(test)]
mod tests;
