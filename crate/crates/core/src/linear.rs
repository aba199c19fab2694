//! Closed-form response of the ideal amplifier: stiff pump, three-wave coupling only.
//!
//! Complex amplitudes follow `phi(t) = phi e^{-i omega t} + c.c.` throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{coupling_table, derive_elements, CircuitParams, CouplingMethod, DerivedElements};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpPoint {
    /// Pump-mode harmonic at `omega_p`.
    pub phi_c: Complex64,
    /// rad/s
    pub omega_p: f64,
}

/// Flux-amplitude scattering matrix of the signal and (conjugated) idler ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMatrix {
    pub s11: Complex64,
    pub s12: Complex64,
    pub s21: Complex64,
    pub s22: Complex64,
    pub g_tilde_a: f64,
    pub g_tilde_b: f64,
    /// Ratio of photon flux per squared flux amplitude, signal port over idler port.
    pub port_weight_ratio: f64,
}

impl SMatrix {
    pub fn gain(&self) -> f64 {
        self.s11.norm_sqr()
    }

    pub fn gain_db(&self) -> f64 {
        10.0 * self.gain().log10()
    }

    /// The same matrix with both ports normalized to photon flux.
    pub fn photon_normalized(&self) -> SMatrix {
        let r = self.port_weight_ratio.sqrt();
        SMatrix { s12: self.s12 * r, s21: self.s21 / r, port_weight_ratio: 1.0, ..*self }
    }
}

/// Three-wave couplings as they enter the signal and idler rows: the energy
/// coefficient scaled by `omega_0j^2 / omega_j^2`.
fn row_couplings(params: &CircuitParams, el: &DerivedElements) -> Result<(f64, f64)> {
    let g = coupling_table(params, CouplingMethod::Analytic)?.g;
    let ga = g * el.omega0_sq[0] / (el.omega_a * el.omega_a);
    let gb = g * el.omega0_sq[1] / (el.omega_b * el.omega_b);
    Ok((ga, gb))
}

/// Driven linear pump mode: `phi_c = -i sqrt(2) g_c w_p / (w_c^2 - w_p^2 - i g_c w_p) phi_c,in`.
pub fn pump_response(amp_pump: f64, omega_p: f64, params: &CircuitParams) -> Result<PumpPoint> {
    let el = derive_elements(params)?;
    Ok(PumpPoint { phi_c: pump_factor(omega_p, params.gamma_c, el.omega_c) * amp_pump, omega_p })
}

fn pump_factor(wp: f64, gc: f64, wc: f64) -> Complex64 {
    -I * std::f64::consts::SQRT_2 * gc * wp / Complex64::new(wc * wc - wp * wp, -gc * wp)
}

/// On-resonance scattering matrix `S = 2 M^-1 G - 1` with
/// `M = [[g_a, -2i g phi_c], [2i g phi_c*, g_b]]` in reduced decay rates.
pub fn scattering_matrix(pump: &PumpPoint, params: &CircuitParams) -> Result<SMatrix> {
    let el = derive_elements(params)?;
    scattering_matrix_detuned(pump, el.omega_a, params)
}

/// Scattering matrix for a signal tone at `omega_s` and idler at `omega_p - omega_s`.
///
/// Extension of the resonant form in the rotating-wave limit: the diagonal of
/// `M` becomes `g_a - 2i delta_s / w_a` and `g_b + 2i delta_i / w_b` with
/// `delta_s = w_s - w_a`, `delta_i = w_i - w_b`, and reduces to the printed
/// matrix on resonance.
pub fn scattering_matrix_detuned(pump: &PumpPoint, omega_s: f64, params: &CircuitParams) -> Result<SMatrix> {
    let el = derive_elements(params)?;
    let (ga, gb) = row_couplings(params, &el)?;
    let (wa, wb) = (el.omega_a, el.omega_b);
    let wi = pump.omega_p - omega_s;
    if !(wi > 0.0) {
        return Err(Error::InvalidParameter("idler frequency must be positive".into()));
    }
    let da = params.gamma_a / wa;
    let db = params.gamma_b / wb;
    let m11 = Complex64::new(da, -2.0 * (omega_s - wa) / wa);
    let m22 = Complex64::new(db, 2.0 * (wi - wb) / wb);
    let m12 = -2.0 * I * ga * pump.phi_c;
    let m21 = 2.0 * I * gb * pump.phi_c.conj();
    let det = m11 * m22 - m12 * m21;
    if det.norm() <= 1e-10 * (m11 * m22).norm().max(f64::MIN_POSITIVE) {
        return Err(Error::AboveThreshold);
    }
    // inverse of M, then S = 2 M^-1 diag(da, db) - 1
    let (i11, i12, i21, i22) = (m22 / det, -m12 / det, -m21 / det, m11 / det);
    let weight = (el.c_a * params.gamma_a * wa) / (el.c_b * params.gamma_b * wb);
    Ok(SMatrix {
        s11: 2.0 * i11 * da - 1.0,
        s12: 2.0 * i12 * db,
        s21: 2.0 * i21 * da,
        s22: 2.0 * i22 * db - 1.0,
        g_tilde_a: da,
        g_tilde_b: db,
        port_weight_ratio: weight,
    })
}

/// `4 g_a g_b |phi_c|^2` at which the resonant gain diverges.
pub fn threshold_phi_c(params: &CircuitParams) -> Result<f64> {
    let el = derive_elements(params)?;
    let (ga, gb) = row_couplings(params, &el)?;
    let x = (params.gamma_a / el.omega_a) * (params.gamma_b / el.omega_b);
    Ok((x / (4.0 * ga * gb)).sqrt())
}

/// Pump-mode amplitude `|phi_c|` giving resonant power gain `g0`.
pub fn phi_c_for_gain(g0: f64, params: &CircuitParams) -> Result<f64> {
    if !(g0 >= 1.0 && g0.is_finite()) {
        return Err(Error::InvalidParameter(format!("target gain must be >= 1, got {g0}")));
    }
    // sqrt(G0) = (x + X) / (x - X) with x = g_a g_b (reduced), X = 4 g_a g_b |phi_c|^2
    let r = g0.sqrt();
    let th = threshold_phi_c(params)?;
    Ok(th * ((r - 1.0) / (r + 1.0)).sqrt())
}

/// Pump drive amplitude at `omega_p = omega_a + omega_b` giving resonant power gain `g0`.
pub fn pump_for_gain(g0: f64, params: &CircuitParams) -> Result<f64> {
    let el = derive_elements(params)?;
    let phi_c = phi_c_for_gain(g0, params)?;
    let f = pump_factor(el.omega_a + el.omega_b, params.gamma_c, el.omega_c).norm();
    Ok(phi_c / f)
}

/// Pump drive amplitude at `omega_p = omega_a + omega_b` where the resonant gain diverges.
pub fn threshold_pump_amp(params: &CircuitParams) -> Result<f64> {
    let el = derive_elements(params)?;
    let f = pump_factor(el.omega_a + el.omega_b, params.gamma_c, el.omega_c).norm();
    Ok(threshold_phi_c(params)? / f)
}
