use serde::{Deserialize, Serialize};

use super::arm::Arm;
use crate::error::{Error, Result};
use crate::units::{PHI0, TWO_PI};

fn default_reference_phi_ext() -> f64 {
    TWO_PI
}

/// Physical description of one amplifier, in SI units.
///
/// `f_a`, `f_b` are the target mode frequencies at `reference_phi_ext`; the mode
/// capacitances are sized there and held fixed when the circuit is operated at
/// a different `phi_ext`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub beta: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub alpha: f64,
    pub phi_ext: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub i_c: f64,
    #[serde(default = "default_reference_phi_ext")]
    pub reference_phi_ext: f64,
}

impl CircuitParams {
    /// 7.5 / 5.0 GHz modes, gamma / 2pi = 0.1 GHz, 1 uA junctions, biased at 2pi.
    pub fn baseline(beta: f64) -> Self {
        let gamma = TWO_PI * 0.1e9;
        Self {
            beta,
            zeta: 0.0,
            alpha: 0.0,
            phi_ext: TWO_PI,
            f_a: 7.5e9,
            f_b: 5.0e9,
            gamma_a: gamma,
            gamma_b: gamma,
            gamma_c: gamma,
            i_c: 1e-6,
            reference_phi_ext: TWO_PI,
        }
    }

    /// Sets `zeta` from the inverse participation ratio `1/p = 1 + zeta`.
    pub fn with_inv_p(mut self, inv_p: f64) -> Self {
        self.zeta = inv_p - 1.0;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma_a = gamma;
        self.gamma_b = gamma;
        self.gamma_c = gamma;
        self
    }

    pub fn inv_p(&self) -> f64 {
        1.0 + self.zeta
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta", self.beta),
            ("f_a", self.f_a),
            ("f_b", self.f_b),
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_c", self.gamma_c),
            ("i_c", self.i_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("zeta", self.zeta), ("alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.phi_ext.is_finite() || !self.reference_phi_ext.is_finite() {
            return Err(Error::InvalidParameter("flux bias must be finite".into()));
        }
        Arm::new(self.beta, self.alpha)?;
        Ok(())
    }
}

/// Frequency scale factors `omega^2 / omega_0^2` of the three modes at a bias.
///
/// `kappa` is the arm curvature `cos D / (1 + alpha cos D)` at `delta = phi_ext / 4`.
pub fn stiffness_factors(beta: f64, zeta: f64, kappa: f64) -> [f64; 3] {
    let s_ab = (beta + 2.0 * kappa) / (beta + beta * zeta + 2.0 * zeta * kappa);
    let s_c = (beta + 4.0 * kappa) / (beta + beta * zeta + 4.0 * zeta * kappa);
    [s_ab, s_ab, s_c]
}

/// Element values in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedElements {
    pub l_j: f64,
    pub l_in: f64,
    pub l_out: f64,
    pub l_stray: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub z_a: f64,
    pub z_b: f64,
    pub z_c: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub phi0: f64,
    pub e_j: f64,
    /// Bare stiffness scales `omega_0j^2` (rad/s)^2: `omega_j^2 = omega_0j^2 * s_j(bias)`.
    pub omega0_sq: [f64; 3],
}

pub fn derive_elements(params: &CircuitParams) -> Result<DerivedElements> {
    params.validate()?;
    let phi0 = PHI0;
    let l_j = phi0 / params.i_c;
    let l_in = l_j / params.beta;
    let l_out = params.zeta * l_in;
    let l_stray = params.alpha * l_j;
    let arm = Arm::new(params.beta, params.alpha)?;

    let kappa_ref = arm.kappa(params.reference_phi_ext / 4.0);
    let s_ref = stiffness_factors(params.beta, params.zeta, kappa_ref);
    if s_ref.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::ImaginaryFrequency(format!(
            "reference bias {} gives non-positive stiffness {s_ref:?}",
            params.reference_phi_ext
        )));
    }
    let wa = TWO_PI * params.f_a;
    let wb = TWO_PI * params.f_b;
    let w0a2 = wa * wa / s_ref[0];
    let w0b2 = wb * wb / s_ref[1];
    let w0c2 = 0.5 * (w0a2 + w0b2);

    let c_a = 1.0 / (w0a2 * l_in);
    let c_b = 1.0 / (w0b2 * l_in);
    let c_c = 4.0 * c_a * c_b / (c_a + c_b);

    let [omega_a, omega_b, omega_c] =
        frequencies_from(&[w0a2, w0b2, w0c2], params.beta, params.zeta, &arm, params.phi_ext)?;

    Ok(DerivedElements {
        l_j,
        l_in,
        l_out,
        l_stray,
        c_a,
        c_b,
        c_c,
        z_a: 1.0 / (params.gamma_a * c_a),
        z_b: 1.0 / (params.gamma_b * c_b),
        z_c: (c_a + c_b) / (2.0 * c_a * c_b * params.gamma_c),
        omega_a,
        omega_b,
        omega_c,
        phi0,
        e_j: phi0 * phi0 / l_j,
        omega0_sq: [w0a2, w0b2, w0c2],
    })
}

fn frequencies_from(
    omega0_sq: &[f64; 3],
    beta: f64,
    zeta: f64,
    arm: &Arm,
    phi_ext: f64,
) -> Result<[f64; 3]> {
    let s = stiffness_factors(beta, zeta, arm.kappa(phi_ext / 4.0));
    let mut out = [0.0; 3];
    for (k, name) in ["a", "b", "c"].iter().enumerate() {
        let w2 = omega0_sq[k] * s[k];
        if !(w2 > 0.0) {
            return Err(Error::ImaginaryFrequency(format!(
                "omega_{name}^2 = {w2:.4e} at phi_ext = {phi_ext}"
            )));
        }
        out[k] = w2.sqrt();
    }
    Ok(out)
}

impl DerivedElements {
    /// Mode frequencies of these fixed elements at another bias or outer ratio.
    pub fn frequencies_at(&self, beta: f64, zeta: f64, alpha: f64, phi_ext: f64) -> Result<[f64; 3]> {
        let arm = Arm::new(beta, alpha)?;
        frequencies_from(&self.omega0_sq, beta, zeta, &arm, phi_ext)
    }
}

/// Operating normal-mode angular frequencies (rad/s) at `params.phi_ext`.
pub fn mode_frequencies(params: &CircuitParams) -> Result<(f64, f64, f64)> {
    let e = derive_elements(params)?;
    Ok((e.omega_a, e.omega_b, e.omega_c))
}
