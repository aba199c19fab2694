//! Nonlinear coupling coefficients of the energy expansion about the origin.
//!
//! Sign conventions: the energy contains `-g abc`, `+k_aa a^4`, `+k_ab a^2 b^2`,
//! `+h_a a^3 b c`, `+h_c a b c^3` and `-l_aa a^5 b c`.

use serde::{Deserialize, Serialize};

use super::energy::{EnergyModel, InnerSolver, ARM_COEFFS, OUTER_WEIGHT, QUAD};
use super::jet::{Jet, MAX_DEGREE};
use super::params::CircuitParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingTable {
    pub g: f64,
    pub k_aa: f64,
    pub k_bb: f64,
    pub k_cc: f64,
    pub k_ab: f64,
    pub k_ac: f64,
    pub k_bc: f64,
    pub h_a: f64,
    pub h_b: f64,
    pub h_c: f64,
    pub l_aa: f64,
    pub l_bb: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub p_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMethod {
    Analytic,
    NumericDerivative,
}

/// Participation ratios of the three modes at a bias.
pub fn participation(beta: f64, zeta: f64, kappa: f64) -> [f64; 3] {
    let pab = 1.0 / (1.0 + zeta + 2.0 * zeta * kappa / beta);
    let pc = 1.0 / (1.0 + zeta + 4.0 * zeta * kappa / beta);
    [pab, pab, pc]
}

/// Closed forms for the bare ring (no outer or stray inductance).
pub fn closed_form_table(beta: f64, phi_ext: f64) -> CouplingTable {
    let (s, c) = (phi_ext / 4.0).sin_cos();
    CouplingTable {
        g: s / beta,
        k_aa: -c / (96.0 * beta),
        k_bb: -c / (96.0 * beta),
        k_cc: -c / (6.0 * beta),
        k_ab: -c / (16.0 * beta),
        k_ac: -c / (4.0 * beta),
        k_bc: -c / (4.0 * beta),
        h_a: s / (24.0 * beta),
        h_b: s / (24.0 * beta),
        h_c: s / (6.0 * beta),
        l_aa: s / (1920.0 * beta),
        l_bb: s / (1920.0 * beta),
        p_a: 1.0,
        p_b: 1.0,
        p_c: 1.0,
    }
}

/// Cross-Kerr `k_ab` of the ring with outer inductors from the third-order
/// inversion of the outer constraint (no stray inductance).
///
/// The `zeta`-proportional part of the numerator is `2 zeta (3 - cos(phi_ext/2))`;
/// see [`perturbative_kab_as_printed`] for the variant that circulates in print.
pub fn perturbative_kab(params: &CircuitParams) -> f64 {
    let z = params.zeta;
    let c = (params.phi_ext / 4.0).cos();
    kab_from_numerator(params, 2.0 * z * (3.0 - (params.phi_ext / 2.0).cos()), c)
}

/// Same rational form with the numerator `2 zeta (-3 + cos x + 8 sin x)`.
/// It disagrees with the energy at first order in `zeta` and is kept only for
/// comparison.
pub fn perturbative_kab_as_printed(params: &CircuitParams) -> f64 {
    let (s, c) = (params.phi_ext / 4.0).sin_cos();
    kab_from_numerator(params, 2.0 * params.zeta * (-3.0 + c + 8.0 * s), c)
}

fn kab_from_numerator(params: &CircuitParams, zeta_part: f64, c: f64) -> f64 {
    let b = params.beta;
    let z = params.zeta;
    let num = b * (1.0 + z) * c + zeta_part;
    let d1 = b + b * z + 2.0 * z * c;
    let d2 = b + b * z + 4.0 * z * c;
    -b.powi(3) * num / (16.0 * d1.powi(4) * d2)
}

/// Taylor expansion of the outer-mode energy about the origin, constant dropped.
#[derive(Debug, Clone)]
pub struct EnergySeries {
    pub jet: Jet,
    pub participation: [f64; 3],
}

impl EnergySeries {
    pub fn new(model: &EnergyModel) -> Self {
        let e_arm = model.arm.taylor(model.x, MAX_DEGREE);
        // derivative series of E_arm about x
        let de: Vec<f64> = (0..MAX_DEGREE).map(|k| (k + 1) as f64 * e_arm[k + 1]).collect();
        let curv = 2.0 * e_arm[2];
        let h0 = [QUAD[0] + curv, QUAD[1] + curv, QUAD[2] + 4.0 * curv];
        let z = model.zeta;
        let vars = [Jet::var(0), Jet::var(1), Jet::var(2)];

        let arm_t = |y: &[Jet; 3]| -> Vec<Jet> {
            ARM_COEFFS
                .iter()
                .map(|w| {
                    let mut t = Jet::zero();
                    for k in 0..3 {
                        t.axpy(w[k], &y[k]);
                    }
                    t
                })
                .collect()
        };
        let grad = |y: &[Jet; 3], ts: &[Jet]| -> [Jet; 3] {
            let mut g = [y[0].scale(QUAD[0]), y[1].scale(QUAD[1]), y[2].scale(QUAD[2])];
            for (j, t) in ts.iter().enumerate() {
                let mut s = t.compose(&de);
                s.c[0] = 0.0; // E_arm'(x) cancels by symmetry of the four arms
                for k in 0..3 {
                    g[k].axpy(ARM_COEFFS[j][k], &s);
                }
            }
            g
        };

        let mut y = vars.clone();
        let mut lin = [1.0; 3];
        if z > 0.0 {
            for k in 0..3 {
                lin[k] = 1.0 + z * OUTER_WEIGHT[k] * h0[k];
            }
            y = [Jet::zero(), Jet::zero(), Jet::zero()];
            for _ in 0..=MAX_DEGREE + 1 {
                let ts = arm_t(&y);
                let g = grad(&y, &ts);
                let mut next = [Jet::zero(), Jet::zero(), Jet::zero()];
                for k in 0..3 {
                    let nl = g[k].sub(&y[k].scale(h0[k]));
                    next[k] = vars[k].sub(&nl.scale(z * OUTER_WEIGHT[k])).scale(1.0 / lin[k]);
                }
                y = next;
            }
        }
        let ts = arm_t(&y);
        let mut e = Jet::zero();
        e.axpy(0.25, &y[0].mul(&y[0]));
        e.axpy(0.25, &y[1].mul(&y[1]));
        e.axpy(0.5, &y[2].mul(&y[2]));
        for t in &ts {
            let mut s = t.compose(&e_arm);
            s.c[0] = 0.0;
            e = e.add(&s);
        }
        if z > 0.0 {
            let g = grad(&y, &ts);
            e.axpy(z, &g[0].mul(&g[0]));
            e.axpy(z, &g[1].mul(&g[1]));
            e.axpy(0.5 * z, &g[2].mul(&g[2]));
        }
        e.c[0] = 0.0;
        Self { jet: e, participation: [1.0 / lin[0], 1.0 / lin[1], 1.0 / lin[2]] }
    }

    pub fn table(&self) -> CouplingTable {
        let j = &self.jet;
        CouplingTable {
            g: -j.coeff(1, 1, 1),
            k_aa: j.coeff(4, 0, 0),
            k_bb: j.coeff(0, 4, 0),
            k_cc: j.coeff(0, 0, 4),
            k_ab: j.coeff(2, 2, 0),
            k_ac: j.coeff(2, 0, 2),
            k_bc: j.coeff(0, 2, 2),
            h_a: j.coeff(3, 1, 1),
            h_b: j.coeff(1, 3, 1),
            h_c: j.coeff(1, 1, 3),
            l_aa: -j.coeff(5, 1, 1),
            l_bb: -j.coeff(1, 5, 1),
            p_a: self.participation[0],
            p_b: self.participation[1],
            p_c: self.participation[2],
        }
    }
}

/// Finite-difference partial derivative of `f` with multi-index `orders`,
/// central stencils of spacing `h` and `levels` Richardson refinements.
pub fn fd_partial<F>(f: &mut F, orders: [usize; 3], h: f64, levels: usize) -> f64
where
    F: FnMut([f64; 3]) -> f64,
{
    let mut row: Vec<f64> = (0..=levels).map(|l| fd_stencil(f, orders, h / 2f64.powi(l as i32))).collect();
    // row[l] has error O(h_l^2); eliminate successively
    for k in 1..=levels {
        let fac = 4f64.powi(k as i32);
        for l in (k..=levels).rev() {
            row[l] = (fac * row[l] - row[l - 1]) / (fac - 1.0);
        }
    }
    row[levels]
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn fd_stencil<F>(f: &mut F, orders: [usize; 3], h: f64) -> f64
where
    F: FnMut([f64; 3]) -> f64,
{
    let pts = |m: usize| -> Vec<(f64, f64)> {
        (0..=m)
            .map(|l| {
                let w = if l % 2 == 0 { 1.0 } else { -1.0 } * binom(m, l);
                ((m as f64 / 2.0 - l as f64) * h, w)
            })
            .collect()
    };
    let (pa, pb, pc) = (pts(orders[0]), pts(orders[1]), pts(orders[2]));
    let mut acc = 0.0;
    for &(xa, wa) in &pa {
        for &(xb, wb) in &pb {
            for &(xc, wc) in &pc {
                acc += wa * wb * wc * f([xa, xb, xc]);
            }
        }
    }
    let n = orders.iter().sum::<usize>() as i32;
    acc / h.powi(n)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Taylor coefficient of `E` at multi-index `orders`, by finite differences.
///
/// Up to fourth order the stencil spacing is 2^-10 (about 1e-3, but exactly
/// representable so stencil abscissae carry no rounding) with one Richardson
/// level.
/// Higher orders need wider stencils and more levels to stay above the
/// rounding floor.
pub fn fd_coefficient(model: &EnergyModel, orders: [usize; 3]) -> Result<f64> {
    let n: usize = orders.iter().sum();
    let (h, levels) = match n {
        // with stray inductance the per-arm increments are first order in the
        // step, which costs three digits at h = 2^-10
        0..=4 if model.arm.alpha > 0.0 => (1.0 / 16.0, 2),
        0..=4 => (1.0 / 1024.0, 1),
        5 | 6 if model.arm.alpha > 0.0 => (1.0 / 8.0, 3),
        5 | 6 => (1.0 / 16.0, 2),
        _ => (0.25, 4),
    };
    let mut solver = InnerSolver::new();
    let mut err: Option<Error> = None;
    let mut f = |x: [f64; 3]| match model.energy_increment(x, &mut solver) {
        Ok(e) => e,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let d = fd_partial(&mut f, orders, h, levels);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(d / (factorial(orders[0]) * factorial(orders[1]) * factorial(orders[2])))
}

fn numeric_table(model: &EnergyModel, participation: [f64; 3]) -> Result<CouplingTable> {
    let c = |o: [usize; 3]| fd_coefficient(model, o);
    Ok(CouplingTable {
        g: -c([1, 1, 1])?,
        k_aa: c([4, 0, 0])?,
        k_bb: c([0, 4, 0])?,
        k_cc: c([0, 0, 4])?,
        k_ab: c([2, 2, 0])?,
        k_ac: c([2, 0, 2])?,
        k_bc: c([0, 2, 2])?,
        h_a: c([3, 1, 1])?,
        h_b: c([1, 3, 1])?,
        h_c: c([1, 1, 3])?,
        l_aa: -c([5, 1, 1])?,
        l_bb: -c([1, 5, 1])?,
        p_a: participation[0],
        p_b: participation[1],
        p_c: participation[2],
    })
}

/// Coupling table at the bias in `params`.
///
/// The analytic route uses closed forms for a bare ring and the exact series
/// inversion of the outer constraint otherwise. The numeric route
/// differentiates the energy itself.
pub fn coupling_table(params: &CircuitParams, method: CouplingMethod) -> Result<CouplingTable> {
    let model = EnergyModel::new(params)?;
    let kappa = model.arm.kappa(model.x);
    let s = super::params::stiffness_factors(params.beta, params.zeta, kappa);
    if s.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::ImaginaryFrequency(format!(
            "origin is not a stable minimum at phi_ext = {}",
            params.phi_ext
        )));
    }
    expansion_coefficients(params, method)
}

/// Taylor coefficients about the origin whether or not it is a minimum.
pub fn expansion_coefficients(params: &CircuitParams, method: CouplingMethod) -> Result<CouplingTable> {
    let model = EnergyModel::new(params)?;
    let kappa = model.arm.kappa(model.x);
    let part = participation(params.beta, params.zeta, kappa);
    match method {
        CouplingMethod::Analytic if params.zeta == 0.0 && params.alpha == 0.0 => {
            Ok(closed_form_table(params.beta, params.phi_ext))
        }
        CouplingMethod::Analytic => Ok(EnergySeries::new(&model).table()),
        CouplingMethod::NumericDerivative => numeric_table(&model, part),
    }
}
