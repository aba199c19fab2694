//! Ground-state search over node fluxes and the Kerr-nulling bias of an arm
//! with stray inductance.

use nalgebra::{Matrix3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::arm::Arm;
use super::energy::EnergyModel;
use super::params::CircuitParams;
use crate::error::Result;

pub const STABILITY_STARTS: usize = 32;
pub const STABILITY_SEED: u64 = 0x5eed_0001;
const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub degeneracy: usize,
    /// Node fluxes of one global minimum (zero mean).
    pub ground_state: [f64; 4],
    pub ground_energy: f64,
    pub nulling_flux: Option<f64>,
}

/// Fourth derivative of the arm energy in `delta`, at `delta = phi_ext / 4`.
pub fn arm_fourth_derivative(arm: &Arm, phi_ext: f64) -> f64 {
    24.0 * arm.taylor(phi_ext / 4.0, 4)[4]
}

/// Bias nearest 2pi at which the fourth arm derivative vanishes.
pub fn nulling_flux(beta: f64, alpha: f64) -> Result<Option<f64>> {
    let arm = Arm::new(beta, alpha)?;
    if alpha == 0.0 {
        return Ok(Some(2.0 * PI));
    }
    let f = |phi: f64| arm_fourth_derivative(&arm, phi);
    let step = 0.005 * PI;
    // walk outward from 2pi in both directions, take the closer bracket
    for k in 0..400 {
        for dir in [1.0, -1.0] {
            let a = 2.0 * PI + dir * k as f64 * step;
            let b = a + dir * step;
            let (fa, fb) = (f(a), f(b));
            if fa == 0.0 {
                return Ok(Some(a));
            }
            if fa * fb < 0.0 {
                let (mut lo, mut hi, mut flo) = (a.min(b), a.max(b), if a < b { fa } else { fb });
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    let fm = f(m);
                    if fm == 0.0 {
                        return Ok(Some(m));
                    }
                    if fm * flo < 0.0 {
                        hi = m;
                    } else {
                        lo = m;
                        flo = fm;
                    }
                }
                return Ok(Some(0.5 * (lo + hi)));
            }
        }
    }
    Ok(None)
}

fn minimize(model: &EnergyModel, mut y: [f64; 3]) -> [f64; 3] {
    for _ in 0..500 {
        let (g, h) = model.inner_grad_hess(y);
        let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if gn < 1e-12 {
            break;
        }
        let hm = Matrix3::from_fn(|i, j| h[i][j]);
        let gv = Vector3::new(g[0], g[1], g[2]);
        let mut dir = -gv;
        if let Some(ch) = hm.cholesky() {
            dir = -ch.solve(&gv);
        }
        let e0 = model.inner_energy(y);
        let slope = gv.dot(&dir);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial = [y[0] + t * dir[0], y[1] + t * dir[1], y[2] + t * dir[2]];
            if model.inner_energy(trial) <= e0 + 1e-4 * t * slope {
                y = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    y
}

fn modes_to_nodes(y: [f64; 3]) -> [f64; 4] {
    let [a, b, c] = y;
    [0.5 * a - 0.5 * c, 0.5 * b + 0.5 * c, -0.5 * a - 0.5 * c, -0.5 * b + 0.5 * c]
}

/// Multi-start search for the ground state of the bare ring (outer inductors
/// are not part of this analysis) plus the nulling bias.
pub fn stability_and_nulling(params: &CircuitParams) -> Result<StabilityReport> {
    let model = EnergyModel::new(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(STABILITY_SEED);
    let mut minima: Vec<([f64; 3], f64)> = Vec::new();
    for _ in 0..STABILITY_STARTS {
        let n: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0 * PI..2.0 * PI));
        let y0 = [n[0] - n[2], n[1] - n[3], -0.5 * (n[0] + n[2] - n[1] - n[3])];
        let y = minimize(&model, y0);
        let e = model.inner_energy(y);
        if !minima.iter().any(|(m, _)| dist(m, &y) < CLUSTER_TOL * 100.0) {
            minima.push((y, e));
        }
    }
    // the origin is always a stationary point; include it if it is a minimum
    let origin = minimize(&model, [0.0; 3]);
    let eo = model.inner_energy(origin);
    if !minima.iter().any(|(m, _)| dist(m, &origin) < CLUSTER_TOL * 100.0) {
        minima.push((origin, eo));
    }
    let emin = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let etol = 1e-9 * (1.0 + emin.abs());
    let mut ground: Vec<[f64; 3]> = minima.iter().filter(|m| m.1 <= emin + etol).map(|m| m.0).collect();
    ground.sort_by(|a, b| norm(a).partial_cmp(&norm(b)).unwrap());
    let degeneracy = ground.len();
    let stable = degeneracy == 1 && norm(&ground[0]) < 1e-6;
    Ok(StabilityReport {
        stable,
        degeneracy,
        ground_state: modes_to_nodes(ground[0]),
        ground_energy: emin,
        nulling_flux: nulling_flux(params.beta, params.alpha)?,
    })
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}
