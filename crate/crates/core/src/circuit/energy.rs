//! Potential energy of the ring in mode coordinates.
//!
//! Inner modes `y = (a, b, c)` carry the ring energy
//! `E_JRM(y) = (a^2 + b^2 + 2c^2)/4 + sum_j E_arm(delta_j)`.
//! With outer inductors (`zeta > 0`) the outer modes `yt` are tied to the inner
//! ones through `yt = y + zeta * D * grad E_JRM(y)` with `D = diag(2, 2, 1)`, and
//! the total energy is `zeta * (g_a^2 + g_b^2 + g_c^2 / 2) + E_JRM(y)`, where
//! `g = grad E_JRM(y)`. Its gradient in the outer modes is `grad E_JRM(y)`
//! scaled by `(1, 1, 1)`: the outer-inductor term is stationary in `y`.

use nalgebra::{Matrix3, Vector3};

use super::arm::Arm;
use super::modes::ModeVector;
use super::params::CircuitParams;
use crate::error::{Error, Result};

/// `d delta_j / d (a, b, c)` for the four arms.
pub const ARM_COEFFS: [[f64; 3]; 4] = [
    [0.5, -0.5, -1.0],
    [0.5, 0.5, 1.0],
    [-0.5, 0.5, -1.0],
    [-0.5, -0.5, 1.0],
];

/// Diagonal of the inductive quadratic form `(a^2 + b^2 + 2c^2)/4`, doubled.
pub const QUAD: [f64; 3] = [0.5, 0.5, 1.0];

/// Weights of the outer constraint per mode.
pub const OUTER_WEIGHT: [f64; 3] = [2.0, 2.0, 1.0];

pub const INNER_TOL: f64 = 1e-12;
pub const INNER_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub arm: Arm,
    pub zeta: f64,
    /// Per-arm flux bias `phi_ext / 4`.
    pub x: f64,
}

impl EnergyModel {
    pub fn new(params: &CircuitParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            arm: Arm::new(params.beta, params.alpha)?,
            zeta: params.zeta,
            x: params.phi_ext / 4.0,
        })
    }

    #[inline]
    pub fn deltas(&self, y: [f64; 3]) -> [f64; 4] {
        let mut d = [self.x; 4];
        for (j, c) in ARM_COEFFS.iter().enumerate() {
            d[j] += c[0] * y[0] + c[1] * y[1] + c[2] * y[2];
        }
        d
    }

    pub fn inner_energy(&self, y: [f64; 3]) -> f64 {
        let quad = 0.25 * (y[0] * y[0] + y[1] * y[1] + 2.0 * y[2] * y[2]);
        quad + self.deltas(y).iter().map(|&d| self.arm.energy(d)).sum::<f64>()
    }

    #[inline]
    pub fn inner_grad(&self, y: [f64; 3]) -> [f64; 3] {
        let mut g = [QUAD[0] * y[0], QUAD[1] * y[1], QUAD[2] * y[2]];
        for (j, d) in self.deltas(y).iter().enumerate() {
            let s = self.arm.d1(*d);
            for k in 0..3 {
                g[k] += ARM_COEFFS[j][k] * s;
            }
        }
        g
    }

    #[inline]
    pub fn inner_grad_hess(&self, y: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut g = [QUAD[0] * y[0], QUAD[1] * y[1], QUAD[2] * y[2]];
        let mut h = [[0.0; 3]; 3];
        for k in 0..3 {
            h[k][k] = QUAD[k];
        }
        for (j, d) in self.deltas(y).iter().enumerate() {
            let (s, c) = self.arm.d1_d2(*d);
            let w = &ARM_COEFFS[j];
            for k in 0..3 {
                g[k] += w[k] * s;
                for l in 0..3 {
                    h[k][l] += w[k] * w[l] * c;
                }
            }
        }
        (g, h)
    }

    /// Outer-mode energy from an inner solution `y` and its gradient `g`.
    fn total_from_inner(&self, y: [f64; 3], g: [f64; 3]) -> f64 {
        self.zeta * (g[0] * g[0] + g[1] * g[1] + 0.5 * g[2] * g[2]) + self.inner_energy(y)
    }

    /// `E(outer) - E(0)` computed without cancellation against the constant
    /// arm energy. Uses the form that is stationary in the inner solution, so
    /// solver error enters only at second order.
    pub fn energy_increment(&self, outer: [f64; 3], solver: &mut InnerSolver) -> Result<f64> {
        let y = solver.solve(self, outer)?;
        let mut e = 0.0;
        if self.zeta > 0.0 {
            let d = [outer[0] - y[0], outer[1] - y[1], outer[2] - y[2]];
            e += (0.5 * d[0] * d[0] + 0.5 * d[1] * d[1] + d[2] * d[2]) / (2.0 * self.zeta);
        }
        e += 0.25 * (y[0] * y[0] + y[1] * y[1] + 2.0 * y[2] * y[2]);
        if self.arm.alpha == 0.0 {
            // -(4/beta) [cos x (P - 1) + sin x sin c sin(a/2) sin(b/2)],
            // P = cos(a/2) cos(b/2) cos(c) expanded around 1
            let ha = -2.0 * (0.25 * y[0]).sin().powi(2);
            let hb = -2.0 * (0.25 * y[1]).sin().powi(2);
            let hc = -2.0 * (0.5 * y[2]).sin().powi(2);
            let pm1 = ha + hb + hc + ha * hb + ha * hc + hb * hc + ha * hb * hc;
            let odd = y[2].sin() * (0.5 * y[0]).sin() * (0.5 * y[1]).sin();
            let (sx, cx) = self.x.sin_cos();
            e -= 4.0 / self.arm.beta * (cx * pm1 + sx * odd);
        } else {
            for w in ARM_COEFFS.iter() {
                let t = w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
                e += self.arm.energy_increment(self.x, t);
            }
        }
        Ok(e)
    }

    /// Total energy at outer mode coordinates.
    pub fn energy(&self, outer: [f64; 3], solver: &mut InnerSolver) -> Result<f64> {
        let y = solver.solve(self, outer)?;
        Ok(self.total_from_inner(y, self.inner_grad(y)))
    }

    /// Gradient of the total energy in the outer mode coordinates.
    pub fn force(&self, outer: [f64; 3], solver: &mut InnerSolver) -> Result<[f64; 3]> {
        let y = solver.solve(self, outer)?;
        Ok(self.inner_grad(y))
    }
}

/// Damped Newton solver for the inner modes, warm-started from its last answer.
#[derive(Debug, Clone, Default)]
pub struct InnerSolver {
    last: [f64; 3],
    pub iterations: usize,
}

fn residual(m: &EnergyModel, y: [f64; 3], g: &[f64; 3], outer: [f64; 3]) -> [f64; 3] {
    let mut r = [0.0; 3];
    for k in 0..3 {
        r[k] = y[k] + m.zeta * OUTER_WEIGHT[k] * g[k] - outer[k];
    }
    r
}

fn norm_inf(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

impl InnerSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.last = [0.0; 3];
    }

    pub fn solve(&mut self, m: &EnergyModel, outer: [f64; 3]) -> Result<[f64; 3]> {
        if m.zeta == 0.0 {
            return Ok(outer);
        }
        let mut y = self.last;
        if !y.iter().all(|v| v.is_finite()) {
            y = [0.0; 3];
        }
        let (g, mut h) = m.inner_grad_hess(y);
        let mut r = residual(m, y, &g, outer);
        let mut rn = norm_inf(&r);
        for it in 0..INNER_MAX_ITER {
            if rn < INNER_TOL {
                self.last = y;
                self.iterations = it;
                return Ok(y);
            }
            let mut jac = Matrix3::identity();
            for k in 0..3 {
                for l in 0..3 {
                    jac[(k, l)] += m.zeta * OUTER_WEIGHT[k] * h[k][l];
                }
            }
            let rhs = Vector3::new(-r[0], -r[1], -r[2]);
            let step = match jac.lu().solve(&rhs) {
                Some(s) => s,
                None => break,
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = [
                    y[0] + lambda * step[0],
                    y[1] + lambda * step[1],
                    y[2] + lambda * step[2],
                ];
                let (gt, ht) = m.inner_grad_hess(trial);
                let rt = residual(m, trial, &gt, outer);
                let rtn = norm_inf(&rt);
                if rtn < rn || rtn < INNER_TOL {
                    y = trial;
                    h = ht;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                // stalled at the rounding floor of this outer point
                let floor = 8.0 * f64::EPSILON * (1.0 + norm_inf(&outer)) * (1.0 + m.zeta);
                if rn < floor.max(INNER_TOL) * 10.0 {
                    self.last = y;
                    return Ok(y);
                }
                break;
            }
        }
        if rn < INNER_TOL {
            self.last = y;
            return Ok(y);
        }
        self.last = [0.0; 3];
        Err(Error::InnerSolve { residual: rn, iterations: INNER_MAX_ITER })
    }
}

fn split_nodes(nodes: [f64; 4]) -> (f64, [f64; 3]) {
    let [p1, p2, p3, p4] = nodes;
    let mean = 0.25 * (p1 + p2 + p3 + p4);
    (mean, [p1 - p3, p2 - p4, -0.5 * (p1 + p3 - p2 - p4)])
}

fn join_nodes(mean: f64, y: [f64; 3]) -> [f64; 4] {
    let [a, b, c] = y;
    [
        mean + 0.5 * a - 0.5 * c,
        mean + 0.5 * b + 0.5 * c,
        mean - 0.5 * a - 0.5 * c,
        mean - 0.5 * b + 0.5 * c,
    ]
}

/// Inner node fluxes for given outer node fluxes. The node constraint
/// `outer_j = inner_j + zeta * dE_JRM/dphi_j` leaves the plain node mean
/// unchanged, so only the three difference modes need solving.
pub fn solve_inner_nodes(outer: [f64; 4], params: &CircuitParams) -> Result<[f64; 4]> {
    let m = EnergyModel::new(params)?;
    let (mean, yt) = split_nodes(outer);
    let mut solver = InnerSolver::new();
    let y = solver.solve(&m, yt)?;
    Ok(join_nodes(mean, y))
}

/// Dimensionless energy at the given outer mode coordinates (`phi_m` is inert).
pub fn jrm_energy(modes: ModeVector, params: &CircuitParams) -> Result<f64> {
    let m = EnergyModel::new(params)?;
    m.energy(modes.abc(), &mut InnerSolver::new())
}
