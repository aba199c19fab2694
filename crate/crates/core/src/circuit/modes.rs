//! Node fluxes of the four ring nodes and the normal-mode coordinates.
//!
//! `phi_a = phi1 - phi3`, `phi_b = phi2 - phi4`, `phi_c = -(phi1 + phi3 - phi2 - phi4) / 2`
//! and `phi_m` is the capacitance-weighted mean that carries no potential energy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeVector {
    pub phi_m: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub phi_c: f64,
}

impl ModeVector {
    pub fn new(phi_a: f64, phi_b: f64, phi_c: f64) -> Self {
        Self { phi_m: 0.0, phi_a, phi_b, phi_c }
    }

    pub fn abc(&self) -> [f64; 3] {
        [self.phi_a, self.phi_b, self.phi_c]
    }
}

/// Node fluxes to mode coordinates. `c_a`, `c_b` are the mode capacitances; node
/// 1 and 3 carry `c_a`, nodes 2 and 4 carry `c_b`.
pub fn normal_transform(nodes: [f64; 4], c_a: f64, c_b: f64) -> ModeVector {
    let [p1, p2, p3, p4] = nodes;
    let tot = c_a + c_b;
    ModeVector {
        phi_m: (c_a * (p1 + p3) + c_b * (p2 + p4)) / (2.0 * tot),
        phi_a: p1 - p3,
        phi_b: p2 - p4,
        phi_c: -0.5 * (p1 + p3 - p2 - p4),
    }
}

pub fn inverse_transform(m: ModeVector, c_a: f64, c_b: f64) -> [f64; 4] {
    let tot = c_a + c_b;
    let wa = c_b / tot;
    let wb = c_a / tot;
    [
        m.phi_m + 0.5 * m.phi_a - wa * m.phi_c,
        m.phi_m + 0.5 * m.phi_b + wb * m.phi_c,
        m.phi_m - 0.5 * m.phi_a - wa * m.phi_c,
        m.phi_m - 0.5 * m.phi_b + wb * m.phi_c,
    ]
}
