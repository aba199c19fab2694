//! Physical constants and unit helpers. Dynamics run in nanoseconds, so angular
//! frequencies inside the integrator are rad/ns.

use std::f64::consts::PI;

/// Reduced flux quantum hbar / 2e in webers.
pub const PHI0: f64 = 1.054_571_817e-34 / (2.0 * 1.602_176_634e-19);

pub const TWO_PI: f64 = 2.0 * PI;

/// rad/s to rad/ns.
pub fn per_ns(omega_si: f64) -> f64 {
    omega_si * 1e-9
}

/// Angular frequency in rad/ns from a frequency in GHz.
pub fn ghz_to_rad_ns(f_ghz: f64) -> f64 {
    TWO_PI * f_ghz
}

pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p / 1e-3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn db_power(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
