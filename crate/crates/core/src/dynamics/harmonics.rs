use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Fourier projection `(2/T) * integral x(t) e^{i omega t} dt` of uniform samples
/// `x(t0 + k dt)`, `k = 0..n`, over the window `T = n dt`.
///
/// Convention: `x(t) = A cos(omega t + theta)` projects to `A e^{-i theta}`.
/// The window must hold a whole number of periods.
pub fn extract_harmonic(samples: &[f64], t0: f64, dt: f64, omega: f64) -> Result<Complex64> {
    let n = samples.len();
    if n == 0 || !(dt > 0.0) {
        return Err(Error::InvalidParameter("need samples and dt > 0".into()));
    }
    let span = n as f64 * dt;
    let periods = omega * span / (2.0 * PI);
    if (periods - periods.round()).abs() > 1e-6 * periods.max(1.0) || periods.round() < 1.0 {
        return Err(Error::NonIntegerPeriods { periods });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, x) in samples.iter().enumerate() {
        let t = t0 + k as f64 * dt;
        acc += x * Complex64::from_polar(1.0, omega * t);
    }
    Ok(acc * (2.0 / n as f64))
}

/// Reflection gain `20 log10(|phi_h - phi_in| / phi_in)` in dB.
///
/// `phi_a_h` is the complex amplitude (the `e^{-i omega t}` coefficient) of the
/// signal-mode flux and `amp_signal` that of the input.
pub fn reflection_gain(phi_a_h: Complex64, amp_signal: f64) -> Result<f64> {
    if !(amp_signal > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    Ok(20.0 * ((phi_a_h - amp_signal).norm() / amp_signal).log10())
}
