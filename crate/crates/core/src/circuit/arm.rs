//! A single ring arm: a Josephson junction in series with a stray inductance.
//!
//! The junction phase `D` obeys `D + alpha * sin(D) = delta`, where `delta` is
//! the total phase across the arm and `alpha = L_stray / L_J`. Energies are in
//! units of `phi0^2 / L_in`, so the junction term carries a `1/beta`.

use crate::error::{Error, Result};

/// Largest stray ratio for which the arm constraint is treated as single-valued.
pub const ALPHA_MAX: f64 = 2.80;

/// Junction phase for a total arm phase `delta`.
///
/// For `alpha < 1` the map is monotone and the root is unique. Between 1 and
/// `ALPHA_MAX` several roots can exist and the one with the lowest arm energy
/// is returned.
pub fn arm_phase(delta: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "arm_phase(delta = {delta}, alpha = {alpha})"
        )));
    }
    if alpha >= ALPHA_MAX {
        return Err(Error::MultiRoot { alpha, max: ALPHA_MAX });
    }
    if alpha == 0.0 {
        return Ok(delta);
    }
    let s = delta.signum();
    let d = delta.abs();
    let root = if alpha < 1.0 {
        monotone_root(d, alpha)
    } else {
        lowest_energy_root(d, alpha)
    };
    Ok(s * root)
}

fn residual(x: f64, d: f64, alpha: f64) -> f64 {
    x + alpha * x.sin() - d
}

// Newton with a bisection fallback on the bracket [d - alpha, d + alpha].
fn safeguarded(d: f64, alpha: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = residual(x, d, alpha);
        if f.abs() <= 1e-15 * (1.0 + d) {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let fp = 1.0 + alpha * x.cos();
        let mut next = x - f / fp;
        if !(next > lo && next < hi) || fp.abs() < 1e-12 {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo).abs() < 1e-16 * (1.0 + d) {
            return next;
        }
        x = next;
    }
    x
}

fn monotone_root(d: f64, alpha: f64) -> f64 {
    safeguarded(d, alpha, d - alpha, d + alpha)
}

fn lowest_energy_root(d: f64, alpha: f64) -> f64 {
    let lo = d - alpha;
    let hi = d + alpha;
    let n = 256;
    let mut best: Option<(f64, f64)> = None;
    let mut x0 = lo;
    let mut f0 = residual(x0, d, alpha);
    for i in 1..=n {
        let x1 = lo + (hi - lo) * i as f64 / n as f64;
        let f1 = residual(x1, d, alpha);
        if f0 == 0.0 || f0.signum() != f1.signum() {
            let r = if f0 == 0.0 { x0 } else { bisect(d, alpha, x0, x1, f0) };
            let e = (d - r).powi(2) / (2.0 * alpha) - r.cos();
            if best.map_or(true, |(_, eb)| e < eb) {
                best = Some((r, e));
            }
        }
        x0 = x1;
        f0 = f1;
    }
    best.map(|b| b.0).unwrap_or(d)
}

fn bisect(d: f64, alpha: f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = residual(m, d, alpha);
        if fm == 0.0 || (b - a).abs() < 1e-16 * (1.0 + d) {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Arm energy model for fixed `beta` and `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub beta: f64,
    pub alpha: f64,
}

impl Arm {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta}")));
        }
        if alpha >= ALPHA_MAX {
            return Err(Error::MultiRoot { alpha, max: ALPHA_MAX });
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
        }
        Ok(Self { beta, alpha })
    }

    #[inline]
    pub fn phase(&self, delta: f64) -> f64 {
        if self.alpha == 0.0 {
            delta
        } else {
            // alpha was validated in `new`, so this cannot fail for finite input
            arm_phase(delta, self.alpha).unwrap_or(f64::NAN)
        }
    }

    pub fn energy(&self, delta: f64) -> f64 {
        if self.alpha == 0.0 {
            return -delta.cos() / self.beta;
        }
        let d = self.phase(delta);
        ((delta - d).powi(2) / (2.0 * self.alpha) - d.cos()) / self.beta
    }

    /// `E_arm(delta0 + t) - E_arm(delta0)` without cancellation against the
    /// constant part, so finite differences of small increments stay accurate.
    pub fn energy_increment(&self, delta0: f64, t: f64) -> f64 {
        if self.alpha == 0.0 {
            return 2.0 * (delta0 + 0.5 * t).sin() * (0.5 * t).sin() / self.beta;
        }
        let d0 = self.phase(delta0);
        // u = D - D0 from u + 2 alpha cos(D0 + u/2) sin(u/2) = t, polished by Newton
        let mut u = self.phase(delta0 + t) - d0;
        for _ in 0..3 {
            let f = u + 2.0 * self.alpha * (d0 + 0.5 * u).cos() * (0.5 * u).sin() - t;
            let fp = 1.0 + self.alpha * (d0 + u).cos();
            u -= f / fp;
        }
        let stray = 0.5 * self.alpha * (2.0 * d0 + u).sin() * u.sin();
        let junction = 2.0 * (d0 + 0.5 * u).sin() * (0.5 * u).sin();
        (stray + junction) / self.beta
    }

    /// First derivative of the arm energy in `delta`.
    #[inline]
    pub fn d1(&self, delta: f64) -> f64 {
        self.phase(delta).sin() / self.beta
    }

    /// Value of first and second derivatives together, sharing one phase solve.
    #[inline]
    pub fn d1_d2(&self, delta: f64) -> (f64, f64) {
        let d = self.phase(delta);
        let (s, c) = d.sin_cos();
        (s / self.beta, c / (self.beta * (1.0 + self.alpha * c)))
    }

    /// `cos D / (1 + alpha cos D)` at `delta`: the normalized curvature of the arm.
    pub fn kappa(&self, delta: f64) -> f64 {
        let c = self.phase(delta).cos();
        c / (1.0 + self.alpha * c)
    }

    /// Taylor coefficients `e_k` of `E_arm(delta0 + t)` for `k = 0..=order`.
    pub fn taylor(&self, delta0: f64, order: usize) -> Vec<f64> {
        let d0 = self.phase(delta0);
        let (s0, c0) = d0.sin_cos();
        let n = order;
        // u(t) = D(delta0 + t) - D0 as a power series with zero constant term
        let mut u = vec![0.0; n + 1];
        if n >= 1 {
            let denom = 1.0 + self.alpha * c0;
            for _ in 0..=n {
                let (su, cu) = series_sin_cos(&u);
                let mut next = vec![0.0; n + 1];
                for k in 1..=n {
                    // sin(D0 + u) - sin D0 - cos D0 * u
                    let nl = s0 * cu[k] + c0 * su[k] - c0 * u[k];
                    let t = if k == 1 { 1.0 } else { 0.0 };
                    next[k] = (t - self.alpha * nl) / denom;
                }
                u = next;
            }
        }
        let (su, cu) = series_sin_cos(&u);
        // sin D as a series, then integrate: E' = sin D / beta
        let mut sin_d = vec![0.0; n + 1];
        for k in 0..=n {
            sin_d[k] = s0 * cu[k] + c0 * su[k];
        }
        let mut e = vec![0.0; n + 1];
        e[0] = self.energy(delta0);
        for k in 1..=n {
            e[k] = sin_d[k - 1] / (k as f64 * self.beta);
        }
        e
    }
}

/// `sin(w)` and `cos(w)` of a power series `w` with zero constant term.
pub fn series_sin_cos(w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    if n == 0 {
        return (s, c);
    }
    c[0] = 1.0;
    for k in 1..n {
        let mut sk = 0.0;
        let mut ck = 0.0;
        for j in 1..=k {
            let jw = j as f64 * w[j];
            sk += jw * c[k - j];
            ck -= jw * s[k - j];
        }
        s[k] = sk / k as f64;
        c[k] = ck / k as f64;
    }
    (s, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_alpha_is_identity() {
        assert_eq!(arm_phase(1.234, 0.0).unwrap(), 1.234);
    }

    #[test]
    fn quarter_wave_example() {
        let d = arm_phase(PI / 2.0, 0.1).unwrap();
        // plain fixed-point iteration converges here since alpha < 1
        let mut x = PI / 2.0;
        for _ in 0..200 {
            x = PI / 2.0 - 0.1 * f64::sin(x);
        }
        assert!((d - x).abs() < 1e-14, "{d} vs {x}");
        assert!((d + 0.1 * d.sin() - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn spec_style_example() {
        let d = arm_phase(0.5, 0.1).unwrap();
        assert!((d - 0.456).abs() < 5e-4, "{d}");
    }

    #[test]
    fn increment_matches_difference() {
        for alpha in [0.0, 0.1, 0.6, 1.5] {
            let arm = Arm::new(2.0, alpha).unwrap();
            for (d0, t) in [(1.2, 0.3), (PI / 2.0, -0.7), (-0.4, 1.1)] {
                let direct = arm.energy(d0 + t) - arm.energy(d0);
                assert!((arm.energy_increment(d0, t) - direct).abs() < 1e-14, "alpha {alpha}");
            }
        }
    }

    #[test]
    fn large_alpha_rejected() {
        assert!(matches!(arm_phase(1.0, 3.0), Err(Error::MultiRoot { .. })));
    }

    #[test]
    fn taylor_matches_finite_differences() {
        let arm = Arm::new(3.0, 0.2).unwrap();
        let d0 = 1.3;
        let e = arm.taylor(d0, 4);
        // third derivative of E_arm in closed form through D' = 1/(1 + alpha cos D)
        let d = arm.phase(d0);
        let dp = 1.0 / (1.0 + 0.2 * d.cos());
        let e3 = (-d.sin() * dp * dp + 0.2 * d.cos() * d.sin() * dp.powi(3)) / 3.0;
        assert!((6.0 * e[3] - e3).abs() < 1e-13, "{} vs {e3}", 6.0 * e[3]);
        let h = 1e-3;
        let d1 = (arm.energy(d0 + h) - arm.energy(d0 - h)) / (2.0 * h);
        let d2 = (arm.energy(d0 + h) - 2.0 * arm.energy(d0) + arm.energy(d0 - h)) / (h * h);
        assert!((e[1] - d1).abs() < 1e-6);
        assert!((2.0 * e[2] - d2).abs() < 1e-5);
        assert!((e[1] - arm.d1(d0)).abs() < 1e-14);
        assert!((2.0 * e[2] - arm.d1_d2(d0).1).abs() < 1e-13);
    }

    #[test]
    fn taylor_zero_alpha_is_cosine() {
        let arm = Arm::new(2.0, 0.0).unwrap();
        let e = arm.taylor(0.7, 6);
        // -cos(d0 + t)/beta
        let mut f = 1.0;
        for (k, ek) in e.iter().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            let deriv = match k % 4 {
                0 => -(0.7f64).cos(),
                1 => (0.7f64).sin(),
                2 => (0.7f64).cos(),
                _ => -(0.7f64).sin(),
            };
            assert!((ek - deriv / (2.0 * f)).abs() < 1e-14, "k = {k}");
        }
    }

    proptest! {
        #[test]
        fn residual_small(delta in -20.0f64..20.0, alpha in 0.0f64..2.79) {
            let d = arm_phase(delta, alpha).unwrap();
            prop_assert!((d + alpha * d.sin() - delta).abs() < 1e-13 * (1.0 + delta.abs()));
        }

        #[test]
        fn odd_in_delta(delta in -20.0f64..20.0, alpha in 0.0f64..2.79) {
            let p = arm_phase(delta, alpha).unwrap();
            let m = arm_phase(-delta, alpha).unwrap();
            prop_assert_eq!(p, -m);
        }

        #[test]
        fn monotone_below_one(d1 in -10.0f64..10.0, step in 1e-6f64..1.0, alpha in 0.0f64..0.999) {
            let a = arm_phase(d1, alpha).unwrap();
            let b = arm_phase(d1 + step, alpha).unwrap();
            prop_assert!(b > a);
        }
    }
}
