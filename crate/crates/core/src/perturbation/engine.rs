//! Order-by-order harmonic balance of the polynomial equations of motion in
//! powers of the signal input.
//!
//! Only principal tones are kept: the signal at `w_s`, the idler at
//! `w_p - w_s`, and for a soft pump the sum `w_s + w_i` and difference
//! `w_s - w_i` tones of the pump mode. The signal and conjugate idler rows are
//! reduced the same way as the linear scattering matrix, so the first order
//! reproduces it exactly.

use num_complex::Complex64;

use super::series::Series;
use crate::circuit::{derive_elements, CircuitParams};
use crate::dynamics::{Force, ModelSpec, PumpModel, Term};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Signal tone, conjugate idler tone, and the two pump-mode tones.
const SIGNAL: (i32, i32) = (1, 0);
const IDLER_CONJ: (i32, i32) = (1, -1);
const PUMP_TONES: [(i32, i32); 2] = [(0, 1), (2, -1)];

#[derive(Debug, Clone)]
pub struct Engine {
    terms: [Vec<Term>; 3],
    soft: bool,
    max_order: u8,
    omega0_sq: [f64; 3],
    omega: [f64; 3],
    gamma: [f64; 3],
    omega_s: f64,
    omega_p: f64,
    c0: Complex64,
    m: [[Complex64; 2]; 2],
}

/// Signal-mode corrections at unit input; order `n` scales as `amp^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrections {
    /// Indexed by order; even entries vanish.
    pub signal: Vec<Complex64>,
    pub idler_conj: Vec<Complex64>,
    /// Pump-mode tones `[sum, difference]` per order.
    pub pump: Vec<[Complex64; 2]>,
}

impl Corrections {
    /// Signal amplitude through `order` for input `amp`.
    pub fn signal_at(&self, amp: f64, order: usize) -> Complex64 {
        (1..=order.min(self.signal.len() - 1)).map(|n| self.signal[n] * amp.powi(n as i32)).sum()
    }

    /// Reflection power gain `|phi - phi_in|^2 / phi_in^2` through `order`.
    pub fn gain(&self, amp: f64, order: usize) -> f64 {
        (self.signal_at(amp, order) / amp - 1.0).norm_sqr()
    }
}

impl Engine {
    /// Engine for a truncated model with pump-mode amplitude `c0` at `omega_p`.
    pub fn new(
        params: &CircuitParams,
        spec: &ModelSpec,
        omega_s: f64,
        omega_p: f64,
        c0: Complex64,
        max_order: u8,
    ) -> Result<Self> {
        let force = Force::new(params, spec)?;
        let terms = force
            .poly_terms()
            .ok_or_else(|| Error::InvalidParameter("perturbation needs a truncated model".into()))?
            .clone();
        Self::from_terms(params, terms, spec.pump == PumpModel::Soft, omega_s, omega_p, c0, max_order)
    }

    /// Engine for explicit force monomials; linear terms are dropped since the
    /// mode frequencies come from `params`.
    pub fn from_terms(
        params: &CircuitParams,
        terms: [Vec<Term>; 3],
        soft: bool,
        omega_s: f64,
        omega_p: f64,
        c0: Complex64,
        max_order: u8,
    ) -> Result<Self> {
        if !(omega_p > omega_s && omega_s > 0.0) {
            return Err(Error::InvalidParameter("need 0 < omega_s < omega_p".into()));
        }
        if !(1..=9).contains(&max_order) {
            return Err(Error::InvalidParameter(format!("order {max_order} outside 1..=9")));
        }
        let el = derive_elements(params)?;
        let terms = terms.map(|v| v.into_iter().filter(|t| t.p.iter().map(|&e| e as u32).sum::<u32>() >= 2).collect());
        let mut e = Self {
            terms,
            soft,
            max_order,
            omega0_sq: el.omega0_sq,
            omega: [el.omega_a, el.omega_b, el.omega_c],
            gamma: [params.gamma_a, params.gamma_b, params.gamma_c],
            omega_s,
            omega_p,
            c0: Complex64::default(),
            m: [[Complex64::default(); 2]; 2],
        };
        e.set_pump(c0);
        Ok(e)
    }

    /// Resonant engine (`w_s = w_a`, `w_p = w_a + w_b`) pumped so that the
    /// first-order gain equals `g0`.
    pub fn with_gain(params: &CircuitParams, spec: &ModelSpec, g0: f64, max_order: u8) -> Result<Self> {
        let el = derive_elements(params)?;
        let mut e = Self::new(params, spec, el.omega_a, el.omega_a + el.omega_b, Complex64::default(), max_order)?;
        e.tune_pump(g0)?;
        Ok(e)
    }

    pub fn pump(&self) -> Complex64 {
        self.c0
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn omega_i(&self) -> f64 {
        self.omega_p - self.omega_s
    }

    /// Reduced coupling matrix of the signal and conjugate idler rows.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    pub fn reduced_gammas(&self) -> [f64; 2] {
        [self.gamma[0] / self.omega[0], self.gamma[1] / self.omega[1]]
    }

    /// Ratios `omega_0j^2 / omega_j^2` that scale the force in each row.
    pub fn row_scale(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.omega0_sq[k] / (self.omega[k] * self.omega[k]))
    }

    pub fn set_pump(&mut self, c0: Complex64) {
        self.c0 = c0;
        let pump = self.pump_series();
        // dressing by the pump: response of each row to a unit signal or idler
        let mut unit_a = Series::default();
        unit_a.add_real(SIGNAL.0, SIGNAL.1, 1, Complex64::new(1.0, 0.0));
        let mut unit_b = Series::default();
        unit_b.add_real(IDLER_CONJ.0, IDLER_CONJ.1, 1, Complex64::new(1.0, 0.0));
        let ja = self.forcing(&[&unit_a, &Series::default(), &pump], 1, 1);
        let jb = self.forcing(&[&Series::default(), &unit_b, &pump], 1, 1);
        let [ga, gb] = self.reduced_gammas();
        let r = self.row_scale();
        let (wa, wb) = (self.omega[0], self.omega[1]);
        let ds = self.omega_s - wa;
        let di = self.omega_i() - wb;
        self.m = [
            [Complex64::new(ga, -2.0 * ds / wa) + 2.0 * I * r[0] * ja[0], 2.0 * I * r[0] * jb[0]],
            [-2.0 * I * r[1] * ja[1], Complex64::new(gb, 2.0 * di / wb) - 2.0 * I * r[1] * jb[1]],
        ];
    }

    fn pump_series(&self) -> Series {
        let mut s = Series::default();
        s.add_real(0, 1, 0, self.c0);
        s
    }

    /// Order-`order` forcing of the signal row, conjugate idler row and the two
    /// pump tones from the fields `[a, b, c]`, which must hold lower orders only.
    fn forcing(&self, fields: &[&Series; 3], order: u8, max_order: u8) -> [Complex64; 4] {
        let deg = self.terms.iter().flatten().map(|t| *t.p.iter().max().unwrap() as usize).max().unwrap_or(0);
        let pw: Vec<Vec<Series>> = fields.iter().map(|f| f.powers(deg, max_order)).collect();
        let mut cache: std::collections::HashMap<(u8, u8), Series> = std::collections::HashMap::new();
        let mut eval = |mode: usize, tone: (i32, i32)| -> Complex64 {
            let mut acc = Complex64::default();
            for t in &self.terms[mode] {
                let ab = cache
                    .entry((t.p[0], t.p[1]))
                    .or_insert_with(|| pw[0][t.p[0] as usize].mul(&pw[1][t.p[1] as usize], max_order));
                acc += t.coef * ab.project(&pw[2][t.p[2] as usize], tone.0, tone.1, order);
            }
            acc
        };
        let fa = eval(0, SIGNAL);
        let fb = eval(1, IDLER_CONJ);
        let (fs, fd) = if self.soft { (eval(2, PUMP_TONES[0]), eval(2, PUMP_TONES[1])) } else { Default::default() };
        [fa, fb, fs, fd]
    }

    fn tone_omega(&self, tone: (i32, i32)) -> f64 {
        tone.0 as f64 * self.omega_s + tone.1 as f64 * self.omega_p
    }

    /// Solves all orders up to the engine's maximum for unit signal input.
    pub fn solve(&self) -> Result<Corrections> {
        let n_max = self.max_order as usize;
        let [m11, m12] = self.m[0];
        let [m21, m22] = self.m[1];
        let det = m11 * m22 - m12 * m21;
        if det.norm() <= 1e-10 * (m11 * m22).norm().max(f64::MIN_POSITIVE) {
            return Err(Error::AboveThreshold);
        }
        let [ga, _] = self.reduced_gammas();
        let r = self.row_scale();
        let mut a = Series::default();
        let mut b = Series::default();
        let mut c = self.pump_series();
        let mut out = Corrections {
            signal: vec![Complex64::default(); n_max + 1],
            idler_conj: vec![Complex64::default(); n_max + 1],
            pump: vec![[Complex64::default(); 2]; n_max + 1],
        };
        out.pump[0][0] = self.c0;
        for n in 1..=self.max_order {
            let f = if n == 1 { [Complex64::default(); 4] } else { self.forcing(&[&a, &b, &c], n, self.max_order) };
            let mut rhs_a = -2.0 * I * r[0] * f[0];
            let rhs_b = 2.0 * I * r[1] * f[1];
            if n == 1 {
                rhs_a += 2.0 * ga;
            }
            let xa = (m22 * rhs_a - m12 * rhs_b) / det;
            let xb = (m11 * rhs_b - m21 * rhs_a) / det;
            let k = n as usize;
            out.signal[k] = xa;
            out.idler_conj[k] = xb;
            let mut tones = [Complex64::default(); 2];
            if self.soft {
                for (j, tone) in PUMP_TONES.iter().enumerate() {
                    let w = self.tone_omega(*tone);
                    let wc = self.omega[2];
                    let lc = Complex64::new(wc * wc - w * w, -self.gamma[2] * w);
                    tones[j] = -self.omega0_sq[2] * f[2 + j] / lc;
                }
            }
            out.pump[k] = tones;
            a.add_real(SIGNAL.0, SIGNAL.1, n, xa);
            b.add_real(IDLER_CONJ.0, IDLER_CONJ.1, n, xb);
            for (j, tone) in PUMP_TONES.iter().enumerate() {
                if tones[j] != Complex64::default() {
                    c.add_real(tone.0, tone.1, n, tones[j]);
                }
            }
        }
        Ok(out)
    }

    /// First-order power gain.
    pub fn linear_gain(&self) -> Result<f64> {
        let [m11, m12] = self.m[0];
        let [m21, m22] = self.m[1];
        let det = m11 * m22 - m12 * m21;
        if det.norm() <= 1e-10 * (m11 * m22).norm().max(f64::MIN_POSITIVE) {
            return Err(Error::AboveThreshold);
        }
        Ok((2.0 * self.reduced_gammas()[0] * m22 / det - 1.0).norm_sqr())
    }

    /// Sets `|c0|` (keeping its phase, or the resonant drive phase if zero) so
    /// that the dressed first-order gain equals `g0`.
    pub fn tune_pump(&mut self, g0: f64) -> Result<()> {
        if !(g0 >= 1.0 && g0.is_finite()) {
            return Err(Error::InvalidParameter(format!("target gain must be >= 1, got {g0}")));
        }
        let phase = if self.c0.norm() > 0.0 {
            self.c0 / self.c0.norm()
        } else {
            // a real pump drive acting through a far-detuned pump mode
            let (wc, gc, wp) = (self.omega[2], self.gamma[2], self.omega_p);
            let f = -I / Complex64::new(wc * wc - wp * wp, -gc * wp);
            f / f.norm()
        };
        let [ga, gb] = self.reduced_gammas();
        let r = self.row_scale();
        let g = self
            .terms[0]
            .iter()
            .find(|t| t.p == [0, 1, 1])
            .map(|t| t.coef.abs())
            .filter(|v| *v > 0.0)
            .ok_or_else(|| Error::InvalidParameter("model has no three-wave coupling".into()))?;
        let th = (ga * gb / (4.0 * g * g * r[0] * r[1])).sqrt();
        let mut gain_at = |x: f64| -> f64 {
            self.set_pump(phase * x);
            self.linear_gain().unwrap_or(f64::INFINITY)
        };
        // scan up to the first point above target; if the gain peaks between
        // scan points, locate the peak by golden-section search first
        let steps = 400;
        let (mut lo, mut hi) = (0.0, f64::NAN);
        let mut prev = (0.0, 1.0);
        for i in 1..=steps {
            let x = 2.0 * th * i as f64 / steps as f64;
            let gx = gain_at(x);
            if gx >= g0 {
                hi = x;
                break;
            }
            if gx < prev.1 {
                let (mut u, mut v) = (prev.0 - 2.0 * th / steps as f64, x);
                let k = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..200 {
                    let (p1, p2) = (v - k * (v - u), u + k * (v - u));
                    if gain_at(p1) >= g0 {
                        hi = p1;
                        break;
                    }
                    if gain_at(p1) > gain_at(p2) {
                        v = p2;
                    } else {
                        u = p1;
                    }
                    if v - u <= 1e-15 * v {
                        break;
                    }
                }
                lo = prev.0 - 2.0 * th / steps as f64;
                break;
            }
            prev = (x, gx);
            lo = x;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gain_at(mid) >= g0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        self.set_pump(phase * 0.5 * (lo + hi));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{phi_c_for_gain, scattering_matrix, PumpPoint};

    #[test]
    fn first_order_is_linear_response() {
        for beta in [1.2, 3.5, 10.0] {
            let p = CircuitParams::baseline(beta);
            let el = derive_elements(&p).unwrap();
            let c0 = Complex64::from_polar(phi_c_for_gain(100.0, &p).unwrap(), 0.7);
            let e = Engine::new(&p, &ModelSpec::stiff(3), el.omega_a, el.omega_a + el.omega_b, c0, 3).unwrap();
            let s = scattering_matrix(&PumpPoint { phi_c: c0, omega_p: el.omega_a + el.omega_b }, &p).unwrap();
            let sol = e.solve().unwrap();
            assert!((sol.signal[1] - 1.0 - s.s11).norm() < 1e-12 * s.s11.norm(), "beta {beta}");
            assert!((e.linear_gain().unwrap() - 100.0).abs() < 1e-9);
            // the three-wave model has nothing beyond first order
            assert_eq!(sol.signal[3], Complex64::default());
        }
    }

    #[test]
    fn tuned_pump_matches_closed_form() {
        let p = CircuitParams::baseline(3.5);
        let e = Engine::with_gain(&p, &ModelSpec::stiff(3), 100.0, 1).unwrap();
        let want = phi_c_for_gain(100.0, &p).unwrap();
        assert!((e.pump().norm() - want).abs() < 1e-10 * want);
    }
}
