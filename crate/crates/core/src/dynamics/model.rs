use serde::{Deserialize, Serialize};

use crate::circuit::jet::{monomials, Jet};
use crate::circuit::{CircuitParams, EnergyModel, EnergySeries, InnerSolver};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
enum FullTag {
    #[serde(rename = "full")]
    Full,
}

/// Energy order kept in the junction force. Serializes as `3..=8` or `"full"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "TruncationRepr", into = "TruncationRepr")]
pub enum Truncation {
    Order(u8),
    Full,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TruncationRepr {
    Order(u8),
    Full(FullTag),
}

impl From<TruncationRepr> for Truncation {
    fn from(r: TruncationRepr) -> Self {
        match r {
            TruncationRepr::Order(n) => Truncation::Order(n),
            TruncationRepr::Full(_) => Truncation::Full,
        }
    }
}

impl From<Truncation> for TruncationRepr {
    fn from(t: Truncation) -> Self {
        match t {
            Truncation::Order(n) => TruncationRepr::Order(n),
            Truncation::Full => TruncationRepr::Full(FullTag::Full),
        }
    }
}

impl std::fmt::Display for Truncation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Truncation::Order(n) => write!(f, "{n}"),
            Truncation::Full => write!(f, "full"),
        }
    }
}

impl std::str::FromStr for Truncation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Truncation::Full);
        }
        s.parse::<u8>()
            .map(Truncation::Order)
            .map_err(|_| Error::InvalidParameter(format!("truncation must be 3..=8 or 'full', got {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PumpModel {
    /// Pump mode follows its own linear equation, unaffected by the signal and idler.
    Stiff,
    /// Pump mode is a dynamical participant of the nonlinear energy.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub truncation: Truncation,
    pub pump: PumpModel,
    /// Cross-Kerr added by hand as `extra_kerr_ab * a^2 b^2` in the energy.
    #[serde(default)]
    pub extra_kerr_ab: f64,
}

impl ModelSpec {
    pub fn full() -> Self {
        Self { truncation: Truncation::Full, pump: PumpModel::Soft, extra_kerr_ab: 0.0 }
    }

    pub fn stiff(order: u8) -> Self {
        Self { truncation: Truncation::Order(order), pump: PumpModel::Stiff, extra_kerr_ab: 0.0 }
    }

    pub fn soft(order: u8) -> Self {
        Self { truncation: Truncation::Order(order), pump: PumpModel::Soft, extra_kerr_ab: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Truncation::Order(n) = self.truncation {
            if !(3..=8).contains(&n) {
                return Err(Error::InvalidParameter(format!("truncation order {n} outside 3..=8")));
            }
        }
        if !self.extra_kerr_ab.is_finite() {
            return Err(Error::InvalidParameter("extra_kerr_ab must be finite".into()));
        }
        Ok(())
    }
}

/// Drive tones. Frequencies in rad/s; amplitudes are dimensionless fluxes.
///
/// Each input is `phi_in(t) = 2 A cos(omega t)`, i.e. `A` is the complex
/// amplitude of the `e^{-i omega t}` component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub omega_s: f64,
    pub omega_p: f64,
    pub amp_signal: f64,
    pub amp_pump: f64,
    #[serde(default)]
    pub amp_idler: f64,
}

impl DriveConfig {
    pub fn omega_i(&self) -> f64 {
        self.omega_p - self.omega_s
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("amp_signal", self.amp_signal), ("amp_pump", self.amp_pump), ("amp_idler", self.amp_idler)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.omega_s > 0.0 && self.omega_p > self.omega_s) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < omega_s < omega_p, got {} and {}",
                self.omega_s, self.omega_p
            )));
        }
        Ok(())
    }
}

/// One monomial `coef * a^i b^j c^k` of a force polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub p: [u8; 3],
    pub coef: f64,
}

/// Junction force `grad E` in the outer mode coordinates.
#[derive(Debug, Clone)]
pub enum Force {
    Full { model: EnergyModel, extra_kerr_ab: f64 },
    Poly { terms: [Vec<Term>; 3] },
}

fn truncated_series(model: &EnergyModel, order: u8, extra_kerr_ab: f64) -> Jet {
    let mut e = EnergySeries::new(model).jet.truncate(order as usize);
    if extra_kerr_ab != 0.0 {
        let a2 = Jet::var(0).mul(&Jet::var(0));
        let b2 = Jet::var(1).mul(&Jet::var(1));
        e.axpy(extra_kerr_ab, &a2.mul(&b2));
    }
    e
}

/// Energy polynomial of a truncated model; `None` for the full model.
pub fn energy_series(params: &CircuitParams, spec: &ModelSpec) -> Result<Option<Jet>> {
    spec.validate()?;
    match spec.truncation {
        Truncation::Full => Ok(None),
        Truncation::Order(n) => Ok(Some(truncated_series(&EnergyModel::new(params)?, n, spec.extra_kerr_ab))),
    }
}

impl Force {
    pub fn new(params: &CircuitParams, spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let model = EnergyModel::new(params)?;
        match spec.truncation {
            Truncation::Full => Ok(Force::Full { model, extra_kerr_ab: spec.extra_kerr_ab }),
            Truncation::Order(n) => {
                let e = truncated_series(&model, n, spec.extra_kerr_ab);
                let mono = monomials();
                let terms = [0, 1, 2].map(|k| {
                    let d = e.partial(k);
                    d.c.iter()
                        .zip(mono)
                        .filter(|(c, _)| **c != 0.0)
                        .map(|(c, m)| Term { p: *m, coef: *c })
                        .collect::<Vec<_>>()
                });
                Ok(Force::Poly { terms })
            }
        }
    }

    /// Gradient of the energy at `y = (a, b, c)`.
    pub fn eval(&self, y: [f64; 3], solver: &mut InnerSolver) -> Result<[f64; 3]> {
        match self {
            Force::Full { model, extra_kerr_ab } => {
                let mut f = model.force(y, solver)?;
                if *extra_kerr_ab != 0.0 {
                    f[0] += 2.0 * extra_kerr_ab * y[0] * y[1] * y[1];
                    f[1] += 2.0 * extra_kerr_ab * y[0] * y[0] * y[1];
                }
                Ok(f)
            }
            Force::Poly { terms } => {
                let mut pw = [[1.0f64; 9]; 3];
                for v in 0..3 {
                    for i in 1..9 {
                        pw[v][i] = pw[v][i - 1] * y[v];
                    }
                }
                let mut f = [0.0; 3];
                for k in 0..3 {
                    f[k] = terms[k]
                        .iter()
                        .map(|t| t.coef * pw[0][t.p[0] as usize] * pw[1][t.p[1] as usize] * pw[2][t.p[2] as usize])
                        .sum();
                }
                Ok(f)
            }
        }
    }

    /// Gradient monomials per mode, or `None` for the full model.
    pub fn poly_terms(&self) -> Option<&[Vec<Term>; 3]> {
        match self {
            Force::Poly { terms } => Some(terms),
            Force::Full { .. } => None,
        }
    }

    /// Energy relative to the origin, for conservation checks.
    pub fn energy(&self, y: [f64; 3], solver: &mut InnerSolver, series: Option<&Jet>) -> Result<f64> {
        match (self, series) {
            (Force::Full { model, extra_kerr_ab }, _) => {
                Ok(model.energy_increment(y, solver)? + extra_kerr_ab * y[0] * y[0] * y[1] * y[1])
            }
            (Force::Poly { .. }, Some(j)) => Ok(j.eval(y)),
            (Force::Poly { .. }, None) => Err(Error::InvalidParameter("polynomial energy needs its series".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_serde() {
        let s: ModelSpec = serde_json::from_str(r#"{"truncation":"full","pump":"soft"}"#).unwrap();
        assert_eq!(s.truncation, Truncation::Full);
        let s: ModelSpec = serde_json::from_str(r#"{"truncation":5,"pump":"stiff","extra_kerr_ab":0.1}"#).unwrap();
        assert_eq!(s.truncation, Truncation::Order(5));
        assert_eq!(serde_json::to_string(&Truncation::Full).unwrap(), "\"full\"");
        assert!(serde_json::from_str::<ModelSpec>(r#"{"truncation":5,"pump":"stiff","bogus":1}"#).is_err());
        assert!(ModelSpec::soft(2).validate().is_err());
        assert_eq!("full".parse::<Truncation>().unwrap(), Truncation::Full);
        assert_eq!("7".parse::<Truncation>().unwrap(), Truncation::Order(7));
    }

    #[test]
    fn full_and_order8_agree_at_small_flux() {
        for p in [CircuitParams::baseline(3.5), CircuitParams::baseline(6.0).with_inv_p(1.3)] {
            let full = Force::new(&p, &ModelSpec::full()).unwrap();
            let poly = Force::new(&p, &ModelSpec::soft(8)).unwrap();
            let mut s = InnerSolver::new();
            for y in [[0.05, -0.03, 0.02], [-0.04, 0.05, -0.05], [0.01, 0.02, 0.05]] {
                let a = full.eval(y, &mut s).unwrap();
                let b = poly.eval(y, &mut s).unwrap();
                let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() < 1e-6 * scale, "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn extra_kerr_is_gradient_of_a2b2() {
        let p = CircuitParams::baseline(3.5);
        let mut spec = ModelSpec::full();
        let base = Force::new(&p, &spec).unwrap();
        spec.extra_kerr_ab = 0.3;
        let with = Force::new(&p, &spec).unwrap();
        let mut s = InnerSolver::new();
        let y = [0.1, 0.2, 0.05];
        let f0 = base.eval(y, &mut s).unwrap();
        let f1 = with.eval(y, &mut s).unwrap();
        assert!((f1[0] - f0[0] - 2.0 * 0.3 * 0.1 * 0.04).abs() < 1e-14);
        assert!((f1[1] - f0[1] - 2.0 * 0.3 * 0.01 * 0.2).abs() < 1e-14);
        let mut sp = ModelSpec::stiff(4);
        let a = Force::new(&p, &sp).unwrap().eval(y, &mut s).unwrap();
        sp.extra_kerr_ab = 0.3;
        let b = Force::new(&p, &sp).unwrap().eval(y, &mut s).unwrap();
        assert!((b[0] - a[0] - 2.0 * 0.3 * 0.1 * 0.04).abs() < 1e-14);
    }
}
