//! Gain versus input power and the saturation-power crossing.

use serde::{Deserialize, Serialize};

use super::pump::{PumpConfig, Simulator};
use crate::dynamics::flux_from_power;
use crate::error::{Error, Result};
use crate::units::dbm_to_watts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationKind {
    Compression,
    Boost,
}

impl std::fmt::Display for SaturationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SaturationKind::Compression => "compression",
            SaturationKind::Boost => "boost",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub power_dbm: f64,
    /// Last-window gain; meaningful but unconfirmed when `converged` is false.
    #[serde(with = "crate::dynamics::steady::nan_as_null")]
    pub gain_db: f64,
    pub converged: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    /// Ordered by power.
    pub points: Vec<GainPoint>,
    #[serde(with = "crate::dynamics::steady::nan_as_null")]
    pub small_signal_gain_db: f64,
    pub criterion_db: f64,
    pub saturation_power_dbm: Option<f64>,
    pub saturation_kind: Option<SaturationKind>,
    /// Some point did not settle.
    pub flagged: bool,
}

pub const ANCHOR_MARGIN_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveOptions {
    pub start_dbm: f64,
    pub max_dbm: f64,
    pub coarse_step_db: f64,
    /// Spacing of the points filled in around the crossing.
    pub fine_step_db: f64,
    pub criterion_db: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { start_dbm: -140.0, max_dbm: -60.0, coarse_step_db: 2.0, fine_step_db: 0.5, criterion_db: 1.0 }
    }
}

fn point(sim: &Simulator, pump: &PumpConfig, power_dbm: f64) -> Result<GainPoint> {
    let amp = flux_from_power(dbm_to_watts(power_dbm), &sim.params)?;
    let r = sim.run(&pump.drive(&sim.params, amp)?)?;
    Ok(GainPoint { power_dbm, gain_db: r.last_gain_db, converged: r.converged, diverged: r.diverged })
}

/// One steady-state run per listed power; the lowest power anchors the
/// small-signal gain. The crossing uses `criterion_db`.
pub fn gain_curve(sim: &Simulator, pump: &PumpConfig, powers_dbm: &[f64], criterion_db: f64) -> Result<GainCurve> {
    if powers_dbm.is_empty() {
        return Err(Error::InvalidParameter("gain curve needs at least one power".into()));
    }
    let mut powers = powers_dbm.to_vec();
    powers.sort_by(f64::total_cmp);
    let points = powers.iter().map(|&p| point(sim, pump, p)).collect::<Result<Vec<_>>>()?;
    Ok(finish(points, criterion_db))
}

fn finish(mut points: Vec<GainPoint>, criterion_db: f64) -> GainCurve {
    points.sort_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm));
    let mut c = GainCurve {
        small_signal_gain_db: points[0].gain_db,
        flagged: points.iter().any(|p| !p.converged),
        points,
        criterion_db,
        saturation_power_dbm: None,
        saturation_kind: None,
    };
    if let Ok((p, k)) = saturation_power(&c, criterion_db) {
        c.saturation_power_dbm = Some(p);
        c.saturation_kind = Some(k);
    }
    c
}

/// Scans upward in coarse steps until the gain leaves the criterion band,
/// then fills the last interval with fine steps. The small-signal anchor sits
/// `ANCHOR_MARGIN_DB` below `start_dbm`.
pub fn scan_saturation(sim: &Simulator, pump: &PumpConfig, opts: &CurveOptions) -> Result<GainCurve> {
    if !(opts.coarse_step_db > 0.0 && opts.fine_step_db > 0.0 && opts.max_dbm > opts.start_dbm) {
        return Err(Error::InvalidParameter("curve steps must be positive and the range non-empty".into()));
    }
    // A start already inside the saturation region would anchor the
    // small-signal gain wrongly, so check it against a quieter point.
    let quiet = point(sim, pump, opts.start_dbm - ANCHOR_MARGIN_DB)?;
    let first = point(sim, pump, opts.start_dbm)?;
    if !quiet.gain_db.is_finite() || !((first.gain_db - quiet.gain_db).abs() < 0.5 * opts.criterion_db) {
        return Err(Error::InvalidParameter(format!(
            "gain already moves by {:.3} dB below {} dBm; lower start_dbm (and the probe power)",
            first.gain_db - quiet.gain_db,
            opts.start_dbm
        )));
    }
    let anchor = quiet.gain_db;
    let mut points = vec![quiet, first];
    let outside = |p: &GainPoint| p.diverged || !p.gain_db.is_finite() || (p.gain_db - anchor).abs() >= opts.criterion_db;
    let mut p = opts.start_dbm;
    let mut crossed = false;
    while p < opts.max_dbm {
        let prev = p;
        p = (p + opts.coarse_step_db).min(opts.max_dbm);
        let pt = point(sim, pump, p)?;
        let out = outside(&pt);
        points.push(pt);
        if out {
            crossed = true;
            let n = ((p - prev) / opts.fine_step_db).round() as usize;
            for k in 1..n {
                points.push(point(sim, pump, prev + k as f64 * (p - prev) / n as f64)?);
            }
            break;
        }
    }
    let mut curve = finish(points, opts.criterion_db);
    if !crossed {
        curve.saturation_power_dbm = None;
        curve.saturation_kind = None;
    }
    Ok(curve)
}

/// First power where `|G - G_small_signal|` reaches `criterion_db`, linear in
/// dB between bracketing points. A diverged point counts as a boost crossing at
/// its own power.
pub fn saturation_power(curve: &GainCurve, criterion_db: f64) -> Result<(f64, SaturationKind)> {
    let g0 = curve.small_signal_gain_db;
    for w in curve.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.diverged || !b.gain_db.is_finite() {
            return Ok((b.power_dbm, SaturationKind::Boost));
        }
        let db = b.gain_db - g0;
        if db.abs() >= criterion_db {
            let kind = if db > 0.0 { SaturationKind::Boost } else { SaturationKind::Compression };
            let target = criterion_db * db.signum();
            let da = a.gain_db - g0;
            let t = if db != da { ((target - da) / (db - da)).clamp(0.0, 1.0) } else { 1.0 };
            return Ok((a.power_dbm + t * (b.power_dbm - a.power_dbm), kind));
        }
    }
    Err(Error::NotBracketed(format!(
        "gain stays within {criterion_db} dB up to {:.1} dBm; extend the power range",
        curve.points.last().map(|p| p.power_dbm).unwrap_or(f64::NAN)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(g: &[(f64, f64)]) -> GainCurve {
        let pts = g.iter().map(|&(p, g)| GainPoint { power_dbm: p, gain_db: g, converged: true, diverged: false }).collect();
        finish(pts, 1.0)
    }

    #[test]
    fn crossings() {
        let c = curve(&[(-130.0, 20.0), (-120.0, 19.8), (-110.0, 18.8), (-100.0, 15.0)]);
        let (p, k) = saturation_power(&c, 1.0).unwrap();
        assert_eq!(k, SaturationKind::Compression);
        assert!((p - -112.0).abs() < 1e-12, "{p}");
        // a smaller criterion is crossed no later
        assert!(saturation_power(&c, 0.1).unwrap().0 <= p);
        let b = curve(&[(-130.0, 20.0), (-120.0, 20.5), (-115.0, 21.5)]);
        let (p, k) = saturation_power(&b, 1.0).unwrap();
        assert_eq!(k, SaturationKind::Boost);
        assert!((p - -117.5).abs() < 1e-12);
        let flat = curve(&[(-130.0, 20.0), (-100.0, 20.0)]);
        assert!(saturation_power(&flat, 1.0).is_err());
        assert!(flat.saturation_power_dbm.is_none());
    }

    proptest::proptest! {
        #[test]
        fn smaller_criterion_is_crossed_no_later(steps in proptest::collection::vec(-0.8f64..0.8, 2..30), crit in 0.05f64..2.0) {
            let mut g = 20.0;
            let pts: Vec<(f64, f64)> = steps.iter().enumerate().map(|(i, d)| {
                let p = (-140.0 + i as f64, g);
                g += d;
                p
            }).collect();
            let c = curve(&pts);
            if let Ok((p_big, _)) = saturation_power(&c, crit) {
                let (p_small, _) = saturation_power(&c, 0.5 * crit).unwrap();
                proptest::prop_assert!(p_small <= p_big + 1e-12);
            }
        }
    }
}
