//! Raw trajectory files.
//!
//! Layout: 8-byte little-endian header length `n`, `n` bytes of JSON header,
//! then 9 columns of `rows` little-endian f64 each, in the order
//! `t_ns, phi_1..phi_4, dphi_1..dphi_4` (node fluxes and their rates in rad/ns).

use std::io::{Read, Write};
use std::path::Path;

use ode_solvers::{Dop853, OutputType};
use serde::{Deserialize, Serialize};

use super::model::{DriveConfig, Force, ModelSpec};
use super::rhs::{Rhs, State};
use super::steady::SteadyOptions;
use crate::circuit::{derive_elements, inverse_transform, CircuitParams, ModeVector};
use crate::error::{Error, Result};
use crate::units::per_ns;

pub const COLUMNS: [&str; 9] = ["t_ns", "phi_1", "phi_2", "phi_3", "phi_4", "dphi_1", "dphi_2", "dphi_3", "dphi_4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub columns: Vec<String>,
    pub rows: usize,
    pub params: CircuitParams,
    pub drive: DriveConfig,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    /// Column-major data, `columns[k][row]`.
    pub columns: Vec<Vec<f64>>,
}

/// Integrates from rest to `t_end_ns`, sampling every `dt_ns`.
pub fn record_trajectory(
    drive: &DriveConfig,
    params: &CircuitParams,
    model: &ModelSpec,
    opts: &SteadyOptions,
    t_end_ns: f64,
    dt_ns: f64,
) -> Result<Trajectory> {
    drive.validate()?;
    if !(dt_ns > 0.0 && t_end_ns > 0.0) {
        return Err(Error::InvalidParameter("need positive t_end and dt".into()));
    }
    let el = derive_elements(params)?;
    let force = Force::new(params, model)?;
    let ramp = opts.ramp_periods * std::f64::consts::TAU / per_ns(drive.omega_p);
    let rhs = Rhs::new(&force, params, model, drive)?.with_ramp(ramp);
    // The solver's dense interpolation reuses stage buffers it has already
    // overwritten, so each sample interval is integrated on its own.
    let n = (t_end_ns / dt_ns).floor() as usize;
    let mut columns = vec![Vec::with_capacity(n + 1); 9];
    let mut y = State::zeros();
    let mut push = |t: f64, y: &State| {
        let phi = inverse_transform(ModeVector::new(y[0], y[1], y[2]), el.c_a, el.c_b);
        let dphi = inverse_transform(ModeVector::new(y[3], y[4], y[5]), el.c_a, el.c_b);
        columns[0].push(t);
        for k in 0..4 {
            columns[1 + k].push(phi[k]);
            columns[5 + k].push(dphi[k]);
        }
    };
    push(0.0, &y);
    for i in 0..n {
        let (t0, t1) = (i as f64 * dt_ns, (i + 1) as f64 * dt_ns);
        let mut ode = Dop853::from_param(
            &rhs, t0, t1, dt_ns, y, opts.rtol, opts.atol,
            0.9, 0.0, 0.333, 6.0, dt_ns, 0.0, u32::MAX, u32::MAX, OutputType::Sparse,
        );
        let res = ode.integrate();
        if let Some(e) = rhs.take_error() {
            return Err(e);
        }
        res.map_err(|e| Error::Integration(e.to_string()))?;
        y = *ode.results().get().1.last().expect("solver returns the end point");
        push(t1, &y);
    }
    let header = TrajectoryHeader {
        columns: COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: columns[0].len(),
        params: *params,
        drive: *drive,
        model: *model,
    };
    Ok(Trajectory { header, columns })
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let header = serde_json::to_vec(&traj.header)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&(header.len() as u64).to_le_bytes())?;
    f.write_all(&header)?;
    for col in &traj.columns {
        for v in col {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut len = [0u8; 8];
    f.read_exact(&mut len)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    f.read_exact(&mut header)?;
    let header: TrajectoryHeader = serde_json::from_slice(&header)?;
    let mut columns = Vec::with_capacity(header.columns.len());
    let mut buf = [0u8; 8];
    for _ in 0..header.columns.len() {
        let mut col = Vec::with_capacity(header.rows);
        for _ in 0..header.rows {
            f.read_exact(&mut buf)?;
            col.push(f64::from_le_bytes(buf));
        }
        columns.push(col);
    }
    Ok(Trajectory { header, columns })
}
