//! Pump tuning, gain curves, saturation power and parameter sweeps.

mod cache;
mod curve;
mod pump;
mod sweep;

pub use cache::{cache_key, ResultCache};
pub use curve::{gain_curve, saturation_power, scan_saturation, CurveOptions, GainCurve, GainPoint, SaturationKind};
pub use pump::{maximize_detuning, nelder_mead, optimize_pump, tune_amplitude, PumpConfig, PumpSearch, Simulator};
pub use sweep::{
    imperfection_study, min_truncation_order, sweep_grid, sweep_point, Imperfection, Slice, SweepPlan, SweepResult,
    SweepRow,
};
