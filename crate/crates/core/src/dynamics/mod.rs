//! Driven equations of motion, time-domain integration and harmonic analysis.

pub mod dump;
pub mod free;
pub mod harmonics;
pub mod model;
pub mod power;
pub mod rhs;
pub mod steady;

pub use dump::{read_trajectory, record_trajectory, write_trajectory, Trajectory};
pub use free::{free_evolution, mode_energy, FreeRun};
pub use harmonics::{extract_harmonic, reflection_gain};
pub use model::{energy_series, DriveConfig, Force, ModelSpec, PumpModel, Term, Truncation};
pub use power::{flux_from_power, power_from_flux};
pub use rhs::{rhs, Rhs, State, TIME};
pub use steady::{integrate_to_steady_state, SteadyOptions, SteadyStateResult};
