pub mod arm;
pub mod couplings;
pub mod energy;
pub mod jet;
pub mod modes;
pub mod params;
pub mod stability;

pub use arm::{arm_phase, Arm, ALPHA_MAX};
pub use couplings::{
    coupling_table, expansion_coefficients, perturbative_kab, CouplingMethod, CouplingTable, EnergySeries,
};
pub use energy::{jrm_energy, solve_inner_nodes, EnergyModel, InnerSolver};
pub use modes::{inverse_transform, normal_transform, ModeVector};
pub use params::{derive_elements, mode_frequencies, CircuitParams, DerivedElements};
pub use stability::{nulling_flux, stability_and_nulling, StabilityReport};
