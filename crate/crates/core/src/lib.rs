//! Semiclassical model of a Josephson ring modulator amplifier: circuit energy,
//! time-domain steady states, linear response, perturbative saturation and
//! pump optimization.

pub mod circuit;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod linear;
pub mod optimizer;
pub mod perturbation;
pub mod units;

pub use error::{Error, Result};
