//! Simulation and analysis of two-dimensional ion crystals in a Penning
//! trap: planar equilibria, magnetized in-plane and drumhead normal modes,
//! thermal initialization, RK4 molecular dynamics, and PSD / ODF spectra of
//! the resulting motion.
//!
//! All internal quantities are dimensionless (see [`physcore::Units`]);
//! conversion to SI happens at the edges.

pub mod error;
pub mod dynamics;
pub mod equilibrium;
pub mod io;
pub mod linmodes;
pub mod modemetrics;
pub mod physcore;
pub mod rng;
pub mod spectra;
pub mod studies;
pub mod thermal;

pub use error::{Error, Result};
pub use physcore::{CharacteristicFrequencies, CrystalState, Trap, TrapConfig};
