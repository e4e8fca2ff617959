//! Constants, trap configuration, crystal state and the rotating-frame
//! potential.

pub mod constants;
pub mod potential;
mod state;
mod trap;

pub use constants::PhysicalConstants;
pub use potential::{accelerations, total_potential_energy};
pub use state::CrystalState;
pub use trap::{
    derive_frequencies, CharacteristicFrequencies, Trap, TrapConfig, Units,
    DEFAULT_MIN_SEPARATION,
};
