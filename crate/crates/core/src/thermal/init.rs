use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{mh_sample_with_rng, sample_axial_thermal, sample_velocity_kicks, SamplerConfig};
use crate::equilibrium::EquilibriumConfiguration;
use crate::error::Result;
use crate::linmodes::DrumheadModes;
use crate::physcore::{CrystalState, Trap};
use crate::rng::SimRng;

/// How the in-plane degrees of freedom are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Equilibrium positions, velocity kicks at `2 T_perp`.
    Vk,
    /// Metropolis-Hastings positions at `T_perp`, velocity kicks at `T_perp`.
    MhVk,
}

/// A full thermal initial state. Axial coordinates come from the
/// zero-temperature drumhead modes at `t_par`.
pub fn thermal_initial_state(
    trap: &Trap,
    eq: &EquilibriumConfiguration,
    drumhead: &DrumheadModes,
    init: Initialization,
    sampler: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<CrystalState> {
    let (xy, kick_temperature) = match init {
        Initialization::Vk => (eq.positions.clone(), 2.0 * sampler.t_perp),
        Initialization::MhVk => {
            let chain = SamplerConfig {
                mh_scans: sampler.snapshot_stride,
                ..sampler.clone()
            };
            let ens = mh_sample_with_rng(trap, eq, &chain, rng)?;
            (ens.snapshots.last().cloned().unwrap_or_else(|| eq.positions.clone()), sampler.t_perp)
        }
    };
    let v = sample_velocity_kicks(trap, kick_temperature, rng);
    let axial = sample_axial_thermal(trap, drumhead, sampler.t_par, rng);
    let positions = xy
        .iter()
        .zip(&axial.z)
        .map(|(p, z)| Vector3::new(p[0], p[1], *z))
        .collect();
    let velocities = v
        .iter()
        .zip(&axial.vz)
        .map(|(p, vz)| Vector3::new(p[0], p[1], *vz))
        .collect();
    Ok(CrystalState {
        positions,
        velocities,
        time: 0.0,
    })
}
