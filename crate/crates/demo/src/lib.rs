//! WebAssembly bindings for the browser demo. Each exported function takes
//! plain numbers and returns a JSON string; the `*_data` functions behind
//! them are ordinary Rust and are what the native tests exercise.

use std::f64::consts::TAU;

use penning_core::equilibrium::equilibrium_for;
use penning_core::linmodes::{build_linearized_model, drumhead_modes, inplane_modes, Branch};
use penning_core::modemetrics::{cold_fluid_reference, energy_ratio, helicity};
use penning_core::physcore::constants::{BE9_ION_MASS, ELEMENTARY_CHARGE};
use penning_core::studies::snapshot_frequencies;
use penning_core::thermal::SamplerConfig;
use penning_core::{Trap, TrapConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const MAX_IONS: usize = 150;
pub const MAX_SNAPSHOTS: usize = 2000;

/// NIST cyclotron and axial frequencies with adjustable rotation and wall.
pub fn demo_trap(n_ions: usize, rotation_khz: f64, wall_khz: f64) -> Result<Trap, String> {
    if n_ions == 0 || n_ions > MAX_IONS {
        return Err(format!("number of ions must be between 1 and {MAX_IONS}"));
    }
    let cfg = TrapConfig::from_frequencies(
        BE9_ION_MASS,
        ELEMENTARY_CHARGE,
        TAU * 7.60e6,
        TAU * rotation_khz * 1e3,
        TAU * 1.59e6,
        TAU * wall_khz * 1e3,
        n_ions,
    );
    Trap::new(cfg).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct CrystalData {
    /// micrometres
    pub positions_um: Vec<[f64; 2]>,
    /// Drumhead frequencies, descending, Hz.
    pub drumhead_hz: Vec<f64>,
    pub axial_hz: f64,
    pub tilt_hz: f64,
    pub chip_hz: f64,
}

pub fn crystal_data(n_ions: usize, rotation_khz: f64, wall_khz: f64) -> Result<CrystalData, String> {
    let trap = demo_trap(n_ions, rotation_khz, wall_khz)?;
    let eq = equilibrium_for(&trap).map_err(|e| e.to_string())?;
    let model = build_linearized_model(&trap, &eq).map_err(|e| e.to_string())?;
    let drum = drumhead_modes(&model).map_err(|e| e.to_string())?;
    let (tilt, chip) = cold_fluid_reference(&trap.freqs).map_err(|e| e.to_string())?;
    let um = trap.units.length * 1e6;
    Ok(CrystalData {
        positions_um: eq.positions.iter().map(|p| [p[0] * um, p[1] * um]).collect(),
        drumhead_hz: drum.frequencies.iter().map(|w| trap.hertz(*w)).collect(),
        axial_hz: trap.freqs.omega_par / TAU,
        tilt_hz: tilt / TAU,
        chip_hz: chip / TAU,
    })
}

#[derive(Debug, Serialize)]
pub struct InPlaneData {
    /// Ascending, Hz.
    pub frequency_hz: Vec<f64>,
    /// `true` for the cyclotron branch.
    pub cyclotron: Vec<bool>,
    /// Potential over kinetic energy.
    pub energy_ratio: Vec<f64>,
    pub helicity: Vec<f64>,
}

pub fn inplane_data(n_ions: usize, rotation_khz: f64, wall_khz: f64) -> Result<InPlaneData, String> {
    let trap = demo_trap(n_ions, rotation_khz, wall_khz)?;
    let eq = equilibrium_for(&trap).map_err(|e| e.to_string())?;
    let model = build_linearized_model(&trap, &eq).map_err(|e| e.to_string())?;
    let modes = inplane_modes(&model).map_err(|e| e.to_string())?;
    let n = modes.len();
    Ok(InPlaneData {
        frequency_hz: modes.frequencies.iter().map(|w| trap.hertz(*w)).collect(),
        cyclotron: (0..n).map(|k| modes.branch(k) == Branch::Cyclotron).collect(),
        energy_ratio: (0..n).map(|k| energy_ratio(&model, &modes, k)).collect(),
        helicity: (0..n).map(|k| helicity(&modes, k)).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct HistogramData {
    pub bin_hz: f64,
    pub first_edge_hz: f64,
    pub counts: Vec<u64>,
    /// Zero-temperature drumhead frequencies, Hz.
    pub reference_hz: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Histogram of drumhead frequencies over thermal snapshots at `t_mk`.
pub fn histogram_data(
    n_ions: usize,
    rotation_khz: f64,
    wall_khz: f64,
    t_mk: f64,
    snapshots: usize,
    seed: u64,
) -> Result<HistogramData, String> {
    if snapshots == 0 || snapshots > MAX_SNAPSHOTS {
        return Err(format!("snapshots must be between 1 and {MAX_SNAPSHOTS}"));
    }
    if !(t_mk >= 0.0 && t_mk <= 100.0) {
        return Err("temperature must be between 0 and 100 mK".into());
    }
    let trap = demo_trap(n_ions, rotation_khz, wall_khz)?;
    let eq = equilibrium_for(&trap).map_err(|e| e.to_string())?;
    let model = build_linearized_model(&trap, &eq).map_err(|e| e.to_string())?;
    let reference_hz: Vec<f64> = drumhead_modes(&model)
        .map_err(|e| e.to_string())?
        .frequencies
        .iter()
        .map(|w| trap.hertz(*w))
        .collect();
    let sampler = SamplerConfig {
        mh_burn_in_scans: 200,
        snapshot_stride: 20,
        ..SamplerConfig::default()
    };
    let (stats, spectra) =
        snapshot_frequencies(&trap, &eq, &sampler, t_mk * 1e-3, snapshots, seed, 0).map_err(|e| e.to_string())?;
    let bin_hz = 500.0;
    let all = spectra.iter().flatten().chain(&reference_hz);
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    let first_edge_hz = (lo / bin_hz).floor() * bin_hz;
    let mut counts = vec![0u64; ((hi - first_edge_hz) / bin_hz).floor() as usize + 1];
    for f in spectra.iter().flatten() {
        counts[((f - first_edge_hz) / bin_hz) as usize] += 1;
    }
    Ok(HistogramData {
        bin_hz,
        first_edge_hz,
        counts,
        reference_hz,
        acceptance_rate: stats.acceptance_rate,
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, String> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

/// Equilibrium positions and drumhead spectrum.
#[wasm_bindgen]
pub fn crystal(n_ions: usize, rotation_khz: f64, wall_khz: f64) -> Result<String, String> {
    json(crystal_data(n_ions, rotation_khz, wall_khz))
}

/// In-plane frequencies with energy ratio and helicity per mode.
#[wasm_bindgen]
pub fn inplane(n_ions: usize, rotation_khz: f64, wall_khz: f64) -> Result<String, String> {
    json(inplane_data(n_ions, rotation_khz, wall_khz))
}

/// Thermal drumhead-frequency histogram.
#[wasm_bindgen]
pub fn histogram(
    n_ions: usize,
    rotation_khz: f64,
    wall_khz: f64,
    t_mk: f64,
    snapshots: usize,
    seed: u64,
) -> Result<String, String> {
    json(histogram_data(n_ions, rotation_khz, wall_khz, t_mk, snapshots, seed))
}
