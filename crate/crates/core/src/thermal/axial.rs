use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::reconstruct_axial;
use crate::linmodes::DrumheadModes;
use crate::physcore::Trap;

/// Axial thermal draw: mode amplitudes and the resulting `z`, `v_z`
/// (scaled units).
#[derive(Debug, Clone)]
pub struct AxialSample {
    pub amplitudes: Vec<Complex64>,
    pub z: Vec<f64>,
    pub vz: Vec<f64>,
}

impl AxialSample {
    /// Energy of each mode, `2 w_n^2 |A_n|^2`.
    pub fn mode_energies(&self, modes: &DrumheadModes) -> Vec<f64> {
        self.amplitudes
            .iter()
            .zip(&modes.frequencies)
            .map(|(a, w)| 2.0 * w * w * a.norm_sqr())
            .collect()
    }
}

/// Draws each drumhead amplitude with independent Gaussian real and
/// imaginary parts of variance `k_B T / (4 w_n^2)`, so that every mode holds
/// `k_B T` on average.
pub fn sample_axial_thermal<R: Rng + ?Sized>(
    trap: &Trap,
    modes: &DrumheadModes,
    kelvin: f64,
    rng: &mut R,
) -> AxialSample {
    let kt = trap.thermal_energy(kelvin);
    let amplitudes: Vec<Complex64> = modes
        .frequencies
        .iter()
        .map(|w| {
            let sigma = (kt / (4.0 * w * w)).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    let (z, vz) = reconstruct_axial(&modes.frequencies, &modes.eigenvectors, &amplitudes, 0.0);
    AxialSample { amplitudes, z, vz }
}
