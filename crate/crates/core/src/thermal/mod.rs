//! Thermal initial conditions: in-plane velocity kicks, Metropolis-Hastings
//! snapshots of the in-plane positions, axial mode-amplitude sampling, and
//! projection of phase-space vectors onto the in-plane modes.
//!
//! Functions that take a temperature in kelvin convert through
//! [`Trap::thermal_energy`]; positions and velocities are in scaled units.

mod axial;
mod init;
mod mh;
mod sho;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use axial::{sample_axial_thermal, AxialSample};
pub use init::{thermal_initial_state, Initialization};
pub use mh::{
    boltzmann_weights, discrete_metropolis, metropolis_accept, mh_sample_inplane, mh_sample_with_rng,
    SamplerConfig, SnapshotEnsemble, StepRadius,
};
pub use sho::{sho_kick_moment_study, Estimate, MomentReport, Moments};

use crate::linmodes::{InPlaneModes, LinearizedModel};
use crate::physcore::Trap;

/// In-plane velocities with i.i.d. Gaussian components of variance
/// `k_B T / m`.
pub fn sample_velocity_kicks<R: Rng + ?Sized>(trap: &Trap, kelvin: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let sigma = trap.thermal_energy(kelvin).sqrt();
    (0..trap.n_ions())
        .map(|_| {
            let vx: f64 = rng.sample(StandardNormal);
            let vy: f64 = rng.sample(StandardNormal);
            [sigma * vx, sigma * vy]
        })
        .collect()
}

/// Complex mode amplitudes `A_n`; the phase-space vector is
/// `q(t) = sum_n 2 Re(A_n exp(-i w_n t) u_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitudes {
    pub amplitudes: Vec<Complex64>,
}

impl ModeAmplitudes {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// Amplitudes of a pure velocity configuration (zero displacement),
/// `A_n = i w_n <u_n^r|v> / <u_n|E|u_n>`.
pub fn project_mode_amplitudes(modes: &InPlaneModes, velocities: &[[f64; 2]]) -> ModeAmplitudes {
    let n2 = 2 * modes.n_ions();
    let amplitudes = (0..modes.len())
        .map(|n| {
            let mut dot = Complex64::new(0.0, 0.0);
            for (k, v) in velocities.iter().flatten().enumerate() {
                dot += modes.vectors[(k, n)].conj() * *v;
            }
            debug_assert_eq!(velocities.len() * 2, n2);
            Complex64::new(0.0, modes.frequencies[n]) * dot / modes.energy_norms[n]
        })
        .collect();
    ModeAmplitudes { amplitudes }
}

/// Amplitudes of a general phase-space point,
/// `A_n = <u_n|E|q> / <u_n|E|u_n>` with `q = (dr, v)`.
pub fn project_phase_space(
    model: &LinearizedModel,
    modes: &InPlaneModes,
    displacement: &[[f64; 2]],
    velocities: &[[f64; 2]],
) -> ModeAmplitudes {
    let n2 = 2 * modes.n_ions();
    let dr: Vec<f64> = displacement.iter().flatten().copied().collect();
    let v: Vec<f64> = velocities.iter().flatten().copied().collect();
    let k_dr = &model.k_perp * nalgebra::DVector::from_column_slice(&dr);
    let amplitudes = (0..modes.len())
        .map(|n| {
            let mut dot = Complex64::new(0.0, 0.0);
            for k in 0..n2 {
                dot += modes.vectors[(k, n)].conj() * k_dr[k];
                dot += modes.vectors[(n2 + k, n)].conj() * v[k];
            }
            dot / modes.energy_norms[n]
        })
        .collect();
    ModeAmplitudes { amplitudes }
}

/// Energy carried by each mode, `|A_n|^2 <u_n|E|u_n>`, scaled units.
pub fn mode_energies(modes: &InPlaneModes, amps: &ModeAmplitudes) -> Vec<f64> {
    amps.amplitudes
        .iter()
        .zip(&modes.energy_norms)
        .map(|(a, norm)| a.norm_sqr() * norm)
        .collect()
}

/// Phase-space vector `sum_n 2 Re(A_n exp(-i w_n t) u_n)` as
/// `(displacement, velocity)`.
pub fn reconstruct_inplane(modes: &InPlaneModes, amps: &ModeAmplitudes, t: f64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let n2 = 2 * modes.n_ions();
    let mut q = vec![0.0; 2 * n2];
    for (n, a) in amps.amplitudes.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -modes.frequencies[n] * t);
        let c = a * phase;
        for (k, qk) in q.iter_mut().enumerate() {
            *qk += 2.0 * (c * modes.vectors[(k, n)]).re;
        }
    }
    let pairs = |s: &[f64]| s.chunks(2).map(|p| [p[0], p[1]]).collect::<Vec<_>>();
    (pairs(&q[..n2]), pairs(&q[n2..]))
}

/// Axial displacement and velocity `sum_n 2 Re(A_n exp(-i w_n t)) b_n`
/// and its time derivative.
pub fn reconstruct_axial(
    frequencies: &[f64],
    vectors: &DMatrix<f64>,
    amplitudes: &[Complex64],
    t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = vectors.nrows();
    let mut z = vec![0.0; n];
    let mut vz = vec![0.0; n];
    for (k, a) in amplitudes.iter().enumerate() {
        let w = frequencies[k];
        let c = a * Complex64::from_polar(1.0, -w * t);
        let (zk, vk) = (2.0 * c.re, 2.0 * w * c.im);
        for j in 0..n {
            z[j] += zk * vectors[(j, k)];
            vz[j] += vk * vectors[(j, k)];
        }
    }
    (z, vz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::equilibrium_for;
    use crate::linmodes::{build_linearized_model, inplane_modes};
    use crate::rng::seeded;

    fn crystal(n: usize) -> (Trap, LinearizedModel, InPlaneModes) {
        let trap = Trap::nist(n).unwrap();
        let eq = equilibrium_for(&trap).unwrap();
        let model = build_linearized_model(&trap, &eq).unwrap();
        let modes = inplane_modes(&model).unwrap();
        (trap, model, modes)
    }

    #[test]
    fn zero_temperature_kicks_vanish() {
        let trap = Trap::nist(5).unwrap();
        let v = sample_velocity_kicks(&trap, 0.0, &mut seeded(1));
        assert!(v.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn kick_moments() {
        let trap = Trap::nist(1).unwrap();
        let kt = trap.thermal_energy(1e-3);
        let mut rng = seeded(11);
        let draws = 100_000;
        let (mut s2, mut s4, mut sxy, mut sxy2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..draws {
            let v = sample_velocity_kicks(&trap, 1e-3, &mut rng)[0];
            s2 += v[0] * v[0];
            s4 += v[0].powi(4);
            sxy += v[0] * v[1];
            sxy2 += (v[0] * v[1]).powi(2);
        }
        let n = draws as f64;
        let mean = s2 / n;
        let se = ((s4 / n - mean * mean) / n).sqrt();
        assert!((mean - kt).abs() < 3.0 * se, "{mean} vs {kt} +- {se}");
        let cross = sxy / n;
        let se_cross = ((sxy2 / n - cross * cross) / n).sqrt();
        assert!(cross.abs() < 3.0 * se_cross);
    }

    #[test]
    fn zero_velocity_projects_to_zero() {
        let (_, _, modes) = crystal(5);
        let a = project_mode_amplitudes(&modes, &[[0.0; 2]; 5]);
        assert!(a.amplitudes.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn velocity_projection_reconstructs() {
        let (trap, model, modes) = crystal(7);
        let v = sample_velocity_kicks(&trap, 1e-3, &mut seeded(5));
        let a = project_mode_amplitudes(&modes, &v);
        let b = project_phase_space(&model, &modes, &[[0.0; 2]; 7], &v);
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            assert!((x - y).norm() <= 1e-10 * x.norm().max(1e-30));
        }
        let (dr, v2) = reconstruct_inplane(&modes, &a, 0.0);
        let scale = v.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        for (p, q) in v.iter().flatten().zip(v2.iter().flatten()) {
            assert!((p - q).abs() <= 1e-8 * scale);
        }
        assert!(dr.iter().flatten().all(|x| x.abs() <= 1e-8 * scale));
    }

    #[test]
    fn single_mode_is_recovered() {
        let (_, model, modes) = crystal(5);
        let target = 3;
        let amp = Complex64::new(0.3, -0.7);
        let mut amps = vec![Complex64::new(0.0, 0.0); modes.len()];
        amps[target] = amp;
        let (dr, v) = reconstruct_inplane(&modes, &ModeAmplitudes { amplitudes: amps }, 0.0);
        let back = project_phase_space(&model, &modes, &dr, &v);
        for (n, a) in back.amplitudes.iter().enumerate() {
            let expect = if n == target { amp } else { Complex64::new(0.0, 0.0) };
            assert!((a - expect).norm() <= 1e-8 * amp.norm(), "mode {n}: {a}");
        }
    }
}
