use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumConfiguration;
use crate::error::{Error, Result};
use crate::physcore::potential::{potential_energy, single_ion_delta};
use crate::physcore::Trap;
use crate::rng::{seeded, SimRng};

/// Radius of the uniform disc proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRadiusRepr", into = "StepRadiusRepr")]
pub enum StepRadius {
    /// Tuned toward 50% acceptance during burn-in, then frozen.
    Adaptive,
    /// Fixed radius in metres.
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepRadiusRepr {
    Metres(f64),
    Word(String),
}

impl TryFrom<StepRadiusRepr> for StepRadius {
    type Error = String;

    fn try_from(r: StepRadiusRepr) -> std::result::Result<Self, String> {
        match r {
            StepRadiusRepr::Metres(m) => Ok(StepRadius::Fixed(m)),
            StepRadiusRepr::Word(w) if w == "adaptive" => Ok(StepRadius::Adaptive),
            StepRadiusRepr::Word(w) => Err(format!("step radius must be \"adaptive\" or metres, got {w:?}")),
        }
    }
}

impl From<StepRadius> for StepRadiusRepr {
    fn from(s: StepRadius) -> Self {
        match s {
            StepRadius::Adaptive => StepRadiusRepr::Word("adaptive".into()),
            StepRadius::Fixed(m) => StepRadiusRepr::Metres(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// In-plane temperature, K.
    pub t_perp: f64,
    /// Axial temperature, K.
    pub t_par: f64,
    /// Scans in the sampling phase (after burn-in).
    pub mh_scans: usize,
    pub mh_burn_in_scans: usize,
    pub mh_step_radius: StepRadius,
    pub snapshot_stride: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            t_perp: 1e-3,
            t_par: 0.5e-3,
            mh_scans: 200_000,
            mh_burn_in_scans: 1000,
            mh_step_radius: StepRadius::Adaptive,
            snapshot_stride: 100,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.t_perp >= 0.0 && self.t_par >= 0.0) {
            return bad("sampler temperatures must be >= 0");
        }
        if self.mh_scans < 1 {
            return bad("mh_scans must be >= 1");
        }
        if self.snapshot_stride < 1 {
            return bad("snapshot_stride must be >= 1");
        }
        if let StepRadius::Fixed(r) = self.mh_step_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("mh_step_radius must be positive");
            }
        }
        Ok(())
    }
}

/// Thermal snapshots of the in-plane configuration (scaled units, `z = 0`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotEnsemble {
    pub snapshots: Vec<Vec<[f64; 2]>>,
    /// Fraction of accepted proposals during the sampling phase.
    pub acceptance_rate: f64,
    /// Proposal radius used in the sampling phase, scaled units.
    pub step_radius: f64,
    /// `(Phi(snapshot) - V0) / N` per snapshot, J.
    pub delta_phi_per_ion: Vec<f64>,
    pub mean_delta_phi_per_ion: f64,
    pub temperature: f64,
    /// Set when `t_perp = 0`: no chain ran and the equilibrium is the only
    /// snapshot.
    pub zero_temperature: bool,
}

/// The Metropolis rule: always accept downhill, otherwise with probability
/// `exp(-beta delta)`.
#[inline]
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, beta: f64, rng: &mut R) -> bool {
    delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp()
}

/// Metropolis chain over a finite set of states with uniform proposals
/// among the other states. Returns visit counts per state.
pub fn discrete_metropolis<R: Rng + ?Sized>(energies: &[f64], beta: f64, steps: usize, rng: &mut R) -> Vec<u64> {
    let k = energies.len();
    let mut counts = vec![0u64; k];
    let mut state = 0usize;
    for _ in 0..steps {
        if k > 1 {
            let mut next = rng.random_range(0..k - 1);
            if next >= state {
                next += 1;
            }
            if metropolis_accept(energies[next] - energies[state], beta, rng) {
                state = next;
            }
        }
        counts[state] += 1;
    }
    counts
}

/// Normalized `exp(-beta E_k)`.
pub fn boltzmann_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - emin)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Runs the chain seeded from `sampler.rng_seed`.
pub fn mh_sample_inplane(trap: &Trap, eq: &EquilibriumConfiguration, sampler: &SamplerConfig) -> Result<SnapshotEnsemble> {
    mh_sample_with_rng(trap, eq, sampler, &mut seeded(sampler.rng_seed))
}

/// Single-ion Metropolis-Hastings over in-plane positions at `t_perp`,
/// starting from the equilibrium. One scan proposes a uniform move inside
/// a disc for each ion in turn.
pub fn mh_sample_with_rng(
    trap: &Trap,
    eq: &EquilibriumConfiguration,
    sampler: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<SnapshotEnsemble> {
    sampler.validate()?;
    let n = eq.n_ions();
    let v0 = eq.energy;
    if sampler.t_perp == 0.0 {
        return Ok(SnapshotEnsemble {
            snapshots: vec![eq.positions.clone()],
            acceptance_rate: 0.0,
            step_radius: 0.0,
            delta_phi_per_ion: vec![0.0],
            mean_delta_phi_per_ion: 0.0,
            temperature: 0.0,
            zero_temperature: true,
        });
    }
    let kt = trap.thermal_energy(sampler.t_perp);
    let beta = 1.0 / kt;
    let adaptive = matches!(sampler.mh_step_radius, StepRadius::Adaptive);
    let mut radius = match sampler.mh_step_radius {
        StepRadius::Fixed(m) => m / trap.units.length,
        StepRadius::Adaptive => (kt / trap.stiffness_y.max(1e-3)).sqrt().min(0.5),
    };
    let mut pos: Vec<Vector3<f64>> = eq.positions.iter().map(|p| Vector3::new(p[0], p[1], 0.0)).collect();

    let scan = |pos: &mut Vec<Vector3<f64>>, radius: f64, rng: &mut SimRng| -> Result<usize> {
        let mut accepted = 0;
        for ion in 0..n {
            // uniform point in a disc of the given radius
            let r = radius * rng.random::<f64>().sqrt();
            let phi = TAU * rng.random::<f64>();
            let (x, y) = (pos[ion].x + r * phi.cos(), pos[ion].y + r * phi.sin());
            let delta = match single_ion_delta(trap, pos, ion, x, y) {
                Ok(d) => d,
                Err(Error::CoincidentIons { .. }) => continue,
                Err(e) => return Err(e),
            };
            if metropolis_accept(delta, beta, rng) {
                pos[ion].x = x;
                pos[ion].y = y;
                accepted += 1;
            }
        }
        Ok(accepted)
    };

    for _ in 0..sampler.mh_burn_in_scans {
        let acc = scan(&mut pos, radius, rng)?;
        if adaptive {
            let rate = acc as f64 / n as f64;
            radius *= (rate - 0.5).exp();
        }
    }

    let mut snapshots = Vec::with_capacity(sampler.mh_scans / sampler.snapshot_stride);
    let mut delta_phi_per_ion = Vec::with_capacity(snapshots.capacity());
    let mut accepted = 0usize;
    for s in 1..=sampler.mh_scans {
        accepted += scan(&mut pos, radius, rng)?;
        if s % sampler.snapshot_stride == 0 {
            let phi = potential_energy(trap, &pos)?;
            delta_phi_per_ion.push((phi - v0) / n as f64 * trap.units.energy);
            snapshots.push(pos.iter().map(|p| [p.x, p.y]).collect());
        }
    }
    let mean = if delta_phi_per_ion.is_empty() {
        f64::NAN
    } else {
        delta_phi_per_ion.iter().sum::<f64>() / delta_phi_per_ion.len() as f64
    };
    Ok(SnapshotEnsemble {
        snapshots,
        acceptance_rate: accepted as f64 / (sampler.mh_scans * n) as f64,
        step_radius: radius,
        delta_phi_per_ion,
        mean_delta_phi_per_ion: mean,
        temperature: sampler.t_perp,
        zero_temperature: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::equilibrium_for;
    use crate::physcore::constants::BOLTZMANN;

    #[test]
    fn three_state_chain_matches_boltzmann() {
        // one ion on three sites of a 1-D potential, scaled units
        let energies = [0.0, 0.4, 1.1];
        let beta = 1.5;
        let steps = 1_000_000;
        let counts = discrete_metropolis(&energies, beta, steps, &mut seeded(3));
        let exact = boltzmann_weights(&energies, beta);
        let z: f64 = energies.iter().map(|e| (-beta * e).exp()).sum();
        for (k, e) in energies.iter().enumerate() {
            assert!((exact[k] - (-beta * e).exp() / z).abs() < 1e-15);
        }
        // the chain is correlated; bound the error by batch means
        let batches = 100;
        let per = steps / batches;
        let mut rng = seeded(3);
        let mut batch_freq = vec![Vec::new(); 3];
        for _ in 0..batches {
            let c = discrete_metropolis(&energies, beta, per, &mut rng);
            for k in 0..3 {
                batch_freq[k].push(c[k] as f64 / per as f64);
            }
        }
        for k in 0..3 {
            let f = counts[k] as f64 / steps as f64;
            let m = batch_freq[k].iter().sum::<f64>() / batches as f64;
            let var = batch_freq[k].iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
            let sigma = (var / batches as f64).sqrt();
            assert!((f - exact[k]).abs() < 3.0 * sigma, "state {k}: {f} vs {} (sigma {sigma})", exact[k]);
        }
    }

    #[test]
    fn zero_temperature_returns_equilibrium() {
        let trap = Trap::nist(7).unwrap();
        let eq = equilibrium_for(&trap).unwrap();
        let cfg = SamplerConfig {
            t_perp: 0.0,
            ..Default::default()
        };
        let ens = mh_sample_inplane(&trap, &eq, &cfg).unwrap();
        assert!(ens.zero_temperature);
        assert_eq!(ens.snapshots, vec![eq.positions.clone()]);
    }

    #[test]
    fn tiny_temperature_stays_at_equilibrium() {
        let trap = Trap::nist(7).unwrap();
        let eq = equilibrium_for(&trap).unwrap();
        let cfg = SamplerConfig {
            t_perp: 1e-12,
            mh_scans: 50,
            mh_burn_in_scans: 0,
            mh_step_radius: StepRadius::Fixed(1e-15),
            snapshot_stride: 10,
            ..Default::default()
        };
        let ens = mh_sample_inplane(&trap, &eq, &cfg).unwrap();
        for s in &ens.snapshots {
            for (p, q) in s.iter().zip(&eq.positions) {
                assert!((p[0] - q[0]).abs() < 1e-8 && (p[1] - q[1]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn small_crystal_thermalizes_and_is_reproducible() {
        let trap = Trap::nist(19).unwrap();
        let eq = equilibrium_for(&trap).unwrap();
        let cfg = SamplerConfig {
            t_perp: 1e-3,
            mh_scans: 20_000,
            snapshot_stride: 20,
            rng_seed: 9,
            ..Default::default()
        };
        let a = mh_sample_inplane(&trap, &eq, &cfg).unwrap();
        let b = mh_sample_inplane(&trap, &eq, &cfg).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert!((0.3..=0.7).contains(&a.acceptance_rate), "{}", a.acceptance_rate);
        let kt = BOLTZMANN * 1e-3;
        let rel = a.mean_delta_phi_per_ion / kt;
        assert!((rel - 1.0).abs() < 0.1, "{rel}");
    }

    #[test]
    fn step_radius_serde() {
        let a: StepRadius = serde_json::from_str("\"adaptive\"").unwrap();
        assert_eq!(a, StepRadius::Adaptive);
        let f: StepRadius = serde_json::from_str("2.5e-8").unwrap();
        assert_eq!(f, StepRadius::Fixed(2.5e-8));
        assert!(serde_json::from_str::<StepRadius>("\"wide\"").is_err());
    }
}
