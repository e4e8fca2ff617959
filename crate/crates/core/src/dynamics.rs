//! Fixed-step RK4 integration of the full nonlinear equations of motion in
//! the rotating frame, energy bookkeeping, and the harmonic mode expansion
//! used as a small-amplitude reference.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumConfiguration;
use crate::error::{Error, Result};
use crate::linmodes::{DrumheadModes, InPlaneModes};
use crate::physcore::potential::{accelerations_into, potential_energy};
use crate::physcore::{CrystalState, Trap};
use crate::thermal::{reconstruct_axial, reconstruct_inplane, ModeAmplitudes};

/// Largest number of recorded samples before the default stride decimates.
pub const MAX_DEFAULT_SAMPLES: usize = 1_000_000;

/// Integration grid. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_total: f64,
    pub record_stride: usize,
    pub energy_check_stride: usize,
    /// Skip the `dt <= 2 pi / (40 w_+)` check.
    #[serde(default)]
    pub allow_large_step: bool,
}

/// Fastest single-ion frequency `w_+`, rad/s.
fn omega_plus(trap: &Trap) -> f64 {
    trap.freqs.single_ion_pair().0
}

impl IntegratorConfig {
    /// Default grid for a run of `t_total` seconds: `dt` close to
    /// `2 pi / (100 w_+)`, shrunk so the run is a whole number of recording
    /// strides.
    pub fn new(trap: &Trap, t_total: f64) -> Self {
        let target = TAU / (100.0 * omega_plus(trap));
        let steps = (t_total / target).ceil().max(1.0) as usize;
        let stride = steps.div_ceil(MAX_DEFAULT_SAMPLES).max(1);
        Self::from_steps(t_total, steps, stride)
    }

    /// Same run length, recording every `stride` steps.
    pub fn with_record_stride(self, stride: usize) -> Self {
        let steps = self.n_steps();
        Self::from_steps(self.t_total, steps, stride.max(1))
    }

    /// Grid with a step no larger than `dt` seconds, recording every
    /// `stride` steps.
    pub fn with_step(t_total: f64, dt: f64, stride: usize) -> Self {
        let steps = (t_total / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::from_steps(t_total, steps, stride.max(1))
    }

    fn from_steps(t_total: f64, steps: usize, stride: usize) -> Self {
        let steps = steps.div_ceil(stride) * stride;
        Self {
            dt: t_total / steps as f64,
            t_total,
            record_stride: stride,
            energy_check_stride: 10,
            allow_large_step: false,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    /// Number of recorded samples including both end points.
    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.record_stride + 1
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.record_stride as f64
    }

    pub fn step_limit(trap: &Trap) -> f64 {
        TAU / (40.0 * omega_plus(trap))
    }

    pub fn validate(&self, trap: &Trap) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_total >= self.dt) {
            return Err(Error::InvalidConfig("need dt > 0 and t_total >= dt".into()));
        }
        if self.record_stride < 1 || self.energy_check_stride < 1 {
            return Err(Error::InvalidConfig("strides must be >= 1".into()));
        }
        let limit = Self::step_limit(trap);
        if self.dt > limit && !self.allow_large_step {
            return Err(Error::StepTooLarge { dt: self.dt, limit });
        }
        Ok(())
    }

    /// Anti-alias warning when the recorded Nyquist frequency falls below
    /// `1.2 w_+ / 2 pi`.
    pub fn warnings(&self, trap: &Trap) -> Vec<String> {
        let nyquist = 0.5 / self.sample_interval();
        let fastest = 1.2 * omega_plus(trap) / TAU;
        if nyquist < fastest {
            vec![format!(
                "recorded Nyquist frequency {nyquist:.4e} Hz is below 1.2 w+/2pi = {fastest:.4e} Hz; in-plane spectra will alias"
            )]
        } else {
            Vec::new()
        }
    }
}

/// Kinetic, potential and total rotating-frame energy, J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

fn energy_scaled(trap: &Trap, pos: &[Vector3<f64>], vel: &[Vector3<f64>]) -> Result<(f64, f64)> {
    let kinetic = 0.5 * vel.iter().map(|v| v.norm_squared()).sum::<f64>();
    Ok((kinetic, potential_energy(trap, pos)?))
}

pub fn total_energy(trap: &Trap, state: &CrystalState) -> Result<EnergyBreakdown> {
    let (k, p) = energy_scaled(trap, &state.positions, &state.velocities)?;
    let e = trap.units.energy;
    Ok(EnergyBreakdown {
        kinetic: k * e,
        potential: p * e,
        total: (k + p) * e,
    })
}

/// Outcome of a run whose samples went to an observer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    /// Times of the energy checks, s.
    pub energy_times: Vec<f64>,
    /// Total energy at each check, J.
    pub energy_series: Vec<f64>,
    pub final_state: CrystalState,
    pub warnings: Vec<String>,
}

impl RunSummary {
    /// `max |H(t) - H(0)| / |H(0)|`
    pub fn fractional_energy_fluctuation(&self) -> f64 {
        let h0 = self.energy_series[0];
        self.max_energy_deviation() / h0.abs()
    }

    /// `max |H(t) - H(0)| / (H(0) - V0)` with `v0` in J.
    pub fn thermal_energy_fluctuation(&self, v0: f64) -> f64 {
        self.max_energy_deviation() / (self.energy_series[0] - v0).abs()
    }

    pub fn max_energy_deviation(&self) -> f64 {
        let h0 = self.energy_series[0];
        self.energy_series.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
    }
}

struct Rk4 {
    k: [Vec<Vector3<f64>>; 8],
    r: Vec<Vector3<f64>>,
    v: Vec<Vector3<f64>>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![Vector3::zeros(); n]),
            r: vec![Vector3::zeros(); n],
            v: vec![Vector3::zeros(); n],
        }
    }

    fn step(&mut self, trap: &Trap, pos: &mut [Vector3<f64>], vel: &mut [Vector3<f64>], h: f64) -> Result<()> {
        let [k1r, k1v, k2r, k2v, k3r, k3v, k4r, k4v] = &mut self.k;
        let (r, v) = (&mut self.r, &mut self.v);
        k1r.copy_from_slice(vel);
        accelerations_into(trap, pos, vel, k1v)?;
        for j in 0..pos.len() {
            r[j] = pos[j] + k1r[j] * (0.5 * h);
            v[j] = vel[j] + k1v[j] * (0.5 * h);
        }
        k2r.copy_from_slice(v);
        accelerations_into(trap, r, v, k2v)?;
        for j in 0..pos.len() {
            r[j] = pos[j] + k2r[j] * (0.5 * h);
            v[j] = vel[j] + k2v[j] * (0.5 * h);
        }
        k3r.copy_from_slice(v);
        accelerations_into(trap, r, v, k3v)?;
        for j in 0..pos.len() {
            r[j] = pos[j] + k3r[j] * h;
            v[j] = vel[j] + k3v[j] * h;
        }
        k4r.copy_from_slice(v);
        accelerations_into(trap, r, v, k4v)?;
        let c = h / 6.0;
        for j in 0..pos.len() {
            pos[j] += (k1r[j] + (k2r[j] + k3r[j]) * 2.0 + k4r[j]) * c;
            vel[j] += (k1v[j] + (k2v[j] + k3v[j]) * 2.0 + k4v[j]) * c;
        }
        Ok(())
    }
}

fn finite(pos: &[Vector3<f64>], vel: &[Vector3<f64>]) -> bool {
    pos.iter().chain(vel).all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite())
}

/// Advances `state` by `steps` RK4 steps of signed size `dt_scaled`
/// (scaled time units). A negative step integrates backward in time.
pub fn propagate(trap: &Trap, state: &CrystalState, dt_scaled: f64, steps: usize) -> Result<CrystalState> {
    let mut pos = state.positions.clone();
    let mut vel = state.velocities.clone();
    let mut rk = Rk4::new(pos.len());
    for s in 0..steps {
        rk.step(trap, &mut pos, &mut vel, dt_scaled)
            .map_err(|e| blowup_or(e, trap, state.time + dt_scaled * s as f64))?;
        if !finite(&pos, &vel) {
            return Err(Error::NumericalBlowup {
                time: trap.seconds(state.time + dt_scaled * (s + 1) as f64),
            });
        }
    }
    Ok(CrystalState {
        positions: pos,
        velocities: vel,
        time: state.time + dt_scaled * steps as f64,
    })
}

fn blowup_or(e: Error, trap: &Trap, t: f64) -> Error {
    match e {
        Error::CoincidentIons { separation, .. } if !separation.is_finite() => {
            Error::NumericalBlowup { time: trap.seconds(t) }
        }
        other => other,
    }
}

/// Integrates from `initial` and hands every recorded sample to `observe`
/// as `(sample_index, time_s, positions, velocities)` in scaled units.
/// Samples are taken at steps `0, stride, 2 stride, ...` including the last.
pub fn integrate_with<F>(trap: &Trap, initial: &CrystalState, cfg: &IntegratorConfig, mut observe: F) -> Result<RunSummary>
where
    F: FnMut(usize, f64, &[Vector3<f64>], &[Vector3<f64>]),
{
    initial.validate(trap)?;
    cfg.validate(trap)?;
    let h = trap.scaled_time(cfg.dt);
    let steps = cfg.n_steps();
    let mut pos = initial.positions.clone();
    let mut vel = initial.velocities.clone();
    let mut rk = Rk4::new(pos.len());
    let mut energy_times = Vec::with_capacity(steps / cfg.energy_check_stride + 2);
    let mut energy_series = Vec::with_capacity(energy_times.capacity());
    let t0 = trap.seconds(initial.time);
    let time_of = |s: usize| t0 + cfg.dt * s as f64;

    for s in 0..=steps {
        if s % cfg.record_stride == 0 {
            observe(s / cfg.record_stride, time_of(s), &pos, &vel);
        }
        if s % cfg.energy_check_stride == 0 || s == steps {
            let (k, p) = energy_scaled(trap, &pos, &vel).map_err(|e| blowup_or(e, trap, initial.time + h * s as f64))?;
            energy_times.push(time_of(s));
            energy_series.push((k + p) * trap.units.energy);
        }
        if s == steps {
            break;
        }
        rk.step(trap, &mut pos, &mut vel, h)
            .map_err(|e| blowup_or(e, trap, initial.time + h * s as f64))?;
        if !finite(&pos, &vel) {
            return Err(Error::NumericalBlowup { time: time_of(s + 1) });
        }
    }
    Ok(RunSummary {
        steps,
        dt: cfg.dt,
        energy_times,
        energy_series,
        final_state: CrystalState {
            positions: pos,
            velocities: vel,
            time: initial.time + h * steps as f64,
        },
        warnings: cfg.warnings(trap),
    })
}

/// Fully recorded trajectory, SI units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<[f64; 3]>>,
    pub velocities: Vec<Vec<[f64; 3]>>,
    pub energy_times: Vec<f64>,
    pub energy_series: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn sample_interval(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn n_ions(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Positions of every ion along `axis` (0 = x, 1 = y, 2 = z), as
    /// one series per ion.
    pub fn coordinate_series(&self, axis: usize) -> Vec<Vec<f64>> {
        (0..self.n_ions())
            .map(|j| self.positions.iter().map(|p| p[j][axis]).collect())
            .collect()
    }
}

/// Integrates and records every sample in memory.
pub fn integrate(trap: &Trap, initial: &CrystalState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let n = cfg.n_samples();
    let mut times = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let (l, v) = (trap.units.length, trap.units.velocity);
    let summary = integrate_with(trap, initial, cfg, |_, t, p, u| {
        times.push(t);
        positions.push(p.iter().map(|r| [r.x * l, r.y * l, r.z * l]).collect());
        velocities.push(u.iter().map(|r| [r.x * v, r.y * v, r.z * v]).collect());
    })?;
    Ok(Trajectory {
        times,
        positions,
        velocities,
        energy_times: summary.energy_times,
        energy_series: summary.energy_series,
        warnings: summary.warnings,
    })
}

/// In-plane state from the mode expansion at scaled time `t`, as a
/// deviation added to the equilibrium (`z = 0`).
pub fn harmonic_evolve_inplane(
    eq: &EquilibriumConfiguration,
    modes: &InPlaneModes,
    amps: &ModeAmplitudes,
    t: f64,
) -> CrystalState {
    let (dr, v) = reconstruct_inplane(modes, amps, t);
    CrystalState {
        positions: eq
            .positions
            .iter()
            .zip(&dr)
            .map(|(p, d)| Vector3::new(p[0] + d[0], p[1] + d[1], 0.0))
            .collect(),
        velocities: v.iter().map(|u| Vector3::new(u[0], u[1], 0.0)).collect(),
        time: t,
    }
}

/// Axial displacements and velocities from drumhead amplitudes at scaled
/// time `t`.
pub fn harmonic_evolve_axial(modes: &DrumheadModes, amps: &ModeAmplitudes, t: f64) -> (Vec<f64>, Vec<f64>) {
    reconstruct_axial(&modes.frequencies, &modes.eigenvectors, &amps.amplitudes, t)
}
