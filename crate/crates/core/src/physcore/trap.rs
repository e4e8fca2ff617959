use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::constants::{PhysicalConstants, BE9_ION_MASS, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};

/// Physical parameters of the trap and the ion species, SI units.
///
/// `v0` and `vw` follow the convention in which the axial and wall
/// frequencies are `sqrt(2 e V / m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub ion_mass: f64,
    pub ion_charge: f64,
    pub b_field: f64,
    pub v0: f64,
    pub vw: f64,
    pub omega_r: f64,
    pub n_ions: usize,
}

impl TrapConfig {
    /// Builds a configuration from the characteristic angular frequencies,
    /// back-deriving the field and the two potential amplitudes.
    pub fn from_frequencies(
        ion_mass: f64,
        ion_charge: f64,
        omega_c: f64,
        omega_r: f64,
        omega_par: f64,
        omega_w: f64,
        n_ions: usize,
    ) -> Self {
        Self {
            ion_mass,
            ion_charge,
            b_field: ion_mass * omega_c / ion_charge,
            v0: ion_mass * omega_par * omega_par / (2.0 * ion_charge),
            vw: ion_mass * omega_w * omega_w / (2.0 * ion_charge),
            omega_r,
            n_ions,
        }
    }

    /// Operating point of the NIST beryllium trap: cyclotron 7.60 MHz,
    /// rotation 180 kHz, axial 1.59 MHz, wall 68 kHz.
    pub fn nist(n_ions: usize) -> Self {
        Self::from_frequencies(
            BE9_ION_MASS,
            ELEMENTARY_CHARGE,
            TAU * 7.60e6,
            TAU * 180.0e3,
            TAU * 1.59e6,
            TAU * 68.0e3,
            n_ions,
        )
    }

    pub fn with_n_ions(mut self, n_ions: usize) -> Self {
        self.n_ions = n_ions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.ion_mass, self.ion_charge, self.b_field, self.v0, self.vw, self.omega_r]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("trap parameters must be finite".into()));
        }
        if self.ion_mass <= 0.0 {
            return Err(Error::InvalidConfig("ion_mass must be > 0".into()));
        }
        if self.ion_charge <= 0.0 {
            return Err(Error::InvalidConfig("ion_charge must be > 0".into()));
        }
        if self.b_field <= 0.0 {
            return Err(Error::InvalidConfig("b_field must be > 0".into()));
        }
        if self.v0 <= 0.0 {
            return Err(Error::InvalidConfig("v0 must be > 0".into()));
        }
        if self.vw < 0.0 {
            return Err(Error::InvalidConfig("vw must be >= 0".into()));
        }
        if self.omega_r <= 0.0 {
            return Err(Error::InvalidConfig("omega_r must be > 0".into()));
        }
        if self.n_ions == 0 {
            return Err(Error::InvalidConfig("n_ions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Angular frequencies (rad/s) governing the rotating-frame dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFrequencies {
    pub omega_c: f64,
    pub omega_c_prime: f64,
    pub omega_par: f64,
    pub omega_perp: f64,
    pub omega_w: f64,
}

/// Computes the characteristic frequencies and rejects traps without
/// planar confinement along both in-plane axes.
pub fn derive_frequencies(cfg: &TrapConfig) -> Result<CharacteristicFrequencies> {
    cfg.validate()?;
    let qm = cfg.ion_charge / cfg.ion_mass;
    let omega_c = qm * cfg.b_field;
    let omega_c_prime = omega_c - 2.0 * cfg.omega_r;
    let omega_par = (2.0 * qm * cfg.v0).sqrt();
    let omega_w = (2.0 * qm * cfg.vw).sqrt();
    let perp_sq = omega_c * cfg.omega_r - cfg.omega_r * cfg.omega_r - 0.5 * omega_par * omega_par;
    if perp_sq <= 0.0 {
        return Err(Error::UnstableTrap(format!(
            "omega_perp^2 = {perp_sq:e} rad^2/s^2 is not positive"
        )));
    }
    if perp_sq <= omega_w * omega_w {
        return Err(Error::UnstableTrap(format!(
            "omega_perp^2 = {perp_sq:e} does not exceed omega_w^2 = {:e}",
            omega_w * omega_w
        )));
    }
    Ok(CharacteristicFrequencies {
        omega_c,
        omega_c_prime,
        omega_par,
        omega_perp: perp_sq.sqrt(),
        omega_w,
    })
}

impl CharacteristicFrequencies {
    /// Single-ion cyclotron (`+`) and magnetron (`-`) frequencies without
    /// the wall correction.
    pub fn single_ion_pair(&self) -> (f64, f64) {
        let root = (self.omega_c_prime.powi(2) + 4.0 * self.omega_perp.powi(2)).sqrt();
        (
            0.5 * (root + self.omega_c_prime),
            0.5 * (root - self.omega_c_prime),
        )
    }
}

/// Scales used for the dimensionless internal representation.
///
/// Time is measured in `1/omega_par`, length in
/// `l0 = (k_e e^2 / (m omega_par^2))^(1/3)`, energy in `m omega_par^2 l0^2`.
/// With these choices the ion mass and the Coulomb prefactor are both 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub time: f64,
    pub length: f64,
    pub energy: f64,
    pub velocity: f64,
    pub omega: f64,
    pub mass: f64,
}

impl Units {
    pub fn new(mass: f64, charge: f64, omega_par: f64, k_e: f64) -> Self {
        let length = (k_e * charge * charge / (mass * omega_par * omega_par)).cbrt();
        Self {
            time: 1.0 / omega_par,
            length,
            energy: mass * omega_par * omega_par * length * length,
            velocity: length * omega_par,
            omega: omega_par,
            mass,
        }
    }
}

/// Default minimum ion separation in metres before a Coulomb evaluation
/// is reported as coincident.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-12;

/// A validated trap together with its derived frequencies, unit system and
/// the dimensionless coefficients of the rotating-frame equations of motion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trap {
    pub config: TrapConfig,
    pub freqs: CharacteristicFrequencies,
    pub units: Units,
    pub constants: PhysicalConstants,
    /// `(omega_perp^2 + omega_w^2) / omega_par^2`
    pub stiffness_x: f64,
    /// `(omega_perp^2 - omega_w^2) / omega_par^2`
    pub stiffness_y: f64,
    /// `omega_c' / omega_par`
    pub cyclotron: f64,
    /// Minimum separation, scaled units.
    pub min_separation: f64,
}

impl Trap {
    pub fn new(config: TrapConfig) -> Result<Self> {
        Self::with_constants(config, PhysicalConstants::CODATA_2018)
    }

    pub fn with_constants(config: TrapConfig, constants: PhysicalConstants) -> Result<Self> {
        let freqs = derive_frequencies(&config)?;
        let units = Units::new(
            config.ion_mass,
            config.ion_charge,
            freqs.omega_par,
            constants.coulomb_constant,
        );
        let par2 = freqs.omega_par * freqs.omega_par;
        Ok(Self {
            config,
            freqs,
            units,
            constants,
            stiffness_x: (freqs.omega_perp.powi(2) + freqs.omega_w.powi(2)) / par2,
            stiffness_y: (freqs.omega_perp.powi(2) - freqs.omega_w.powi(2)) / par2,
            cyclotron: freqs.omega_c_prime / freqs.omega_par,
            min_separation: DEFAULT_MIN_SEPARATION / units.length,
        })
    }

    pub fn nist(n_ions: usize) -> Result<Self> {
        Self::new(TrapConfig::nist(n_ions))
    }

    /// Sets the coincidence guard, in metres.
    pub fn with_min_separation(mut self, metres: f64) -> Self {
        self.min_separation = metres / self.units.length;
        self
    }

    pub fn n_ions(&self) -> usize {
        self.config.n_ions
    }

    /// `k_B T` in scaled energy units.
    pub fn thermal_energy(&self, kelvin: f64) -> f64 {
        self.constants.boltzmann * kelvin / self.units.energy
    }

    /// Scaled angular frequency to SI (rad/s).
    pub fn omega_si(&self, scaled: f64) -> f64 {
        scaled * self.units.omega
    }

    /// Scaled angular frequency to Hz.
    pub fn hertz(&self, scaled: f64) -> f64 {
        scaled * self.units.omega / TAU
    }

    pub fn seconds(&self, scaled: f64) -> f64 {
        scaled * self.units.time
    }

    pub fn scaled_time(&self, seconds: f64) -> f64 {
        seconds / self.units.time
    }

    pub fn scaled_omega(&self, rad_per_s: f64) -> f64 {
        rad_per_s / self.units.omega
    }
}
