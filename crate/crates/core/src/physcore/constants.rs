//! CODATA 2018 values in SI units.

/// Coulomb constant 1/(4 pi eps0), N m^2 / C^2.
pub const COULOMB_CONSTANT: f64 = 8.987_551_792_3e9;
/// Boltzmann constant, J / K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Mass of a singly ionized beryllium-9 ion, kg.
pub const BE9_ION_MASS: f64 = 9.012_183_1 * ATOMIC_MASS_UNIT - ELECTRON_MASS;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalConstants {
    pub coulomb_constant: f64,
    pub boltzmann: f64,
    pub hbar: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: Self = Self {
        coulomb_constant: COULOMB_CONSTANT,
        boltzmann: BOLTZMANN,
        hbar: HBAR,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}
