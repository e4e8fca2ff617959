//! Per-mode metrics: potential/kinetic energy ratio, helicity, thermal
//! displacement, drumhead entropy and support number, and the cold-fluid
//! reference frequencies.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodes::{quad_form, DrumheadModes, InPlaneModes, LinearizedModel};
use crate::physcore::{CharacteristicFrequencies, Trap};

/// Ratio of time-averaged potential to kinetic energy,
/// `<u^r|K|u^r> / (m w^2 <u^r|u^r>)`.
pub fn energy_ratio(model: &LinearizedModel, modes: &InPlaneModes, n: usize) -> f64 {
    let ur = modes.u_r(n);
    let w = modes.frequencies[n];
    quad_form(&ur, &model.k_perp, &ur).re / (w * w * ur.norm_squared())
}

/// Same ratio from the velocity block, `<u^r|K|u^r> / (m <u^v|u^v>)`.
pub fn energy_ratio_from_velocity(model: &LinearizedModel, modes: &InPlaneModes, n: usize) -> f64 {
    let ur = modes.u_r(n);
    quad_form(&ur, &model.k_perp, &ur).re / modes.u_v(n).norm_squared()
}

/// Normalized rotation sense of a mode: +1 counterclockwise, -1 clockwise.
///
/// Per ion, `-iL / w_c'` acts as the Pauli `y` matrix on `(x, y)`, whose
/// expectation value is `2 Im(conj(u_x) u_y)`.
pub fn helicity(modes: &InPlaneModes, n: usize) -> f64 {
    helicity_of(modes.u_r(n).as_slice())
}

pub fn helicity_of(ur: &[Complex64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for pair in ur.chunks(2) {
        num += 2.0 * (pair[0].conj() * pair[1]).im;
        den += pair[0].norm_sqr() + pair[1].norm_sqr();
    }
    num / den
}

/// Linear-in-frequency estimate of `R_n` across the cyclotron branch,
/// `1 - w_c'/w_+ + (w_c'/w_+^2)(w_n - w_+)`.
pub fn cyclotron_ratio_approx(omega_n: f64, omega_c_prime: f64, omega_plus: f64) -> f64 {
    let r = omega_c_prime / omega_plus;
    1.0 - r + r / omega_plus * (omega_n - omega_plus)
}

/// Mean-squared thermal displacement of a mode,
/// `2 / (1 + R) * k_B T / (m w^2)`. Arguments in consistent units.
pub fn msd(ratio: f64, omega: f64, thermal_energy: f64, mass: f64) -> f64 {
    2.0 / (1.0 + ratio) * thermal_energy / (mass * omega * omega)
}

/// [`msd`] of in-plane mode `n` at `kelvin`, in m^2.
pub fn mode_msd(trap: &Trap, model: &LinearizedModel, modes: &InPlaneModes, n: usize, kelvin: f64) -> f64 {
    let ratio = energy_ratio(model, modes, n);
    let scaled = msd(ratio, modes.frequencies[n], trap.thermal_energy(kelvin), 1.0);
    scaled * trap.units.length * trap.units.length
}

/// Shannon entropy of the squared amplitudes of a normalized vector, with
/// `0 log 0 = 0`.
pub fn entropy_with_base(amplitudes: impl IntoIterator<Item = f64>, base: f64) -> f64 {
    let ln_base = base.ln();
    amplitudes
        .into_iter()
        .map(|b| b * b)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln() / ln_base)
        .sum()
}

/// Per-mode entropy (bits) and support number `2^H` of the drumhead modes.
pub fn mode_entropy_support(modes: &DrumheadModes) -> (Vec<f64>, Vec<f64>) {
    let n = modes.len();
    let mut entropy = Vec::with_capacity(n);
    let mut support = Vec::with_capacity(n);
    for k in 0..n {
        let h = entropy_with_base(modes.eigenvectors.column(k).iter().copied(), 2.0);
        entropy.push(h);
        support.push(h.exp2());
    }
    (entropy, support)
}

/// Tilt and "potato chip" angular frequencies of the cold-fluid model,
/// `sqrt(w_par^2 - w_perp^2)` and `sqrt(w_par^2 - 7 w_perp^2 / 4)`.
pub fn cold_fluid_reference(freqs: &CharacteristicFrequencies) -> Result<(f64, f64)> {
    let par2 = freqs.omega_par * freqs.omega_par;
    let perp2 = freqs.omega_perp * freqs.omega_perp;
    let chip2 = par2 - 1.75 * perp2;
    if chip2 < 0.0 {
        return Err(Error::ImaginaryFrequency(format!(
            "w_par^2 - 7 w_perp^2 / 4 = {chip2:e} < 0"
        )));
    }
    Ok(((par2 - perp2).sqrt(), chip2.sqrt()))
}

/// All per-mode metrics of a crystal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub r_n: Vec<f64>,
    pub chi_n: Vec<f64>,
    /// m^2, at `reference_temperature`.
    pub msd_n: Vec<f64>,
    pub reference_temperature: f64,
    /// bits
    pub entropy_n: Vec<f64>,
    pub support_n: Vec<f64>,
}

pub fn mode_metrics(
    trap: &Trap,
    model: &LinearizedModel,
    inplane: &InPlaneModes,
    drumhead: &DrumheadModes,
    reference_temperature: f64,
) -> ModeMetrics {
    let r_n: Vec<f64> = (0..inplane.len()).map(|n| energy_ratio(model, inplane, n)).collect();
    let chi_n = (0..inplane.len()).map(|n| helicity(inplane, n)).collect();
    let msd_n = (0..inplane.len())
        .map(|n| mode_msd(trap, model, inplane, n, reference_temperature))
        .collect();
    let (entropy_n, support_n) = mode_entropy_support(drumhead);
    ModeMetrics {
        r_n,
        chi_n,
        msd_n,
        reference_temperature,
        entropy_n,
        support_n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodes::{build_at, inplane_modes};
    use crate::physcore::TrapConfig;
    use nalgebra::DMatrix;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn single_ion_ratios() {
        let mut cfg = TrapConfig::nist(1);
        cfg.vw = 0.0;
        let trap = Trap::new(cfg).unwrap();
        let model = build_at(&trap, &[[0.0, 0.0]]).unwrap();
        let modes = inplane_modes(&model).unwrap();
        let (wm, wp) = (modes.frequencies[0], modes.frequencies[1]);
        assert!((energy_ratio(&model, &modes, 1) - wm / wp).abs() < 1e-10 * wm / wp);
        assert!((energy_ratio(&model, &modes, 0) - wp / wm).abs() < 1e-10 * wp / wm);
        assert!((helicity(&modes, 0) - 1.0).abs() < 1e-12);
        assert!((helicity(&modes, 1) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sho_limit_has_unit_ratio() {
        let trap = Trap::nist(1).unwrap();
        let model = build_at(&trap, &[[0.0, 0.0]]).unwrap().without_lorentz();
        let modes = inplane_modes(&model).unwrap();
        for n in 0..modes.len() {
            assert!((energy_ratio(&model, &modes, n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_counterclockwise_vector() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = [Complex64::new(s, 0.0), Complex64::new(0.0, s)];
        assert!((helicity_of(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cyclotron_approximation_limits() {
        assert!((cyclotron_ratio_approx(5.0, 3.0, 5.0) - (1.0 - 0.6)).abs() < 1e-15);
        assert!((cyclotron_ratio_approx(5.1, 1e-12, 5.0) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn msd_reference_values() {
        // SHO limit
        assert!((msd(1.0, 2.0, 3.0, 1.5) - 3.0 / (1.5 * 4.0)).abs() < 1e-15);
        assert_eq!(msd(5.0, 2.0, 0.0, 1.0), 0.0);
        // representative ExB (100 kHz, R = 200) against cyclotron (7.2 MHz, R ~ 0)
        let m = msd(200.0, TAU * 100e3, 1.0, 1.0);
        let c = msd(0.0, TAU * 7.2e6, 1.0, 1.0);
        let ratio = m / c;
        assert!((ratio - 25.8).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn entropy_extremes() {
        let n = 10;
        let uniform = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
        let modes = DrumheadModes {
            frequencies: vec![1.0],
            eigenvectors: uniform,
        };
        let (h, s) = mode_entropy_support(&modes);
        assert!((h[0] - (n as f64).log2()).abs() < 1e-12);
        assert!((s[0] - n as f64).abs() < 1e-10);

        let mut local = DMatrix::zeros(n, 1);
        local[(3, 0)] = 1.0;
        let (h, s) = mode_entropy_support(&DrumheadModes {
            frequencies: vec![1.0],
            eigenvectors: local,
        });
        assert_eq!(h[0], 0.0);
        assert_eq!(s[0], 1.0);

        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert!((entropy_with_base([half, half], 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn support_is_base_independent() {
        let v = [0.1f64, 0.7, 0.5, 0.3, 0.38729833462074165];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let s2 = entropy_with_base(v.iter().copied(), 2.0).exp2();
        let se = entropy_with_base(v.iter().copied(), std::f64::consts::E).exp();
        assert!((s2 - se).abs() < 1e-12);
    }

    #[test]
    fn cold_fluid_values() {
        let f = Trap::nist(1).unwrap().freqs;
        let (tilt, chip) = cold_fluid_reference(&f).unwrap();
        let perp_khz = f.omega_perp / TAU / 1e3;
        let expected = (1590.0f64.powi(2) - perp_khz * perp_khz).sqrt();
        assert!((tilt / TAU / 1e3 - expected).abs() < 1e-6);
        assert!((tilt / TAU / 1e6 - 1.567).abs() < 2e-3);
        assert!(chip < tilt);

        let mut flat = f;
        flat.omega_perp = 0.0;
        let (t, c) = cold_fluid_reference(&flat).unwrap();
        assert_eq!((t, c), (flat.omega_par, flat.omega_par));

        let mut edge = f;
        edge.omega_perp = edge.omega_par * (4.0f64 / 7.0).sqrt();
        let (_, c) = cold_fluid_reference(&edge).unwrap();
        assert!(c.abs() < 1e-3 * edge.omega_par);

        edge.omega_perp *= 1.01;
        assert!(matches!(cold_fluid_reference(&edge), Err(Error::ImaginaryFrequency(_))));
    }
}
