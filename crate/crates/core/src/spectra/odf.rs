use serde::{Deserialize, Serialize};

use super::{Axis, SeriesRecord, Spectrum, SpectrumKind};
use crate::error::{Error, Result};
use crate::physcore::constants::HBAR;

/// Spin-echo ODF sequence: force on for `tau`, off for `t_pi`, on with
/// reversed sign for `tau`. SI units; `mu_r` in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdfConfig {
    /// Force magnitude, N.
    pub f0: f64,
    /// Difference frequencies to evaluate, rad/s, increasing.
    pub mu_r: Vec<f64>,
    pub tau: f64,
    #[serde(default)]
    pub t_pi: f64,
    /// Off-resonant scattering rate, 1/s.
    pub gamma: f64,
}

impl OdfConfig {
    pub fn total_time(&self) -> f64 {
        2.0 * self.tau + self.t_pi
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.f0 >= 0.0 && self.tau > 0.0 && self.t_pi >= 0.0 && self.gamma >= 0.0;
        if !ok {
            return Err(Error::InvalidConfig("ODF parameters must be non-negative, tau > 0".into()));
        }
        if self.mu_r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("ODF mu_r grid must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Bright fraction without phase accumulation, `(1 - exp(-2 Gamma tau)) / 2`.
    pub fn baseline(&self) -> f64 {
        0.5 * (1.0 - (-2.0 * self.gamma * self.tau).exp())
    }

    fn check_duration(&self, record: &SeriesRecord) -> Result<()> {
        let expected = self.total_time();
        let actual = record.duration();
        if (actual - expected).abs() > 1e-9 * expected {
            return Err(Error::DurationMismatch { expected, actual });
        }
        Ok(())
    }
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of samples
/// `f_i` at `t_i = i dt`.
pub fn piecewise_trapezoid(f: &[f64], dt: f64, a: f64, b: f64) -> f64 {
    if b <= a || f.is_empty() {
        return 0.0;
    }
    let last = f.len() - 1;
    let at = |t: f64| -> f64 {
        let x = (t / dt).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last.saturating_sub(1));
        let w = x - i as f64;
        if last == 0 {
            f[0]
        } else {
            f[i] * (1.0 - w) + f[i + 1] * w
        }
    };
    let i0 = ((a / dt) - 1e-9).ceil().max(0.0) as usize;
    let i1 = (((b / dt) + 1e-9).floor() as usize).min(last);
    let (fa, fb) = (at(a), at(b));
    if i0 > i1 {
        return 0.5 * (b - a) * (fa + fb);
    }
    let mut s = 0.5 * (i0 as f64 * dt - a) * (fa + f[i0]);
    for i in i0..i1 {
        s += 0.5 * dt * (f[i] + f[i + 1]);
    }
    s + 0.5 * (b - i1 as f64 * dt) * (f[i1] + fb)
}

/// Accumulated spin phase `A = (2 F0 / hbar) integral g(t) z(t) cos(mu t) dt`
/// for one ion's axial series.
pub fn odf_phase(z: &[f64], dt: f64, odf: &OdfConfig, mu: f64) -> f64 {
    let h: Vec<f64> = z.iter().enumerate().map(|(i, z)| z * (mu * i as f64 * dt).cos()).collect();
    phase_from_integrand(&h, dt, odf)
}

fn phase_from_integrand(h: &[f64], dt: f64, odf: &OdfConfig) -> f64 {
    let first = piecewise_trapezoid(h, dt, 0.0, odf.tau);
    let second = piecewise_trapezoid(h, dt, odf.tau + odf.t_pi, odf.total_time());
    2.0 * odf.f0 / HBAR * (first - second)
}

/// Per-ion bright probability `(1 - exp(-2 Gamma tau) cos A_j) / 2`.
pub fn bright_probability(phase: f64, odf: &OdfConfig) -> f64 {
    0.5 * (1.0 - (-2.0 * odf.gamma * odf.tau).exp() * phase.cos())
}

/// Accumulated phase of every ion at every `mu_r` of the config, indexed
/// `[mu][ion]`.
pub fn odf_phases(record: &SeriesRecord, odf: &OdfConfig) -> Result<Vec<Vec<f64>>> {
    odf.validate()?;
    odf.check_duration(record)?;
    let n = record.n_samples();
    let mut cosines = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut out = Vec::with_capacity(odf.mu_r.len());
    for &mu in &odf.mu_r {
        for (i, c) in cosines.iter_mut().enumerate() {
            *c = (mu * i as f64 * record.dt).cos();
        }
        let mut row = Vec::with_capacity(record.series.len());
        for z in &record.series {
            for ((hi, zi), ci) in h.iter_mut().zip(z).zip(&cosines) {
                *hi = zi * ci;
            }
            row.push(phase_from_integrand(&h, record.dt, odf));
        }
        out.push(row);
    }
    Ok(out)
}

/// Ion-averaged bright fraction for each row of phases, after scaling
/// every phase by `scale`.
pub fn bright_fractions_from_phases(phases: &[Vec<f64>], scale: f64, odf: &OdfConfig) -> Vec<f64> {
    phases
        .iter()
        .map(|row| row.iter().map(|a| bright_probability(scale * a, odf)).sum::<f64>() / row.len().max(1) as f64)
        .collect()
}

/// Ion-averaged bright fraction of one realization at every `mu_r` of
/// the config.
pub fn odf_bright_fractions(record: &SeriesRecord, odf: &OdfConfig) -> Result<Vec<f64>> {
    Ok(bright_fractions_from_phases(&odf_phases(record, odf)?, 1.0, odf))
}

/// Bright fraction at a single `mu`, averaged over ions and realizations.
pub fn odf_bright_fraction(records: &[SeriesRecord], odf: &OdfConfig, mu: f64) -> Result<f64> {
    let single = OdfConfig {
        mu_r: vec![mu],
        ..odf.clone()
    };
    let mut sum = 0.0;
    for r in records {
        sum += odf_bright_fractions(r, &single)?[0];
    }
    Ok(sum / records.len() as f64)
}

/// ODF spectrum over the config's `mu_r` grid. `factory(i)` produces the
/// axial record of realization `i`; records are consumed one at a time.
pub fn odf_spectrum<F>(factory: F, odf: &OdfConfig, n_realizations: usize) -> Result<Spectrum>
where
    F: Fn(usize) -> Result<SeriesRecord> + Sync,
{
    odf.validate()?;
    let one = |i: usize| -> Result<Vec<f64>> { odf_bright_fractions(&factory(i)?, odf) };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..n_realizations).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Vec<f64>>> = (0..n_realizations).map(one).collect();
    let mut sum = vec![0.0; odf.mu_r.len()];
    for p in parts {
        for (s, v) in sum.iter_mut().zip(p?) {
            *s += v;
        }
    }
    let r = n_realizations.max(1) as f64;
    Ok(Spectrum {
        frequencies: odf.mu_r.iter().map(|m| m / std::f64::consts::TAU).collect(),
        values: sum.into_iter().map(|s| s / r).collect(),
        kind: SpectrumKind::Odf,
        n_realizations,
        axis: Axis::Z,
    })
}
