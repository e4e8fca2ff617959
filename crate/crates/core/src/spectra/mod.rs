//! Power spectral density of ion motion and the simulated optical dipole
//! force (ODF) spin-echo spectrum.
//!
//! The transform of a coordinate over a run of length `T` is
//!
//! ```text
//! z~(w) = T^(-1/2) * integral_0^T z(t) exp(-i w t) dt
//! ```
//!
//! evaluated as a rectangular-window DFT on the recorded grid. The one-sided
//! PSD is `sum_j |z~_j(w)|^2 + |z~_j(-w)|^2`, with the zero and Nyquist bins
//! counted once, so that `sum_k P_k / T` equals the time average of
//! `sum_j z_j^2`.

mod odf;
mod peaks;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use odf::{
    bright_fractions_from_phases, bright_probability, odf_bright_fraction, odf_bright_fractions, odf_phase, odf_phases,
    odf_spectrum, piecewise_trapezoid, OdfConfig,
};
pub use peaks::{find_peaks, Peak};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
    /// `x` and `y` together; the PSD is `P_x + P_y`.
    Inplane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Psd,
    Odf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    /// PSD in m^2 s (squared length per unit frequency), or bright
    /// fraction.
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub n_realizations: usize,
    pub axis: Axis,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }

    /// Mean of the values with frequency in `[lo, hi]` Hz.
    pub fn band_mean(&self, lo: f64, hi: f64) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            if *f >= lo && *f <= hi {
                s += v;
                n += 1;
            }
        }
        s / n as f64
    }

    /// Values in dB, `10 log10`.
    pub fn db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 10.0 * v.log10()).collect()
    }
}

/// Uniformly sampled coordinate series, one per ion (two per ion for
/// [`Axis::Inplane`]), starting at `t = 0`. SI units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub dt: f64,
    pub series: Vec<Vec<f64>>,
}

impl SeriesRecord {
    pub fn n_samples(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    /// Span covered by the samples, `(n - 1) dt`.
    pub fn duration(&self) -> f64 {
        self.dt * self.n_samples().saturating_sub(1) as f64
    }

    pub fn from_trajectory(traj: &Trajectory, axis: Axis) -> Self {
        let series = match axis {
            Axis::X => traj.coordinate_series(0),
            Axis::Y => traj.coordinate_series(1),
            Axis::Z => traj.coordinate_series(2),
            Axis::Inplane => {
                let mut s = traj.coordinate_series(0);
                s.extend(traj.coordinate_series(1));
                s
            }
        };
        Self {
            dt: traj.sample_interval(),
            series,
        }
    }
}

/// Accumulates one-sided PSDs over realizations that share a grid.
///
/// Each series must hold `n_samples` points spanning `[0, T)`, `T = n dt`.
pub struct PsdAccumulator {
    n_samples: usize,
    dt: f64,
    sum: Vec<f64>,
    realizations: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl PsdAccumulator {
    pub fn new(n_samples: usize, dt: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_samples);
        Self {
            n_samples,
            dt,
            sum: vec![0.0; n_samples / 2 + 1],
            realizations: 0,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); n_samples],
        }
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let df = 1.0 / self.duration();
        (0..self.sum.len()).map(|k| k as f64 * df).collect()
    }

    /// One-sided PSD of a set of series, without accumulating.
    pub fn psd_of(&mut self, series: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.n_samples;
        let mut out = vec![0.0; n / 2 + 1];
        let norm = self.dt * self.dt / self.duration();
        for s in series {
            if s.len() < n {
                return Err(Error::GridMismatch(format!("series has {} samples, grid needs {n}", s.len())));
            }
            for (b, &x) in self.buf.iter_mut().zip(&s[..n]) {
                *b = Complex64::new(x, 0.0);
            }
            self.fft.process(&mut self.buf);
            out[0] += self.buf[0].norm_sqr() * norm;
            for k in 1..out.len() {
                let neg = n - k;
                if neg == k {
                    out[k] += self.buf[k].norm_sqr() * norm;
                } else {
                    out[k] += (self.buf[k].norm_sqr() + self.buf[neg].norm_sqr()) * norm;
                }
            }
        }
        Ok(out)
    }

    /// Adds one realization. The series are truncated to `n_samples`.
    pub fn add(&mut self, series: &[Vec<f64>]) -> Result<()> {
        let p = self.psd_of(series)?;
        self.add_psd(&p)
    }

    /// Adds a precomputed one-sided PSD on this grid.
    pub fn add_psd(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.sum.len() {
            return Err(Error::GridMismatch(format!("{} bins, expected {}", p.len(), self.sum.len())));
        }
        for (s, v) in self.sum.iter_mut().zip(p) {
            *s += v;
        }
        self.realizations += 1;
        Ok(())
    }

    pub fn spectrum(&self, axis: Axis) -> Spectrum {
        let r = self.realizations.max(1) as f64;
        Spectrum {
            frequencies: self.frequencies(),
            values: self.sum.iter().map(|v| v / r).collect(),
            kind: SpectrumKind::Psd,
            n_realizations: self.realizations,
            axis,
        }
    }
}

/// Realization-averaged PSD. The final sample of each record (at `t = T`)
/// is dropped so the transform covers `[0, T)`.
pub fn psd(records: &[SeriesRecord], axis: Axis) -> Result<Spectrum> {
    let first = records
        .first()
        .ok_or_else(|| Error::GridMismatch("no trajectories".into()))?;
    let n = first.n_samples().saturating_sub(1);
    if n < 2 {
        return Err(Error::GridMismatch("need at least three samples".into()));
    }
    let mut acc = PsdAccumulator::new(n, first.dt);
    for r in records {
        if r.n_samples() != first.n_samples() || (r.dt - first.dt).abs() > 1e-12 * first.dt {
            return Err(Error::GridMismatch(format!(
                "grid ({}, {:e}) differs from ({}, {:e})",
                r.n_samples(),
                r.dt,
                first.n_samples(),
                first.dt
            )));
        }
        if r.series.iter().any(|s| s.len() != r.n_samples()) {
            return Err(Error::GridMismatch("ragged series".into()));
        }
        acc.add(&r.series)?;
    }
    Ok(acc.spectrum(axis))
}
