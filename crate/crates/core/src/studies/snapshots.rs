use serde::{Deserialize, Serialize};

use super::ensemble::{par_map, stream_index, Crystal};
use super::stats::{power_law_fit, spearman, PowerLawFit};
use super::{Check, StudySpec};
use crate::equilibrium::EquilibriumConfiguration;
use crate::error::Result;
use crate::io::Table;
use crate::linmodes::drumhead_frequencies_at;
use crate::modemetrics::mode_entropy_support;
use crate::physcore::{Trap, TrapConfig};
use crate::rng::substream;
use crate::thermal::{mh_sample_with_rng, SamplerConfig};

/// Per-mode statistics of the sorted drumhead frequencies over a snapshot
/// ensemble. Modes are ordered by descending frequency, the c.m. first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyStatistics {
    pub temperature: f64,
    pub n_snapshots: usize,
    pub acceptance_rate: f64,
    /// J
    pub mean_delta_phi_per_ion: f64,
    pub mean_hz: Vec<f64>,
    /// Population standard deviation, Hz.
    pub std_hz: Vec<f64>,
}

impl FrequencyStatistics {
    /// Number of leading modes whose `mean +- 2 std` intervals are disjoint
    /// from the next mode down.
    pub fn isolated_modes(&self) -> usize {
        let n = self.mean_hz.len();
        (0..n.saturating_sub(1))
            .take_while(|&k| {
                self.mean_hz[k] - 2.0 * self.std_hz[k] > self.mean_hz[k + 1] + 2.0 * self.std_hz[k + 1]
            })
            .count()
    }
}

/// Draws an MH snapshot ensemble at `t_perp` and diagonalizes the axial
/// stiffness of each snapshot. Returns the statistics and every sorted
/// spectrum (Hz).
pub fn snapshot_frequencies(
    trap: &Trap,
    eq: &EquilibriumConfiguration,
    sampler: &SamplerConfig,
    t_perp: f64,
    snapshots: usize,
    seed: u64,
    stream: u64,
) -> Result<(FrequencyStatistics, Vec<Vec<f64>>)> {
    let chain = SamplerConfig {
        t_perp,
        mh_scans: snapshots * sampler.snapshot_stride,
        ..sampler.clone()
    };
    let mut rng = substream(seed, stream);
    let ens = mh_sample_with_rng(trap, eq, &chain, &mut rng)?;
    let spectra: Vec<Vec<f64>> = par_map(ens.snapshots.len(), |s| {
        let w = drumhead_frequencies_at(trap, &ens.snapshots[s])?;
        Ok(w.iter().map(|w| trap.hertz(*w)).collect())
    })?;
    let n = trap.n_ions();
    let m = spectra.len() as f64;
    let mut mean_hz = vec![0.0; n];
    for s in &spectra {
        for (a, v) in mean_hz.iter_mut().zip(s) {
            *a += v / m;
        }
    }
    let mut std_hz = vec![0.0; n];
    for s in &spectra {
        for ((a, v), mu) in std_hz.iter_mut().zip(s).zip(&mean_hz) {
            *a += (v - mu) * (v - mu) / m;
        }
    }
    std_hz.iter_mut().for_each(|v| *v = v.sqrt());
    let stats = FrequencyStatistics {
        temperature: t_perp,
        n_snapshots: spectra.len(),
        acceptance_rate: ens.acceptance_rate,
        mean_delta_phi_per_ion: ens.mean_delta_phi_per_ion,
        mean_hz,
        std_hz,
    };
    Ok((stats, spectra))
}

fn milli(t: f64) -> String {
    format!("{}mK", t * 1e3)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotHistogramResult {
    pub reference_hz: Vec<f64>,
    pub bin_hz: f64,
    /// Lower edge of the first bin, Hz.
    pub first_edge_hz: f64,
    /// `[temperature][bin]`
    pub counts: Vec<Vec<u64>>,
    pub statistics: Vec<FrequencyStatistics>,
    #[serde(skip)]
    equilibrium: Vec<[f64; 2]>,
}

impl SnapshotHistogramResult {
    pub fn bin_center(&self, k: usize) -> f64 {
        self.first_edge_hz + (k as f64 + 0.5) * self.bin_hz
    }

    /// Fraction of counts at temperature index `t` lying within one bin of
    /// a reference frequency.
    pub fn fraction_near_reference(&self, t: usize) -> f64 {
        let total: u64 = self.counts[t].iter().sum();
        let near: u64 = self.counts[t]
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let c = self.bin_center(*k);
                self.reference_hz.iter().any(|f| (f - c).abs() <= 1.5 * self.bin_hz)
            })
            .map(|(_, c)| c)
            .sum();
        near as f64 / total.max(1) as f64
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for (t, s) in self.statistics.iter().enumerate() {
            out.push(Check::new(
                format!("cm_std_hz_{}", milli(s.temperature)),
                s.std_hz[0],
                "< 1 Hz",
                s.std_hz[0] < 1.0,
            ));
            if s.temperature == 0.0 {
                let f = self.fraction_near_reference(t);
                out.push(Check::new("zero_temperature_counts_at_reference", f, "== 1", f == 1.0));
            }
        }
        out
    }

    pub fn statistics_summary(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .statistics
            .iter()
            .map(|s| {
                serde_json::json!({
                    "t_perp_k": s.temperature,
                    "n_snapshots": s.n_snapshots,
                    "acceptance_rate": s.acceptance_rate,
                    "mean_delta_phi_per_ion_j": s.mean_delta_phi_per_ion,
                    "cm_std_hz": s.std_hz[0],
                    "isolated_modes": s.isolated_modes(),
                })
            })
            .collect();
        serde_json::json!({ "bin_hz": self.bin_hz, "temperatures": rows })
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut cols = vec!["bin_center_hz".to_string()];
        cols.extend(self.statistics.iter().map(|s| format!("count_{}", milli(s.temperature))));
        let mut hist = Table::with_columns("histogram", cols);
        for k in 0..self.counts.first().map_or(0, Vec::len) {
            let mut row = vec![self.bin_center(k)];
            row.extend(self.counts.iter().map(|c| c[k] as f64));
            hist.push(row);
        }
        let mut reference = Table::new("reference_frequencies", &["mode", "frequency_hz"]);
        for (k, f) in self.reference_hz.iter().enumerate() {
            reference.push(vec![k as f64 + 1.0, *f]);
        }
        let mut stats = Table::new("mode_statistics", &["t_perp_k", "mode", "mean_hz", "std_hz"]);
        for s in &self.statistics {
            for k in 0..s.mean_hz.len() {
                stats.push(vec![s.temperature, k as f64 + 1.0, s.mean_hz[k], s.std_hz[k]]);
            }
        }
        vec![hist, reference, stats, equilibrium_table(&self.equilibrium)]
    }
}

fn equilibrium_table(xy_si: &[[f64; 2]]) -> Table {
    let mut t = Table::new("equilibrium", &["index", "x_m", "y_m"]);
    for (i, p) in xy_si.iter().enumerate() {
        t.push(vec![i as f64, p[0], p[1]]);
    }
    t
}

/// Histograms of the sorted drumhead spectrum over MH snapshots, one per
/// temperature, on a shared grid of `histogram_bin_hz` bins.
pub fn snapshot_histogram(trap: &TrapConfig, spec: &StudySpec) -> Result<SnapshotHistogramResult> {
    let crystal = Crystal::new(&trap.with_n_ions(spec.n_ions))?;
    let reference_hz = crystal.drumhead_hz();
    let runs = par_map(spec.temperatures.len(), |t| {
        snapshot_frequencies(
            &crystal.trap,
            &crystal.eq,
            &spec.sampler,
            spec.temperatures[t],
            spec.snapshots,
            spec.rng_seed,
            stream_index(0, t, 0),
        )
    })?;
    let bin = spec.histogram_bin_hz;
    let all = runs.iter().flat_map(|(_, s)| s.iter().flatten()).chain(&reference_hz);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), f| (a.min(*f), b.max(*f)));
    let first_edge_hz = (lo / bin).floor() * bin - bin;
    let n_bins = ((hi - first_edge_hz) / bin).floor() as usize + 2;
    let counts = runs
        .iter()
        .map(|(_, spectra)| {
            let mut c = vec![0u64; n_bins];
            for f in spectra.iter().flatten() {
                c[((f - first_edge_hz) / bin).floor() as usize] += 1;
            }
            c
        })
        .collect();
    Ok(SnapshotHistogramResult {
        reference_hz,
        bin_hz: bin,
        first_edge_hz,
        counts,
        statistics: runs.into_iter().map(|(s, _)| s).collect(),
        equilibrium: crystal.eq.positions_si(&crystal.trap),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluctuationSurfaceResult {
    pub temperatures: Vec<f64>,
    pub reference_hz: Vec<f64>,
    /// `[temperature][mode]`, Hz, modes descending with the c.m. first.
    pub sigma_hz: Vec<Vec<f64>>,
    /// Per mode; `None` for the c.m. mode and for modes without a fit.
    pub fits: Vec<Option<PowerLawFit>>,
    pub statistics: Vec<FrequencyStatistics>,
}

impl FluctuationSurfaceResult {
    /// Exponents of the `resolved` highest modes below the c.m.
    pub fn resolved_exponents(&self, resolved: usize) -> Vec<(usize, f64)> {
        (1..=resolved.min(self.fits.len().saturating_sub(1)))
            .map(|k| (k, self.fits[k].map_or(f64::NAN, |f| f.exponent)))
            .collect()
    }

    pub fn checks(&self, spec: &StudySpec) -> Vec<Check> {
        self.resolved_exponents(spec.resolved_modes)
            .into_iter()
            .map(|(k, p)| {
                Check::new(
                    format!("exponent_mode_{}", k + 1),
                    p,
                    format!("|p - 0.5| <= {}", spec.exponent_tolerance),
                    (p - 0.5).abs() <= spec.exponent_tolerance,
                )
            })
            .collect()
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut surface = Table::new("surface", &["t_perp_k", "mode", "frequency_hz", "sigma_hz"]);
        for (t, row) in self.temperatures.iter().zip(&self.sigma_hz) {
            for k in 1..row.len() {
                surface.push(vec![*t, k as f64 + 1.0, self.reference_hz[k], row[k]]);
            }
        }
        let mut fits = Table::new("fits", &["mode", "frequency_hz", "exponent", "prefactor", "r_squared"]);
        for (k, f) in self.fits.iter().enumerate().skip(1) {
            if let Some(f) = f {
                fits.push(vec![k as f64 + 1.0, self.reference_hz[k], f.exponent, f.prefactor, f.r_squared]);
            }
        }
        vec![surface, fits]
    }
}

/// Frequency standard deviation of every drumhead mode across the
/// temperature grid, with a power-law fit per mode.
pub fn fluctuation_surface(trap: &TrapConfig, spec: &StudySpec) -> Result<FluctuationSurfaceResult> {
    let crystal = Crystal::new(&trap.with_n_ions(spec.n_ions))?;
    let statistics = par_map(spec.temperatures.len(), |t| {
        snapshot_frequencies(
            &crystal.trap,
            &crystal.eq,
            &spec.sampler,
            spec.temperatures[t],
            spec.snapshots,
            spec.rng_seed,
            stream_index(0, t, 0),
        )
        .map(|(s, _)| s)
    })?;
    let sigma_hz: Vec<Vec<f64>> = statistics.iter().map(|s| s.std_hz.clone()).collect();
    let n = crystal.trap.n_ions();
    let fits = (0..n)
        .map(|k| {
            if k == 0 {
                return None;
            }
            let ys: Vec<f64> = sigma_hz.iter().map(|r| r[k]).collect();
            power_law_fit(&spec.temperatures, &ys)
        })
        .collect();
    Ok(FluctuationSurfaceResult {
        temperatures: spec.temperatures.clone(),
        reference_hz: crystal.drumhead_hz(),
        sigma_hz,
        fits,
        statistics,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportCorrelationResult {
    pub temperature: f64,
    /// Modes below the c.m., descending.
    pub frequency_hz: Vec<f64>,
    pub sigma_hz: Vec<f64>,
    pub inverse_support: Vec<f64>,
    pub spearman: f64,
    pub cm_support: f64,
}

impl SupportCorrelationResult {
    pub fn checks(&self, spec: &StudySpec) -> Vec<Check> {
        vec![Check::new(
            "spearman_sigma_vs_inverse_support",
            self.spearman,
            format!("> {}", spec.support_threshold),
            self.spearman > spec.support_threshold,
        )]
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("support", &["mode", "frequency_hz", "sigma_hz", "inverse_support"]);
        for k in 0..self.sigma_hz.len() {
            t.push(vec![k as f64 + 2.0, self.frequency_hz[k], self.sigma_hz[k], self.inverse_support[k]]);
        }
        vec![t]
    }
}

/// Rank correlation of `(sigma_n, 1 / S_n)` over the non-c.m. modes.
pub fn correlate_support(
    temperature: f64,
    reference_hz: &[f64],
    sigma_hz: &[f64],
    support: &[f64],
) -> SupportCorrelationResult {
    let inverse_support: Vec<f64> = support[1..].iter().map(|s| 1.0 / s).collect();
    SupportCorrelationResult {
        temperature,
        frequency_hz: reference_hz[1..].to_vec(),
        sigma_hz: sigma_hz[1..].to_vec(),
        spearman: spearman(&sigma_hz[1..], &inverse_support),
        inverse_support,
        cm_support: support[0],
    }
}

/// `sigma_n` at the first temperature of the grid against the inverse
/// support number of the zero-temperature modes.
pub fn support_correlation(trap: &TrapConfig, spec: &StudySpec) -> Result<SupportCorrelationResult> {
    let crystal = Crystal::new(&trap.with_n_ions(spec.n_ions))?;
    let t = spec.temperatures[0];
    let (stats, _) = snapshot_frequencies(
        &crystal.trap,
        &crystal.eq,
        &spec.sampler,
        t,
        spec.snapshots,
        spec.rng_seed,
        stream_index(0, 0, 0),
    )?;
    let (_, support) = mode_entropy_support(&crystal.drumhead);
    Ok(correlate_support(t, &crystal.drumhead_hz(), &stats.std_hz, &support))
}
