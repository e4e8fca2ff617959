use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::ensemble::{average, run_arm, Crystal};
use super::stats::{bootstrap_stderr, mean};
use super::{stream_index, ArmRequest, Check, ForceSetting, RealizationResult, StudySpec};
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::io::Table;
use crate::linmodes::{build_linearized_model, inplane_modes};
use crate::modemetrics::cold_fluid_reference;
use crate::physcore::{Trap, TrapConfig};
use crate::rng::substream;
use crate::spectra::{bright_fractions_from_phases, find_peaks, Axis, OdfConfig, PsdAccumulator, Spectrum, SpectrumKind};
use crate::thermal::Initialization;

/// Upper edge of the ExB band used for the VK comparison, Hz.
pub const EXB_BAND_HZ: f64 = 100e3;
/// Margin around mode bands when choosing spectral windows, Hz.
const BAND_MARGIN_HZ: f64 = 20e3;

fn integrator(trap: &Trap, spec: &StudySpec) -> IntegratorConfig {
    match spec.dt {
        Some(dt) => IntegratorConfig::with_step(spec.t_total, dt, spec.record_stride),
        None => IntegratorConfig::new(trap, spec.t_total).with_record_stride(spec.record_stride),
    }
}

/// Reference lines of the drumhead band, Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrumheadReference {
    /// Zero-temperature drumhead frequencies, descending.
    pub modes_hz: Vec<f64>,
    pub cm_hz: f64,
    pub tilt_hz: f64,
    pub chip_hz: f64,
}

impl DrumheadReference {
    fn new(crystal: &Crystal) -> Result<Self> {
        let (tilt, chip) = cold_fluid_reference(&crystal.trap.freqs)?;
        Ok(Self {
            modes_hz: crystal.drumhead_hz(),
            cm_hz: crystal.trap.freqs.omega_par / TAU,
            tilt_hz: tilt / TAU,
            chip_hz: chip / TAU,
        })
    }

    fn band(&self) -> (f64, f64) {
        let lo = self.modes_hz.iter().cloned().fold(f64::INFINITY, f64::min);
        (lo - BAND_MARGIN_HZ, self.cm_hz + BAND_MARGIN_HZ)
    }

    fn persistent(&self) -> [(&'static str, f64); 3] {
        [("cm", self.cm_hz), ("tilt", self.tilt_hz), ("chip", self.chip_hz)]
    }

    /// Distance from `f` to the nearest zero-temperature mode, Hz.
    fn distance_to_mode(&self, f: f64) -> f64 {
        self.modes_hz.iter().map(|m| (m - f).abs()).fold(f64::INFINITY, f64::min)
    }
}

fn temperature_label(t: f64) -> String {
    format!("{}mK", t * 1e3)
}

fn spectrum_table(name: &str, s: &Spectrum) -> Table {
    let db = s.kind == SpectrumKind::Psd;
    let mut t = if db {
        Table::new(name, &["frequency_hz", "psd_m2_per_hz", "db"])
    } else {
        Table::new(name, &["frequency_hz", "bright_fraction"])
    };
    for (f, v) in s.frequencies.iter().zip(&s.values) {
        if db {
            t.push(vec![*f, *v, 10.0 * v.log10()]);
        } else {
            t.push(vec![*f, *v]);
        }
    }
    t
}

fn psd_spectrum(results: &[RealizationResult], pick: impl Fn(&RealizationResult) -> Option<&Vec<f64>>, n: usize, dt: f64, axis: Axis) -> Result<Spectrum> {
    let parts: Vec<&Vec<f64>> = results.iter().filter_map(&pick).collect();
    let mut acc = PsdAccumulator::new(n, dt);
    acc.add_psd(&average(&parts))?;
    let mut s = acc.spectrum(axis);
    s.n_realizations = parts.len();
    Ok(s)
}

/// Peaks of `10 log10 PSD` inside `[lo, hi]` Hz, as `(bin index, Hz)`.
pub fn psd_peaks(s: &Spectrum, lo: f64, hi: f64, prominence_db: f64) -> Vec<(usize, f64)> {
    let idx: Vec<usize> = (0..s.frequencies.len())
        .filter(|&k| s.frequencies[k] >= lo && s.frequencies[k] <= hi)
        .collect();
    let Some(&first) = idx.first() else {
        return Vec::new();
    };
    let db: Vec<f64> = idx.iter().map(|&k| 10.0 * s.values[k].log10()).collect();
    find_peaks(&db, prominence_db)
        .into_iter()
        .map(|p| (first + p.index, s.frequencies[first + p.index]))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdTemperature {
    pub temperature: f64,
    pub spectrum: Spectrum,
    /// Detected drumhead-band peaks, `(bin, Hz)`.
    pub peaks: Vec<(usize, f64)>,
    /// Band-integrated PSD of each realization, m^2.
    pub band_power: Vec<f64>,
    pub max_energy_fluctuation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdBroadeningResult {
    pub reference: DrumheadReference,
    pub bin_hz: f64,
    pub band_hz: (f64, f64),
    pub temperatures: Vec<PsdTemperature>,
    /// Per temperature: `|mean(first half) - mean(all)| / bootstrap SE`.
    pub halving_sigma: Vec<Option<f64>>,
}

impl PsdBroadeningResult {
    /// Peak whose bin is within one bin of the bin nearest `f_ref`.
    pub fn peak_near(&self, t: usize, f_ref: f64) -> Option<f64> {
        let k_ref = (f_ref / self.bin_hz).round() as i64;
        self.temperatures[t]
            .peaks
            .iter()
            .filter(|(k, _)| (*k as i64 - k_ref).abs() <= 1)
            .map(|(_, f)| *f)
            .min_by(|a, b| (a - f_ref).abs().total_cmp(&(b - f_ref).abs()))
    }

    /// Peaks more than one bin below the bin nearest the chip reference.
    pub fn resolved_below(&self, t: usize) -> usize {
        let k_chip = (self.reference.chip_hz / self.bin_hz).round() as i64;
        self.temperatures[t].peaks.iter().filter(|(k, _)| (*k as i64) < k_chip - 1).count()
    }

    /// Fraction of zero-temperature peaks within one bin of a mode.
    pub fn zero_temperature_alignment(&self) -> Option<f64> {
        let t = self.temperatures.iter().position(|t| t.temperature == 0.0)?;
        let p = &self.temperatures[t].peaks;
        let ok = p.iter().filter(|(_, f)| self.reference.distance_to_mode(*f) <= self.bin_hz).count();
        Some(ok as f64 / p.len().max(1) as f64)
    }

    /// Temperature indices in increasing temperature.
    fn order(&self) -> Vec<usize> {
        let mut o: Vec<usize> = (0..self.temperatures.len()).collect();
        o.sort_by(|&a, &b| self.temperatures[a].temperature.total_cmp(&self.temperatures[b].temperature));
        o
    }

    pub fn resolved_counts(&self) -> Vec<(f64, usize)> {
        self.order()
            .into_iter()
            .map(|t| (self.temperatures[t].temperature, self.resolved_below(t)))
            .collect()
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        if let Some(f) = self.zero_temperature_alignment() {
            out.push(Check::new("zero_temperature_peaks_at_modes", f, "== 1 (within one bin)", f == 1.0));
        }
        for (t, pt) in self.temperatures.iter().enumerate() {
            for (name, f_ref) in self.reference.persistent() {
                let found = self.peak_near(t, f_ref);
                out.push(Check::new(
                    format!("{name}_peak_{}", temperature_label(pt.temperature)),
                    found.map_or(f64::NAN, |f| f - f_ref),
                    "peak within one bin",
                    found.is_some(),
                ));
            }
        }
        let counts = self.resolved_counts();
        if counts.len() > 1 {
            let mono = counts.windows(2).all(|w| w[1].1 <= w[0].1) && counts[counts.len() - 1].1 < counts[0].1;
            let text: Vec<String> = counts.iter().map(|(t, c)| format!("{}:{c}", temperature_label(*t))).collect();
            out.push(Check::new(
                "resolved_peaks_decrease",
                counts[0].1 as f64 - counts[counts.len() - 1].1 as f64,
                format!("non-increasing and first > last ({})", text.join(", ")),
                mono,
            ));
        }
        for (pt, h) in self.temperatures.iter().zip(&self.halving_sigma) {
            if let Some(z) = h {
                out.push(Check::new(
                    format!("ensemble_halving_{}", temperature_label(pt.temperature)),
                    *z,
                    "< 3 bootstrap standard errors",
                    *z < 3.0,
                ));
            }
        }
        out
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut out: Vec<Table> = self
            .temperatures
            .iter()
            .map(|t| spectrum_table(&format!("psd_z_{}", temperature_label(t.temperature)), &t.spectrum))
            .collect();
        let mut peaks = Table::new("peaks", &["t_perp_k", "frequency_hz", "nearest_mode_hz"]);
        for t in &self.temperatures {
            for (_, f) in &t.peaks {
                let d = self.reference.distance_to_mode(*f);
                let nearest = self
                    .reference
                    .modes_hz
                    .iter()
                    .find(|m| ((*m - f).abs() - d).abs() < 1e-9)
                    .copied()
                    .unwrap_or(f64::NAN);
                peaks.push(vec![t.temperature, *f, nearest]);
            }
        }
        out.push(peaks);
        out.push(reference_table(&self.reference));
        out
    }

    pub fn overview(&self) -> serde_json::Value {
        serde_json::json!({
            "reference": self.reference,
            "bin_hz": self.bin_hz,
            "band_hz": self.band_hz,
            "resolved_counts": self.resolved_counts(),
            "zero_temperature_alignment": self.zero_temperature_alignment(),
            "temperatures": self.temperatures.iter().map(|t| serde_json::json!({
                "t_perp_k": t.temperature,
                "n_realizations": t.spectrum.n_realizations,
                "n_peaks": t.peaks.len(),
                "max_energy_fluctuation": t.max_energy_fluctuation,
            })).collect::<Vec<_>>(),
            "halving_sigma": self.halving_sigma,
        })
    }
}

fn reference_table(r: &DrumheadReference) -> Table {
    let mut t = Table::new("reference_frequencies", &["mode", "frequency_hz"]);
    for (k, f) in r.modes_hz.iter().enumerate() {
        t.push(vec![k as f64 + 1.0, *f]);
    }
    t
}

/// Drumhead PSD after MH + VK initialization and an RK4 run, one ensemble
/// per temperature.
pub fn psd_broadening(trap: &TrapConfig, spec: &StudySpec) -> Result<PsdBroadeningResult> {
    let crystal = Crystal::new(&trap.with_n_ions(spec.n_ions))?;
    let reference = DrumheadReference::new(&crystal)?;
    let integ = integrator(&crystal.trap, spec);
    let n = integ.n_samples() - 1;
    let dt = integ.sample_interval();
    let bin_hz = 1.0 / (n as f64 * dt);
    let band_hz = reference.band();
    let mut temperatures = Vec::new();
    let mut halving_sigma = Vec::new();
    for (ti, &t) in spec.temperatures.iter().enumerate() {
        let req = ArmRequest {
            init: Initialization::MhVk,
            t_perp: t,
            integrator: &integ,
            axial_psd: true,
            inplane_psd: false,
            odf: None,
            arm: 1,
            temperature_index: ti,
        };
        let results = run_arm(&crystal, &spec.sampler, &req, spec.rng_seed, spec.realizations)?;
        let spectrum = psd_spectrum(&results, |r| r.axial_psd.as_ref(), n, dt, Axis::Z)?;
        let peaks = psd_peaks(&spectrum, band_hz.0, band_hz.1, spec.peak_prominence_db);
        let freqs = spectrum.frequencies.clone();
        let band_power: Vec<f64> = results
            .iter()
            .filter_map(|r| r.axial_psd.as_ref())
            .map(|p| {
                p.iter()
                    .zip(&freqs)
                    .filter(|(_, f)| **f >= band_hz.0 && **f <= band_hz.1)
                    .map(|(v, _)| v * bin_hz)
                    .sum()
            })
            .collect();
        halving_sigma.push(if band_power.len() >= 4 {
            let half = &band_power[..band_power.len() / 2];
            let mut rng = substream(spec.rng_seed, stream_index(9, ti, 0));
            let se = bootstrap_stderr(half, 1000, &mut rng);
            Some((mean(half) - mean(&band_power)).abs() / se)
        } else {
            None
        });
        temperatures.push(PsdTemperature {
            temperature: t,
            spectrum,
            peaks,
            band_power,
            max_energy_fluctuation: results.iter().map(|r| r.energy_fluctuation).fold(0.0, f64::max),
        });
    }
    Ok(PsdBroadeningResult {
        reference,
        bin_hz,
        band_hz,
        temperatures,
        halving_sigma,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VkComparisonResult {
    pub temperature: f64,
    pub exb_band_hz: (f64, f64),
    pub cyclotron_band_hz: (f64, f64),
    pub vk_inplane: Spectrum,
    pub mhvk_inplane: Spectrum,
    pub vk_axial: Spectrum,
    /// `10 log10(MH-VK / VK)` of the ExB band means.
    pub exb_db: f64,
    /// `10 log10(VK / MH-VK)` of the cyclotron band means.
    pub cyclotron_db: f64,
    /// Fraction of ExB-band bins in which MH-VK exceeds VK.
    pub exb_bins_mhvk_above: f64,
    /// Fraction of VK drumhead peaks within one bin of a mode.
    pub vk_axial_alignment: f64,
    pub reference: DrumheadReference,
}

impl VkComparisonResult {
    pub fn checks(&self, spec: &StudySpec) -> Vec<Check> {
        let lo = spec.cyclotron_target_db - spec.cyclotron_tolerance_db;
        let hi = spec.cyclotron_target_db + spec.cyclotron_tolerance_db;
        vec![
            Check::new(
                "exb_band_mhvk_over_vk_db",
                self.exb_db,
                format!(">= {} dB", spec.exb_min_db),
                self.exb_db >= spec.exb_min_db,
            ),
            Check::new(
                "cyclotron_band_vk_over_mhvk_db",
                self.cyclotron_db,
                format!("in [{lo}, {hi}] dB"),
                self.cyclotron_db >= lo && self.cyclotron_db <= hi,
            ),
        ]
    }

    pub fn tables(&self) -> Vec<Table> {
        vec![
            spectrum_table("psd_inplane_vk", &self.vk_inplane),
            spectrum_table("psd_inplane_mhvk", &self.mhvk_inplane),
            spectrum_table("psd_z_vk", &self.vk_axial),
        ]
    }

    pub fn overview(&self) -> serde_json::Value {
        serde_json::json!({
            "t_perp_k": self.temperature,
            "exb_band_hz": self.exb_band_hz,
            "cyclotron_band_hz": self.cyclotron_band_hz,
            "exb_db": self.exb_db,
            "cyclotron_db": self.cyclotron_db,
            "exb_bins_mhvk_above": self.exb_bins_mhvk_above,
            "vk_axial_alignment": self.vk_axial_alignment,
            "n_realizations": self.vk_inplane.n_realizations,
        })
    }
}

/// In-plane PSDs after velocity kicks alone (at twice the temperature)
/// against MH sampling plus kicks, at the first temperature of the grid.
pub fn vk_comparison(trap: &TrapConfig, spec: &StudySpec) -> Result<VkComparisonResult> {
    let crystal = Crystal::new(&trap.with_n_ions(spec.n_ions))?;
    let reference = DrumheadReference::new(&crystal)?;
    let model = build_linearized_model(&crystal.trap, &crystal.eq)?;
    let modes = inplane_modes(&model)?;
    let n_ions = crystal.trap.n_ions();
    let cyc: Vec<f64> = modes.frequencies[n_ions..].iter().map(|w| crystal.trap.hertz(*w)).collect();
    let cyclotron_band_hz = (
        cyc.iter().cloned().fold(f64::INFINITY, f64::min) - BAND_MARGIN_HZ,
        cyc.iter().cloned().fold(0.0, f64::max) + BAND_MARGIN_HZ,
    );
    let integ = integrator(&crystal.trap, spec);
    let n = integ.n_samples() - 1;
    let dt = integ.sample_interval();
    let bin_hz = 1.0 / (n as f64 * dt);
    if 0.5 / dt < cyclotron_band_hz.1 {
        return Err(Error::InvalidConfig(format!(
            "record_stride {} puts the Nyquist frequency {:.3e} Hz below the cyclotron band",
            spec.record_stride,
            0.5 / dt
        )));
    }
    let exb_band_hz = (bin_hz, EXB_BAND_HZ);
    let t = spec.temperatures[0];
    let arm = |init: Initialization, tag: u64, axial: bool| {
        let req = ArmRequest {
            init,
            t_perp: t,
            integrator: &integ,
            axial_psd: axial,
            inplane_psd: true,
            odf: None,
            arm: tag,
            temperature_index: 0,
        };
        run_arm(&crystal, &spec.sampler, &req, spec.rng_seed, spec.realizations)
    };
    let vk = arm(Initialization::Vk, 1, true)?;
    let mhvk = arm(Initialization::MhVk, 2, false)?;
    let vk_inplane = psd_spectrum(&vk, |r| r.inplane_psd.as_ref(), n, dt, Axis::Inplane)?;
    let mhvk_inplane = psd_spectrum(&mhvk, |r| r.inplane_psd.as_ref(), n, dt, Axis::Inplane)?;
    let vk_axial = psd_spectrum(&vk, |r| r.axial_psd.as_ref(), n, dt, Axis::Z)?;
    let db = |a: f64, b: f64| 10.0 * (a / b).log10();
    let exb_db = db(
        mhvk_inplane.band_mean(exb_band_hz.0, exb_band_hz.1),
        vk_inplane.band_mean(exb_band_hz.0, exb_band_hz.1),
    );
    let cyclotron_db = db(
        vk_inplane.band_mean(cyclotron_band_hz.0, cyclotron_band_hz.1),
        mhvk_inplane.band_mean(cyclotron_band_hz.0, cyclotron_band_hz.1),
    );
    let in_exb: Vec<usize> = (0..vk_inplane.frequencies.len())
        .filter(|&k| vk_inplane.frequencies[k] >= exb_band_hz.0 && vk_inplane.frequencies[k] <= exb_band_hz.1)
        .collect();
    let above = in_exb.iter().filter(|&&k| mhvk_inplane.values[k] > vk_inplane.values[k]).count();
    let (lo, hi) = reference.band();
    let peaks = psd_peaks(&vk_axial, lo, hi, spec.peak_prominence_db);
    let aligned = peaks.iter().filter(|(_, f)| reference.distance_to_mode(*f) <= bin_hz).count();
    Ok(VkComparisonResult {
        temperature: t,
        exb_band_hz,
        cyclotron_band_hz,
        vk_inplane,
        mhvk_inplane,
        vk_axial,
        exb_db,
        cyclotron_db,
        exb_bins_mhvk_above: above as f64 / in_exb.len().max(1) as f64,
        vk_axial_alignment: aligned as f64 / peaks.len().max(1) as f64,
        reference,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdfTemperature {
    pub temperature: f64,
    pub spectrum: Spectrum,
    /// Spectrum averaged over `+-1/T_tot` around each grid point.
    pub smoothed: Vec<f64>,
    /// Local maxima of `smoothed`, `(grid index, Hz, smoothed value)`.
    pub peaks: Vec<(usize, f64, f64)>,
}

/// Running mean over `2 half + 1` points, edges padded with the end values.
pub fn running_mean(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len() as i64;
    let h = half as i64;
    (0..n)
        .map(|k| (k - h..=k + h).map(|j| values[j.clamp(0, n - 1) as usize]).sum::<f64>() / (2 * h + 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdfScanResult {
    pub reference: DrumheadReference,
    pub odf: OdfConfig,
    pub calibrated: bool,
    /// `1 / T_tot`, Hz.
    pub resolution_hz: f64,
    pub baseline: f64,
    pub temperatures: Vec<OdfTemperature>,
}

impl OdfScanResult {
    /// Peak nearest `f_ref` if it lies within the resolution.
    pub fn feature_near(&self, t: usize, f_ref: f64) -> Option<f64> {
        self.temperatures[t]
            .peaks
            .iter()
            .map(|p| p.1)
            .filter(|f| (f - f_ref).abs() <= self.resolution_hz)
            .min_by(|a, b| (a - f_ref).abs().total_cmp(&(b - f_ref).abs()))
    }

    /// Fraction of zero-temperature peaks within the resolution of a mode.
    pub fn zero_temperature_alignment(&self) -> Option<f64> {
        let t = self.temperatures.iter().position(|t| t.temperature == 0.0)?;
        let p = &self.temperatures[t].peaks;
        let ok = p
            .iter()
            .filter(|q| self.reference.distance_to_mode(q.1) <= self.resolution_hz)
            .count();
        Some(ok as f64 / p.len().max(1) as f64)
    }

    /// Peaks more than one resolution width below the chip reference.
    pub fn resolved_below(&self, t: usize) -> usize {
        let edge = self.reference.chip_hz - self.resolution_hz;
        self.temperatures[t].peaks.iter().filter(|p| p.1 < edge).count()
    }

    pub fn resolved_counts(&self) -> Vec<(f64, usize)> {
        let mut o: Vec<usize> = (0..self.temperatures.len()).collect();
        o.sort_by(|&a, &b| self.temperatures[a].temperature.total_cmp(&self.temperatures[b].temperature));
        o.into_iter()
            .map(|t| (self.temperatures[t].temperature, self.resolved_below(t)))
            .collect()
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        if let Some(f) = self.zero_temperature_alignment() {
            out.push(Check::new("zero_temperature_peaks_at_modes", f, "== 1 (within 1/T_tot)", f == 1.0));
        }
        for (t, ot) in self.temperatures.iter().enumerate() {
            for (name, f_ref) in self.reference.persistent() {
                let found = self.feature_near(t, f_ref);
                out.push(Check::new(
                    format!("{name}_feature_{}", temperature_label(ot.temperature)),
                    found.map_or(f64::NAN, |f| f - f_ref),
                    "peak within 1/T_tot",
                    found.is_some(),
                ));
            }
        }
        let counts = self.resolved_counts();
        if counts.len() > 1 {
            let mono = counts.windows(2).all(|w| w[1].1 <= w[0].1) && counts[counts.len() - 1].1 < counts[0].1;
            let text: Vec<String> = counts.iter().map(|(t, c)| format!("{}:{c}", temperature_label(*t))).collect();
            out.push(Check::new(
                "resolved_features_decrease",
                counts[0].1 as f64 - counts[counts.len() - 1].1 as f64,
                format!("non-increasing and first > last ({})", text.join(", ")),
                mono,
            ));
        }
        out
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut out: Vec<Table> = self
            .temperatures
            .iter()
            .map(|t| {
                let mut tab = Table::new(
                    &format!("odf_{}", temperature_label(t.temperature)),
                    &["frequency_hz", "bright_fraction", "smoothed"],
                );
                for ((f, v), s) in t.spectrum.frequencies.iter().zip(&t.spectrum.values).zip(&t.smoothed) {
                    tab.push(vec![*f, *v, *s]);
                }
                tab
            })
            .collect();
        let mut peaks = Table::new("peaks", &["t_perp_k", "frequency_hz", "smoothed_bright_fraction"]);
        for t in &self.temperatures {
            for p in &t.peaks {
                peaks.push(vec![t.temperature, p.1, p.2]);
            }
        }
        out.push(peaks);
        out.push(reference_table(&self.reference));
        out
    }

    pub fn overview(&self) -> serde_json::Value {
        serde_json::json!({
            "reference": self.reference,
            "f0_n": self.odf.f0,
            "calibrated": self.calibrated,
            "tau_s": self.odf.tau,
            "t_pi_s": self.odf.t_pi,
            "gamma_per_s": self.odf.gamma,
            "resolution_hz": self.resolution_hz,
            "baseline": self.baseline,
            "zero_temperature_alignment": self.zero_temperature_alignment(),
            "resolved_counts": self.resolved_counts(),
            "temperatures": self.temperatures.iter().map(|t| serde_json::json!({
                "t_perp_k": t.temperature,
                "n_realizations": t.spectrum.n_realizations,
                "n_peaks": t.peaks.len(),
                "max_bright_fraction": t.spectrum.values.iter().cloned().fold(0.0, f64::max),
            })).collect::<Vec<_>>(),
        })
    }
}

fn mean_fractions(phases: &[Vec<Vec<f64>>], f0: f64, odf: &OdfConfig) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = phases.iter().map(|p| bright_fractions_from_phases(p, f0, odf)).collect();
    average(&parts.iter().collect::<Vec<_>>())
}

/// Force for which the largest bright fraction among grid points `window`
/// reaches `target`. Phases are per newton, `[realization][mu][ion]`.
pub fn calibrate_force(phases: &[Vec<Vec<f64>>], odf: &OdfConfig, window: &[usize], target: f64) -> Result<f64> {
    let value = |f: f64| {
        let sub: Vec<Vec<Vec<f64>>> = phases.iter().map(|p| window.iter().map(|&k| p[k].clone()).collect()).collect();
        mean_fractions(&sub, f, odf).into_iter().fold(0.0, f64::max)
    };
    let (mut lo, mut hi) = (1e-30, 1e-30);
    while value(hi) < target {
        lo = hi;
        hi *= 1.25;
        if hi > 1e-12 {
            return Err(Error::InvalidConfig(format!("ODF calibration target {target} is unreachable")));
        }
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if value(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// ODF bright fraction over the drumhead band, one ensemble per
/// temperature, with a common force.
pub fn odf_scan(trap: &TrapConfig, spec: &StudySpec) -> Result<OdfScanResult> {
    let crystal = Crystal::new(&trap.with_n_ions(spec.n_ions))?;
    let reference = DrumheadReference::new(&crystal)?;
    let integ = integrator(&crystal.trap, spec);
    let p = &spec.odf;
    let step = p.mu_step_hz;
    let lo = p.mu_min_hz.unwrap_or_else(|| (reference.band().0 / step).floor() * step);
    let hi = p.mu_max_hz.unwrap_or_else(|| ((reference.cm_hz + 10e3) / step).ceil() * step);
    let count = ((hi - lo) / step).round() as usize + 1;
    let grid_hz: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
    let mut odf = OdfConfig {
        f0: 1.0,
        mu_r: grid_hz.iter().map(|f| TAU * f).collect(),
        tau: 0.5 * (spec.t_total - p.t_pi),
        t_pi: p.t_pi,
        gamma: p.gamma,
    };
    odf.validate()?;
    let resolution_hz = 1.0 / spec.t_total;
    let mut phases = Vec::new();
    for (ti, &t) in spec.temperatures.iter().enumerate() {
        let req = ArmRequest {
            init: Initialization::MhVk,
            t_perp: t,
            integrator: &integ,
            axial_psd: false,
            inplane_psd: false,
            odf: Some(&odf),
            arm: 3,
            temperature_index: ti,
        };
        let results = run_arm(&crystal, &spec.sampler, &req, spec.rng_seed, spec.realizations)?;
        phases.push(results.into_iter().filter_map(|r| r.odf_phases).collect::<Vec<_>>());
    }
    let (f0, calibrated) = match p.f0 {
        ForceSetting::Newtons(f) => (f, false),
        ForceSetting::Keyword(_) => {
            let coldest = (0..spec.temperatures.len())
                .min_by(|&a, &b| spec.temperatures[a].total_cmp(&spec.temperatures[b]))
                .unwrap_or(0);
            let window: Vec<usize> = (0..count)
                .filter(|&k| (grid_hz[k] - reference.cm_hz).abs() <= 2.0 * resolution_hz)
                .collect();
            (calibrate_force(&phases[coldest], &odf, &window, p.calibration_target)?, true)
        }
    };
    odf.f0 = f0;
    let temperatures = spec
        .temperatures
        .iter()
        .zip(&phases)
        .map(|(&t, ph)| {
            let values = mean_fractions(ph, f0, &odf);
            let smoothed = running_mean(&values, (resolution_hz / step).floor() as usize);
            let peaks = find_peaks(&smoothed, p.min_prominence)
                .into_iter()
                .map(|q| (q.index, grid_hz[q.index], q.height))
                .collect();
            OdfTemperature {
                temperature: t,
                spectrum: Spectrum {
                    frequencies: grid_hz.clone(),
                    values,
                    kind: SpectrumKind::Odf,
                    n_realizations: ph.len(),
                    axis: Axis::Z,
                },
                smoothed,
                peaks,
            }
        })
        .collect();
    Ok(OdfScanResult {
        reference,
        baseline: odf.baseline(),
        odf,
        calibrated,
        resolution_hz,
        temperatures,
    })
}
