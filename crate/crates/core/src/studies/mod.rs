//! Experiment drivers. Each study is a pure function of a trap
//! configuration and a [`StudySpec`]; it returns typed results, a list of
//! pass/fail checks and the tables written to its output directory.

mod ensemble;
mod md;
mod sho;
mod snapshots;
pub mod stats;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ensemble::{stream_index, ArmRequest, RealizationResult};
pub use md::{
    odf_scan, psd_broadening, vk_comparison, OdfScanResult, OdfTemperature, PsdBroadeningResult, PsdTemperature,
    VkComparisonResult,
};
pub use sho::{sho_appendix, ShoAppendixResult};
pub use snapshots::{
    fluctuation_surface, snapshot_frequencies, snapshot_histogram, support_correlation, FluctuationSurfaceResult,
    FrequencyStatistics, SnapshotHistogramResult, SupportCorrelationResult,
};

use crate::error::{Error, Result};
use crate::io::{write_json, Table};
use crate::physcore::TrapConfig;
use crate::thermal::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    SnapshotHistogram,
    FluctuationSurface,
    SupportCorrelation,
    PsdBroadening,
    VkComparison,
    OdfScan,
    ShoAppendix,
}

impl StudyKind {
    pub const ALL: [StudyKind; 7] = [
        StudyKind::SnapshotHistogram,
        StudyKind::FluctuationSurface,
        StudyKind::SupportCorrelation,
        StudyKind::PsdBroadening,
        StudyKind::VkComparison,
        StudyKind::OdfScan,
        StudyKind::ShoAppendix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::SnapshotHistogram => "snapshot_histogram",
            StudyKind::FluctuationSurface => "fluctuation_surface",
            StudyKind::SupportCorrelation => "support_correlation",
            StudyKind::PsdBroadening => "psd_broadening",
            StudyKind::VkComparison => "vk_comparison",
            StudyKind::OdfScan => "odf_scan",
            StudyKind::ShoAppendix => "sho_appendix",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown study '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small crystal and reduced ensembles, minutes on one core.
    #[default]
    Ci,
    /// 120 ions and full ensembles.
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ci" => Ok(Preset::Ci),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

/// ODF force magnitude: a fixed value in newtons, or calibrated so the
/// peak bright fraction next to the c.m. resonance reaches a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForceSetting {
    Newtons(f64),
    Keyword(ForceKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKeyword {
    Calibrate,
}

impl Default for ForceSetting {
    fn default() -> Self {
        ForceSetting::Keyword(ForceKeyword::Calibrate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdfScanParams {
    pub f0: ForceSetting,
    /// Target for the calibrated force.
    pub calibration_target: f64,
    /// 1/s
    pub gamma: f64,
    /// s
    pub t_pi: f64,
    /// Scan range in Hz; defaults to the drumhead band.
    pub mu_min_hz: Option<f64>,
    pub mu_max_hz: Option<f64>,
    pub mu_step_hz: f64,
    /// Minimum peak prominence in bright fraction; the default sits above
    /// the first spin-echo sidelobe of a line calibrated to the target.
    pub min_prominence: f64,
}

impl Default for OdfScanParams {
    fn default() -> Self {
        Self {
            f0: ForceSetting::default(),
            calibration_target: 0.45,
            gamma: 0.0,
            t_pi: 0.0,
            mu_min_hz: None,
            mu_max_hz: None,
            mu_step_hz: 500.0,
            min_prominence: 0.1,
        }
    }
}

/// Fully resolved study parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub kind: StudyKind,
    pub preset: Preset,
    pub n_ions: usize,
    /// In-plane temperatures, K.
    pub temperatures: Vec<f64>,
    /// Metropolis-Hastings snapshots per temperature.
    pub snapshots: usize,
    /// Independent MD realizations per temperature and arm.
    pub realizations: usize,
    /// Template for the chain; `t_perp` and `mh_scans` are set per run.
    pub sampler: SamplerConfig,
    /// MD run length, s.
    pub t_total: f64,
    /// MD step, s; `None` picks the default near `2 pi / (100 w_+)`.
    pub dt: Option<f64>,
    pub record_stride: usize,
    pub histogram_bin_hz: f64,
    /// Number of highest non-c.m. modes treated as well resolved.
    pub resolved_modes: usize,
    pub exponent_tolerance: f64,
    pub support_threshold: f64,
    pub peak_prominence_db: f64,
    pub exb_min_db: f64,
    pub cyclotron_target_db: f64,
    pub cyclotron_tolerance_db: f64,
    pub odf: OdfScanParams,
    pub sho_samples: usize,
    pub rng_seed: u64,
}

impl StudySpec {
    pub fn preset(kind: StudyKind, preset: Preset) -> Self {
        let paper = preset == Preset::Paper;
        let mk = |xs: &[f64]| xs.iter().map(|t| t * 1e-3).collect::<Vec<_>>();
        let temperatures = match kind {
            StudyKind::SnapshotHistogram => mk(&[1.0, 10.0]),
            StudyKind::FluctuationSurface if paper => (1..=50).map(|k| k as f64 * 0.2e-3).collect(),
            StudyKind::FluctuationSurface => mk(&[0.2, 0.5, 1.0, 2.0, 5.0, 10.0]),
            StudyKind::SupportCorrelation => mk(&[0.2]),
            StudyKind::PsdBroadening | StudyKind::OdfScan => mk(&[0.0, 1.0, 10.0]),
            StudyKind::VkComparison => mk(&[10.0]),
            StudyKind::ShoAppendix => mk(&[0.5]),
        };
        let snapshots = match (kind, paper) {
            (_, true) => 2000,
            (StudyKind::FluctuationSurface, false) => 1000,
            (StudyKind::SnapshotHistogram, false) => 1000,
            _ => 2000,
        };
        let realizations = match (kind, paper) {
            (_, true) => 96,
            (StudyKind::PsdBroadening, false) => 4,
            (StudyKind::VkComparison, false) => 2,
            (StudyKind::OdfScan, false) => 8,
            _ => 1,
        };
        let record_stride = if kind == StudyKind::VkComparison { 20 } else { 100 };
        Self {
            kind,
            preset,
            n_ions: if paper { 120 } else { 32 },
            temperatures,
            snapshots,
            realizations,
            sampler: SamplerConfig::default(),
            t_total: 560e-6,
            dt: None,
            record_stride,
            histogram_bin_hz: 500.0,
            resolved_modes: 5,
            exponent_tolerance: 0.1,
            support_threshold: 0.5,
            peak_prominence_db: 6.0,
            exb_min_db: if paper { 15.0 } else { 10.0 },
            cyclotron_target_db: 3.0,
            cyclotron_tolerance_db: if paper { 1.0 } else { 1.5 },
            odf: OdfScanParams::default(),
            sho_samples: 1_000_000,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_ions == 0 {
            return bad("n_ions must be >= 1");
        }
        if self.temperatures.is_empty() {
            return bad("temperature grid is empty");
        }
        if self.temperatures.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("temperatures must be finite and >= 0");
        }
        if self.snapshots == 0 || self.realizations == 0 || self.record_stride == 0 || self.sho_samples < 2 {
            return bad("snapshots, realizations, record_stride must be >= 1 and sho_samples >= 2");
        }
        if !(self.t_total > 0.0) || self.dt.is_some_and(|dt| !(dt > 0.0)) {
            return bad("t_total and dt must be > 0");
        }
        if !(self.histogram_bin_hz > 0.0 && self.odf.mu_step_hz > 0.0) {
            return bad("bin widths must be > 0");
        }
        if !(self.odf.calibration_target > 0.0 && self.odf.calibration_target < 1.0) {
            return bad("odf.calibration_target must lie in (0, 1)");
        }
        if !(self.odf.t_pi >= 0.0 && self.odf.t_pi < self.t_total && self.odf.gamma >= 0.0) {
            return bad("odf.t_pi must lie in [0, t_total) and odf.gamma must be >= 0");
        }
        if let ForceSetting::Newtons(f) = self.odf.f0 {
            if !(f >= 0.0 && f.is_finite()) {
                return bad("odf.f0 must be >= 0");
            }
        }
        self.sampler.validate()
    }

    /// Applies the non-empty fields of `o`.
    pub fn apply(&mut self, o: &StudyOverrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { self.$f = v.clone(); } )* };
        }
        set!(
            n_ions,
            temperatures,
            snapshots,
            realizations,
            t_total,
            record_stride,
            histogram_bin_hz,
            resolved_modes,
            exponent_tolerance,
            support_threshold,
            peak_prominence_db,
            exb_min_db,
            cyclotron_target_db,
            cyclotron_tolerance_db,
            sho_samples
        );
        if o.dt.is_some() {
            self.dt = o.dt;
        }
    }
}

/// Optional replacements for the preset values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyOverrides {
    pub n_ions: Option<usize>,
    pub temperatures: Option<Vec<f64>>,
    pub snapshots: Option<usize>,
    pub realizations: Option<usize>,
    pub t_total: Option<f64>,
    pub dt: Option<f64>,
    pub record_stride: Option<usize>,
    pub histogram_bin_hz: Option<f64>,
    pub resolved_modes: Option<usize>,
    pub exponent_tolerance: Option<f64>,
    pub support_threshold: Option<f64>,
    pub peak_prominence_db: Option<f64>,
    pub exb_min_db: Option<f64>,
    pub cyclotron_target_db: Option<f64>,
    pub cyclotron_tolerance_db: Option<f64>,
    pub sho_samples: Option<usize>,
}

/// One pass/fail acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub criterion: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, criterion: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value,
            criterion: criterion.into(),
            passed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub study: StudyKind,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(study: StudyKind, checks: Vec<Check>) -> Self {
        Self {
            study,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

/// Everything a study writes.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub summary: Summary,
    pub tables: Vec<Table>,
    /// Additional JSON documents, `(file stem, value)`.
    pub documents: Vec<(String, serde_json::Value)>,
}

impl StudyOutcome {
    /// Writes `<out>/<study>/` with the tables, documents, `metadata.json`
    /// and `summary.json`. Returns the directory.
    pub fn write(&self, out: &Path, metadata: &serde_json::Value) -> Result<PathBuf> {
        let dir = out.join(self.summary.study.name());
        std::fs::create_dir_all(&dir)?;
        for t in &self.tables {
            t.write_csv(&dir.join(format!("{}.csv", t.name)))?;
        }
        for (name, doc) in &self.documents {
            write_json(&dir.join(format!("{name}.json")), doc)?;
        }
        write_json(&dir.join("metadata.json"), metadata)?;
        write_json(&dir.join("summary.json"), &self.summary)?;
        Ok(dir)
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

/// Runs the study named by `spec.kind`.
pub fn run_study(trap: &TrapConfig, spec: &StudySpec) -> Result<StudyOutcome> {
    spec.validate()?;
    let (checks, tables, documents) = match spec.kind {
        StudyKind::SnapshotHistogram => {
            let r = snapshot_histogram(trap, spec)?;
            (r.checks(), r.tables(), vec![("result".into(), to_value(&r.statistics_summary()))])
        }
        StudyKind::FluctuationSurface => {
            let r = fluctuation_surface(trap, spec)?;
            (r.checks(spec), r.tables(), vec![("fits".into(), to_value(&r.fits))])
        }
        StudyKind::SupportCorrelation => {
            let r = support_correlation(trap, spec)?;
            (r.checks(spec), r.tables(), vec![("result".into(), to_value(&r.spearman))])
        }
        StudyKind::PsdBroadening => {
            let r = psd_broadening(trap, spec)?;
            (r.checks(), r.tables(), vec![("result".into(), to_value(&r.overview()))])
        }
        StudyKind::VkComparison => {
            let r = vk_comparison(trap, spec)?;
            (r.checks(spec), r.tables(), vec![("result".into(), to_value(&r.overview()))])
        }
        StudyKind::OdfScan => {
            let r = odf_scan(trap, spec)?;
            (r.checks(), r.tables(), vec![("result".into(), to_value(&r.overview()))])
        }
        StudyKind::ShoAppendix => {
            let r = sho_appendix(trap, spec)?;
            (r.checks(), r.tables(), vec![("report".into(), to_value(&r.report))])
        }
    };
    Ok(StudyOutcome {
        summary: Summary::new(spec.kind, checks),
        tables,
        documents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_names() {
        for k in StudyKind::ALL {
            assert_eq!(k.name().parse::<StudyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("fig10".parse::<StudyKind>().is_err());
    }

    #[test]
    fn presets_validate() {
        for k in StudyKind::ALL {
            for p in [Preset::Ci, Preset::Paper] {
                let s = StudySpec::preset(k, p);
                s.validate().unwrap();
                assert_eq!(s.n_ions, if p == Preset::Paper { 120 } else { 32 });
            }
        }
        let surface = StudySpec::preset(StudyKind::FluctuationSurface, Preset::Paper);
        assert_eq!(surface.temperatures.len(), 50);
        assert!((surface.temperatures[0] - 0.2e-3).abs() < 1e-15);
        assert!((surface.temperatures[49] - 10e-3).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply_and_empty_grid_fails() {
        let mut s = StudySpec::preset(StudyKind::PsdBroadening, Preset::Ci);
        s.apply(&StudyOverrides {
            realizations: Some(7),
            dt: Some(1e-9),
            ..Default::default()
        });
        assert_eq!(s.realizations, 7);
        assert_eq!(s.dt, Some(1e-9));
        s.temperatures.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn force_setting_serde() {
        let p: OdfScanParams = serde_json::from_str(r#"{"f0": "calibrate"}"#).unwrap();
        assert_eq!(p.f0, ForceSetting::Keyword(ForceKeyword::Calibrate));
        let p: OdfScanParams = serde_json::from_str(r#"{"f0": 2e-23}"#).unwrap();
        assert_eq!(p.f0, ForceSetting::Newtons(2e-23));
        assert!(serde_json::from_str::<OdfScanParams>(r#"{"f0": "guess"}"#).is_err());
    }
}
