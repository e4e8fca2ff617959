//! TOML run configuration.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use penning_core::physcore::constants::{BE9_ION_MASS, ELEMENTARY_CHARGE};
use penning_core::physcore::derive_frequencies;
use penning_core::studies::{OdfScanParams, Preset, StudyKind, StudyOverrides, StudySpec};
use penning_core::thermal::{SamplerConfig, StepRadius};
use penning_core::TrapConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Contents of the bundled `nist-table1.cfg`.
pub const NIST_TABLE1: &str = include_str!("../../../configs/nist-table1.cfg");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trap: Option<TrapSection>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub odf: Option<OdfScanParams>,
    #[serde(default)]
    pub study: StudySection,
}

/// Either the frequency set (`cyclotron_hz`, `axial_hz`, `wall_hz`) or the
/// physical set (`b_field_t`, `v0_v`, `vw_v`); `rotation_hz` is always
/// required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub ion_mass_kg: Option<f64>,
    pub ion_charge_c: Option<f64>,
    pub rotation_hz: Option<f64>,
    pub cyclotron_hz: Option<f64>,
    pub axial_hz: Option<f64>,
    pub wall_hz: Option<f64>,
    pub b_field_t: Option<f64>,
    pub v0_v: Option<f64>,
    pub vw_v: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub t_par_k: Option<f64>,
    pub burn_in_scans: Option<usize>,
    pub step_radius: Option<StepRadius>,
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub t_total_s: Option<f64>,
    pub dt_s: Option<f64>,
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub n_ions: Option<usize>,
    pub temperatures_k: Option<Vec<f64>>,
    pub snapshots: Option<usize>,
    pub realizations: Option<usize>,
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

/// Where the seed of a run came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Config,
    Entropy,
}

/// Everything a single study run needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub trap: TrapConfig,
    pub spec: StudySpec,
    pub seed: u64,
    pub seed_source: SeedSource,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl RunConfig {
    /// Parses and validates configuration text.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            CliError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let cfg = Self::parse(&text, &path.display().to_string())?;
        Ok((cfg, text))
    }

    /// Checks everything that does not depend on the chosen study.
    pub fn validate(&self) -> Result<(), CliError> {
        let trap = self.trap_config(1)?;
        derive_frequencies(&trap)?;
        let mut spec = StudySpec::preset(StudyKind::SnapshotHistogram, self.preset.unwrap_or_default());
        self.apply(&mut spec);
        spec.validate()?;
        Ok(())
    }

    /// Trap parameters with `n_ions` ions.
    pub fn trap_config(&self, n_ions: usize) -> Result<TrapConfig, CliError> {
        let t = self
            .trap
            .as_ref()
            .ok_or_else(|| CliError::Validation("missing [trap] section".into()))?;
        let mass = t.ion_mass_kg.unwrap_or(BE9_ION_MASS);
        let charge = t.ion_charge_c.unwrap_or(ELEMENTARY_CHARGE);
        let rotation = t
            .rotation_hz
            .ok_or_else(|| CliError::Validation("trap.rotation_hz is required".into()))?;
        let freq = [t.cyclotron_hz, t.axial_hz, t.wall_hz];
        let phys = [t.b_field_t, t.v0_v, t.vw_v];
        let any = |xs: &[Option<f64>]| xs.iter().any(Option::is_some);
        let all = |xs: &[Option<f64>]| xs.iter().all(Option::is_some);
        let cfg = match (any(&freq), any(&phys)) {
            (true, true) => {
                return Err(CliError::Validation(
                    "trap: give either cyclotron_hz/axial_hz/wall_hz or b_field_t/v0_v/vw_v, not both".into(),
                ))
            }
            (true, false) if all(&freq) => TrapConfig::from_frequencies(
                mass,
                charge,
                TAU * freq[0].unwrap_or_default(),
                TAU * rotation,
                TAU * freq[1].unwrap_or_default(),
                TAU * freq[2].unwrap_or_default(),
                n_ions,
            ),
            (false, true) if all(&phys) => TrapConfig {
                ion_mass: mass,
                ion_charge: charge,
                b_field: phys[0].unwrap_or_default(),
                v0: phys[1].unwrap_or_default(),
                vw: phys[2].unwrap_or_default(),
                omega_r: TAU * rotation,
                n_ions,
            },
            (true, false) => return Err(CliError::Validation("trap: cyclotron_hz, axial_hz and wall_hz are all required".into())),
            (false, true) => return Err(CliError::Validation("trap: b_field_t, v0_v and vw_v are all required".into())),
            (false, false) => {
                return Err(CliError::Validation(
                    "trap: needs cyclotron_hz/axial_hz/wall_hz or b_field_t/v0_v/vw_v".into(),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Layers the configured values over a preset spec.
    pub fn apply(&self, spec: &mut StudySpec) {
        let s = &self.study;
        let i = &self.integrator;
        spec.apply(&StudyOverrides {
            n_ions: s.n_ions,
            temperatures: s.temperatures_k.clone(),
            snapshots: s.snapshots,
            realizations: s.realizations,
            t_total: i.t_total_s,
            dt: i.dt_s,
            record_stride: i.record_stride,
            histogram_bin_hz: s.histogram_bin_hz,
            resolved_modes: s.resolved_modes,
            exponent_tolerance: s.exponent_tolerance,
            support_threshold: s.support_threshold,
            peak_prominence_db: s.peak_prominence_db,
            exb_min_db: s.exb_min_db,
            cyclotron_target_db: s.cyclotron_target_db,
            cyclotron_tolerance_db: s.cyclotron_tolerance_db,
            sho_samples: s.sho_samples,
        });
        let p = &self.sampler;
        let base = SamplerConfig::default();
        spec.sampler = SamplerConfig {
            t_par: p.t_par_k.unwrap_or(base.t_par),
            mh_burn_in_scans: p.burn_in_scans.unwrap_or(base.mh_burn_in_scans),
            mh_step_radius: p.step_radius.unwrap_or(base.mh_step_radius),
            snapshot_stride: p.snapshot_stride.unwrap_or(base.snapshot_stride),
            ..spec.sampler.clone()
        };
        if let Some(o) = &self.odf {
            spec.odf = o.clone();
        }
    }

    /// Resolves the run of `kind`; the flags take precedence over the file.
    pub fn resolve(&self, kind: StudyKind, preset: Option<Preset>, seed: Option<u64>) -> Result<ResolvedRun, CliError> {
        let preset = preset.or(self.preset).unwrap_or_default();
        let mut spec = StudySpec::preset(kind, preset);
        self.apply(&mut spec);
        let (seed, seed_source) = match (seed, self.seed) {
            (Some(s), _) => (s, SeedSource::Flag),
            (None, Some(s)) => (s, SeedSource::Config),
            (None, None) => (entropy_seed(), SeedSource::Entropy),
        };
        spec.rng_seed = seed;
        spec.sampler.rng_seed = seed;
        spec.validate()?;
        let trap = self.trap_config(spec.n_ions)?;
        Ok(ResolvedRun {
            trap,
            spec,
            seed,
            seed_source,
        })
    }
}

/// A seed from the process's hash randomization, used only when none is
/// configured.
fn entropy_seed() -> u64 {
    use std::hash::{BuildHasher, Hasher};
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos()),
    );
    h.finish()
}
