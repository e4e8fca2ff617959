//! Configuration, dispatch and output for the `penning` binary.

pub mod config;

use std::path::{Path, PathBuf};

use penning_core::physcore::derive_frequencies;
use penning_core::studies::{run_study, Preset, StudyKind, Summary};
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{ResolvedRun, RunConfig, SeedSource};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// The study ran but at least one acceptance check failed.
    pub const CHECK_FAILED: i32 = 1;
    /// Bad flags or unknown study name.
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const UNSTABLE_TRAP: i32 = 5;
    /// Minimizer, eigen-solver or integrator failure.
    pub const NUMERICAL: i32 = 6;
    pub const IO: i32 = 7;
    /// Inconsistent data passed between library stages.
    pub const INTERNAL: i32 = 8;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(penning_core::Error),
}

impl From<penning_core::Error> for CliError {
    fn from(e: penning_core::Error) -> Self {
        match e {
            penning_core::Error::InvalidConfig(m) => CliError::Validation(m),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use penning_core::Error as E;
        match self {
            CliError::Parse { .. } => exit::PARSE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e {
                E::InvalidConfig(_) => exit::VALIDATION,
                E::UnstableTrap(_) => exit::UNSTABLE_TRAP,
                E::CoincidentIons { .. }
                | E::NoConvergence { .. }
                | E::SaddleDetected { .. }
                | E::NotPositiveDefinite { .. }
                | E::FactorizationFailure
                | E::ImaginaryFrequency(_)
                | E::StepTooLarge { .. }
                | E::NumericalBlowup { .. } => exit::NUMERICAL,
                E::Io(_) | E::Json(_) => exit::IO,
                E::GridMismatch(_) | E::DurationMismatch { .. } | E::ShapeMismatch { .. } => exit::INTERNAL,
            },
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::PARSE => "parse_error",
            exit::VALIDATION => "validation_error",
            exit::UNSTABLE_TRAP => "unstable_trap",
            exit::NUMERICAL => "numerical_failure",
            exit::IO => "io_error",
            _ => "internal_error",
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs to [`run`] after flag and environment handling.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: RunConfig,
    /// Text of the configuration, for hashing.
    pub config_text: String,
    pub config_origin: String,
    pub studies: Vec<StudyKind>,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Metadata written next to every study's outputs.
pub fn metadata(inv: &Invocation, run: &ResolvedRun) -> Result<serde_json::Value, CliError> {
    let f = derive_frequencies(&run.trap)?;
    let hz = |w: f64| w / std::f64::consts::TAU;
    let resolved = json!({
        "study": run.spec.kind,
        "trap": run.trap,
        "frequencies_hz": {
            "cyclotron": hz(f.omega_c),
            "reduced_cyclotron": hz(f.omega_c_prime),
            "axial": hz(f.omega_par),
            "perpendicular": hz(f.omega_perp),
            "wall": hz(f.omega_w),
            "rotation": hz(run.trap.omega_r),
        },
        "spec": run.spec,
    });
    let canonical = serde_json::to_vec(&resolved).map_err(penning_core::Error::from)?;
    Ok(json!({
        "program": "penning",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": run.seed,
        "seed_source": run.seed_source,
        "config_origin": inv.config_origin,
        "config_sha256": sha256_hex(inv.config_text.as_bytes()),
        "resolved_sha256": sha256_hex(&canonical),
        "resolved": resolved,
    }))
}

/// Writes `<out>/<study>/error.json` describing a failed run.
fn write_error(dir: &Path, kind: StudyKind, err: &CliError) {
    let doc = json!({
        "study": kind,
        "kind": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    });
    let d = dir.join(kind.name());
    if std::fs::create_dir_all(&d).is_ok() {
        let _ = penning_core::io::write_json(&d.join("error.json"), &doc);
    }
}

fn run_one(inv: &Invocation, out: &Path, kind: StudyKind) -> Result<Summary, CliError> {
    let run = inv.config.resolve(kind, inv.preset, inv.seed)?;
    let meta = metadata(inv, &run)?;
    eprintln!(
        "[{kind}] preset={:?} n_ions={} seed={} ({:?})",
        run.spec.preset, run.spec.n_ions, run.seed, run.seed_source
    );
    let start = std::time::Instant::now();
    let outcome = run_study(&run.trap, &run.spec)?;
    let dir = outcome.write(out, &meta)?;
    eprintln!("[{kind}] finished in {:.1} s, wrote {}", start.elapsed().as_secs_f64(), dir.display());
    Ok(outcome.summary)
}

/// Runs every requested study and returns the process exit code.
pub fn run(inv: &Invocation) -> i32 {
    let out = inv
        .out
        .clone()
        .or_else(|| inv.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let mut code = exit::SUCCESS;
    for &kind in &inv.studies {
        match run_one(inv, &out, kind) {
            Ok(summary) => {
                for c in &summary.checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    println!("{kind} {tag} {} = {:.6e} ({})", c.name, c.value, c.criterion);
                }
                if !summary.passed && code == exit::SUCCESS {
                    code = exit::CHECK_FAILED;
                }
            }
            Err(e) => {
                eprintln!("[{kind}] error: {e}");
                write_error(&out, kind, &e);
                return e.exit_code();
            }
        }
    }
    code
}
