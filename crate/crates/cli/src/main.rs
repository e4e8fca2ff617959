use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use penning_cli::config::NIST_TABLE1;
use penning_cli::{exit, run, Invocation, RunConfig};
use penning_core::studies::{Preset, StudyKind};

/// Simulation studies of two-dimensional ion crystals in a Penning trap.
///
/// Exit codes: 0 success, 1 acceptance check failed, 2 usage error,
/// 3 config parse error, 4 config validation error, 5 unstable trap,
/// 6 numerical failure, 7 I/O error, 8 internal error.
#[derive(Debug, Parser)]
#[command(name = "penning", version)]
struct Args {
    /// TOML run configuration; the bundled NIST parameters when omitted.
    #[arg(long, env = "PENNING_CONFIG")]
    config: Option<PathBuf>,

    /// Study to run, or `all`.
    #[arg(long, env = "PENNING_STUDY", value_parser = parse_study)]
    study: StudySelection,

    #[arg(long, env = "PENNING_PRESET", value_parser = ["ci", "paper"])]
    preset: Option<String>,

    #[arg(long, env = "PENNING_SEED")]
    seed: Option<u64>,

    /// Output directory; one sub-directory per study.
    #[arg(long, env = "PENNING_OUT")]
    out: Option<PathBuf>,

    /// Worker threads; all available cores when omitted.
    #[arg(long, env = "PENNING_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Debug, Clone)]
struct StudySelection(Vec<StudyKind>);

fn parse_study(s: &str) -> Result<StudySelection, String> {
    if s == "all" {
        return Ok(StudySelection(StudyKind::ALL.to_vec()));
    }
    s.parse::<StudyKind>().map(|k| StudySelection(vec![k])).map_err(|_| {
        let names: Vec<&str> = StudyKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown study '{s}'; expected one of: all, {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let loaded = match &args.config {
        Some(path) => RunConfig::load(path).map(|(c, t)| (c, t, path.display().to_string())),
        None => RunConfig::parse(NIST_TABLE1, "nist-table1.cfg (bundled)")
            .map(|c| (c, NIST_TABLE1.to_string(), "nist-table1.cfg (bundled)".to_string())),
    };
    let (config, config_text, config_origin) = match loaded {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let threads = args
        .threads
        .map(|t| t as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(exit::INTERNAL as u8);
    }
    let inv = Invocation {
        config,
        config_text,
        config_origin,
        studies: args.study.0,
        preset: args.preset.as_deref().map(|p| p.parse::<Preset>().expect("validated by clap")),
        seed: args.seed,
        out: args.out,
    };
    ExitCode::from(run(&inv) as u8)
}
