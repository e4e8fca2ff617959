use std::path::Path;
use std::process::Command;

use penning_cli::config::NIST_TABLE1;
use penning_cli::{exit, CliError, RunConfig};
use penning_core::physcore::derive_frequencies;
use penning_core::studies::StudyKind;

fn penning() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_penning"));
    for var in ["CONFIG", "STUDY", "PRESET", "SEED", "OUT", "THREADS"] {
        c.env_remove(format!("PENNING_{var}"));
    }
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn shipped_config_has_nist_frequencies() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/nist-table1.cfg")).unwrap();
    assert_eq!(text, NIST_TABLE1);
    let cfg = RunConfig::parse(&text, "nist").unwrap();
    let f = derive_frequencies(&cfg.trap_config(120).unwrap()).unwrap();
    let hz = |w: f64| w / std::f64::consts::TAU;
    for (got, want) in [(hz(f.omega_c), 7.60e6), (hz(f.omega_par), 1.59e6), (hz(f.omega_w), 68.0e3)] {
        assert!((got / want - 1.0).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn empty_file_is_a_validation_error() {
    let e = RunConfig::parse("", "empty").unwrap_err();
    assert!(matches!(&e, CliError::Validation(m) if m.contains("[trap]")), "{e}");
    assert_eq!(e.exit_code(), exit::VALIDATION);
}

#[test]
fn unknown_key_reports_its_line() {
    let text = "[trap]\nrotation_hz = 180e3\ncyclotron_hz = 7.6e6\naxial_hz = 1.59e6\nwall_hz = 68e3\nwal_hz = 1\n";
    match RunConfig::parse(text, "typo.cfg").unwrap_err() {
        e @ CliError::Parse { line, .. } => {
            assert_eq!(line, 6, "{e}");
            assert_eq!(e.exit_code(), exit::PARSE);
            assert!(e.to_string().starts_with("typo.cfg:6:"), "{e}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn wall_above_radial_confinement_is_unstable() {
    // radial frequency at these settings is about 267 kHz
    let text = "[trap]\nrotation_hz = 180e3\ncyclotron_hz = 7.6e6\naxial_hz = 1.59e6\nwall_hz = 300e3\n";
    let e = RunConfig::parse(text, "unstable").unwrap_err();
    assert_eq!(e.exit_code(), exit::UNSTABLE_TRAP, "{e}");
}

#[test]
fn mixed_parameter_sets_are_rejected() {
    let text = "[trap]\nrotation_hz = 180e3\ncyclotron_hz = 7.6e6\naxial_hz = 1.59e6\nwall_hz = 68e3\nb_field_t = 4.5\n";
    assert_eq!(RunConfig::parse(text, "mixed").unwrap_err().exit_code(), exit::VALIDATION);
}

#[test]
fn physical_parameters_match_frequency_set() {
    let a = RunConfig::parse(NIST_TABLE1, "nist").unwrap().trap_config(10).unwrap();
    let text = format!(
        "[trap]\nrotation_hz = 180e3\nb_field_t = {:e}\nv0_v = {:e}\nvw_v = {:e}\n",
        a.b_field, a.v0, a.vw
    );
    let b = RunConfig::parse(&text, "phys").unwrap().trap_config(10).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_study_is_a_usage_error() {
    let out = penning().args(["--study", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot_histogram"));
}

#[test]
fn unstable_config_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.cfg",
        "[trap]\nrotation_hz = 180e3\ncyclotron_hz = 7.6e6\naxial_hz = 1.59e6\nwall_hz = 300e3\n",
    );
    let out = penning().arg("--config").arg(&cfg).args(["--study", "sho_appendix"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::UNSTABLE_TRAP));
}

#[test]
fn sho_appendix_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = penning()
        .args(["--study", "sho_appendix", "--seed", "7", "--threads", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::SUCCESS), "{}", String::from_utf8_lossy(&out.stderr));
    let d = dir.path().join("sho_appendix");
    let moments = std::fs::read_to_string(d.join("moments.csv")).unwrap();
    assert_eq!(moments.lines().count(), 3);
    let summary = read_json(&d.join("summary.json"));
    assert_eq!(summary["passed"], true);
    let meta = read_json(&d.join("metadata.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["seed_source"], "flag");
    assert_eq!(meta["resolved"]["spec"]["rng_seed"], 7);
    assert_eq!(meta["resolved_sha256"].as_str().unwrap().len(), 64);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn environment_mirrors_flags_and_runs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.cfg",
        &format!("{NIST_TABLE1}\n[study]\nsho_samples = 20000\n"),
    );
    let run = |sub: &str| {
        let out = penning()
            .env("PENNING_CONFIG", &cfg)
            .env("PENNING_STUDY", "sho_appendix")
            .env("PENNING_SEED", "11")
            .env("PENNING_OUT", dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.code().is_some_and(|c| c <= exit::CHECK_FAILED));
        dir.path().join(sub).join("sho_appendix")
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    let meta = read_json(&a.join("metadata.json"));
    assert_eq!(meta["resolved"]["spec"]["sho_samples"], 20000);
}

#[test]
fn missing_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "noseed.cfg",
        "[trap]\nrotation_hz = 180e3\ncyclotron_hz = 7.6e6\naxial_hz = 1.59e6\nwall_hz = 68e3\n[study]\nsho_samples = 1000\n",
    );
    let out = penning()
        .arg("--config")
        .arg(&cfg)
        .args(["--study", "sho_appendix", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.code().is_some_and(|c| c <= exit::CHECK_FAILED));
    let meta = read_json(&dir.path().join("sho_appendix/metadata.json"));
    assert_eq!(meta["seed_source"], "entropy");
    assert!(meta["seed"].is_u64());
}

#[test]
fn every_study_name_is_accepted() {
    for k in StudyKind::ALL {
        let out = penning().args(["--study", k.name(), "--config", "/nonexistent/x.cfg"]).output().unwrap();
        assert_eq!(out.status.code(), Some(exit::IO), "{k}");
    }
}
