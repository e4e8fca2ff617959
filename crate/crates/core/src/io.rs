//! File formats: CSV tables with JSON headers, mode-set JSON, snapshot
//! ensembles, and a raw little-endian trajectory dump with a JSON sidecar.
//! Everything written here is in SI units.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::dynamics::Trajectory;
use crate::equilibrium::EquilibriumConfiguration;
use crate::error::{Error, Result};
use crate::linmodes::{Branch, DrumheadModes, InPlaneModes};
use crate::modemetrics::ModeMetrics;
use crate::physcore::Trap;
use crate::spectra::{Spectrum, SpectrumKind};
use crate::thermal::SnapshotEnsemble;

/// A named numeric table, written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// `<stem>.csv` with `(index, x, y)` in metres and `<stem>.json` with the
/// energy, tolerance and seed descriptor.
pub fn write_equilibrium(dir: &Path, stem: &str, trap: &Trap, eq: &EquilibriumConfiguration) -> Result<()> {
    let mut t = Table::new(stem, &["index", "x_m", "y_m"]);
    for (i, p) in eq.positions_si(trap).iter().enumerate() {
        t.push(vec![i as f64, p[0], p[1]]);
    }
    t.write_csv(&dir.join(format!("{stem}.csv")))?;
    let header = json!({
        "n_ions": eq.n_ions(),
        "energy_j": eq.energy_si(trap),
        "gradient_norm_n": eq.gradient_norm_si(trap),
        "tolerance_scaled": eq.tolerance,
        "iterations": eq.iterations,
        "min_hessian_eigenvalue_scaled": eq.min_hessian_eigenvalue,
        "seed_descriptor": eq.seed_descriptor,
    });
    write_json(&dir.join(format!("{stem}.json")), &header)
}

/// Mode-set JSON (frequencies in Hz, branch labels, metrics) plus CSV
/// dumps of the eigenvectors: one column per drumhead mode, and real and
/// imaginary parts of the position block of each in-plane mode.
pub fn write_mode_set(
    dir: &Path,
    trap: &Trap,
    inplane: &InPlaneModes,
    drumhead: &DrumheadModes,
    metrics: &ModeMetrics,
) -> Result<()> {
    let inplane_hz: Vec<f64> = inplane.frequencies.iter().map(|w| trap.hertz(*w)).collect();
    let branches: Vec<&str> = (0..inplane.len())
        .map(|n| match inplane.branch(n) {
            Branch::ExB => "exb",
            Branch::Cyclotron => "cyclotron",
        })
        .collect();
    let drum_hz: Vec<f64> = drumhead.frequencies.iter().map(|w| trap.hertz(*w)).collect();
    let doc = json!({
        "n_ions": inplane.n_ions(),
        "inplane": {
            "frequencies_hz": inplane_hz,
            "branch": branches,
            "energy_ratio": metrics.r_n,
            "helicity": metrics.chi_n,
            "msd_m2": metrics.msd_n,
            "msd_temperature_k": metrics.reference_temperature,
        },
        "drumhead": {
            "frequencies_hz": drum_hz,
            "entropy_bits": metrics.entropy_n,
            "support_number": metrics.support_n,
        },
    });
    write_json(&dir.join("modes.json"), &doc)?;

    let n = drumhead.len();
    let mut t = Table::with_columns("drumhead_vectors", (0..n).map(|k| format!("mode_{k}")).collect());
    for j in 0..n {
        t.push((0..n).map(|k| drumhead.eigenvectors[(j, k)]).collect());
    }
    t.write_csv(&dir.join("drumhead_vectors.csv"))?;

    let m = inplane.len();
    let mut cols = Vec::with_capacity(2 * m);
    for k in 0..m {
        cols.push(format!("mode_{k}_re"));
        cols.push(format!("mode_{k}_im"));
    }
    let mut t = Table::with_columns("inplane_vectors", cols);
    for row in 0..2 * inplane.n_ions() {
        let mut r = Vec::with_capacity(2 * m);
        for k in 0..m {
            let c = inplane.vectors[(row, k)];
            r.push(c.re);
            r.push(c.im);
        }
        t.push(r);
    }
    t.write_csv(&dir.join("inplane_vectors.csv"))
}

/// `<stem>.csv` with `(frequency_hz, value)` (plus `db` for a PSD) and
/// `<stem>.json` with the kind, ensemble size, normalization and any
/// caller-supplied fields.
pub fn write_spectrum(dir: &Path, stem: &str, s: &Spectrum, extra: serde_json::Value) -> Result<()> {
    let psd = s.kind == SpectrumKind::Psd;
    let mut t = if psd {
        Table::new(stem, &["frequency_hz", "psd_m2_per_hz", "db"])
    } else {
        Table::new(stem, &["frequency_hz", "bright_fraction"])
    };
    for (f, v) in s.frequencies.iter().zip(&s.values) {
        if psd {
            t.push(vec![*f, *v, 10.0 * v.log10()]);
        } else {
            t.push(vec![*f, *v]);
        }
    }
    t.write_csv(&dir.join(format!("{stem}.csv")))?;
    let mut meta = json!({
        "kind": s.kind,
        "axis": s.axis,
        "n_realizations": s.n_realizations,
        "bin_width_hz": s.bin_width(),
    });
    if psd {
        meta["normalization"] = json!("P(f) = (dt^2 / T) |DFT|^2, one-sided, summed over ions");
    }
    if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
        m.extend(e);
    }
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

/// `<stem>.csv` with `(snapshot, ion, x, y)` in metres and `<stem>.json`
/// with temperature, scans, stride and seed.
pub fn write_snapshots(
    dir: &Path,
    stem: &str,
    trap: &Trap,
    ens: &SnapshotEnsemble,
    scans: usize,
    stride: usize,
    seed: u64,
) -> Result<()> {
    let l = trap.units.length;
    let mut t = Table::new(stem, &["snapshot", "ion", "x_m", "y_m"]);
    for (s, snap) in ens.snapshots.iter().enumerate() {
        for (j, p) in snap.iter().enumerate() {
            t.push(vec![s as f64, j as f64, p[0] * l, p[1] * l]);
        }
    }
    t.write_csv(&dir.join(format!("{stem}.csv")))?;
    let header = json!({
        "t_perp_k": ens.temperature,
        "scans": scans,
        "stride": stride,
        "seed": seed,
        "n_snapshots": ens.snapshots.len(),
        "acceptance_rate": ens.acceptance_rate,
        "mean_delta_phi_per_ion_j": ens.mean_delta_phi_per_ion,
        "zero_temperature": ens.zero_temperature,
    });
    write_json(&dir.join(format!("{stem}.json")), &header)
}

/// Raw dump of a trajectory: for every sample, `t` followed by
/// `x y z vx vy vz` of each ion, all little-endian f64. The sidecar
/// `<stem>.json` records the layout and `extra` (seed, config hash).
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory, extra: serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.bin")))?);
    for (k, t) in traj.times.iter().enumerate() {
        w.write_all(&t.to_le_bytes())?;
        for (p, v) in traj.positions[k].iter().zip(&traj.velocities[k]) {
            for c in p.iter().chain(v) {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    let mut meta = json!({
        "format": "f64-le; per sample: t, then per ion x y z vx vy vz (SI)",
        "n_samples": traj.times.len(),
        "n_ions": traj.n_ions(),
        "sample_interval_s": traj.sample_interval(),
        "warnings": traj.warnings,
    });
    if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
        m.extend(e);
    }
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

/// Reads back a [`write_trajectory`] dump.
pub fn read_trajectory(path: &Path, n_ions: usize) -> Result<Vec<(f64, Vec<[f64; 6]>)>> {
    let bytes = std::fs::read(path)?;
    let record = 8 * (1 + 6 * n_ions);
    if bytes.len() % record != 0 {
        return Err(Error::ShapeMismatch {
            expected: record,
            actual: bytes.len() % record,
        });
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    Ok(bytes
        .chunks(record)
        .enumerate()
        .map(|(k, _)| {
            let base = k * record;
            let ions = (0..n_ions)
                .map(|j| std::array::from_fn(|c| f(base + 8 * (1 + 6 * j + c))))
                .collect();
            (f(base), ions)
        })
        .collect())
}
