//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits non-zero if any
//! criterion fails. Pass criterion numbers as arguments to run a subset.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use penning_core::dynamics::{integrate_with, IntegratorConfig};
use penning_core::equilibrium::{equilibrium_for, EquilibriumConfiguration};
use penning_core::linmodes::{build_at, build_linearized_model, drumhead_modes, inplane_modes, InPlaneModes, LinearizedModel};
use penning_core::modemetrics::{energy_ratio, helicity};
use penning_core::physcore::constants::BOLTZMANN;
use penning_core::physcore::potential::{accelerations_into, axial_hessian, planar_hessian};
use penning_core::rng::{seeded, substream};
use penning_core::studies::{
    fluctuation_surface, odf_scan, psd_broadening, support_correlation, vk_comparison, Check, Preset, StudyKind,
    StudySpec,
};
use penning_core::thermal::{
    boltzmann_weights, discrete_metropolis, mh_sample_inplane, mode_energies, project_mode_amplitudes,
    sample_velocity_kicks, sho_kick_moment_study, thermal_initial_state, Estimate, Initialization, SamplerConfig,
};
use penning_core::{Trap, TrapConfig};

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn all(parts: Vec<(bool, String)>) -> Verdict {
    let passed = parts.iter().all(|p| p.0);
    let detail = parts
        .into_iter()
        .map(|(ok, s)| if ok { s } else { format!("[failed] {s}") })
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(passed, detail)
}

fn from_checks(checks: &[Check]) -> Vec<(bool, String)> {
    checks
        .iter()
        .map(|c| (c.passed, format!("{} = {:.4} ({})", c.name, c.value, c.criterion)))
        .collect()
}

fn crystal(n: usize) -> (Trap, EquilibriumConfiguration, LinearizedModel, InPlaneModes) {
    let trap = Trap::nist(n).unwrap();
    let eq = equilibrium_for(&trap).unwrap();
    let model = build_linearized_model(&trap, &eq).unwrap();
    let modes = inplane_modes(&model).unwrap();
    (trap, eq, model, modes)
}

/// Characteristic angular frequencies evaluated directly from the trap
/// parameters: `(w_c', w_perp, w_par)`.
fn hand_frequencies(cfg: &TrapConfig) -> (f64, f64, f64) {
    let qm = cfg.ion_charge / cfg.ion_mass;
    let wc = qm * cfg.b_field;
    let wpar2 = 2.0 * qm * cfg.v0;
    let wperp2 = wc * cfg.omega_r - cfg.omega_r * cfg.omega_r - 0.5 * wpar2;
    (wc - 2.0 * cfg.omega_r, wperp2.sqrt(), wpar2.sqrt())
}

fn single_ion_pair(wcp: f64, wperp: f64) -> (f64, f64) {
    let root = (wcp * wcp + 4.0 * wperp * wperp).sqrt();
    ((root + wcp) / 2.0, (root - wcp) / 2.0)
}

fn criterion_1() -> Verdict {
    let mut cfg = TrapConfig::nist(1);
    cfg.vw = 0.0;
    let trap = Trap::new(cfg.clone()).unwrap();
    let model = build_at(&trap, &[[0.0, 0.0]]).unwrap();
    let modes = inplane_modes(&model).unwrap();
    let (wcp, wperp, _) = hand_frequencies(&cfg);
    let (wp, wm) = single_ion_pair(wcp, wperp);
    let got_m = trap.omega_si(modes.frequencies[0]);
    let got_p = trap.omega_si(modes.frequencies[1]);
    let em = (got_m / wm - 1.0).abs();
    let ep = (got_p / wp - 1.0).abs();
    let eprod = (got_p * got_m / (wperp * wperp) - 1.0).abs();
    all(vec![
        (em <= 1e-10, format!("w-/2pi = {:.6} kHz, rel err {em:.1e}", got_m / TAU / 1e3)),
        (ep <= 1e-10, format!("w+/2pi = {:.6} MHz, rel err {ep:.1e}", got_p / TAU / 1e6)),
        (eprod <= 1e-10, format!("w+ w- / w_perp^2 - 1 = {eprod:.1e}")),
    ])
}

/// `<u_k|E|u_n>` normalized, and `||D_H u - w E u||`, built directly from
/// the stiffness and Lorentz blocks.
fn orthogonality_and_residual(model: &LinearizedModel, modes: &InPlaneModes) -> (f64, f64) {
    let n2 = model.k_perp.nrows();
    let c = |v: f64| Complex64::new(v, 0.0);
    let mut e = DMatrix::<Complex64>::zeros(2 * n2, 2 * n2);
    let mut dh = DMatrix::<Complex64>::zeros(2 * n2, 2 * n2);
    let i = Complex64::new(0.0, 1.0);
    for r in 0..n2 {
        e[(n2 + r, n2 + r)] = c(1.0);
        for s in 0..n2 {
            e[(r, s)] = c(model.k_perp[(r, s)]);
            dh[(r, n2 + s)] = i * model.k_perp[(r, s)];
            dh[(n2 + r, s)] = -i * model.k_perp[(r, s)];
            dh[(n2 + r, n2 + s)] = i * model.lorentz[(r, s)];
        }
    }
    let u = &modes.vectors;
    let eu = &e * u;
    let gram = u.adjoint() * &eu;
    let mut off = 0.0f64;
    for a in 0..modes.len() {
        for b in 0..modes.len() {
            if a != b {
                off = off.max(gram[(a, b)].norm() / (gram[(a, a)].re * gram[(b, b)].re).sqrt());
            }
        }
    }
    let dhu = &dh * u;
    let mut res = 0.0f64;
    for k in 0..modes.len() {
        let norm = gram[(k, k)].re.sqrt();
        let r = (dhu.column(k) - eu.column(k) * c(modes.frequencies[k])).norm() / norm;
        res = res.max(r);
    }
    (off, res)
}

fn criterion_2() -> Verdict {
    let mut parts = Vec::new();
    for n in [5, 20, 120] {
        let (_, _, model, modes) = crystal(n);
        let (off, res) = orthogonality_and_residual(&model, &modes);
        parts.push((off <= 1e-8 && res <= 1e-8, format!("N={n}: offdiag {off:.1e}, residual {res:.1e}")));
    }
    all(parts)
}

fn criterion_3() -> Verdict {
    let (trap, _, model, modes) = crystal(120);
    let n = trap.n_ions();
    let wcp = model.cyclotron;
    let mut identity = 0.0f64;
    let mut exb_min_r = f64::INFINITY;
    let mut cyc_chi = 0.0f64;
    let mut approx_err = 0.0f64;
    let (wcp_si, wperp_si, _) = hand_frequencies(&trap.config);
    let wplus = trap.scaled_omega(single_ion_pair(wcp_si, wperp_si).0);
    for k in 0..modes.len() {
        let w = modes.frequencies[k];
        let r = energy_ratio(&model, &modes, k);
        let chi = helicity(&modes, k);
        identity = identity.max((r - (1.0 + wcp / w * chi)).abs() / r.abs());
        if k < n {
            exb_min_r = exb_min_r.min(r);
        } else {
            cyc_chi = cyc_chi.max((chi + 1.0).abs());
            let approx = 1.0 - wcp / wplus + wcp / (wplus * wplus) * (w - wplus);
            approx_err = approx_err.max((approx - r).abs() / r.abs());
        }
    }
    all(vec![
        (identity <= 1e-8, format!("max |R - (1 + wc'/w chi)| / R = {identity:.1e}")),
        (exb_min_r > 10.0, format!("ExB min R = {exb_min_r:.1}")),
        (cyc_chi <= 0.05, format!("cyclotron max |chi + 1| = {cyc_chi:.2e}")),
        (approx_err <= 0.05, format!("cyclotron linear R estimate max rel err = {approx_err:.3}")),
    ])
}

/// Central-difference derivative of the force field at zero velocity.
fn fd_hessians(trap: &Trap, xy: &[[f64; 2]], h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = xy.len();
    let base: Vec<Vector3<f64>> = xy.iter().map(|p| Vector3::new(p[0], p[1], 0.0)).collect();
    let vel = vec![Vector3::zeros(); n];
    let mut acc = vec![Vector3::zeros(); n];
    let mut force = |pos: &[Vector3<f64>]| -> Vec<Vector3<f64>> {
        accelerations_into(trap, pos, &vel, &mut acc).unwrap();
        acc.clone()
    };
    let mut kp = DMatrix::zeros(2 * n, 2 * n);
    let mut kz = DMatrix::zeros(n, n);
    for j in 0..n {
        for axis in 0..3 {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[j][axis] += h;
            minus[j][axis] -= h;
            let (fp, fm) = (force(&plus), force(&minus));
            for i in 0..n {
                let d = -(fp[i] - fm[i]) / (2.0 * h);
                match axis {
                    2 => kz[(i, j)] = d.z,
                    a => {
                        kp[(2 * i, 2 * j + a)] = d.x;
                        kp[(2 * i + 1, 2 * j + a)] = d.y;
                    }
                }
            }
        }
    }
    (kp, kz)
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax()
}

fn criterion_4() -> Verdict {
    let mut worst: (f64, usize) = (0.0, 0);
    for n in 1..=10 {
        let trap = Trap::nist(n).unwrap();
        let eq = equilibrium_for(&trap).unwrap();
        let (kp_fd, kz_fd) = fd_hessians(&trap, &eq.positions, 1e-5);
        let kp = planar_hessian(&trap, &eq.positions).unwrap();
        let kz = axial_hessian(&trap, &eq.positions).unwrap();
        let e = rel_diff(&kp, &kp_fd).max(rel_diff(&kz, &kz_fd));
        if e >= worst.0 {
            worst = (e, n);
        }
    }
    Verdict::new(
        worst.0 <= 1e-6,
        format!("max relative deviation {:.1e} (N = {}), N = 1..=10", worst.0, worst.1),
    )
}

fn criterion_5() -> Verdict {
    let (trap, _, model, modes) = crystal(20);
    let kelvin = 1e-3;
    let kt = trap.thermal_energy(kelvin);
    let draws = 20_000;
    let mut rng = substream(1, 0);
    let mut energies = vec![Vec::with_capacity(draws); modes.len()];
    for _ in 0..draws {
        let v = sample_velocity_kicks(&trap, kelvin, &mut rng);
        let e = mode_energies(&modes, &project_mode_amplitudes(&modes, &v));
        for (k, ek) in e.into_iter().enumerate() {
            energies[k].push(ek);
        }
    }
    let mut worst = (0.0f64, 0usize);
    let mut chi2 = 0.0;
    for (k, e) in energies.iter().enumerate() {
        let target = kt / (1.0 + energy_ratio(&model, &modes, k));
        let z = Estimate::from_samples(e).z_score(target);
        chi2 += z * z;
        if z > worst.0 {
            worst = (z, k);
        }
    }
    // sum of squared z-scores over independent modes is chi-squared with
    // one degree of freedom per mode
    let dof = modes.len() as f64;
    all(vec![
        (
            worst.0 <= 3.0,
            format!("{draws} draws, {} modes, max |z| = {:.2} (mode {})", modes.len(), worst.0, worst.1),
        ),
        (
            (chi2 - dof).abs() <= 3.0 * (2.0 * dof).sqrt(),
            format!("sum z^2 = {chi2:.1} for {dof} modes"),
        ),
    ])
}

fn criterion_6() -> Verdict {
    let (trap, eq, _, _) = crystal(120);
    let t = 1e-3;
    let cfg = SamplerConfig {
        t_perp: t,
        mh_scans: 2000 * 100,
        snapshot_stride: 100,
        rng_seed: 6,
        ..SamplerConfig::default()
    };
    let ens = mh_sample_inplane(&trap, &eq, &cfg).unwrap();
    let rel = ens.mean_delta_phi_per_ion / (BOLTZMANN * t);

    let energies = [0.0, 0.3, 0.7, 1.6];
    let beta = 1.2;
    let (batches, per) = (200, 20_000);
    let mut rng = seeded(66);
    let mut freq = vec![Vec::with_capacity(batches); energies.len()];
    for _ in 0..batches {
        let counts = discrete_metropolis(&energies, beta, per, &mut rng);
        for (k, c) in counts.iter().enumerate() {
            freq[k].push(*c as f64 / per as f64);
        }
    }
    let z: f64 = energies
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let exact = (-beta * e).exp() / energies.iter().map(|x| (-beta * x).exp()).sum::<f64>();
            assert!((exact - boltzmann_weights(&energies, beta)[k]).abs() < 1e-15);
            Estimate::from_samples(&freq[k]).z_score(exact)
        })
        .fold(0.0, f64::max);
    all(vec![
        (
            (rel - 1.0).abs() <= 0.1,
            format!(
                "N=120, {} snapshots: <dPhi>/N = {rel:.4} k_B T (acceptance {:.2})",
                ens.snapshots.len(),
                ens.acceptance_rate
            ),
        ),
        (z <= 3.0, format!("4-state chain vs Boltzmann weights: max |z| = {z:.2} (batch means)")),
    ])
}

fn criterion_7() -> Verdict {
    let (trap, eq, model, _) = crystal(120);
    let drum = drumhead_modes(&model).unwrap();
    let sampler = SamplerConfig {
        t_perp: 1e-3,
        ..SamplerConfig::default()
    };
    let state = thermal_initial_state(&trap, &eq, &drum, Initialization::MhVk, &sampler, &mut substream(7, 0)).unwrap();
    let cfg = IntegratorConfig::new(&trap, 560e-6);
    let run = integrate_with(&trap, &state, &cfg, |_, _, _, _| {}).unwrap();
    let frac = run.fractional_energy_fluctuation();
    let thermal = run.thermal_energy_fluctuation(eq.energy_si(&trap));
    all(vec![
        (
            frac < 2e-6,
            format!("N=120, {} steps of {:.3} ns: max |dH|/H = {frac:.2e}", run.steps, run.dt * 1e9),
        ),
        (thermal <= 2e-3, format!("max |dH|/(H - V0) = {thermal:.2e}")),
    ])
}

fn criterion_8() -> Verdict {
    let cfg = TrapConfig::nist(1);
    let (_, _, wpar) = hand_frequencies(&cfg);
    let k = cfg.ion_mass * wpar * wpar;
    let r = sho_kick_moment_study(k, cfg.ion_mass, 0.5e-3, 1_000_000, &mut substream(8, 0));
    let kt = BOLTZMANN * 0.5e-3;
    let target = kt * kt / (k * cfg.ion_mass);
    let z1 = r.method1.x2v2.z_score(target);
    let z2 = r.method2.x2v2.z_score(1.5 * target);
    let agree = |a: Estimate, b: Estimate| (a.mean - b.mean).abs() / a.stderr.hypot(b.stderr);
    let zx = agree(r.method1.x2, r.method2.x2);
    let zv = agree(r.method1.v2, r.method2.v2);
    all(vec![
        (z1 <= 3.0, format!("method 1 x2v2 z = {z1:.2}")),
        (z2 <= 3.0, format!("method 2 x2v2 vs 3/2 z = {z2:.2}")),
        (zx <= 3.0 && zv <= 3.0, format!("second moments agree: z(x2) = {zx:.2}, z(v2) = {zv:.2}")),
    ])
}

fn ci(kind: StudyKind) -> (TrapConfig, StudySpec) {
    let spec = StudySpec::preset(kind, Preset::Ci);
    (TrapConfig::nist(spec.n_ions), spec)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn criterion_9() -> Verdict {
    let (trap, spec) = ci(StudyKind::FluctuationSurface);
    let r = fluctuation_surface(&trap, &spec).unwrap();
    let lt: Vec<f64> = r.temperatures.iter().map(|t| t.ln()).collect();
    let mut parts = Vec::new();
    for (k, p) in r.resolved_exponents(spec.resolved_modes) {
        let ls: Vec<f64> = r.sigma_hz.iter().map(|row| row[k].ln()).collect();
        let slope = least_squares_slope(&lt, &ls);
        parts.push((
            (slope - 0.5).abs() <= 0.1 && (slope - p).abs() < 1e-9,
            format!("mode {} ({:.1} kHz): p = {slope:.3}", k + 1, r.reference_hz[k] / 1e3),
        ));
    }
    parts.insert(0, (parts.len() == spec.resolved_modes, format!("N={}", spec.n_ions)));
    all(parts)
}

fn criterion_10() -> Verdict {
    let (trap, spec) = ci(StudyKind::VkComparison);
    let r = vk_comparison(&trap, &spec).unwrap();
    let band = |s: &penning_core::spectra::Spectrum, (lo, hi): (f64, f64)| {
        let v: Vec<f64> = s
            .frequencies
            .iter()
            .zip(&s.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, v)| *v)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let exb = 10.0 * (band(&r.mhvk_inplane, r.exb_band_hz) / band(&r.vk_inplane, r.exb_band_hz)).log10();
    let cyc = 10.0 * (band(&r.vk_inplane, r.cyclotron_band_hz) / band(&r.mhvk_inplane, r.cyclotron_band_hz)).log10();
    let lo = spec.cyclotron_target_db - spec.cyclotron_tolerance_db;
    let hi = spec.cyclotron_target_db + spec.cyclotron_tolerance_db;
    all(vec![
        ((exb - r.exb_db).abs() < 1e-9 && (cyc - r.cyclotron_db).abs() < 1e-9, format!("N={}, T = 10 mK", spec.n_ions)),
        (exb >= spec.exb_min_db, format!("ExB band MH-VK over VK = {exb:.2} dB (>= {})", spec.exb_min_db)),
        ((lo..=hi).contains(&cyc), format!("cyclotron band VK over MH-VK = {cyc:.2} dB (in [{lo}, {hi}])")),
    ])
}

fn criterion_11() -> Verdict {
    let (trap, spec) = ci(StudyKind::PsdBroadening);
    let (_, wperp, wpar) = hand_frequencies(&trap);
    let tilt = (wpar * wpar - wperp * wperp).sqrt() / TAU;
    let chip = (wpar * wpar - 1.75 * wperp * wperp).sqrt() / TAU;
    let psd = psd_broadening(&trap, &spec).unwrap();
    let refs_ok = (psd.reference.tilt_hz / tilt - 1.0).abs() < 1e-12
        && (psd.reference.chip_hz / chip - 1.0).abs() < 1e-12
        && (psd.reference.cm_hz / (wpar / TAU) - 1.0).abs() < 1e-9;
    let mut parts = vec![(
        refs_ok,
        format!("N={}, references c.m. {:.1} kHz, tilt {:.1} kHz, chip {:.1} kHz", spec.n_ions, wpar / TAU / 1e3, tilt / 1e3, chip / 1e3),
    )];
    parts.extend(from_checks(&psd.checks()).into_iter().map(|(ok, s)| (ok, format!("PSD {s}"))));
    let (trap, spec) = ci(StudyKind::OdfScan);
    let odf = odf_scan(&trap, &spec).unwrap();
    parts.extend(from_checks(&odf.checks()).into_iter().map(|(ok, s)| (ok, format!("ODF {s}"))));
    all(parts)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn criterion_12() -> Verdict {
    let (trap, spec) = ci(StudyKind::SupportCorrelation);
    let r = support_correlation(&trap, &spec).unwrap();
    let (a, b) = (ranks(&r.sigma_hz), ranks(&r.inverse_support));
    let slope_ab = least_squares_slope(&a, &b);
    let slope_ba = least_squares_slope(&b, &a);
    let rho = (slope_ab * slope_ba).sqrt().copysign(slope_ab);
    all(vec![
        ((rho - r.spearman).abs() < 1e-9, format!("N={}, T = {} mK", spec.n_ions, r.temperature * 1e3)),
        (rho > 0.5, format!("Spearman(sigma_n, 1/S_n) = {rho:.3}")),
    ])
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 12] = [
    (1, "single-ion spectrum", criterion_1),
    (2, "E-orthogonality and eigen-residuals", criterion_2),
    (3, "energy ratio and helicity identities", criterion_3),
    (4, "stiffness matrices vs finite differences", criterion_4),
    (5, "velocity-kick energy partition", criterion_5),
    (6, "Metropolis-Hastings thermalization", criterion_6),
    (7, "MD energy conservation", criterion_7),
    (8, "SHO kick moments", criterion_8),
    (9, "sqrt(T) fluctuation law", criterion_9),
    (10, "VK vs MH-VK PSD separation", criterion_10),
    (11, "spectrum shape at 0, 1, 10 mK", criterion_11),
    (12, "support-number correlation", criterion_12),
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name} [{:.1} s]: {}",
            if v.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
