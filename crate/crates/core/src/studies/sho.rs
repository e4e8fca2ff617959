use serde::{Deserialize, Serialize};

use super::{stream_index, Check, StudySpec};
use crate::error::Result;
use crate::io::Table;
use crate::physcore::TrapConfig;
use crate::rng::substream;
use crate::thermal::{sho_kick_moment_study, Estimate, MomentReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShoAppendixResult {
    pub report: MomentReport,
}

/// `|a - b|` in units of the combined standard error.
fn separation(a: Estimate, b: Estimate) -> f64 {
    (a.mean - b.mean).abs() / a.stderr.hypot(b.stderr)
}

impl ShoAppendixResult {
    pub fn checks(&self) -> Vec<Check> {
        let r = &self.report;
        let z1 = r.method1.x2v2.z_score(r.expected_x2v2);
        let z2 = r.method2.x2v2.z_score(1.5 * r.expected_x2v2);
        let ratio = r.fourth_moment_ratio();
        let zr = ratio.z_score(1.5);
        let zx = separation(r.method1.x2, r.method2.x2);
        let zv = separation(r.method1.v2, r.method2.v2);
        vec![
            Check::new("method1_x2v2_sigma", z1, "<= 3 (target kT^2/(km))", z1 <= 3.0),
            Check::new("method2_x2v2_sigma", z2, "<= 3 (target 1.5 kT^2/(km))", z2 <= 3.0),
            Check::new("fourth_moment_ratio_sigma", zr, "<= 3 (target 1.5)", zr <= 3.0),
            Check::new("x2_methods_agree_sigma", zx, "<= 3", zx <= 3.0),
            Check::new("v2_methods_agree_sigma", zv, "<= 3", zv <= 3.0),
        ]
    }

    pub fn tables(&self) -> Vec<Table> {
        let r = &self.report;
        let mut t = Table::new(
            "moments",
            &["method", "x2", "x2_stderr", "v2", "v2_stderr", "xv", "xv_stderr", "x2v2", "x2v2_stderr"],
        );
        for (k, m) in [(1.0, &r.method1), (2.0, &r.method2)] {
            t.push(vec![
                k,
                m.x2.mean,
                m.x2.stderr,
                m.v2.mean,
                m.v2.stderr,
                m.xv.mean,
                m.xv.stderr,
                m.x2v2.mean,
                m.x2v2.stderr,
            ]);
        }
        vec![t]
    }
}

/// Velocity-kick moment analysis of a single harmonic oscillator with the
/// trap's axial stiffness, at the first temperature of the grid.
pub fn sho_appendix(trap: &TrapConfig, spec: &StudySpec) -> Result<ShoAppendixResult> {
    let freqs = crate::physcore::derive_frequencies(trap)?;
    let stiffness = trap.ion_mass * freqs.omega_par * freqs.omega_par;
    let mut rng = substream(spec.rng_seed, stream_index(0, 0, 0));
    let report = sho_kick_moment_study(stiffness, trap.ion_mass, spec.temperatures[0], spec.sho_samples, &mut rng);
    Ok(ShoAppendixResult { report })
}
