use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physcore::potential::single_ion_delta;
use crate::physcore::Trap;

/// Simulated-annealing pre-pass for the planar minimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealOptions {
    /// Starting temperature, scaled energy units.
    pub t_start: f64,
    /// Final temperature, scaled energy units.
    pub t_end: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self {
            t_start: 1e-1,
            t_end: 1e-6,
            sweeps: 2000,
            seed: 0,
        }
    }
}

pub(crate) fn anneal(trap: &Trap, xy: &[[f64; 2]], opts: &AnnealOptions) -> Result<Vec<[f64; 2]>> {
    if !(opts.t_start > 0.0 && opts.t_end > 0.0 && opts.sweeps > 0) {
        return Err(Error::InvalidConfig("annealing needs positive temperatures and sweeps".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pos: Vec<_> = xy.iter().map(|p| nalgebra::Vector3::new(p[0], p[1], 0.0)).collect();
    let ratio = (opts.t_end / opts.t_start).powf(1.0 / opts.sweeps as f64);
    let mut temp = opts.t_start;
    let mut radius = 0.5;
    for _ in 0..opts.sweeps {
        let mut accepted = 0usize;
        for ion in 0..pos.len() {
            let (dx, dy) = loop {
                let dx: f64 = rng.random_range(-1.0..1.0);
                let dy: f64 = rng.random_range(-1.0..1.0);
                if dx * dx + dy * dy <= 1.0 {
                    break (dx * radius, dy * radius);
                }
            };
            let (x, y) = (pos[ion].x + dx, pos[ion].y + dy);
            let delta = match single_ion_delta(trap, &pos, ion, x, y) {
                Ok(d) => d,
                Err(Error::CoincidentIons { .. }) => continue,
                Err(e) => return Err(e),
            };
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                pos[ion].x = x;
                pos[ion].y = y;
                accepted += 1;
            }
        }
        let rate = accepted as f64 / pos.len() as f64;
        radius *= if rate > 0.5 { 1.1 } else { 0.9 };
        radius = radius.clamp(1e-8, 2.0);
        temp *= ratio;
    }
    Ok(pos.iter().map(|p| [p.x, p.y]).collect())
}
