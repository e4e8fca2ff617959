use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::physcore::constants::BOLTZMANN;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    /// `|mean - target| / stderr`
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.stderr
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Moments {
    pub x2: Estimate,
    pub v2: Estimate,
    pub xv: Estimate,
    pub x2v2: Estimate,
}

impl Moments {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let col = |f: &dyn Fn(f64, f64) -> f64| Estimate::from_samples(&pairs.iter().map(|&(x, v)| f(x, v)).collect::<Vec<_>>());
        Self {
            x2: col(&|x, _| x * x),
            v2: col(&|_, v| v * v),
            xv: col(&|x, v| x * v),
            x2v2: col(&|x, v| x * x * v * v),
        }
    }
}

/// Monte-Carlo moments of a harmonic oscillator initialized two ways:
/// independent thermal `x` and `v` (method 1), or a velocity kick at `2T`
/// followed by a random phase of free evolution (method 2). SI units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub stiffness: f64,
    pub mass: f64,
    pub temperature: f64,
    pub n_samples: usize,
    pub method1: Moments,
    pub method2: Moments,
    /// `k_B T / k`
    pub expected_x2: f64,
    /// `k_B T / m`
    pub expected_v2: f64,
    /// `(k_B T)^2 / (k m)`
    pub expected_x2v2: f64,
}

impl MomentReport {
    pub fn fourth_moment_ratio(&self) -> Estimate {
        let (a, b) = (self.method1.x2v2, self.method2.x2v2);
        let mean = b.mean / a.mean;
        let stderr = mean * ((a.stderr / a.mean).powi(2) + (b.stderr / b.mean).powi(2)).sqrt();
        Estimate { mean, stderr }
    }
}

pub fn sho_kick_moment_study<R: Rng + ?Sized>(
    stiffness: f64,
    mass: f64,
    temperature: f64,
    n_samples: usize,
    rng: &mut R,
) -> MomentReport {
    let kt = BOLTZMANN * temperature;
    let omega = (stiffness / mass).sqrt();
    let sx = (kt / stiffness).sqrt();
    let sv = (kt / mass).sqrt();
    let m1: Vec<(f64, f64)> = (0..n_samples)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (sx * a, sv * b)
        })
        .collect();
    let m2: Vec<(f64, f64)> = (0..n_samples)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            let vmax = (2.0f64).sqrt() * sv * g;
            let phase = TAU * rng.random::<f64>();
            (vmax / omega * phase.sin(), vmax * phase.cos())
        })
        .collect();
    MomentReport {
        stiffness,
        mass,
        temperature,
        n_samples,
        method1: Moments::from_pairs(&m1),
        method2: Moments::from_pairs(&m2),
        expected_x2: kt / stiffness,
        expected_v2: kt / mass,
        expected_x2v2: kt * kt / (stiffness * mass),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn moments_small_sample() {
        let r = sho_kick_moment_study(2.0e-12, 1.5e-26, 1e-3, 200_000, &mut seeded(4));
        for m in [&r.method1, &r.method2] {
            assert!(m.x2.z_score(r.expected_x2) < 3.0);
            assert!(m.v2.z_score(r.expected_v2) < 3.0);
            assert!(m.xv.z_score(0.0) < 3.0);
        }
        assert!(r.method1.x2v2.z_score(r.expected_x2v2) < 3.0);
        assert!(r.method2.x2v2.z_score(1.5 * r.expected_x2v2) < 3.0);
    }

    #[test]
    fn standard_error_scales_with_sample_size() {
        let a = sho_kick_moment_study(1.0, 1.0, 1.0 / BOLTZMANN, 10_000, &mut seeded(1));
        let b = sho_kick_moment_study(1.0, 1.0, 1.0 / BOLTZMANN, 160_000, &mut seeded(2));
        let ratio = a.method1.x2.stderr / b.method1.x2.stderr;
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }
}
