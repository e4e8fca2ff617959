//! Zero-temperature planar equilibria.
//!
//! The minimizer runs BFGS with a backtracking line search on the 2N
//! planar coordinates, then polishes the result with Newton steps on the
//! analytic Hessian. Near the minimum the energy decrease per step falls
//! below the rounding level of the total energy, so the polish stage accepts
//! a step when the force norm drops and the energy does not rise by more than
//! a few ulps.

mod anneal;
mod lattice;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use anneal::AnnealOptions;
pub use lattice::{default_spacing, seed_lattice};

use crate::error::{Error, Result};
use crate::physcore::potential::{planar_energy_gradient, planar_hessian};
use crate::physcore::{CrystalState, Trap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizerOptions {
    /// Force-norm tolerance, scaled units.
    pub tol: f64,
    pub max_iterations: usize,
    /// Newton polish starts once the force norm is below this.
    pub polish_below: f64,
    /// Perturb along a negative-curvature direction and restart when a
    /// saddle is reached.
    pub escape_saddles: bool,
    /// Optional simulated-annealing pre-pass.
    pub anneal: Option<AnnealOptions>,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 20_000,
            polish_below: 1e-5,
            escape_saddles: true,
            anneal: None,
        }
    }
}

/// A converged planar minimum of the potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumConfiguration {
    /// In-plane positions, scaled units (`z = 0` implied).
    pub positions: Vec<[f64; 2]>,
    /// Potential energy at the minimum, scaled units.
    pub energy: f64,
    /// Residual force norm, scaled units.
    pub gradient_norm: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub min_hessian_eigenvalue: f64,
    pub seed_energy: f64,
    pub seed_descriptor: String,
    /// Energies of accepted iterates.
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
}

impl EquilibriumConfiguration {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn energy_si(&self, trap: &Trap) -> f64 {
        self.energy * trap.units.energy
    }

    /// Residual force norm in newtons.
    pub fn gradient_norm_si(&self, trap: &Trap) -> f64 {
        self.gradient_norm * trap.units.energy / trap.units.length
    }

    pub fn positions_si(&self, trap: &Trap) -> Vec<[f64; 2]> {
        let l = trap.units.length;
        self.positions.iter().map(|p| [p[0] * l, p[1] * l]).collect()
    }

    pub fn to_state(&self) -> CrystalState {
        CrystalState::from_planar(&self.positions)
    }

    /// Second moments `(sum x^2, sum y^2)`.
    pub fn second_moments(&self) -> (f64, f64) {
        self.positions
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0] * p[0], sy + p[1] * p[1]))
    }
}

fn flatten(xy: &[[f64; 2]]) -> Vec<f64> {
    xy.iter().flat_map(|p| [p[0], p[1]]).collect()
}

fn unflatten(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks(2).map(|c| [c[0], c[1]]).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Convenience: triangular seed with the default spacing, then
/// [`find_equilibrium`] with default options.
pub fn equilibrium_for(trap: &Trap) -> Result<EquilibriumConfiguration> {
    let n = trap.n_ions();
    let spacing = default_spacing(trap, n);
    let seed = seed_lattice(n, spacing);
    let mut eq = find_equilibrium(trap, &seed, &MinimizerOptions::default())?;
    eq.seed_descriptor = format!("triangular lattice, {n} sites, spacing {spacing:.6} l0");
    Ok(eq)
}

/// Locally minimizes the planar potential starting from `seed`.
pub fn find_equilibrium(
    trap: &Trap,
    seed: &[[f64; 2]],
    opts: &MinimizerOptions,
) -> Result<EquilibriumConfiguration> {
    if seed.len() != trap.n_ions() {
        return Err(Error::ShapeMismatch {
            expected: trap.n_ions(),
            actual: seed.len(),
        });
    }
    let mut x = flatten(seed);
    let mut grad = vec![0.0; x.len()];
    let seed_energy = planar_energy_gradient(trap, &x, &mut grad)?;

    if let Some(anneal) = &opts.anneal {
        x = flatten(&anneal::anneal(trap, &unflatten(&x), anneal)?);
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut escapes = 0;
    loop {
        let (xn, its) = bfgs(trap, x, opts, &mut trace, iterations)?;
        iterations = its;
        x = newton_polish(trap, xn, opts, &mut trace, &mut iterations)?;
        let energy = planar_energy_gradient(trap, &x, &mut grad)?;
        let gnorm = norm(&grad);
        let hess = planar_hessian(trap, &unflatten(&x))?;
        let eig = SymmetricEigen::new(hess);
        let (imin, lmin) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        // a polish that stalls next to a saddle is escaped the same way as
        // one that converges onto it
        if lmin <= 1e-9 * lmax || gnorm > opts.tol {
            if opts.escape_saddles && lmin < 0.0 && escapes < 8 {
                escapes += 1;
                trace.clear();
                let dir = eig.eigenvectors.column(imin);
                let scale = 0.1 / dir.amax().max(1e-300);
                for (xi, di) in x.iter_mut().zip(dir.iter()) {
                    *xi += scale * di;
                }
                continue;
            }
            if gnorm > opts.tol {
                return Err(Error::NoConvergence {
                    iterations,
                    gradient_norm: gnorm,
                });
            }
            return Err(Error::SaddleDetected { min_eigenvalue: lmin });
        }
        return Ok(EquilibriumConfiguration {
            positions: unflatten(&x),
            energy,
            gradient_norm: gnorm,
            tolerance: opts.tol,
            iterations,
            min_hessian_eigenvalue: lmin,
            seed_energy,
            seed_descriptor: format!("user seed, {} sites", seed.len()),
            energy_trace: trace,
        });
    }
}

fn bfgs(
    trap: &Trap,
    mut x: Vec<f64>,
    opts: &MinimizerOptions,
    trace: &mut Vec<f64>,
    mut iterations: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = planar_energy_gradient(trap, &x, &mut g)?;
    trace.push(f);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut g_new = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    const MAX_STEP: f64 = 0.5;

    while norm(&g) > opts.polish_below.max(opts.tol) {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: norm(&g),
            });
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut p: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            h.fill_with_identity();
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = if pmax > MAX_STEP { MAX_STEP / pmax } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * p[i];
            }
            match planar_energy_gradient(trap, &x_new, &mut g_new) {
                Ok(fn_) if fn_ <= f + 1e-4 * alpha * slope => {
                    accepted = Some(fn_);
                    break;
                }
                Ok(_) | Err(Error::CoincidentIons { .. }) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some(f_new) = accepted else {
            // no decrease along p at rounding level; hand over to the polish
            break;
        };

        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) {
            if iterations == 1 {
                h *= sy / dot(&y, &y);
            }
            let rho = 1.0 / sy;
            let sv = DVector::from_vec(s);
            let yv = DVector::from_vec(y);
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            h -= (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
        }
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
        trace.push(f);
    }
    Ok((x, iterations))
}

fn newton_polish(
    trap: &Trap,
    mut x: Vec<f64>,
    opts: &MinimizerOptions,
    trace: &mut Vec<f64>,
    iterations: &mut usize,
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = planar_energy_gradient(trap, &x, &mut g)?;
    let mut g_new = vec![0.0; n];
    for _ in 0..500 {
        let gnorm = norm(&g);
        if gnorm <= opts.tol {
            break;
        }
        let hess = planar_hessian(trap, &unflatten(&x))?;
        let eig = SymmetricEigen::new(hess);
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        // Newton step on |H|: stays a descent direction near saddles and in
        // the nearly flat valleys of small, almost isotropic crystals
        let gv = DVector::from_column_slice(&g);
        let mut step = DVector::zeros(n);
        for (k, l) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            step += v * (v.dot(&gv) / l.abs().max(1e-12 * lmax));
        }
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let x_new: Vec<f64> = (0..n).map(|i| x[i] - alpha * step[i]).collect();
            if let Ok(f_new) = planar_energy_gradient(trap, &x_new, &mut g_new) {
                let rounding = 16.0 * f64::EPSILON * f.abs().max(1.0);
                if f_new < f - rounding || (f_new <= f + rounding && norm(&g_new) < gnorm) {
                    x = x_new;
                    f = f_new.min(f);
                    g.copy_from_slice(&g_new);
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        *iterations += 1;
        if !improved {
            break;
        }
        trace.push(f);
    }
    Ok(x)
}

/// Applies a random permutation of the ion labels.
pub fn relabel<R: Rng>(xy: &[[f64; 2]], rng: &mut R) -> Vec<[f64; 2]> {
    let mut idx: Vec<usize> = (0..xy.len()).collect();
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx.into_iter().map(|i| xy[i]).collect()
}
