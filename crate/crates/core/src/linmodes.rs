//! Linearization about a planar equilibrium and the two normal-mode
//! problems: drumhead (real symmetric) and in-plane (generalized Hermitian
//! with the energy matrix as metric).
//!
//! Matrices are stored in scaled units, where the ion mass is 1, so
//! `K / m` and `K` coincide and the energy matrix is `diag(K_perp, I)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumConfiguration;
use crate::error::{Error, Result};
use crate::physcore::potential::{axial_hessian, planar_hessian};
use crate::physcore::Trap;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct LinearizedModel {
    /// Axial stiffness, N x N.
    pub k_par: DMatrix<f64>,
    /// Planar stiffness, 2N x 2N, basis `x1, y1, ..., xN, yN`.
    pub k_perp: DMatrix<f64>,
    /// Lorentz matrix, 2N x 2N antisymmetric, blocks `[[0, wc'], [-wc', 0]]`.
    pub lorentz: DMatrix<f64>,
    /// `omega_c'`, scaled.
    pub cyclotron: f64,
    pub equilibrium: Vec<[f64; 2]>,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn lorentz_matrix(n_ions: usize, cyclotron: f64) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(2 * n_ions, 2 * n_ions);
    for j in 0..n_ions {
        l[(2 * j, 2 * j + 1)] = cyclotron;
        l[(2 * j + 1, 2 * j)] = -cyclotron;
    }
    l
}

/// Builds `K_par`, `K_perp` and `L` at the equilibrium and checks that both
/// stiffness matrices are positive definite.
pub fn build_linearized_model(trap: &Trap, eq: &EquilibriumConfiguration) -> Result<LinearizedModel> {
    build_at(trap, &eq.positions)
}

/// Same as [`build_linearized_model`] for an arbitrary planar configuration.
pub fn build_at(trap: &Trap, xy: &[[f64; 2]]) -> Result<LinearizedModel> {
    let k_par = axial_hessian(trap, xy)?;
    let k_perp = planar_hessian(trap, xy)?;
    if k_par.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            matrix: "K_par",
            min_eigenvalue: min_eigenvalue(&k_par),
        });
    }
    if k_perp.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            matrix: "K_perp",
            min_eigenvalue: min_eigenvalue(&k_perp),
        });
    }
    Ok(LinearizedModel {
        lorentz: lorentz_matrix(xy.len(), trap.cyclotron),
        k_par,
        k_perp,
        cyclotron: trap.cyclotron,
        equilibrium: xy.to_vec(),
    })
}

impl LinearizedModel {
    pub fn n_ions(&self) -> usize {
        self.k_par.nrows()
    }

    /// Copy with the magnetic coupling switched off.
    pub fn without_lorentz(&self) -> Self {
        let mut m = self.clone();
        m.lorentz.fill(0.0);
        m.cyclotron = 0.0;
        m
    }

    /// `E = diag(K_perp, I)`, 4N x 4N.
    pub fn energy_matrix(&self) -> DMatrix<f64> {
        let n2 = self.k_perp.nrows();
        let mut e = DMatrix::zeros(2 * n2, 2 * n2);
        e.view_mut((0, 0), (n2, n2)).copy_from(&self.k_perp);
        e.view_mut((n2, n2), (n2, n2)).fill_with_identity();
        e
    }

    /// `D = [[0, I], [-K_perp, L]]`, the generator of the in-plane flow.
    pub fn dynamical_matrix(&self) -> DMatrix<f64> {
        let n2 = self.k_perp.nrows();
        let mut d = DMatrix::zeros(2 * n2, 2 * n2);
        d.view_mut((0, n2), (n2, n2)).fill_with_identity();
        d.view_mut((n2, 0), (n2, n2)).copy_from(&(-&self.k_perp));
        d.view_mut((n2, n2), (n2, n2)).copy_from(&self.lorentz);
        d
    }

    /// `D_H = i [[0, K_perp], [-K_perp, L]]`.
    pub fn hermitian_dynamical_matrix(&self) -> DMatrix<Complex64> {
        let n2 = self.k_perp.nrows();
        DMatrix::from_fn(2 * n2, 2 * n2, |r, c| {
            let v = match (r < n2, c < n2) {
                (true, true) => 0.0,
                (true, false) => self.k_perp[(r, c - n2)],
                (false, true) => -self.k_perp[(r - n2, c)],
                (false, false) => self.lorentz[(r - n2, c - n2)],
            };
            I * v
        })
    }
}

/// Axial normal modes, highest frequency first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrumheadModes {
    /// Angular frequencies, scaled, descending.
    pub frequencies: Vec<f64>,
    /// Orthonormal eigenvectors as columns (`b[(j, n)]` is ion `j`, mode `n`).
    pub eigenvectors: DMatrix<f64>,
}

impl DrumheadModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn vector(&self, n: usize) -> DVector<f64> {
        self.eigenvectors.column(n).into_owned()
    }
}

pub fn drumhead_modes(model: &LinearizedModel) -> Result<DrumheadModes> {
    drumhead_from_stiffness(&model.k_par)
}

/// Drumhead frequencies of an arbitrary planar configuration (thermal
/// snapshots are not equilibria, but their axial Hessian is still defined).
pub fn drumhead_modes_at(trap: &Trap, xy: &[[f64; 2]]) -> Result<DrumheadModes> {
    drumhead_from_stiffness(&axial_hessian(trap, xy)?)
}

/// Sorted drumhead frequencies only; cheaper than the full decomposition.
pub fn drumhead_frequencies_at(trap: &Trap, xy: &[[f64; 2]]) -> Result<Vec<f64>> {
    let k = axial_hessian(trap, xy)?;
    let mut evals: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
    evals.sort_by(|a, b| b.total_cmp(a));
    if let Some(&last) = evals.last() {
        if last <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                matrix: "K_par",
                min_eigenvalue: last,
            });
        }
    }
    Ok(evals.into_iter().map(f64::sqrt).collect())
}

fn drumhead_from_stiffness(k_par: &DMatrix<f64>) -> Result<DrumheadModes> {
    let n = k_par.nrows();
    let eig = SymmetricEigen::new(k_par.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut frequencies = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                matrix: "K_par",
                min_eigenvalue: lambda,
            });
        }
        frequencies.push(lambda.sqrt());
        let mut v = eig.eigenvectors.column(k).into_owned();
        // sign gauge: largest-magnitude entry positive
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    Ok(DrumheadModes {
        frequencies,
        eigenvectors: vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    ExB,
    Cyclotron,
}

/// Positive-frequency in-plane modes, ascending.
///
/// Each column of `vectors` is `u_n = (u_n^r, u_n^v)` with 4N entries,
/// normalized to `<u_n|E|u_n> = 1` and phased so the largest-magnitude entry
/// of `u_n^r` is real and positive.
#[derive(Debug, Clone)]
pub struct InPlaneModes {
    pub frequencies: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
    pub energy_norms: Vec<f64>,
    /// `(w_N - w_{N-1}) / (w_{N-1} - w_0)`: gap between the branches over
    /// the lower-branch bandwidth.
    pub branch_gap_ratio: f64,
}

impl InPlaneModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn n_ions(&self) -> usize {
        self.frequencies.len() / 2
    }

    pub fn branch(&self, n: usize) -> Branch {
        if n < self.n_ions() {
            Branch::ExB
        } else {
            Branch::Cyclotron
        }
    }

    pub fn u(&self, n: usize) -> DVector<Complex64> {
        self.vectors.column(n).into_owned()
    }

    pub fn u_r(&self, n: usize) -> DVector<Complex64> {
        let n2 = 2 * self.n_ions();
        self.vectors.view((0, n), (n2, 1)).into_owned().column(0).into_owned()
    }

    pub fn u_v(&self, n: usize) -> DVector<Complex64> {
        let n2 = 2 * self.n_ions();
        self.vectors.view((n2, n), (n2, 1)).into_owned().column(0).into_owned()
    }
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `<a|M|b>` for a real matrix.
pub fn quad_form(a: &DVector<Complex64>, m: &DMatrix<f64>, b: &DVector<Complex64>) -> Complex64 {
    let mb = to_complex(m) * b;
    a.dotc(&mb)
}

/// Solves `D_H u = w E u` through the factorization `E = F^T F` with
/// `F = diag(C^T, I)`, `K_perp = C C^T`. The reduced matrix
/// `F^-T D_H F^-1 = i [[0, C^T], [-C, L]]` is Hermitian, so its eigenvectors
/// are orthonormal and `u = F^-1 w` is E-orthonormal.
pub fn inplane_modes(model: &LinearizedModel) -> Result<InPlaneModes> {
    let n2 = model.k_perp.nrows();
    let chol = model
        .k_perp
        .clone()
        .cholesky()
        .ok_or(Error::FactorizationFailure)?;
    let c = chol.l();
    let ct = c.transpose();

    let h = DMatrix::from_fn(2 * n2, 2 * n2, |r, col| {
        let v = match (r < n2, col < n2) {
            (true, true) => 0.0,
            (true, false) => ct[(r, col - n2)],
            (false, true) => -c[(r - n2, col)],
            (false, false) => model.lorentz[(r - n2, col - n2)],
        };
        I * v
    });
    let eig = SymmetricEigen::new(h);

    let mut positive: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| (w, k))
        .collect();
    if positive.len() != n2 {
        return Err(Error::FactorizationFailure);
    }
    positive.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut vectors = DMatrix::<Complex64>::zeros(2 * n2, n2);
    let mut frequencies = Vec::with_capacity(n2);
    let ct_c = to_complex(&ct);
    for (col, &(w, k)) in positive.iter().enumerate() {
        let wvec = eig.eigenvectors.column(k);
        let wr = wvec.rows(0, n2).into_owned();
        let wv = wvec.rows(n2, n2).into_owned();
        let ur = ct_c
            .solve_upper_triangular(&wr)
            .ok_or(Error::FactorizationFailure)?;
        let imax = ur.icamax();
        let phase = ur[imax].conj() / ur[imax].norm();
        vectors
            .view_mut((0, col), (n2, 1))
            .copy_from(&(ur * phase));
        vectors
            .view_mut((n2, col), (n2, 1))
            .copy_from(&(wv * phase));
        frequencies.push(w);
    }

    let energy = model.energy_matrix();
    let energy_norms = (0..n2)
        .map(|n| {
            let u = vectors.column(n).into_owned();
            quad_form(&u, &energy, &u).re
        })
        .collect();
    let half = n2 / 2;
    let branch_gap_ratio = if half >= 1 && n2 > half {
        let band = frequencies[half - 1] - frequencies[0];
        (frequencies[half] - frequencies[half - 1]) / band.max(f64::MIN_POSITIVE)
    } else {
        f64::INFINITY
    };
    Ok(InPlaneModes {
        frequencies,
        vectors,
        energy_norms,
        branch_gap_ratio,
    })
}

/// Largest E-normalized off-diagonal overlap and largest relative residual
/// `||D_H u - w E u|| / ||E u||` of a mode set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeDiagnostics {
    pub max_offdiagonal: f64,
    pub max_residual: f64,
    pub max_velocity_mismatch: f64,
}

pub fn diagnose(model: &LinearizedModel, modes: &InPlaneModes) -> ModeDiagnostics {
    let e = to_complex(&model.energy_matrix());
    let dh = model.hermitian_dynamical_matrix();
    let eu = &e * &modes.vectors;
    let gram = modes.vectors.adjoint() * &eu;
    let dhu = &dh * &modes.vectors;
    let n = modes.len();
    let mut max_off = 0.0f64;
    for k in 0..n {
        for m in 0..n {
            if k != m {
                let denom = (gram[(k, k)].re * gram[(m, m)].re).sqrt();
                max_off = max_off.max(gram[(k, m)].norm() / denom);
            }
        }
    }
    let mut max_res = 0.0f64;
    let mut max_vel = 0.0f64;
    for k in 0..n {
        let w = modes.frequencies[k];
        let r = dhu.column(k) - eu.column(k) * Complex64::new(w, 0.0);
        max_res = max_res.max(r.norm() / eu.column(k).norm());
        let ur = modes.u_r(k);
        let uv = modes.u_v(k);
        let mismatch = (&uv + ur.clone() * (I * w)).norm() / uv.norm();
        max_vel = max_vel.max(mismatch);
    }
    ModeDiagnostics {
        max_offdiagonal: max_off,
        max_residual: max_res,
        max_velocity_mismatch: max_vel,
    }
}
