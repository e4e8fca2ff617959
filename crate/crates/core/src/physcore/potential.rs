//! Rotating-frame potential energy, forces and second derivatives.
//!
//! Everything here works in scaled units (mass = 1, Coulomb prefactor = 1):
//!
//! ```text
//! Phi = sum_j [ kx x_j^2 + ky y_j^2 + z_j^2 ] / 2 + sum_{j<k} 1 / r_jk
//! ```
//!
//! Pair sums are direct O(N^2) loops.

use nalgebra::{DMatrix, Vector3};

use super::{CrystalState, Trap};
use crate::error::{Error, Result};

#[inline]
fn check_separation(trap: &Trap, i: usize, j: usize, r2: f64) -> Result<()> {
    let min = trap.min_separation;
    if r2 < min * min || !r2.is_finite() {
        return Err(Error::CoincidentIons {
            i,
            j,
            separation: r2.sqrt(),
            minimum: min,
        });
    }
    Ok(())
}

/// Total potential energy of a set of positions, scaled units.
pub fn potential_energy(trap: &Trap, positions: &[Vector3<f64>]) -> Result<f64> {
    let mut trap_part = 0.0;
    for p in positions {
        trap_part += trap.stiffness_x * p.x * p.x + trap.stiffness_y * p.y * p.y + p.z * p.z;
    }
    let mut coulomb = 0.0;
    for (i, pi) in positions.iter().enumerate() {
        for (j, pj) in positions.iter().enumerate().skip(i + 1) {
            let r2 = (pi - pj).norm_squared();
            check_separation(trap, i, j, r2)?;
            coulomb += 1.0 / r2.sqrt();
        }
    }
    Ok(0.5 * trap_part + coulomb)
}

/// Potential energy of a state, SI (J).
pub fn total_potential_energy(trap: &Trap, state: &CrystalState) -> Result<f64> {
    Ok(potential_energy(trap, &state.positions)? * trap.units.energy)
}

/// Change of the potential energy when ion `ion` moves in the plane to
/// `(x, y)`, all other ions fixed. O(N).
pub fn single_ion_delta(
    trap: &Trap,
    positions: &[Vector3<f64>],
    ion: usize,
    x: f64,
    y: f64,
) -> Result<f64> {
    let old = positions[ion];
    let new = Vector3::new(x, y, old.z);
    let mut delta = 0.5
        * (trap.stiffness_x * (new.x * new.x - old.x * old.x)
            + trap.stiffness_y * (new.y * new.y - old.y * old.y));
    for (k, pk) in positions.iter().enumerate() {
        if k == ion {
            continue;
        }
        let r2_new = (new - pk).norm_squared();
        check_separation(trap, ion, k, r2_new)?;
        let r_old = (old - pk).norm();
        delta += 1.0 / r2_new.sqrt() - 1.0 / r_old;
    }
    Ok(delta)
}

/// Conservative forces `-grad Phi`, written into `out`.
pub fn forces_into(trap: &Trap, positions: &[Vector3<f64>], out: &mut [Vector3<f64>]) -> Result<()> {
    for (f, p) in out.iter_mut().zip(positions) {
        *f = Vector3::new(-trap.stiffness_x * p.x, -trap.stiffness_y * p.y, -p.z);
    }
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let d = positions[i] - positions[j];
            let r2 = d.norm_squared();
            check_separation(trap, i, j, r2)?;
            let inv_r = 1.0 / r2.sqrt();
            let f = d * (inv_r * inv_r * inv_r);
            out[i] += f;
            out[j] -= f;
        }
    }
    Ok(())
}

/// Right-hand side of the velocity equations: conservative forces plus the
/// effective Lorentz term `omega_c' (v_y, -v_x, 0)`.
pub fn accelerations_into(
    trap: &Trap,
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
    out: &mut [Vector3<f64>],
) -> Result<()> {
    forces_into(trap, positions, out)?;
    let wc = trap.cyclotron;
    for (a, v) in out.iter_mut().zip(velocities) {
        a.x += wc * v.y;
        a.y -= wc * v.x;
    }
    Ok(())
}

/// Accelerations of every ion, SI (m/s^2).
pub fn accelerations(trap: &Trap, state: &CrystalState) -> Result<Vec<Vector3<f64>>> {
    let mut out = vec![Vector3::zeros(); state.n_ions()];
    accelerations_into(trap, &state.positions, &state.velocities, &mut out)?;
    let scale = trap.units.length * trap.units.omega * trap.units.omega;
    Ok(out.into_iter().map(|a| a * scale).collect())
}

/// Energy and gradient restricted to the `z = 0` plane. `xy` is laid out as
/// `x1, y1, x2, y2, ...`.
pub fn planar_energy_gradient(trap: &Trap, xy: &[f64], grad: &mut [f64]) -> Result<f64> {
    let n = xy.len() / 2;
    let mut energy = 0.0;
    for j in 0..n {
        let (x, y) = (xy[2 * j], xy[2 * j + 1]);
        energy += 0.5 * (trap.stiffness_x * x * x + trap.stiffness_y * y * y);
        grad[2 * j] = trap.stiffness_x * x;
        grad[2 * j + 1] = trap.stiffness_y * y;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xy[2 * i] - xy[2 * j];
            let dy = xy[2 * i + 1] - xy[2 * j + 1];
            let r2 = dx * dx + dy * dy;
            check_separation(trap, i, j, r2)?;
            let inv_r = 1.0 / r2.sqrt();
            energy += inv_r;
            let c = inv_r * inv_r * inv_r;
            grad[2 * i] -= c * dx;
            grad[2 * i + 1] -= c * dy;
            grad[2 * j] += c * dx;
            grad[2 * j + 1] += c * dy;
        }
    }
    Ok(energy)
}

/// Analytic planar Hessian of `Phi` (2N x 2N, basis `x1, y1, ..., xN, yN`).
pub fn planar_hessian(trap: &Trap, xy: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    let n = xy.len();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        h[(2 * j, 2 * j)] = trap.stiffness_x;
        h[(2 * j + 1, 2 * j + 1)] = trap.stiffness_y;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = [xy[i][0] - xy[j][0], xy[i][1] - xy[j][1]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            check_separation(trap, i, j, r2)?;
            let r = r2.sqrt();
            let inv_r5 = 1.0 / (r2 * r2 * r);
            for a in 0..2 {
                for b in 0..2 {
                    let delta = if a == b { r2 } else { 0.0 };
                    // d^2 (1/r) / d r_i^a d r_i^b
                    let block = (3.0 * d[a] * d[b] - delta) * inv_r5;
                    h[(2 * i + a, 2 * i + b)] += block;
                    h[(2 * j + a, 2 * j + b)] += block;
                    h[(2 * i + a, 2 * j + b)] -= block;
                    h[(2 * j + a, 2 * i + b)] -= block;
                }
            }
        }
    }
    Ok(h)
}

/// Analytic axial Hessian of `Phi` at `z = 0` (N x N).
pub fn axial_hessian(trap: &Trap, xy: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    let n = xy.len();
    let mut h = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xy[i][0] - xy[j][0];
            let dy = xy[i][1] - xy[j][1];
            let r2 = dx * dx + dy * dy;
            check_separation(trap, i, j, r2)?;
            let c = 1.0 / (r2 * r2.sqrt());
            h[(i, i)] -= c;
            h[(j, j)] -= c;
            h[(i, j)] += c;
            h[(j, i)] += c;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physcore::Trap;

    fn trap(n: usize) -> Trap {
        Trap::nist(n).unwrap()
    }

    #[test]
    fn single_ion_at_origin_has_zero_energy() {
        let t = trap(1);
        let s = CrystalState::at_rest(vec![Vector3::zeros()]);
        assert_eq!(total_potential_energy(&t, &s).unwrap(), 0.0);
    }

    #[test]
    fn two_ions_on_y_axis_by_hand() {
        let t = trap(2);
        let d = 3.7;
        let pos = vec![Vector3::new(0.0, d / 2.0, 0.0), Vector3::new(0.0, -d / 2.0, 0.0)];
        let e = potential_energy(&t, &pos).unwrap();
        let hand = 2.0 * (t.stiffness_y / 2.0) * (d / 2.0) * (d / 2.0) + 1.0 / d;
        assert!((e - hand).abs() < 1e-14 * hand);

        // same in SI: 2 (m (w_perp^2 - w_w^2) / 2)(d/2)^2 + k_e e^2 / d
        let f = t.freqs;
        let m = t.config.ion_mass;
        let d_si = d * t.units.length;
        let si = m * (f.omega_perp.powi(2) - f.omega_w.powi(2)) * (d_si / 2.0).powi(2)
            + t.constants.coulomb_constant * t.config.ion_charge.powi(2) / d_si;
        let got = total_potential_energy(&t, &CrystalState::at_rest(pos)).unwrap();
        assert!((got - si).abs() < 1e-12 * si);
    }

    #[test]
    fn single_ion_axial_acceleration() {
        let t = trap(1);
        let z0 = 2.0e-6;
        let mut s = CrystalState::at_rest(vec![Vector3::new(0.0, 0.0, z0 / t.units.length)]);
        s.time = 0.0;
        let a = accelerations(&t, &s).unwrap();
        let expected = -t.freqs.omega_par.powi(2) * z0;
        assert!((a[0].z - expected).abs() < 1e-12 * expected.abs());
        assert_eq!(a[0].x, 0.0);
        assert_eq!(a[0].y, 0.0);
    }

    #[test]
    fn coincident_ions_are_rejected() {
        let t = trap(2);
        let pos = vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        assert!(matches!(potential_energy(&t, &pos), Err(Error::CoincidentIons { .. })));
        let mut out = vec![Vector3::zeros(); 2];
        assert!(forces_into(&t, &pos, &mut out).is_err());
    }

    #[test]
    fn lorentz_term_is_orthogonal_to_velocity() {
        let t = trap(1);
        let pos = vec![Vector3::zeros()];
        let vel = vec![Vector3::new(0.37, -1.3, 0.2)];
        let mut a = vec![Vector3::zeros(); 1];
        accelerations_into(&t, &pos, &vel, &mut a).unwrap();
        let dot = a[0].x * vel[0].x + a[0].y * vel[0].y;
        assert!(dot.abs() <= 1e-12 * t.cyclotron * vel[0].norm_squared());
    }

    #[test]
    fn single_ion_delta_matches_full_difference() {
        let t = trap(4);
        let pos = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(3.0, 0.5, 0.0),
            Vector3::new(-1.0, 3.0, 0.0),
            Vector3::new(-2.5, -2.0, 0.0),
        ];
        let before = potential_energy(&t, &pos).unwrap();
        let delta = single_ion_delta(&t, &pos, 2, -1.3, 2.6).unwrap();
        let mut moved = pos.clone();
        moved[2].x = -1.3;
        moved[2].y = 2.6;
        let after = potential_energy(&t, &moved).unwrap();
        assert!((after - before - delta).abs() < 1e-12);
    }
}
