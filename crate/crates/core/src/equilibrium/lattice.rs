use std::f64::consts::{PI, TAU};

use crate::physcore::Trap;

/// The `n_ions` sites of a triangular lattice nearest to the origin.
///
/// One lattice direction is the `y` axis (the soft axis of the wall
/// potential). Sites are ordered by radius, then by angle measured
/// counterclockwise from `+y`.
pub fn seed_lattice(n_ions: usize, spacing: f64) -> Vec<[f64; 2]> {
    if n_ions == 0 {
        return Vec::new();
    }
    // a site (i, j) sits at i * a1 + j * a2 with a1 = (sqrt3/2, 1/2), a2 = (0, 1);
    // its squared radius in units of a^2 is the integer i^2 + i j + j^2
    let reach = ((n_ions as f64).sqrt() as i64) + 2;
    let mut sites: Vec<(i64, f64, [f64; 2])> = Vec::new();
    for i in -reach..=reach {
        for j in -reach..=reach {
            let key = i * i + i * j + j * j;
            let x = spacing * (3f64.sqrt() / 2.0) * i as f64;
            let y = spacing * (j as f64 + 0.5 * i as f64);
            let mut angle = (-x).atan2(y);
            if angle < 0.0 {
                angle += TAU;
            }
            if key == 0 {
                angle = 0.0;
            }
            sites.push((key, angle, [x, y]));
        }
    }
    sites.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    debug_assert!(sites.len() >= n_ions);
    sites.into_iter().take(n_ions).map(|s| s.2).collect()
}

/// Lattice spacing (scaled units) whose disc matches the cold-fluid radius
/// `R^3 = (3 pi / 4) N / omega_perp^2` of a planar crystal.
pub fn default_spacing(trap: &Trap, n_ions: usize) -> f64 {
    let perp2 = (trap.stiffness_x + trap.stiffness_y) / 2.0;
    let radius = (0.75 * PI * n_ions.max(1) as f64 / perp2).cbrt();
    (2.0 * PI * radius * radius / (3f64.sqrt() * n_ions.max(1) as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_at_origin() {
        assert_eq!(seed_lattice(1, 2.0), vec![[0.0, 0.0]]);
    }

    #[test]
    fn seven_sites_fill_the_first_shell() {
        let s = seed_lattice(7, 1.5);
        assert_eq!(s[0], [0.0, 0.0]);
        for p in &s[1..] {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.5).abs() < 1e-12);
        }
        // first neighbour lies on +y, ordering proceeds counterclockwise
        assert!(s[1][0].abs() < 1e-12 && s[1][1] > 0.0);
        assert!(s[2][0] < 0.0);
    }

    #[test]
    fn hundred_twenty_sites_stay_compact() {
        let s = seed_lattice(120, 1.0);
        assert_eq!(s.len(), 120);
        let rmax = s.iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).fold(0.0, f64::max);
        assert!(rmax < 8.0);
        // all distinct
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let d = ((s[i][0] - s[j][0]).powi(2) + (s[i][1] - s[j][1]).powi(2)).sqrt();
                assert!(d > 0.99);
            }
        }
    }

    #[test]
    fn deterministic_ordering() {
        assert_eq!(seed_lattice(37, 1.0), seed_lattice(37, 1.0));
    }
}
