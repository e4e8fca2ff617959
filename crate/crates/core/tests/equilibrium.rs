use nalgebra::SymmetricEigen;
use penning_core::equilibrium::{equilibrium_for, find_equilibrium, seed_lattice, MinimizerOptions};
use penning_core::physcore::potential::planar_hessian;
use penning_core::{Trap, TrapConfig};

#[test]
fn small_and_mid_size_crystals_reach_stable_minima() {
    // includes sizes whose nearly isotropic ground states are flat under
    // rotation and sizes whose lattice seed relaxes onto a saddle first
    for n in (1..=60).chain([90, 120]) {
        let trap = Trap::nist(n).unwrap();
        let eq = equilibrium_for(&trap).unwrap_or_else(|e| panic!("N={n}: {e}"));
        assert!(eq.gradient_norm <= eq.tolerance, "N={n}");
        let eig = SymmetricEigen::new(planar_hessian(&trap, &eq.positions).unwrap());
        let min = eig.eigenvalues.min();
        assert!(min > 0.0, "N={n}: min eigenvalue {min:e}");
    }
}

#[test]
fn residual_force_and_energy_are_reported_in_si() {
    let trap = Trap::nist(19).unwrap();
    let eq = equilibrium_for(&trap).unwrap();
    let unit_force = trap.units.energy / trap.units.length;
    assert!((eq.gradient_norm_si(&trap) - eq.gradient_norm * unit_force).abs() <= 1e-30);
    assert!((eq.energy_si(&trap) / (eq.energy * trap.units.energy) - 1.0).abs() < 1e-15);
}

#[test]
fn minimizer_converges_from_a_disordered_seed() {
    let trap = Trap::new(TrapConfig::nist(30)).unwrap();
    // scramble a loose lattice deterministically
    let seed: Vec<[f64; 2]> = seed_lattice(30, 2.5)
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let a = (k as f64 * 2.399).sin() * 0.7;
            [p[0] + a, p[1] - 0.5 * a]
        })
        .collect();
    let eq = find_equilibrium(&trap, &seed, &MinimizerOptions::default()).unwrap();
    assert!(eq.gradient_norm <= eq.tolerance);
    assert!(eq.min_hessian_eigenvalue > 0.0);
}
