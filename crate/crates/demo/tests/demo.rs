use penning_demo::*;

#[test]
fn crystal_has_one_position_per_ion_and_cm_on_top() {
    let d = crystal_data(7, 180.0, 68.0).unwrap();
    assert_eq!(d.positions_um.len(), 7);
    assert_eq!(d.drumhead_hz.len(), 7);
    assert!(d.drumhead_hz.windows(2).all(|w| w[0] >= w[1]));
    assert!((d.drumhead_hz[0] / d.axial_hz - 1.0).abs() < 1e-9);
    assert!(d.tilt_hz < d.axial_hz && d.chip_hz < d.tilt_hz);
}

#[test]
fn inplane_branches_at_nist_settings() {
    let d = inplane_data(10, 180.0, 68.0).unwrap();
    assert_eq!(d.frequency_hz.len(), 20);
    assert_eq!(d.cyclotron.iter().filter(|c| **c).count(), 10);
    for k in 0..20 {
        if d.cyclotron[k] {
            assert!((d.helicity[k] + 1.0).abs() <= 0.05, "{k}: {}", d.helicity[k]);
        } else {
            assert!(d.energy_ratio[k] > 10.0, "{k}: {}", d.energy_ratio[k]);
        }
    }
}

#[test]
fn histogram_counts_every_mode_of_every_snapshot() {
    let d = histogram_data(6, 180.0, 68.0, 1.0, 40, 3).unwrap();
    assert_eq!(d.counts.iter().sum::<u64>(), 6 * 40);
    let cold = histogram_data(6, 180.0, 68.0, 0.0, 5, 3).unwrap();
    for f in &cold.reference_hz {
        let k = ((f - cold.first_edge_hz) / cold.bin_hz) as usize;
        assert!(cold.counts[k] > 0);
    }
}

#[test]
fn bad_inputs_are_reported() {
    assert!(crystal(0, 180.0, 68.0).is_err());
    assert!(crystal(MAX_IONS + 1, 180.0, 68.0).is_err());
    assert!(histogram(5, 180.0, 68.0, -1.0, 10, 0).is_err());
    assert!(histogram(5, 180.0, 68.0, 1.0, 0, 0).is_err());
    // wall above the radial confinement
    assert!(crystal(5, 180.0, 400.0).is_err());
}

#[test]
fn exports_return_json() {
    let v: serde_json::Value = serde_json::from_str(&inplane(4, 180.0, 68.0).unwrap()).unwrap();
    assert_eq!(v["frequency_hz"].as_array().unwrap().len(), 8);
}
