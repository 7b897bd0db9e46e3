use std::f64::consts::PI;

use surfspec::geometry::{build_standard, StandardSurface};
use surfspec::maximize::*;

fn config(iterations: usize) -> MaximizeConfig {
    MaximizeConfig {
        max_iterations: iterations,
        ..Default::default()
    }
}

#[test]
fn zero_iterations_leave_the_metric_alone() {
    let (m, g) = build_standard(&StandardSurface::equilateral_torus(1.0), 12).unwrap();
    let start: Vec<f64> = (0..m.num_vertices()).map(|i| 0.01 * (i as f64).sin()).collect();
    let s = maximize_from(&m, &g, start.clone(), &config(0)).unwrap();
    assert_eq!(s.log_conformal_factor, start);
    assert_eq!(s.iterations, 0);
    assert!(s.history.is_empty());
    let flat = maximize_in_class(&m, &g, &config(0)).unwrap();
    assert!(flat.log_conformal_factor.iter().all(|&x| x == 0.0));
    assert!((flat.area - 1.0).abs() < 1e-12);
}

#[test]
fn equilateral_torus_is_already_critical() {
    let (m, g) = build_standard(&StandardSurface::equilateral_torus(1.0), 30).unwrap();
    let s = maximize_in_class(&m, &g, &config(20)).unwrap();
    let start = s.history.first().map_or(s.value, |r| r.value);
    let flat = maximize_in_class(&m, &g, &config(0)).unwrap().value;
    assert!((s.value - flat) / flat < 1e-3, "{flat} -> {}", s.value);
    assert!(s.value >= flat);
    assert!(start >= flat);
    assert!(s.multiplicity >= 6);
    let map = extract_harmonic_map(&s, &m, &g).unwrap();
    assert!(map.metric_recovery_residual < 5e-2, "{}", map.metric_recovery_residual);
    assert!(map.sphericality_residual < 5e-2, "{}", map.sphericality_residual);
}

#[test]
fn square_torus_does_not_climb_to_the_equilateral_value() {
    let (m, g) = build_standard(&StandardSurface::square_torus(1.0), 20).unwrap();
    let s = maximize_in_class(&m, &g, &config(15)).unwrap();
    let lattice = 8.0 * PI * PI / 3f64.sqrt();
    assert!((s.value - 4.0 * PI * PI).abs() / (4.0 * PI * PI) < 2e-2, "{}", s.value);
    assert!(s.value < 0.95 * lattice);
}

#[test]
fn accepted_steps_never_decrease_the_value() {
    let (m, g) = build_standard(&StandardSurface::FlatKleinBottle { width: 1.0, height: 0.6 }, 12).unwrap();
    let start: Vec<f64> = (0..m.num_vertices()).map(|i| 0.2 * ((i * 7) as f64).sin()).collect();
    let s = maximize_from(&m, &g, start, &config(12)).unwrap();
    assert!(s.failure.is_none());
    assert!(s.history.windows(2).all(|w| w[1].value >= w[0].value));
    // the exported edge-length metric carries the same area as the weights
    let exported = s.metric(&m, &g).unwrap();
    assert!((exported.area(&m) - s.area).abs() / s.area < 5e-2, "{} vs {}", exported.area(&m), s.area);
}

#[test]
fn round_sphere_eigenfunctions_map_to_the_sphere() {
    let (m, g) = build_standard(&StandardSurface::RoundSphere, 16).unwrap();
    let s = maximize_in_class(&m, &g, &config(0)).unwrap();
    assert_eq!(s.multiplicity, 3);
    assert!((s.value - 8.0 * PI).abs() / (8.0 * PI) < 1e-2);
    let map = extract_harmonic_map(&s, &m, &g).unwrap();
    assert_eq!(map.cluster_size, 3);
    assert!(map.sphericality_residual < 1e-2, "{}", map.sphericality_residual);
}

#[test]
fn a_rough_metric_is_far_from_spherical() {
    let (m, g) = build_standard(&StandardSurface::RoundSphere, 8).unwrap();
    let start: Vec<f64> = (0..m.num_vertices()).map(|i| 0.8 * ((i * 13) as f64).sin()).collect();
    let s = maximize_from(&m, &g, start, &config(0)).unwrap();
    let map = extract_harmonic_map(&s, &m, &g).unwrap();
    assert!(map.sphericality_residual > 0.1, "{}", map.sphericality_residual);
}

#[test]
fn checkpoint_round_trip() {
    let (m, g) = build_standard(&StandardSurface::equilateral_torus(1.0), 10).unwrap();
    let s = maximize_in_class(&m, &g, &config(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.save(dir.path(), "state").unwrap();
    let back = MaximizerState::load(dir.path(), "state").unwrap();
    assert_eq!(back, s);
    assert!(!back.eigenframe.is_empty());
    s.write_trajectory(&dir.path().join("t.csv"), &["hash: x".into()]).unwrap();
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + s.history.len());
    assert!(MaximizerState::load(dir.path(), "missing").is_err());
}
