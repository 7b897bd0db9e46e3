use std::f64::consts::PI;

use proptest::prelude::*;
use surfspec::geometry::*;
use surfspec::spectral::*;

fn opts() -> EigenOptions {
    EigenOptions::default()
}

fn spectrum_of(kind: &StandardSurface, res: usize, k: usize) -> (Spectrum, f64) {
    let (m, g) = build_standard(kind, res).unwrap();
    let ops = assemble(&m, &g, &BoundaryCondition::Closed).unwrap();
    (solve_spectrum(&ops, k, &opts()).unwrap(), g.area(&m))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn round_sphere_first_eigenvalue_is_two_with_multiplicity_three() {
    let (sp, area) = spectrum_of(&StandardSurface::RoundSphere, 12, 6);
    assert!(sp.eigenvalues[0].abs() < 1e-8);
    for i in 1..4 {
        assert!(rel(sp.eigenvalues[i], 2.0) < 1e-2, "{:?}", sp.eigenvalues);
    }
    assert_eq!(sp.multiplicity(sp.eigenvalues[1], 1e-6), 3);
    assert!(rel(sp.eigenvalues[4], 6.0) < 3e-2);
    assert!(rel(sp.eigenvalues[1] * area, 8.0 * PI) < 1e-2);
}

#[test]
fn square_torus_of_side_two_pi() {
    let (sp, _) = spectrum_of(&StandardSurface::square_torus(2.0 * PI), 32, 9);
    for i in 1..5 {
        assert!(rel(sp.eigenvalues[i], 1.0) < 5e-3, "{:?}", sp.eigenvalues);
    }
    assert_eq!(sp.multiplicity(sp.eigenvalues[1], 1e-6), 4);
    // next cluster: (±1, ±1), eigenvalue 2
    for i in 5..9 {
        assert!(rel(sp.eigenvalues[i], 2.0) < 1e-2, "{:?}", sp.eigenvalues);
    }
}

#[test]
fn equilateral_torus_matches_the_lattice_value() {
    let (sp, area) = spectrum_of(&StandardSurface::equilateral_torus(1.0), 48, 8);
    // the mesh splits the six lattice modes slightly; all stay within tolerance
    for i in 1..7 {
        assert!(rel(sp.eigenvalues[i] * area, 8.0 * PI * PI / 3f64.sqrt()) < 5e-3, "{:?}", sp.eigenvalues);
    }
    assert!(rel(sp.eigenvalues[7] * area, 8.0 * PI * PI / 3f64.sqrt()) > 0.5);
}

#[test]
fn projective_plane_reaches_twelve_pi() {
    let (sp, area) = spectrum_of(&StandardSurface::ProjectivePlane, 12, 6);
    assert!(rel(sp.eigenvalues[1] * area, 12.0 * PI) < 1e-2, "{}", sp.eigenvalues[1] * area);
    // even spherical harmonics of degree 2
    assert_eq!(sp.multiplicity(sp.eigenvalues[1], 1e-6), 5);
}

#[test]
fn klein_bottle_is_the_even_part_of_its_cover() {
    let (m, g) = build_standard(&StandardSurface::FlatKleinBottle { width: 1.0, height: 0.8 }, 12).unwrap();
    let k = 8;
    let direct = solve_spectrum(&assemble(&m, &g, &BoundaryCondition::Closed).unwrap(), k, &opts()).unwrap();
    let cover = orientation_double_cover(&m, &g).unwrap();
    let ops = assemble(&cover.mesh, &cover.metric, &BoundaryCondition::Closed).unwrap();
    let even = even_spectrum(&ops, &cover.involution, k, &opts()).unwrap();
    for (a, b) in direct.eigenvalues.iter().zip(&even.eigenvalues) {
        assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "{a} vs {b}");
    }
    // even eigenvectors are invariant under the deck map
    for u in &even.eigenvectors {
        for (v, &w) in cover.involution.iter().enumerate() {
            assert!((u[v] - u[w]).abs() < 1e-8);
        }
    }
}

#[test]
fn even_and_odd_spectra_make_up_the_cover() {
    let (m, g) = build_standard(&StandardSurface::ProjectivePlane, 6).unwrap();
    let cover = orientation_double_cover(&m, &g).unwrap();
    let ops = assemble(&cover.mesh, &cover.metric, &BoundaryCondition::Closed).unwrap();
    let k = 10;
    let full = solve_spectrum(&ops, k, &opts()).unwrap();
    let mut union: Vec<f64> = even_spectrum(&ops, &cover.involution, k, &opts())
        .unwrap()
        .eigenvalues
        .into_iter()
        .chain(odd_spectrum(&ops, &cover.involution, k, &opts()).unwrap().eigenvalues)
        .collect();
    union.sort_by(f64::total_cmp);
    for (a, b) in full.eigenvalues.iter().zip(&union) {
        assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "{:?} vs {:?}", full.eigenvalues, union);
    }
}

#[test]
fn harmonic_extension_of_cos_theta_and_its_tangential_energy() {
    let eps = 0.04;
    let (m, g) = build_flat_torus(
        [[1.0, 0.0], [0.0, 1.0]],
        24,
        &[PatchSpec {
            center: [0.5, 0.5],
            core_radius: 0.2,
            anchor_radius: eps,
        }],
    )
    .unwrap();
    let patch = &m.patches()[0];
    let ring = patch.ring_at(eps).unwrap();
    let mut interior = vec![patch.center.unwrap()];
    for r in &patch.rings {
        if r.radius < eps * (1.0 - 1e-9) {
            interior.extend(&r.vertices);
        }
    }
    let data: Vec<(usize, f64)> = ring.vertices.iter().zip(&ring.angles).map(|(&v, &a)| (v, a.cos())).collect();
    let ext = harmonic_extension(&m, &g, &interior, &data).unwrap();
    assert!(ext.residual < 1e-9);
    assert!(rel(ext.energy, PI) < 2e-2, "{}", ext.energy);

    let mut u = vec![0.0; m.num_vertices()];
    for &(v, x) in &data {
        u[v] = x;
    }
    let lp = BoundaryLoop {
        vertices: ring.vertices.clone(),
    };
    let t = boundary_tangential_energy(&m, &g, &u, &lp).unwrap();
    assert!(rel(t * eps, PI) < 2e-2, "{}", t * eps);
}

#[test]
fn solvers_agree_on_a_small_problem() {
    let (m, g) = build_standard(&StandardSurface::equilateral_torus(1.0), 8).unwrap();
    let ops = assemble(&m, &g, &BoundaryCondition::Closed).unwrap();
    let o = EigenOptions { count: 7, ..opts() };
    let a = smallest_eigenpairs(&ops.stiffness, &ops.mass, &o).unwrap();
    let b = dense_eigenpairs(&ops.stiffness, &ops.mass, 7).unwrap();
    let c = lobpcg(&ops.stiffness, &ops.mass, &EigenOptions { tolerance: 1e-8, ..o }).unwrap();
    for i in 0..7 {
        assert!((a.values[i] - b.values[i]).abs() < 1e-8 * b.values[i].max(1.0));
        assert!((c.values[i] - b.values[i]).abs() < 1e-5 * b.values[i].max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn normalized_spectrum_is_scale_invariant(c in 0.2f64..5.0, res in 4usize..9) {
        let (m, g) = build_standard(&StandardSurface::FlatKleinBottle { width: 1.0, height: 0.9 }, res).unwrap();
        let a = solve_spectrum(&assemble(&m, &g, &BoundaryCondition::Closed).unwrap(), 6, &opts()).unwrap();
        let h = g.scaled(c);
        let b = solve_spectrum(&assemble(&m, &h, &BoundaryCondition::Closed).unwrap(), 6, &opts()).unwrap();
        for i in 1..6 {
            let x = a.eigenvalues[i] * g.area(&m);
            let y = b.eigenvalues[i] * h.area(&m);
            prop_assert!((x - y).abs() < 1e-8 * x);
        }
    }

    #[test]
    fn rayleigh_quotient_bounds_lambda1(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let (m, g) = build_standard(&StandardSurface::RoundSphere, 3).unwrap();
        let ops = assemble(&m, &g, &BoundaryCondition::Closed).unwrap();
        let sp = solve_spectrum(&ops, 3, &opts()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<f64> = (0..ops.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // remove the mean so the constant mode drops out
        let w = ops.mass.diagonal();
        let mean = u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        u.iter_mut().for_each(|x| *x -= mean);
        let r = rayleigh(&ops, &ops.expand(&u)).unwrap();
        prop_assert!(r >= sp.eigenvalues[1] * (1.0 - 1e-9));
        prop_assert!(sp.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
    }
}
