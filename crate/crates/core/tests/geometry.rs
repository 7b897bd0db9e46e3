use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use surfspec::geometry::*;

#[test]
fn standard_surfaces_have_their_topology() {
    let cases = [
        (StandardSurface::RoundSphere, 4, 2, true),
        (StandardSurface::ProjectivePlane, 4, 1, false),
        (StandardSurface::equilateral_torus(1.0), 10, 0, true),
        (StandardSurface::square_torus(2.0 * PI), 10, 0, true),
        (StandardSurface::FlatKleinBottle { width: 1.0, height: 0.7 }, 10, 0, false),
    ];
    for (kind, res, chi, orientable) in cases {
        let (mesh, metric) = build_standard(&kind, res).unwrap();
        assert!(mesh.is_closed(), "{kind:?}");
        assert_eq!(euler_characteristic(&mesh), chi, "{kind:?}");
        assert_eq!(mesh.is_orientable(), orientable, "{kind:?}");
        metric.validate(&mesh).unwrap();
    }
}

#[test]
fn flat_areas_are_exact_and_sphere_area_converges() {
    let (m, g) = build_standard(&StandardSurface::square_torus(2.0 * PI), 12).unwrap();
    assert_relative_eq!(g.area(&m), 4.0 * PI * PI, max_relative = 1e-12);
    let (m, g) = build_standard(&StandardSurface::equilateral_torus(3.0), 9).unwrap();
    assert_relative_eq!(g.area(&m), 3.0, max_relative = 1e-12);
    let coarse = {
        let (m, g) = build_standard(&StandardSurface::RoundSphere, 4).unwrap();
        (g.area(&m) - 4.0 * PI).abs()
    };
    let fine = {
        let (m, g) = build_standard(&StandardSurface::RoundSphere, 16).unwrap();
        (g.area(&m) - 4.0 * PI).abs()
    };
    assert!(fine < coarse / 10.0 && fine / (4.0 * PI) < 2e-3, "{coarse} {fine}");
}

#[test]
fn double_covers_double_the_area() {
    for kind in [
        StandardSurface::ProjectivePlane,
        StandardSurface::FlatKleinBottle { width: 1.0, height: 1.3 },
    ] {
        let (m, g) = build_standard(&kind, 8).unwrap();
        let cover = orientation_double_cover(&m, &g).unwrap();
        assert!(cover.mesh.is_orientable());
        assert_eq!(euler_characteristic(&cover.mesh), 2 * euler_characteristic(&m));
        assert_relative_eq!(cover.metric.area(&cover.mesh), 2.0 * g.area(&m), max_relative = 1e-12);
        for (v, &w) in cover.involution.iter().enumerate() {
            assert_ne!(v, w);
            assert_eq!(cover.involution[w], v);
            assert_eq!(cover.projection[v], cover.projection[w]);
        }
    }
    let (m, g) = build_standard(&StandardSurface::RoundSphere, 4).unwrap();
    assert!(orientation_double_cover(&m, &g).is_err());
}

#[test]
fn json_document_round_trips() {
    let (m, g) = build_standard(&StandardSurface::FlatKleinBottle { width: 1.0, height: 0.6 }, 8).unwrap();
    let g = g.scaled(1.7);
    let mut bytes = Vec::new();
    io::write_json(&mut bytes, &m, &g).unwrap();
    let (m2, g2) = io::read_json(&bytes[..]).unwrap();
    assert_eq!(m.triangles(), m2.triangles());
    assert_eq!(g.edge_lengths(&m), g2.edge_lengths(&m2));
    assert!(!m2.is_orientable());

    let mut doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    doc["schema_version"] = 99.into();
    assert!(io::read_json(serde_json::to_vec(&doc).unwrap().as_slice()).is_err());
}

#[test]
fn removing_a_disk_opens_one_loop_of_length_two_pi_epsilon() {
    let (m, g) = build_flat_torus([[1.0, 0.0], [0.0, 1.0]], 24, &[PatchSpec {
        center: [0.5, 0.5],
        core_radius: 0.2,
        anchor_radius: 0.05,
    }]).unwrap();
    let center = m.patches()[0].center.unwrap();
    let cut = remove_disk(&m, &g, center, 0.05).unwrap();
    assert_eq!(cut.mesh.boundary_loops().len(), 1);
    assert_eq!(euler_characteristic(&cut.mesh), -1);
    let len = loop_length(&cut.mesh, &cut.metric, &cut.boundary).unwrap();
    assert!((len - 2.0 * PI * 0.05).abs() / (2.0 * PI * 0.05) < 1e-2, "{len}");
    assert!(cut.metric.area(&cut.mesh) < g.area(&m));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_multiplies_area_by_the_square(c in 0.1f64..10.0, res in 3usize..10) {
        let (m, g) = build_standard(&StandardSurface::equilateral_torus(1.0), res).unwrap();
        let a = g.scaled(c).area(&m);
        prop_assert!((a - c * c).abs() < 1e-10 * c * c);
    }

    #[test]
    fn flat_tori_are_closed_with_zero_curvature(
        a0 in 0.5f64..2.0, q in 1usize..9, p in 0usize..9, t in 1.0f64..2.0, res in 6usize..14,
    ) {
        // meshable lattices have a rational shear against their shortest vector
        let b0 = a0 * (p % q) as f64 / q as f64;
        let b1 = a0 * t;
        let basis = [[a0, 0.0], [b0, b1]];
        let (m, g) = build_standard(&StandardSurface::FlatTorus { basis }, res).unwrap();
        prop_assert_eq!(euler_characteristic(&m), 0);
        prop_assert!((g.area(&m) - a0 * b1).abs() < 1e-10 * a0 * b1);
        for s in g.angle_sums(&m) {
            prop_assert!((s - 2.0 * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_conformal_factor_is_a_scaling(u in -1.0f64..1.0) {
        let (m, g) = build_standard(&StandardSurface::RoundSphere, 3).unwrap();
        let h = g.with_conformal_factor(&m, vec![u; m.num_vertices()]).unwrap();
        let expect = g.scaled(u.exp()).area(&m);
        prop_assert!((h.area(&m) - expect).abs() < 1e-10 * expect);
    }
}
