use std::f64::consts::PI;

use proptest::prelude::*;
use surfspec::geometry::{euler_characteristic, Topology};
use surfspec::spectral::EigenOptions;
use surfspec::surgery::*;

fn torus() -> BaseSurface {
    BaseSurface::equilateral_torus(1.0)
}

#[test]
fn euler_characteristic_and_orientability_after_surgery() {
    let cases = [
        (SurgerySetup::new(torus(), AttachKind::CrossCap, 16), -1, false),
        (SurgerySetup::new(torus(), AttachKind::Handle, 24), -2, true),
        (SurgerySetup::new(BaseSurface::RoundSphere, AttachKind::Handle, 16), 0, true),
        (SurgerySetup::new(BaseSurface::RoundSphere, AttachKind::CrossCap, 16), 1, false),
    ];
    for (setup, chi, orientable) in cases {
        let s = setup.surgered(0.05, 0.3).unwrap();
        assert!(s.mesh.is_closed());
        assert_eq!(euler_characteristic(&s.mesh), chi, "{:?}", setup.kind);
        assert_eq!(s.mesh.is_orientable(), orientable);
    }
    let genus_two = SurgerySetup::new(torus(), AttachKind::Handle, 24).surgered(0.04, 0.2).unwrap();
    assert_eq!(genus_two.mesh.declared_topology(), Some(Topology::Orientable { genus: 2 }));
}

#[test]
fn areas_add_up_and_seams_have_the_disk_circumference() {
    for kind in [AttachKind::CrossCap, AttachKind::Handle] {
        let (eps, h) = (0.05, 0.3);
        let s = SurgerySetup::new(torus(), kind, 24).surgered(eps, h).unwrap();
        let total = s.area();
        assert!((total - s.punctured_area - s.model_area).abs() < 1e-12 * total);
        let centers = kind.centers() as f64;
        let removed = s.base_area - s.punctured_area;
        assert!((removed - centers * PI * eps * eps).abs() < 0.02 * centers * PI * eps * eps, "{removed}");
        // cross cap: circumference x 2h of Möbius band; cylinder: circumference x h per handle
        let model = match kind {
            AttachKind::CrossCap => s.circumference * 2.0 * h / 2.0,
            AttachKind::Handle => s.circumference * h,
        };
        assert!((s.model_area - model).abs() < 0.02 * model, "{kind:?}: {} vs {model}", s.model_area);
        assert!((s.circumference - 2.0 * PI * eps).abs() < 0.01 * 2.0 * PI * eps);
        assert_eq!(s.seams.len(), kind.centers());
    }
}

#[test]
fn epsilon_must_fit_the_patch() {
    let setup = SurgerySetup::new(torus(), AttachKind::CrossCap, 16);
    assert!(setup.surgered(0.5, 0.3).is_err());
}

#[test]
fn upper_half_of_the_sandwich_holds() {
    let setup = SurgerySetup::new(torus(), AttachKind::CrossCap, 16);
    let r = verify_chain(&setup, 0.05, 0.15, None, &EigenOptions::default()).unwrap();
    assert!(r.upper_holds, "{r:?}");
    assert!(r.model_relative_error() < 2e-2);
    assert!(r.lambda1_surgered <= r.lambda1_base * 1.01);
}

#[test]
fn sweep_records_every_grid_point() {
    let setup = SurgerySetup::new(torus(), AttachKind::CrossCap, 16);
    let res = convergence_sweep(&setup, &[0.2, 0.35], &[0.08, 0.04], 3, &EigenOptions::default()).unwrap();
    assert_eq!(res.grid.len(), 4);
    for p in &res.grid {
        assert!(p.error.is_none());
        assert_eq!(p.deviations.len(), 4);
        assert!(p.deviations[0] < 1e-8, "constant mode");
    }
    // sorted by h, then by decreasing epsilon
    assert!(res.grid[0].h <= res.grid[2].h && res.grid[0].epsilon > res.grid[1].epsilon);
    let mut csv = Vec::new();
    res.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 4 * 4);
    assert!(convergence_sweep(&setup, &[], &[0.08], 3, &EigenOptions::default()).is_err());
}

#[test]
fn csv_header_lines_precede_the_body() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    write_csv_atomic(&path, &["hash: abc".into(), "units: none".into()], b"a,b\n1,2\n").unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "# hash: abc\n# units: none\na,b\n1,2\n");
}

proptest! {
    #[test]
    fn power_law_fit_recovers_exponent(c in 0.1f64..10.0, p in -3.0f64..3.0) {
        let x: Vec<f64> = (0..5).map(|i| 0.08 / 2f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|x| c * x.powf(p)).collect();
        let fit = fit_power_law(&x, &y).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
    }
}
