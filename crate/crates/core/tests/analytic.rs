use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use surfspec::analytic::*;

#[test]
fn known_constants() {
    let k = KnownConstants::new();
    let values: Vec<f64> = k.all().iter().map(|c| c.value).collect();
    for expected in [8.0 * PI, 12.0 * PI, 8.0 * PI * PI / 3f64.sqrt()] {
        assert!(values.iter().any(|v| (v - expected).abs() < 1e-12), "{expected} missing from {values:?}");
    }
}

#[test]
fn model_values_at_the_reference_point() {
    let cc = model_mode_values(ModelKind::CrossCap, 0.05, 1.0).unwrap();
    let cy = model_mode_values(ModelKind::Cylinder, 0.05, 1.0).unwrap();
    assert_relative_eq!(cc.lambda0, PI * PI / 4.0, max_relative = 1e-14);
    assert_relative_eq!(cy.lambda0, PI * PI, max_relative = 1e-14);
    assert!(cc.valid && cy.valid);
    assert!(!model_mode_values(ModelKind::Cylinder, 1.0, 0.1).unwrap().valid);
    assert!(model_mode_values(ModelKind::CrossCap, 0.0, 1.0).is_err());
}

#[test]
fn veronese_energy_approaches_twelve_pi() {
    let e6 = veronese_energy(64, 64, 6.0).unwrap();
    let e3 = veronese_energy(64, 64, 3.0).unwrap();
    assert!(e3 < e6 && e6 < 12.0 * PI);
    assert!((12.0 * PI - e6) / (12.0 * PI) < 1e-2, "{e6}");
}

proptest! {
    #[test]
    fn interval_spectra_are_closed_forms(h in 0.05f64..3.0, n in 1usize..12) {
        let z2 = interval_z2_dirichlet(h, n).unwrap();
        let full = interval_dirichlet(h, n).unwrap();
        prop_assert_eq!(z2.len(), n);
        for m in 0..n {
            let a = ((2 * m + 1) as f64 * PI / (2.0 * h)).powi(2);
            prop_assert!((z2[m] - a).abs() <= 1e-12 * a);
            let b = ((m + 1) as f64 * PI / h).powi(2);
            prop_assert!((full[m] - b).abs() <= 1e-12 * b);
        }
        // the symmetric modes of [0, 2h] are every other mode of [0, 2h]
        let double = interval_dirichlet(2.0 * h, 2 * n).unwrap();
        for m in 0..n {
            prop_assert!((z2[m] - double[2 * m]).abs() <= 1e-10 * z2[m]);
        }
    }

    #[test]
    fn crossing_height_inverts_the_lowest_interval_value(lambda in 0.5f64..200.0) {
        for kind in [ModelKind::CrossCap, ModelKind::Cylinder] {
            let h = crossing_height(kind, lambda);
            let low = model_interval_spectrum(kind, h, 1).unwrap()[0];
            prop_assert!((low - lambda).abs() <= 1e-10 * lambda);
        }
    }

    #[test]
    fn merged_limit_is_sorted_union(
        mut base in prop::collection::vec(0.0f64..400.0, 1..10),
        h in 0.05f64..1.0,
        count in 1usize..15,
    ) {
        base.sort_by(f64::total_cmp);
        let lim = merge_limit_spectrum(&base, h, count).unwrap();
        prop_assert!(lim.merged.len() <= count);
        prop_assert!(lim.merged.windows(2).all(|w| w[0] <= w[1]));
        let nb = lim.from_interval.iter().filter(|&&b| !b).count();
        prop_assert_eq!(&lim.merged[..].iter().zip(&lim.from_interval).filter(|(_, &b)| !b).map(|(v, _)| *v).collect::<Vec<_>>()[..], &base[..nb]);
        let ni = lim.merged.len() - nb;
        prop_assert_eq!(&lim.merged.iter().zip(&lim.from_interval).filter(|(_, &b)| b).map(|(v, _)| *v).collect::<Vec<_>>()[..], &lim.interval[..ni]);
    }

    #[test]
    fn sphere_map_and_veronese_stay_on_spheres(t in -5.0f64..5.0, theta in 0.0f64..(2.0 * PI)) {
        let p = sphere_map(t, theta);
        let r: f64 = p.iter().map(|x| x * x).sum();
        prop_assert!((r - 1.0).abs() < 1e-12);
        let v = veronese(p);
        let s: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        // antipodal points share an image
        let q = veronese([-p[0], -p[1], -p[2]]);
        for i in 0..5 {
            prop_assert!((v[i] - q[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn elliptic_integral_two_ways(k in 0.0f64..0.99) {
        let a = elliptic_e(k);
        let b = elliptic_e_agm(k);
        prop_assert!((a - b).abs() < 1e-9 * a, "{} vs {}", a, b);
        prop_assert!(a <= PI / 2.0 + 1e-12 && a >= 1.0 - 1e-12);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1(n in 1usize..20, d in 0usize..40) {
        prop_assume!(d < 2 * n);
        let (x, w) = gauss_legendre(n);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
        let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
        prop_assert!((q - exact).abs() < 1e-12, "n {} d {}: {} vs {}", n, d, q, exact);
    }
}
