//! Closed-form reference values: interval and model spectra, limit spectra,
//! collar formulas, the cylinder-to-sphere map with its Veronese energy, and
//! the known maximal values of `λ₁ · area`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dirichlet eigenvalues of `[0, 2h]` whose eigenfunctions are invariant under
/// `t -> 2h - t`: `((2m + 1) π / (2h))^2`.
pub fn interval_z2_dirichlet(h: f64, count: usize) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("height must be positive, got {h}")));
    }
    Ok((0..count)
        .map(|m| ((2 * m + 1) as f64 * PI / (2.0 * h)).powi(2))
        .collect())
}

/// Dirichlet eigenvalues of an interval of the given length: `(m π / L)^2`, `m >= 1`.
pub fn interval_dirichlet(length: f64, count: usize) -> Result<Vec<f64>> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
    }
    Ok((1..=count).map(|m| (m as f64 * PI / length).powi(2)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Möbius band `S^1(ε) x [0, 2h] / ((θ, t) ~ (θ + π, 2h - t))`.
    CrossCap,
    /// Flat cylinder `S^1(ε) x [0, h]`.
    Cylinder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeValues {
    /// Lowest Dirichlet eigenvalue of the model.
    pub lambda0: f64,
    /// Next value quoted for the model.
    pub mu1: f64,
    /// True when the circle's first eigenvalue `1/ε^2` lies above both, so the
    /// low modes are functions of the axial variable only.
    pub valid: bool,
}

pub fn model_mode_values(kind: ModelKind, epsilon: f64, h: f64) -> Result<ModeValues> {
    if !(epsilon > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument("epsilon and h must be positive".into()));
    }
    let (lambda0, mu1) = match kind {
        ModelKind::CrossCap => (PI * PI / (4.0 * h * h), PI * PI / (h * h)),
        ModelKind::Cylinder => (PI * PI / (h * h), 4.0 * PI * PI / (h * h)),
    };
    let circle = 1.0 / (epsilon * epsilon);
    Ok(ModeValues {
        lambda0,
        mu1,
        valid: circle > lambda0 && circle > mu1,
    })
}

/// Interval spectrum that a thin model contributes in the limit `ε -> 0`.
pub fn model_interval_spectrum(kind: ModelKind, h: f64, count: usize) -> Result<Vec<f64>> {
    match kind {
        ModelKind::CrossCap => interval_z2_dirichlet(h, count),
        ModelKind::Cylinder => interval_dirichlet(h, count),
    }
}

/// Sorted union of a base spectrum and an interval spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSpectrum {
    pub base: Vec<f64>,
    pub h: f64,
    pub kind: ModelKind,
    pub interval: Vec<f64>,
    pub merged: Vec<f64>,
    /// For each merged value, whether it came from the interval.
    pub from_interval: Vec<bool>,
}

/// Merges the base spectrum with the cross-cap interval spectrum and keeps the
/// lowest `count` values.
pub fn merge_limit_spectrum(base: &[f64], h: f64, count: usize) -> Result<LimitSpectrum> {
    merge_limit_spectrum_for(ModelKind::CrossCap, base, h, count)
}

pub fn merge_limit_spectrum_for(kind: ModelKind, base: &[f64], h: f64, count: usize) -> Result<LimitSpectrum> {
    if base.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("base spectrum must be ascending".into()));
    }
    let interval = model_interval_spectrum(kind, h, count)?;
    let mut merged = Vec::with_capacity(count);
    let mut from_interval = Vec::with_capacity(count);
    let (mut i, mut j) = (0, 0);
    while merged.len() < count && (i < base.len() || j < interval.len()) {
        // ties keep the base value first
        let take_base = j >= interval.len() || (i < base.len() && base[i] <= interval[j]);
        if take_base {
            merged.push(base[i]);
            from_interval.push(false);
            i += 1;
        } else {
            merged.push(interval[j]);
            from_interval.push(true);
            j += 1;
        }
    }
    Ok(LimitSpectrum {
        base: base.to_vec(),
        h,
        kind,
        interval,
        merged,
        from_interval,
    })
}

/// Height at which the lowest interval value of the model equals `lambda`.
pub fn crossing_height(kind: ModelKind, lambda: f64) -> f64 {
    match kind {
        ModelKind::CrossCap => PI / (2.0 * lambda.sqrt()),
        ModelKind::Cylinder => PI / lambda.sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollarKind {
    /// Annular collar around a two-sided geodesic.
    TwoSided,
    /// Möbius collar around a one-sided geodesic.
    OneSided,
}

/// Half-width of the standard collar around a closed geodesic of length `l`.
pub fn collar_width(kind: CollarKind, l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::InvalidArgument(format!("geodesic length must be positive, got {l}")));
    }
    Ok(match kind {
        CollarKind::TwoSided => (PI / l) * (PI - 2.0 * (l / 2.0).sinh().atan()),
        CollarKind::OneSided => (PI / (2.0 * l)) * (PI - 2.0 * l.sinh().atan()),
    })
}

/// Conformal factor of the hyperbolic collar metric in the flat cylinder
/// coordinates `(t, θ)`, `|t| < width`.
pub fn collar_conformal_factor(kind: CollarKind, l: f64, t: f64) -> Result<f64> {
    let w = collar_width(kind, l)?;
    if !(t.abs() < w) {
        return Err(Error::InvalidArgument(format!("|t| = {} exceeds the collar width {w}", t.abs())));
    }
    let ll = match kind {
        CollarKind::TwoSided => l,
        CollarKind::OneSided => 2.0 * l,
    };
    Ok((ll / (2.0 * PI * (ll * t / (2.0 * PI)).cos())).powi(2))
}

/// Conformal map from the cylinder `R x S^1` onto the sphere minus the poles.
pub fn sphere_map(t: f64, theta: f64) -> [f64; 3] {
    // divide through by e^t to stay finite for large |t|
    let (s, c) = theta.sin_cos();
    let sech = 1.0 / t.cosh();
    [sech * c, sech * s, t.tanh()]
}

/// Partial derivatives of [`sphere_map`] in `t` and `θ`.
pub fn sphere_map_derivatives(t: f64, theta: f64) -> ([f64; 3], [f64; 3]) {
    let (s, c) = theta.sin_cos();
    let sech = 1.0 / t.cosh();
    let th = t.tanh();
    let dt = [-sech * th * c, -sech * th * s, sech * sech];
    let dtheta = [-sech * s, sech * c, 0.0];
    (dt, dtheta)
}

/// The Veronese map, scaled so that it sends the unit sphere into the unit
/// sphere of `R^5`. It is even, so it factors through the projective plane.
pub fn veronese(p: [f64; 3]) -> [f64; 5] {
    let [x, y, z] = p;
    let r3 = 3f64.sqrt();
    [
        r3 * x * y,
        r3 * x * z,
        r3 * y * z,
        r3 * (x * x - y * y) / 2.0,
        (x * x + y * y - 2.0 * z * z) / 2.0,
    ]
}

/// Differential of [`veronese`] at `p` applied to `w`.
pub fn veronese_differential(p: [f64; 3], w: [f64; 3]) -> [f64; 5] {
    let [x, y, z] = p;
    let [a, b, c] = w;
    let r3 = 3f64.sqrt();
    [
        r3 * (a * y + x * b),
        r3 * (a * z + x * c),
        r3 * (b * z + y * c),
        r3 * (x * a - y * b),
        x * a + y * b - 2.0 * z * c,
    ]
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Dirichlet energy `∫|∇(v∘φ)|^2` over `[0, t_max] x [0, 2π)`, a fundamental
/// domain of the cylinder modulo `(t, θ) ~ (-t, θ + π)`. Trapezoid rule in
/// `θ` with `n_theta` points, composite Gauss-Legendre in `t` with `n_t`
/// panels of 8 nodes.
pub fn veronese_energy(n_theta: usize, n_t: usize, t_max: f64) -> Result<f64> {
    if n_theta < 4 || n_t == 0 || !(t_max > 0.0) {
        return Err(Error::InvalidArgument("quadrature resolution too small".into()));
    }
    let (gx, gw) = gauss_legendre(8);
    let panel = t_max / n_t as f64;
    let dth = 2.0 * PI / n_theta as f64;
    let mut total = 0.0;
    for p in 0..n_t {
        let a = p as f64 * panel;
        for (xi, wi) in gx.iter().zip(&gw) {
            let t = a + 0.5 * panel * (xi + 1.0);
            let mut ring = 0.0;
            for k in 0..n_theta {
                let th = k as f64 * dth;
                let pnt = sphere_map(t, th);
                let (dt, dtheta) = sphere_map_derivatives(t, th);
                let vt = veronese_differential(pnt, dt);
                let vth = veronese_differential(pnt, dtheta);
                ring += vt.iter().chain(&vth).map(|x| x * x).sum::<f64>();
            }
            total += 0.5 * panel * wi * ring * dth;
        }
    }
    Ok(total)
}

/// Complete elliptic integral of the second kind with modulus `k`,
/// `∫_0^{π/2} sqrt(1 - k^2 sin^2 θ) dθ`, by adaptive Simpson quadrature.
pub fn elliptic_e(k: f64) -> f64 {
    let f = |th: f64| (1.0 - k * k * th.sin().powi(2)).max(0.0).sqrt();
    adaptive_simpson(&f, 0.0, PI / 2.0, 1e-14, 50)
}

/// The same integral through the arithmetic-geometric mean.
pub fn elliptic_e_agm(k: f64) -> f64 {
    let mut a = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    let mut c = k;
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..60 {
        if c.abs() < 1e-17 {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        pow *= 2.0;
        sum += pow * c * c;
        a = an;
        b = bn;
    }
    let big_k = PI / (2.0 * a);
    big_k * (1.0 - sum)
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// `12π E(2√2/3)`, the largest `λ₁ · area` on the Klein bottle.
pub fn klein_maximizer_value() -> f64 {
    12.0 * PI * elliptic_e(2.0 * 2f64.sqrt() / 3.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownConstant {
    pub name: String,
    pub surface: String,
    pub expression: String,
    pub value: f64,
    pub citation: String,
}

/// Known values of `sup λ₁ · area` used as validation targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownConstants {
    pub sphere: KnownConstant,
    pub projective_plane: KnownConstant,
    pub torus: KnownConstant,
    pub klein_bottle: KnownConstant,
    /// Elliptic integrals use the modulus convention `E(k)`.
    pub elliptic_convention: String,
}

impl KnownConstants {
    pub fn new() -> Self {
        let c = |name: &str, surface: &str, expression: &str, value: f64, citation: &str| KnownConstant {
            name: name.into(),
            surface: surface.into(),
            expression: expression.into(),
            value,
            citation: citation.into(),
        };
        KnownConstants {
            sphere: c("Lambda1(S2)", "sphere", "8*pi", 8.0 * PI, "Hersch 1970"),
            projective_plane: c("Lambda1(RP2)", "projective plane", "12*pi", 12.0 * PI, "Li-Yau 1982"),
            torus: c(
                "Lambda1(T2)",
                "torus",
                "8*pi^2/sqrt(3)",
                8.0 * PI * PI / 3f64.sqrt(),
                "Nadirashvili 1996",
            ),
            klein_bottle: c(
                "Lambda1(K)",
                "Klein bottle",
                "12*pi*E(2*sqrt(2)/3)",
                klein_maximizer_value(),
                "Jakobson-Nadirashvili-Polterovich 2006; El Soufi-Giacomini-Jazar 2006",
            ),
            elliptic_convention: "E(k) = int_0^{pi/2} sqrt(1 - k^2 sin^2 t) dt, modulus k".into(),
        }
    }

    pub fn all(&self) -> [&KnownConstant; 4] {
        [&self.sphere, &self.projective_plane, &self.torus, &self.klein_bottle]
    }
}

impl Default for KnownConstants {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_values() {
        let v = interval_z2_dirichlet(PI / 2.0, 3).unwrap();
        assert_relative_eq!(v[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(v[1], 9.0, max_relative = 1e-15);
        assert!(interval_z2_dirichlet(0.0, 1).is_err());
    }

    #[test]
    fn merge_examples() {
        let l = merge_limit_spectrum(&[0.0], PI / 2.0, 3).unwrap();
        assert_eq!(l.merged.len(), 3);
        assert_relative_eq!(l.merged[1], 1.0, max_relative = 1e-15);
        assert_relative_eq!(l.merged[2], 9.0, max_relative = 1e-15);
        let l = merge_limit_spectrum(&[0.0, 2.0], 1.0, 1).unwrap();
        assert_eq!(l.merged, vec![0.0]);
    }

    #[test]
    fn collar_examples() {
        let w = collar_width(CollarKind::TwoSided, 1.0).unwrap();
        assert_relative_eq!(w, PI * (PI - 2.0 * 0.5f64.sinh().atan()), max_relative = 1e-15);
        assert_relative_eq!(w, 6.851281062829234, max_relative = 1e-12);
        let f = collar_conformal_factor(CollarKind::TwoSided, 1.0, 0.0).unwrap();
        assert_relative_eq!(f, (1.0 / (2.0 * PI)).powi(2), max_relative = 1e-15);
        assert!(collar_conformal_factor(CollarKind::TwoSided, 1.0, 7.0).is_err());
    }

    #[test]
    fn sphere_map_matches_the_rational_form() {
        for &(t, th) in &[(0.3, 1.1), (-2.0, 4.0), (0.0, 0.0)] {
            let e = f64::exp(t);
            let d = e * e + 1.0;
            let want = [2.0 * e * f64::cos(th) / d, 2.0 * e * f64::sin(th) / d, (e * e - 1.0) / d];
            let got = sphere_map(t, th);
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() < 1e-15);
            }
        }
        assert_eq!(sphere_map(0.0, 0.0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn veronese_lands_on_the_unit_sphere() {
        let p = [0.48, -0.6, 0.64];
        let v = veronese(p);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn veronese_energy_matches_the_area_pullback() {
        // v pulls the round metric back to 3 times itself, and φ is conformal
        // with area element sech^2 t, so the energy is 6 * 2π * tanh(t_max)
        for &t in &[0.5, 2.0, 6.0] {
            let e = veronese_energy(64, 32, t).unwrap();
            assert_relative_eq!(e, 12.0 * PI * t.tanh(), max_relative = 1e-10);
        }
    }

    #[test]
    fn elliptic_e_two_ways() {
        assert_relative_eq!(elliptic_e(0.0), PI / 2.0, max_relative = 1e-14);
        let k = 2.0 * 2f64.sqrt() / 3.0;
        assert_relative_eq!(elliptic_e(k), elliptic_e_agm(k), max_relative = 1e-12);
    }
}
