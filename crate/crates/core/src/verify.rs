//! The numbered acceptance checks. Each returns a [`CheckRecord`] with the
//! numbers it was decided on; [`run_suite`] collects them into a manifest.

use std::f64::consts::PI;
use std::time::Instant;

use crate::analytic::{self, veronese_energy, ModelKind};
use crate::error::{Error, Result};
use crate::geometry::{
    antipodal_map, build_standard, icosphere, orientation_double_cover, DiscreteMetric, StandardSurface, SurfaceMesh,
};
use crate::spectral::{
    assemble, cluster_values, even_spectrum, odd_spectrum, solve_spectrum, BoundaryCondition, EigenOptions,
    DEFAULT_CLUSTER_TOLERANCE,
};
use crate::surgery::{
    convergence_sweep, fit_power_law, height_scan, model_dirichlet_lambda0, monotonicity_certificate,
    scaling_laws, verify_chain, AttachKind, BaseSurface, CheckRecord, ScanOptions, SurgerySetup, VerifyManifest,
};

/// Name of every check, in order.
pub const CHECKS: [&str; 9] = [
    "1_known_maximizers",
    "2_model_modes",
    "3_limit_convergence",
    "4_crossing",
    "5_sandwich",
    "6_scaling_laws",
    "7_monotonicity",
    "8_veronese_energy",
    "9_properties",
];

/// Resolution of the sphere mesh with about 10k vertices.
const SPHERE_FREQUENCY: usize = 32;

fn eigen(seed: u64) -> EigenOptions {
    EigenOptions {
        seed,
        ..EigenOptions::default()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn lambda1_area(mesh: &SurfaceMesh, metric: &DiscreteMetric, opts: &EigenOptions) -> Result<f64> {
    let ops = assemble(mesh, metric, &BoundaryCondition::Closed)?;
    let s = solve_spectrum(&ops, 4, opts)?;
    Ok(s.eigenvalues[1] * ops.area)
}

/// λ₁·area on the round sphere, on RP² through the even part of its sphere
/// cover, and on the equilateral torus against the lattice spectrum.
pub fn known_maximizers(seed: u64) -> Result<CheckRecord> {
    let opts = eigen(seed);
    let consts = analytic::KnownConstants::new();
    let mut rec = CheckRecord::default();

    let t = Instant::now();
    let (mesh, metric) = build_standard(&StandardSurface::RoundSphere, SPHERE_FREQUENCY)?;
    let ops = assemble(&mesh, &metric, &BoundaryCondition::Closed)?;
    let s = solve_spectrum(&ops, 5, &opts)?;
    let sphere = s.eigenvalues[1] * ops.area;
    let sphere_s = t.elapsed().as_secs_f64();
    let (pos, _) = icosphere(SPHERE_FREQUENCY);
    let even = even_spectrum(&ops, &antipodal_map(&pos), 3, &opts)?;
    let rp2 = even.eigenvalues[1] * ops.area / 2.0;

    let t = Instant::now();
    let base = BaseSurface::equilateral_torus(1.0);
    let (mesh, metric) = build_standard(&StandardSurface::equilateral_torus(1.0), 48)?;
    let torus = lambda1_area(&mesh, &metric, &opts)?;
    let torus_s = t.elapsed().as_secs_f64();
    let lattice = base.exact_lambda1() * base.exact_area();

    rec.pass = rel(sphere, consts.sphere.value) < 0.01
        && sphere_s < 30.0
        && rel(rp2, consts.projective_plane.value) < 0.01
        && rel(torus, consts.torus.value) < 0.005
        && rel(lattice, consts.torus.value) < 1e-12
        && torus_s < 5.0;
    Ok(rec
        .value("sphere_vertices", mesh_vertices(SPHERE_FREQUENCY) as f64)
        .value("sphere_lambda1_area", sphere)
        .value("sphere_rel_error", rel(sphere, consts.sphere.value))
        .value("sphere_seconds", sphere_s)
        .value("rp2_lambda1_area", rp2)
        .value("rp2_rel_error", rel(rp2, consts.projective_plane.value))
        .value("torus_lambda1_area", torus)
        .value("torus_rel_error", rel(torus, consts.torus.value))
        .value("torus_lattice_value", lattice)
        .value("torus_seconds", torus_s))
}

fn mesh_vertices(frequency: usize) -> usize {
    10 * frequency * frequency + 2
}

/// Dirichlet ground states of the two models at `(ε, h) = (0.05, 1)`.
pub fn model_modes(seed: u64) -> Result<CheckRecord> {
    let opts = eigen(seed);
    let cc = model_dirichlet_lambda0(AttachKind::CrossCap, 0.05, 1.0, 32, None, &opts)?;
    let cyl = model_dirichlet_lambda0(AttachKind::Handle, 0.05, 1.0, 32, None, &opts)?;
    let (ecc, ecyl) = (rel(cc, PI * PI / 4.0), rel(cyl, PI * PI));
    let mut rec = CheckRecord::default();
    rec.pass = ecc < 0.01 && ecyl < 0.01;
    Ok(rec
        .value("cross_cap_lambda0", cc)
        .value("cross_cap_rel_error", ecc)
        .value("cylinder_lambda0", cyl)
        .value("cylinder_rel_error", ecyl))
}

/// Setups used for the limit-spectrum sweep: the square torus of side `2π`,
/// a cross cap at resolution 32 and a handle whose feet are a fifth of the
/// period apart at resolution 48.
pub fn convergence_setups() -> [SurgerySetup; 2] {
    let base = BaseSurface::square_torus(2.0 * PI);
    [
        SurgerySetup::new(base.clone(), AttachKind::CrossCap, 32),
        SurgerySetup::new(base, AttachKind::Handle, 48).with_separation(0.2),
    ]
}

pub fn limit_convergence(seed: u64) -> Result<CheckRecord> {
    let opts = eigen(seed);
    let hs = [0.15, 0.3, 0.45];
    let eps = [0.08, 0.04, 0.02];
    let mut rec = CheckRecord::default();
    let t = Instant::now();
    let mut pass = true;
    for setup in convergence_setups() {
        let sweep = convergence_sweep(&setup, &hs, &eps, 4, &opts)?;
        let tag = match setup.kind {
            AttachKind::CrossCap => "cross_cap",
            AttachKind::Handle => "handle",
        };
        for &h in &hs {
            let pts = sweep.points_at(h);
            if pts.len() != eps.len() || pts.iter().any(|p| p.error.is_some()) {
                rec = rec.note(format!("{tag} h={h}: grid point failed"));
                pass = false;
                continue;
            }
            let monotone = sweep.max_deviation_monotone(h);
            let last = pts.last().unwrap().max_relative_deviation();
            for p in &pts {
                rec = rec.value(&format!("{tag}_h{h}_eps{}_max_rel_dev", p.epsilon), p.max_relative_deviation());
            }
            if !monotone {
                rec = rec.note(format!("{tag} h={h}: deviation not monotone in epsilon"));
            }
            pass &= monotone && last < 0.05;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    rec.pass = pass && secs < 600.0;
    Ok(rec.value("seconds", secs))
}

/// The cross-cap crossing on the unit-area equilateral torus at `ε = 0.01`
/// (criterion four) and the eigenvalue sandwich at the point it certifies
/// (criterion five).
pub fn crossing_and_sandwich(seed: u64) -> Result<(CheckRecord, CheckRecord)> {
    let opts = ScanOptions {
        eigen: eigen(seed),
        ..ScanOptions::default()
    };
    let base = BaseSurface::equilateral_torus(1.0);
    let setup = SurgerySetup::new(base.clone(), AttachKind::CrossCap, 32);
    let h_target = analytic::crossing_height(ModelKind::CrossCap, base.exact_lambda1());
    let widen = 1.5f64.sqrt();
    let eps = 0.01;
    let scan = height_scan(&setup, eps, [h_target / widen, h_target * widen], 9, &opts)?;
    let offset = rel(scan.h_epsilon, h_target);
    let mut crossing = CheckRecord::default();
    crossing.pass = offset < 0.10 && scan.gap < 5e-3;
    crossing = crossing
        .value("epsilon", eps)
        .value("h_target", h_target)
        .value("h_star_fem", scan.h_star)
        .value("h_epsilon", scan.h_epsilon)
        .value("h_rel_offset", offset)
        .value("relative_gap", scan.gap)
        .value("lambda1_base", scan.lambda1_base);
    if let Some(s) = scan.branch_switch {
        crossing = crossing
            .value("branch_switch", s)
            .note("branch_switch: height where the first eigenfunction moves onto the model");
    }

    let chain = verify_chain(&setup, eps, scan.h_epsilon, None, &opts.eigen)?;
    let mut sandwich = CheckRecord::default();
    sandwich.pass = chain.holds();
    sandwich = sandwich
        .value("h", chain.h)
        .value("mu1_punctured", chain.mu1_punctured)
        .value("lambda1_surgered", chain.lambda1_surgered)
        .value("lambda0_model", chain.lambda0_model)
        .value("lambda0_model_exact", chain.lambda0_model_exact)
        .value("tau", chain.tau)
        .value("lower_holds", chain.lower_holds as u8 as f64)
        .value("upper_holds", chain.upper_holds as u8 as f64);
    Ok((crossing, sandwich))
}

/// Fitted exponents of the harmonic-extension energy, the tangential
/// boundary energy and the boundary gradient against ε.
pub fn scaling(seed: u64) -> Result<CheckRecord> {
    let setup = SurgerySetup::new(BaseSurface::equilateral_torus(1.0), AttachKind::CrossCap, 32);
    let s = scaling_laws(&setup, &[0.08, 0.04, 0.02, 0.01], &eigen(seed))?;
    let (a, b, c) = (s.extension_fit.slope, s.tangential_fit.slope, s.gradient_fit.slope);
    let mut rec = CheckRecord::default();
    rec.pass = (a - 2.0).abs() <= 0.3 && (b - 1.0).abs() <= 0.25 && (c + 1.0).abs() <= 0.25;
    Ok(rec
        .value("extension_slope", a)
        .value("extension_r_squared", s.extension_fit.r_squared)
        .value("tangential_slope", b)
        .value("tangential_r_squared", s.tangential_fit.r_squared)
        .value("gradient_slope", c)
        .value("gradient_r_squared", s.gradient_fit.r_squared))
}

/// Positive `λ₁·area` margins at ε = 0.02 for sphere + handle and
/// equilateral torus + cross cap, and their slopes over three radii.
pub fn monotonicity(seed: u64) -> Result<CheckRecord> {
    let opts = ScanOptions {
        eigen: eigen(seed),
        ..ScanOptions::default()
    };
    let eps = [0.08, 0.04, 0.02];
    let cases = [
        ("sphere_handle", SurgerySetup::new(BaseSurface::RoundSphere, AttachKind::Handle, 32)),
        (
            "torus_cross_cap",
            SurgerySetup::new(BaseSurface::equilateral_torus(1.0), AttachKind::CrossCap, 32),
        ),
    ];
    let mut rec = CheckRecord::default();
    let mut pass = true;
    for (tag, setup) in cases {
        let lambda = setup.base.exact_lambda1();
        let h_target = analytic::crossing_height(setup.kind.model(), lambda);
        let widen = 1.5f64.sqrt();
        let mut margins = Vec::new();
        for &e in &eps {
            let (cert, _) = monotonicity_certificate(&setup, e, [h_target / widen, h_target * widen], 9, &opts)?;
            rec = rec
                .value(&format!("{tag}_eps{e}_margin"), cert.margin)
                .value(&format!("{tag}_eps{e}_h"), cert.h_epsilon)
                .value(&format!("{tag}_eps{e}_gap"), cert.gap)
                .value(&format!("{tag}_eps{e}_valid"), cert.valid as u8 as f64);
            margins.push(cert.margin);
        }
        let positive = *margins.last().unwrap() > 0.0;
        let slope_ok = match fit_power_law(&eps, &margins) {
            Ok(fit) => {
                rec = rec.value(&format!("{tag}_margin_slope"), fit.slope);
                (fit.slope - 1.0).abs() <= 0.4
            }
            Err(e) => {
                rec = rec.note(format!("{tag}: no slope ({e})"));
                false
            }
        };
        pass &= positive && slope_ok;
    }
    rec.pass = pass;
    Ok(rec)
}

/// Quadrature of the Dirichlet energy of the Veronese composition for
/// growing `t_max`.
pub fn veronese() -> Result<CheckRecord> {
    let target = 12.0 * PI;
    let mut rec = CheckRecord::default();
    let mut errors = Vec::new();
    for t_max in 1..=6 {
        let e = veronese_energy(64, 4 * t_max, t_max as f64)?;
        rec = rec.value(&format!("energy_t{t_max}"), e);
        errors.push(rel(e, target));
    }
    let decreasing = errors.windows(2).all(|w| w[1] <= w[0]);
    rec.pass = decreasing && *errors.last().unwrap() < 0.01;
    Ok(rec.value("final_rel_error", *errors.last().unwrap()))
}

/// Scale invariance, even/odd decomposition of double covers, Euler
/// characteristic bookkeeping of the surgeries and byte-identical reruns.
pub fn properties(seed: u64) -> Result<CheckRecord> {
    let opts = eigen(seed);
    let mut rec = CheckRecord::default();

    // scale invariance of λ_k · area
    let mut scale_err = 0.0f64;
    let surgered = SurgerySetup::new(BaseSurface::equilateral_torus(1.0), AttachKind::CrossCap, 16).surgered(0.08, 0.3)?;
    let samples: Vec<(SurfaceMesh, DiscreteMetric)> = vec![
        build_standard(&StandardSurface::RoundSphere, 8)?,
        build_standard(&StandardSurface::equilateral_torus(1.0), 12)?,
        (surgered.mesh.clone(), surgered.metric.clone()),
    ];
    for (mesh, metric) in &samples {
        let a = scaled_spectrum(mesh, metric, 1.0, &opts)?;
        let b = scaled_spectrum(mesh, metric, 3.7, &opts)?;
        for (x, y) in a.iter().zip(&b).skip(1) {
            scale_err = scale_err.max(rel(*y, *x));
        }
    }
    let scale_ok = scale_err <= 1e-10;

    // even ∪ odd = full on the sphere cover of RP² and the torus cover of a Klein bottle
    let mut split_err = 0.0f64;
    let (sphere, sphere_metric) = build_standard(&StandardSurface::RoundSphere, 8)?;
    let (pos, _) = icosphere(8);
    let klein = build_standard(
        &StandardSurface::FlatKleinBottle {
            width: 1.0,
            height: 1.3,
        },
        12,
    )?;
    let cover = orientation_double_cover(&klein.0, &klein.1)?;
    let covers = [
        (sphere, sphere_metric, antipodal_map(&pos)),
        (cover.mesh, cover.metric, cover.involution),
    ];
    let mut split_ok = true;
    for (mesh, metric, inv) in &covers {
        let ops = assemble(mesh, metric, &BoundaryCondition::Closed)?;
        let n = 12;
        let full = solve_spectrum(&ops, n, &opts)?.eigenvalues;
        let mut merged = even_spectrum(&ops, inv, n, &opts)?.eigenvalues;
        merged.extend(odd_spectrum(&ops, inv, n, &opts)?.eigenvalues);
        merged.sort_by(f64::total_cmp);
        merged.truncate(n);
        for (a, b) in full.iter().zip(&merged) {
            split_err = split_err.max((a - b).abs() / a.abs().max(1.0));
        }
        split_ok &= cluster_values(&full, DEFAULT_CLUSTER_TOLERANCE).len()
            == cluster_values(&merged, DEFAULT_CLUSTER_TOLERANCE).len();
    }
    split_ok &= split_err <= DEFAULT_CLUSTER_TOLERANCE;

    // Euler characteristic of every surgery kind
    let mut euler_ok = true;
    let surgeries = [
        (SurgerySetup::new(BaseSurface::equilateral_torus(1.0), AttachKind::CrossCap, 16), -1),
        (SurgerySetup::new(BaseSurface::equilateral_torus(1.0), AttachKind::Handle, 24), -2),
        (SurgerySetup::new(BaseSurface::RoundSphere, AttachKind::Handle, 16), 0),
        (SurgerySetup::new(BaseSurface::RoundSphere, AttachKind::CrossCap, 16), 1),
    ];
    for (setup, expect) in surgeries {
        let s = setup.surgered(0.05, 0.3)?;
        let chi = s.mesh.euler_characteristic();
        let declared = s
            .mesh
            .declared_topology()
            .map(|t| t.euler_characteristic())
            .ok_or_else(|| Error::InvalidMesh("surgered mesh has no declared topology".into()))?;
        if chi != expect || declared != expect {
            euler_ok = false;
            rec = rec.note(format!("{:?} on {}: chi {chi}, declared {declared}, expected {expect}", setup.kind, setup.base.label()));
        }
    }

    // byte-identical reruns
    let (mesh, metric) = build_standard(&StandardSurface::equilateral_torus(1.0), 16)?;
    let ops = assemble(&mesh, &metric, &BoundaryCondition::Closed)?;
    let first = serde_json::to_vec(&solve_spectrum(&ops, 8, &opts)?)?;
    let second = serde_json::to_vec(&solve_spectrum(&ops, 8, &opts)?)?;
    let setup = SurgerySetup::new(BaseSurface::square_torus(2.0 * PI), AttachKind::CrossCap, 16);
    let sweep_bytes = || -> Result<Vec<u8>> {
        let mut out = Vec::new();
        convergence_sweep(&setup, &[0.3], &[0.08], 4, &opts)?.write_csv(&mut out)?;
        Ok(out)
    };
    let rerun_ok = first == second && sweep_bytes()? == sweep_bytes()?;

    rec.pass = scale_ok && split_ok && euler_ok && rerun_ok;
    Ok(rec
        .value("scale_max_rel_error", scale_err)
        .value("split_max_error", split_err)
        .value("scale_ok", scale_ok as u8 as f64)
        .value("split_ok", split_ok as u8 as f64)
        .value("euler_ok", euler_ok as u8 as f64)
        .value("rerun_ok", rerun_ok as u8 as f64))
}

fn scaled_spectrum(mesh: &SurfaceMesh, metric: &DiscreteMetric, c: f64, opts: &EigenOptions) -> Result<Vec<f64>> {
    let g = metric.scaled(c);
    let ops = assemble(mesh, &g, &BoundaryCondition::Closed)?;
    let s = solve_spectrum(&ops, 6, opts)?;
    Ok(s.eigenvalues.iter().map(|l| l * ops.area).collect())
}

fn timed(f: impl FnOnce() -> Result<CheckRecord>) -> CheckRecord {
    let t = Instant::now();
    let mut rec = f().unwrap_or_else(|e| CheckRecord::default().note(format!("error: {e}")));
    rec.seconds = t.elapsed().as_secs_f64();
    rec
}

/// Runs the checks whose numbers (1 to 9) are listed, or all of them.
pub fn run_suite(suite: &str, seed: u64, only: Option<&[usize]>) -> Result<VerifyManifest> {
    if suite != "paper" {
        return Err(Error::InvalidArgument(format!("unknown suite {suite:?}; the only suite is \"paper\"")));
    }
    let want = |i: usize| only.is_none_or(|o| o.contains(&i));
    let mut manifest = VerifyManifest {
        suite: suite.into(),
        seed,
        ..VerifyManifest::default()
    };
    let mut put = |i: usize, rec: CheckRecord| {
        manifest.checks.insert(CHECKS[i - 1].into(), rec);
    };
    if want(1) {
        put(1, timed(|| known_maximizers(seed)));
    }
    if want(2) {
        put(2, timed(|| model_modes(seed)));
    }
    if want(3) {
        put(3, timed(|| limit_convergence(seed)));
    }
    if want(4) || want(5) {
        let t = Instant::now();
        let (mut c4, mut c5) = crossing_and_sandwich(seed).unwrap_or_else(|e| {
            let r = CheckRecord::default().note(format!("error: {e}"));
            (r.clone(), r)
        });
        c4.seconds = t.elapsed().as_secs_f64();
        c5.seconds = c4.seconds;
        if want(4) {
            put(4, c4);
        }
        if want(5) {
            put(5, c5);
        }
    }
    if want(6) {
        put(6, timed(|| scaling(seed)));
    }
    if want(7) {
        put(7, timed(|| monotonicity(seed)));
    }
    if want(8) {
        put(8, timed(veronese));
    }
    if want(9) {
        put(9, timed(|| properties(seed)));
    }
    Ok(manifest)
}
