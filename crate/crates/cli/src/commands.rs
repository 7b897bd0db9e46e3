//! The six subcommands. Each returns its exit status; errors propagate and
//! are mapped to a status by the caller.

use std::io::BufReader;

use serde::Serialize;
use surfspec::geometry::{build_standard, io, DiscreteMetric, SurfaceMesh};
use surfspec::maximize::{extract_harmonic_map, maximize_from, MaximizeConfig, MaximizerState};
use surfspec::spectral::{assemble, solve_spectrum, BoundaryCondition};
use surfspec::surgery::{
    convergence_sweep, height_scan, monotonicity_certificate, Branch, CrossingStatus, ScanOptions, SurgerySetup,
};
use surfspec::verify::{run_suite, CHECKS};

use crate::config::{OnError, Resolved, SurfaceSpec};
use crate::output::{log, num, Reporter};
use crate::{CliError, Status};

const EIGEN_UNITS: (&str, &str) = ("eigenvalue", "1/length^2");
const AREA_UNITS: (&str, &str) = ("area", "length^2");
const NORMALIZED_UNITS: (&str, &str) = ("lambda_area", "dimensionless");

/// The surface of the config, surgered when `--attach` is given.
struct Built {
    mesh: SurfaceMesh,
    metric: DiscreteMetric,
    /// `(epsilon, h)` of the attached model.
    surgery: Option<(f64, f64)>,
}

fn setup(config: &Resolved) -> Result<SurgerySetup, CliError> {
    let attach = config
        .attach
        .ok_or_else(|| CliError::Usage(format!("{} needs --attach cross-cap|handle", config.command)))?;
    let base = config.surface().base()?;
    Ok(SurgerySetup::new(base, attach, config.res).with_separation(config.separation))
}

fn build(config: &Resolved) -> Result<Built, CliError> {
    let spec = config.surface();
    if config.attach.is_some() {
        let s = setup(config)?.surgered(config.eps[0], config.h[0])?;
        return Ok(Built {
            mesh: s.mesh,
            metric: s.metric,
            surgery: Some((config.eps[0], config.h[0])),
        });
    }
    let (mesh, metric) = match &spec {
        SurfaceSpec::Standard(kind) => build_standard(kind, config.res)?,
        SurfaceSpec::File(path) => {
            let f = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            match path.extension().and_then(|e| e.to_str()) {
                Some("off") => io::read_off(BufReader::new(f))?,
                _ => io::read_json(BufReader::new(f))?,
            }
        }
    };
    Ok(Built {
        mesh,
        metric,
        surgery: None,
    })
}

#[derive(Serialize)]
struct MeshSummary {
    vertices: usize,
    edges: usize,
    triangles: usize,
    euler_characteristic: i64,
    orientable: bool,
    boundary_loops: usize,
    area: f64,
    cone_points: usize,
    surgery: Option<(f64, f64)>,
}

pub fn mesh(config: &Resolved) -> Result<Status, CliError> {
    let b = build(config)?;
    let rep = Reporter::new(config)?;
    let mut bytes = Vec::new();
    io::write_json(&mut bytes, &b.mesh, &b.metric)?;
    bytes.push(b'\n');
    let path = rep.path("mesh.json");
    surfspec::surgery::write_atomic(&path, &bytes)?;
    log(&format!("wrote {}", path.display()));
    let summary = MeshSummary {
        vertices: b.mesh.num_vertices(),
        edges: b.mesh.num_edges(),
        triangles: b.mesh.num_triangles(),
        euler_characteristic: b.mesh.euler_characteristic(),
        orientable: b.mesh.is_orientable(),
        boundary_loops: b.mesh.boundary_loops().len(),
        area: b.metric.area(&b.mesh),
        cone_points: b.metric.cone_points().len(),
        surgery: b.surgery,
    };
    log(&format!(
        "V={} E={} F={} chi={} area={:.6}",
        summary.vertices, summary.edges, summary.triangles, summary.euler_characteristic, summary.area
    ));
    rep.json("mesh.summary.json", config, &[AREA_UNITS, ("edge_length", "length")], &summary)?;
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct SpectrumReport {
    area: f64,
    eigenvalues: Vec<f64>,
    lambda_area: Vec<f64>,
    residuals: Vec<f64>,
    clusters: Vec<Vec<usize>>,
    lambda1_multiplicity: usize,
    shift: f64,
    method: String,
    surgery: Option<(f64, f64)>,
}

pub fn spectrum(config: &Resolved) -> Result<Status, CliError> {
    if config.k < 2 {
        return Err(CliError::Usage("--k must be at least 2".into()));
    }
    let b = build(config)?;
    let ops = assemble(&b.mesh, &b.metric, &BoundaryCondition::Closed)?;
    let sp = solve_spectrum(&ops, config.k, &config.eigen())?;
    let area = b.metric.area(&b.mesh);
    let ids = sp.cluster_ids();
    let report = SpectrumReport {
        area,
        lambda_area: sp.eigenvalues.iter().map(|l| l * area).collect(),
        lambda1_multiplicity: sp.multiplicity(sp.eigenvalues[1], sp.cluster_tolerance),
        clusters: sp.clusters(),
        eigenvalues: sp.eigenvalues.clone(),
        residuals: sp.residuals.clone(),
        shift: sp.shift,
        method: format!("{:?}", sp.method),
        surgery: b.surgery,
    };
    log(&format!(
        "lambda_1 = {:.10} (multiplicity {}), lambda_1 area = {:.6}",
        report.eigenvalues[1], report.lambda1_multiplicity, report.lambda_area[1]
    ));
    let rep = Reporter::new(config)?;
    let units = [EIGEN_UNITS, AREA_UNITS, NORMALIZED_UNITS, ("residual", "relative")];
    let rows: Vec<Vec<String>> = (0..report.eigenvalues.len())
        .map(|i| {
            vec![
                i.to_string(),
                num(report.eigenvalues[i]),
                num(report.lambda_area[i]),
                ids[i].to_string(),
                format!("{:.3e}", report.residuals.get(i).copied().unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    rep.table(
        "spectrum",
        &units,
        &[format!("area: {}", num(area))],
        &["index", "eigenvalue", "lambda_area", "cluster", "residual"],
        &rows,
    )?;
    rep.json("spectrum.json", config, &units, &report)?;
    Ok(Status::Pass)
}

pub fn sweep(config: &Resolved) -> Result<Status, CliError> {
    let setup = setup(config)?;
    log(&format!(
        "sweep over {} heights x {} radii, k <= {}",
        config.h.len(),
        config.eps.len(),
        config.k
    ));
    let result = convergence_sweep(&setup, &config.h, &config.eps, config.k, &config.eigen())?;
    let rep = Reporter::new(config)?;
    let mut rows = Vec::new();
    let mut failed = 0;
    for p in &result.grid {
        if p.error.is_some() {
            failed += 1;
            rows.push(vec![
                num(p.epsilon),
                num(p.h),
                "-1".into(),
                "nan".into(),
                "nan".into(),
                "nan".into(),
                "nan".into(),
                "error".into(),
            ]);
            continue;
        }
        for k in 0..p.deviations.len() {
            rows.push(vec![
                num(p.epsilon),
                num(p.h),
                k.to_string(),
                num(p.eigenvalues[k]),
                num(p.limit[k]),
                num(p.deviations[k]),
                num(p.relative_deviations[k]),
                "ok".into(),
            ]);
        }
    }
    let mut extra = Vec::new();
    for &h in &config.h {
        let pts = result.points_at(h);
        let devs: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.4}", p.max_relative_deviation()))
            .collect();
        let line = format!(
            "h={h}: max relative deviation by decreasing epsilon {} ({})",
            devs.join(" "),
            if result.max_deviation_monotone(h) { "monotone" } else { "not monotone" }
        );
        log(&line);
        extra.push(line);
    }
    let units = [
        ("epsilon", "length"),
        ("h", "length"),
        ("lambda", "1/length^2"),
        ("nu", "1/length^2"),
        ("deviation", "1/length^2"),
        ("relative_deviation", "dimensionless"),
    ];
    rep.table(
        "sweep",
        &units,
        &extra,
        &["epsilon", "h", "k", "lambda", "nu", "deviation", "relative_deviation", "status"],
        &rows,
    )?;
    rep.json("sweep.json", config, &units, &result)?;
    if failed > 0 {
        log(&format!("{failed} grid point(s) failed"));
        if config.on_error == OnError::Fail {
            return Ok(Status::SolverFailure);
        }
    }
    Ok(Status::Pass)
}

pub fn heightscan(config: &Resolved) -> Result<Status, CliError> {
    let setup = setup(config)?;
    let lo = config.h.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = config.h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(CliError::Usage("heightscan needs a bracket: --h LOW:HIGH:COUNT or two heights".into()));
    }
    let opts = ScanOptions {
        k: config.k,
        eigen: config.eigen(),
        ..Default::default()
    };
    let epsilon = config.eps[0];
    let rep = Reporter::new(config)?;
    let units = [
        ("h", "length"),
        ("epsilon", "length"),
        EIGEN_UNITS,
        AREA_UNITS,
        ("gap", "relative"),
        ("model_fraction", "dimensionless"),
    ];
    let (scan, cert) = if config.certificate {
        let (c, s) = monotonicity_certificate(&setup, epsilon, [lo, hi], config.grid, &opts)?;
        (s, Some(c))
    } else {
        (height_scan(&setup, epsilon, [lo, hi], config.grid, &opts)?, None)
    };
    let rows: Vec<Vec<String>> = scan
        .samples
        .iter()
        .map(|s| match &s.error {
            Some(_) => vec![num(s.h), "nan".into(), "nan".into(), "nan".into(), "nan".into(), "error".into()],
            None => vec![
                num(s.h),
                num(s.eigenvalues[1]),
                num(s.eigenvalues[2]),
                num(s.gap),
                num(s.model_fractions[1]),
                match s.lambda1_branch {
                    Branch::SurfaceLike => "surface".into(),
                    Branch::IntervalLike => "interval".into(),
                },
            ],
        })
        .collect();
    let summary = format!(
        "epsilon={epsilon} h_epsilon={:.6} gap={:.4} status={:?} h_star={:.6}",
        scan.h_epsilon, scan.gap, scan.status, scan.h_star
    );
    log(&summary);
    rep.table(
        "heightscan",
        &units,
        &[summary],
        &["h", "lambda1", "lambda2", "gap", "model_fraction1", "branch"],
        &rows,
    )?;
    rep.json("heightscan.json", config, &units, &scan)?;
    let mut status = if scan.status == CrossingStatus::Crossed {
        Status::Pass
    } else {
        Status::CheckFailed
    };
    if let Some(c) = cert {
        log(&format!(
            "certificate: margin {:.6} (base {:.6}, surgered {:.6}), valid {}",
            c.margin, c.base_value, c.surgered_value, c.valid
        ));
        rep.json(
            "certificate.json",
            config,
            &[AREA_UNITS, NORMALIZED_UNITS, ("margin", "dimensionless")],
            &c,
        )?;
        if !c.valid {
            status = Status::CheckFailed;
        }
    }
    Ok(status)
}

#[derive(Serialize)]
struct MaximizeReport {
    value: f64,
    lambda1: f64,
    area: f64,
    multiplicity: usize,
    iterations: usize,
    stationarity: f64,
    converged: bool,
    failure: Option<String>,
    sphericality_residual: Option<f64>,
    metric_recovery_residual: Option<f64>,
    sphere_scaling: Option<Vec<Vec<f64>>>,
}

pub fn maximize(config: &Resolved) -> Result<Status, CliError> {
    let b = build(config)?;
    let rep = Reporter::new(config)?;
    let start = if config.resume {
        let prev = MaximizerState::load(&rep.dir, "maximizer")?;
        log(&format!("resuming from {} (value {:.6})", rep.dir.display(), prev.value));
        prev.log_conformal_factor
    } else {
        vec![0.0; b.mesh.num_vertices()]
    };
    let mc = MaximizeConfig {
        max_iterations: config.iterations,
        eigen_count: config.k,
        eigen: config.eigen(),
        checkpoint: Some(rep.dir.clone()),
        ..Default::default()
    };
    let state = maximize_from(&b.mesh, &b.metric, start, &mc)?;
    state.save(&rep.dir, "maximizer")?;
    let hm = extract_harmonic_map(&state, &b.mesh, &b.metric).ok();
    log(&format!(
        "lambda_1 area = {:.8} after {} iterations, multiplicity {}, converged {}",
        state.value, state.iterations, state.multiplicity, state.converged
    ));
    let units = [NORMALIZED_UNITS, EIGEN_UNITS, AREA_UNITS, ("residual", "relative")];
    let rows: Vec<Vec<String>> = state
        .history
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.value),
                num(r.step),
                r.multiplicity.to_string(),
                num(r.stationarity),
                num(r.sphericality),
                num(r.metric_recovery),
            ]
        })
        .collect();
    rep.table(
        "trajectory",
        &units,
        &[],
        &[
            "iteration",
            "value",
            "step",
            "multiplicity",
            "stationarity",
            "sphericality",
            "metric_recovery",
        ],
        &rows,
    )?;
    let failure = state.failure.clone();
    let report = MaximizeReport {
        value: state.value,
        lambda1: state.lambda1,
        area: state.area,
        multiplicity: state.multiplicity,
        iterations: state.iterations,
        stationarity: state.stationarity,
        converged: state.converged,
        failure: state.failure,
        sphericality_residual: hm.as_ref().map(|h| h.sphericality_residual),
        metric_recovery_residual: hm.as_ref().map(|h| h.metric_recovery_residual),
        sphere_scaling: hm.map(|h| h.scaling),
    };
    rep.json("maximize.json", config, &units, &report)?;
    match failure {
        Some(f) => {
            log(&format!("ascent stopped on a solver failure: {f}"));
            Ok(Status::SolverFailure)
        }
        None => Ok(Status::Pass),
    }
}

pub fn verify(config: &Resolved) -> Result<Status, CliError> {
    if let Some(only) = &config.only {
        if let Some(bad) = only.iter().find(|&&i| i == 0 || i > CHECKS.len()) {
            return Err(CliError::Usage(format!("no criterion {bad}; they run 1 to {}", CHECKS.len())));
        }
    }
    let manifest = run_suite(&config.suite, config.seed, config.only.as_deref())?;
    let rep = Reporter::new(config)?;
    let mut rows = Vec::new();
    for (i, name) in CHECKS.iter().enumerate() {
        let Some(rec) = manifest.checks.get(*name) else {
            continue;
        };
        let verdict = if rec.pass { "PASS" } else { "FAIL" };
        let values: Vec<String> = rec.values.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        println!("criterion {} {name}: {verdict} [{:.1}s] {}", i + 1, rec.seconds, values.join(" "));
        for note in &rec.notes {
            println!("    note: {note}");
        }
        // run times stay out of the table so reruns compare equal
        rows.push(vec![(i + 1).to_string(), name.to_string(), verdict.into()]);
    }
    rep.table("verify", &[("seconds", "s")], &[], &["criterion", "name", "verdict"], &rows)?;
    rep.json("verify.json", config, &[("seconds", "s")], &manifest)?;
    Ok(if manifest.all_pass() { Status::Pass } else { Status::CheckFailed })
}
