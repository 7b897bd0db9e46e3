//! First-eigenvalue ascent inside a conformal class and recovery of the
//! sphere-valued map carried by the first eigenspace.
//!
//! The Dirichlet energy of a surface is conformally invariant, so a metric
//! `e^{2φ} g` keeps the cotangent stiffness of `g` and only reweights the
//! lumped mass by `e^{2φ}` at each vertex. The ascent therefore never leaves
//! the conformal class of the reference metric.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConePoint, DiscreteMetric, SurfaceMesh};
use crate::spectral::{
    assemble, smallest_eigenpairs, triangle_gradient_norms, BoundaryCondition, CsrMatrix, EigenOptions, Ldl,
};
use crate::surgery::{write_atomic, write_csv_atomic, write_json_atomic};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizeConfig {
    pub max_iterations: usize,
    pub initial_step: f64,
    pub max_step: f64,
    /// Backtracking stops (and the ascent ends) below this step.
    pub min_step: f64,
    pub shrink: f64,
    /// Eigenvalues within this relative distance of `λ₁` form the cluster.
    pub cluster_tolerance: f64,
    /// Ascent ends once the min-norm direction is this small (relative RMS).
    pub stationarity_tolerance: f64,
    /// Width of the Sobolev smoothing of the ascent direction, in mesh
    /// spacings `sqrt(area / vertices)`. Zero gives the plain L² direction.
    pub smoothing: f64,
    /// Eigenpairs requested per solve, the constant mode included. Grown
    /// automatically when the cluster reaches the last one.
    pub eigen_count: usize,
    pub eigen: EigenOptions,
    /// Directory for checkpoints, written every `checkpoint_every` accepted steps.
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        MaximizeConfig {
            max_iterations: 100,
            initial_step: 0.5,
            max_step: 4.0,
            min_step: 1e-6,
            shrink: 0.5,
            cluster_tolerance: 5e-3,
            stationarity_tolerance: 1e-4,
            smoothing: 4.0,
            eigen_count: 10,
            eigen: EigenOptions::default(),
            checkpoint: None,
            checkpoint_every: 10,
        }
    }
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `λ₁ · area` after the step.
    pub value: f64,
    pub step: f64,
    pub multiplicity: usize,
    pub stationarity: f64,
    pub sphericality: f64,
    pub metric_recovery: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizerState {
    /// `φ` per vertex; the metric is `e^{2φ} g`.
    pub log_conformal_factor: Vec<f64>,
    /// `λ₁ · area`.
    pub value: f64,
    pub lambda1: f64,
    pub area: f64,
    /// Nonzero eigenvalues from the last solve.
    pub eigenvalues: Vec<f64>,
    pub multiplicity: usize,
    /// Mass-orthonormal basis of the first cluster, one vertex field per member.
    /// Stored in the binary sidecar, not in the JSON.
    #[serde(skip)]
    pub eigenframe: Vec<Vec<f64>>,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub step: f64,
    /// Relative RMS of the min-norm ascent direction at the final point.
    pub stationarity: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

impl MaximizerState {
    /// Writes `<stem>.json` and the eigenframe as `<stem>.frame.bin`
    /// (two little-endian `u64` dimensions, then `f64` values row by row).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_json_atomic(&dir.join(format!("{stem}.json")), self)?;
        let rows = self.eigenframe.len();
        let cols = self.eigenframe.first().map_or(0, Vec::len);
        let mut bytes = Vec::with_capacity(16 + 8 * rows * cols);
        bytes.extend_from_slice(&(rows as u64).to_le_bytes());
        bytes.extend_from_slice(&(cols as u64).to_le_bytes());
        for row in &self.eigenframe {
            for x in row {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        write_atomic(&dir.join(format!("{stem}.frame.bin")), &bytes)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<MaximizerState> {
        let mut state: MaximizerState = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let bytes = std::fs::read(dir.join(format!("{stem}.frame.bin")))?;
        if bytes.len() < 16 {
            return Err(Error::Parse("eigenframe file is truncated".into()));
        }
        let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if bytes.len() != 16 + 8 * rows * cols {
            return Err(Error::Parse(format!("eigenframe file does not hold {rows} x {cols} values")));
        }
        state.eigenframe = bytes[16..]
            .chunks_exact(8 * cols.max(1))
            .take(rows)
            .map(|r| r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            .collect();
        Ok(state)
    }

    /// Trajectory CSV with a `# ` header.
    pub fn write_trajectory(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut body = Vec::new();
        writeln!(body, "iteration,value,step,multiplicity,stationarity,sphericality,metric_recovery")?;
        for r in &self.history {
            writeln!(
                body,
                "{},{:.12e},{:.6e},{},{:.6e},{:.6e},{:.6e}",
                r.iteration, r.value, r.step, r.multiplicity, r.stationarity, r.sphericality, r.metric_recovery
            )?;
        }
        write_csv_atomic(path, header, &body)
    }

    /// The optimized metric as edge lengths. The ascent itself works on the
    /// mass, so this is the discrete-conformal counterpart used for export
    /// and for cone detection.
    pub fn metric(&self, mesh: &SurfaceMesh, reference: &DiscreteMetric) -> Result<DiscreteMetric> {
        let base: Vec<f64> = reference.log_conformal_factor().to_vec();
        let u: Vec<f64> = base.iter().zip(&self.log_conformal_factor).map(|(a, b)| a + b).collect();
        reference.with_conformal_factor(mesh, u)
    }

    /// Vertices whose angle sum in the exported metric differs from `2π` by
    /// more than `tol`, where the conformal factor may be concentrating.
    pub fn cone_candidates(&self, mesh: &SurfaceMesh, reference: &DiscreteMetric, tol: f64) -> Result<Vec<ConePoint>> {
        Ok(self.metric(mesh, reference)?.detect_cone_points(mesh, tol))
    }
}

/// Fixed data of one ascent: stiffness and reference vertex areas.
struct Problem {
    stiffness: CsrMatrix,
    vertex_area: Vec<f64>,
}

struct Solved {
    lambda1: f64,
    area: f64,
    eigenvalues: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl Problem {
    fn new(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Result<Problem> {
        if !mesh.is_closed() {
            return Err(Error::InvalidArgument("conformal maximization needs a closed surface".into()));
        }
        let ops = assemble(mesh, metric, &BoundaryCondition::Closed)?;
        Ok(Problem {
            vertex_area: ops.mass.diagonal(),
            stiffness: ops.stiffness,
        })
    }

    fn weights(&self, phi: &[f64]) -> Vec<f64> {
        self.vertex_area.iter().zip(phi).map(|(a, p)| a * (2.0 * p).exp()).collect()
    }

    fn solve(&self, phi: &[f64], config: &MaximizeConfig) -> Result<Solved> {
        let w = self.weights(phi);
        let area: f64 = w.iter().sum();
        let mass = CsrMatrix::diagonal_matrix(&w);
        let n = w.len();
        let mut count = config.eigen_count.max(3).min(n);
        loop {
            let mut o = config.eigen.clone();
            o.count = count;
            let pairs = smallest_eigenpairs(&self.stiffness, &mass, &o)?;
            let lambda1 = pairs.values[1];
            let members: Vec<usize> = (1..pairs.values.len())
                .filter(|&j| pairs.values[j] <= lambda1 * (1.0 + config.cluster_tolerance))
                .collect();
            if *members.last().unwrap() + 1 == pairs.values.len() && count < n {
                count = (count + 4).min(n);
                continue;
            }
            return Ok(Solved {
                lambda1,
                area,
                eigenvalues: pairs.values[1..].to_vec(),
                frame: members.iter().map(|&j| pairs.vectors[j].clone()).collect(),
            });
        }
    }
}

/// Normal equations of `min ∑ w_i (A ⟨X, u(i)u(i)ᵀ⟩ - 1)²` in the full
/// `m²` vectorization: returns `(G, b)` with `G = ∑ w v vᵀ` and `b = ∑ w v`.
fn gram(frame: &[Vec<f64>], w: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let m = frame.len();
    let p = m * m;
    let mut g = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    let mut v = vec![0.0; p];
    for (i, &wi) in w.iter().enumerate() {
        for j in 0..m {
            for k in 0..m {
                v[j * m + k] = frame[j][i] * frame[k][i];
            }
        }
        for r in 0..p {
            b[r] += wi * v[r];
            let wr = wi * v[r];
            if wr == 0.0 {
                continue;
            }
            for c in r..p {
                g[(r, c)] += wr * v[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            g[(r, c)] = g[(c, r)];
        }
    }
    (g, b)
}

/// Euclidean projection onto `{X = Xᵀ ⪰ 0, tr X = 1}`.
fn project_spectraplex(x: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (x + x.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    // simplex projection of the eigenvalues
    let mut sorted = vals.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for v in &mut vals {
        *v = (*v - theta).max(0.0);
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(vals));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Min-norm element of the cluster's subdifferential. Derivative densities
/// are measured in the inner product `aᵀ W (W + τK)⁻¹ W b`; `τ > 0` damps the
/// grid-scale oscillations that the products of eigenfunctions carry.
///
/// With `d(X) = 1 - A q(X)` the objective is `d(X)ᵀ W S W d(X)` over trace-one
/// positive semidefinite `X` (accelerated projected gradient). Returns the
/// step field `S W d` and the relative RMS of `d` in that norm.
fn ascent_direction(
    frame: &[Vec<f64>],
    w: &[f64],
    area: f64,
    stiffness: &CsrMatrix,
    tau: f64,
) -> Result<(Vec<f64>, f64)> {
    let m = frame.len();
    let n = w.len();
    let smooth: Box<dyn Fn(&[f64]) -> Vec<f64> + Sync + Send> = if tau > 0.0 {
        let op = CsrMatrix::diagonal_matrix(w).add_scaled(tau, stiffness);
        let f = Ldl::factor(&op).map_err(|reason| Error::Factorization { shift: 0.0, reason })?;
        Box::new(move |x: &[f64]| f.solve(&x.iter().zip(w).map(|(a, b)| a * b).collect::<Vec<_>>()))
    } else {
        Box::new(|x: &[f64]| x.to_vec())
    };
    // products u_j u_k for j <= k and their smoothed images
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|j| (j..m).map(move |k| (j, k))).collect();
    let cols: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(j, k)| (0..n).map(|i| frame[j][i] * frame[k][i]).collect())
        .collect();
    let zs: Vec<Vec<f64>> = cols.par_iter().map(|c| smooth(c)).collect();
    let one = vec![1.0; n];
    let z1 = smooth(&one);
    let wdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((x, y), wi)| x * y * wi).sum() };
    let p = m * m;
    let mut g = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    let idx = |j: usize, k: usize| [(j * m + k), (k * m + j)];
    for (r, &(j, k)) in pairs.iter().enumerate() {
        let bj = wdot(&cols[r], &z1);
        for &i in &idx(j, k) {
            b[i] = bj;
        }
        for (c, &(l, q)) in pairs.iter().enumerate().skip(r) {
            let v = wdot(&cols[r], &zs[c]);
            for &i in &idx(j, k) {
                for &o in &idx(l, q) {
                    g[(i, o)] = v;
                    g[(o, i)] = v;
                }
            }
        }
    }
    let c0 = wdot(&one, &z1);
    // f(x) = c0 - 2A bᵀx + A² xᵀGx
    let lmax = SymmetricEigen::new(g.clone()).eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let lip = 2.0 * area * area * lmax.max(f64::MIN_POSITIVE);
    let grad = |x: &DMatrix<f64>| {
        let xv = DVector::from_iterator(p, x.transpose().iter().copied());
        let gv = (&g * &xv) * (2.0 * area * area) - &b * (2.0 * area);
        DMatrix::from_row_slice(m, m, gv.as_slice())
    };
    let mut x = DMatrix::identity(m, m) / m as f64;
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..400 {
        let next = project_spectraplex(&(&y - grad(&y) / lip));
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / tn);
        let moved = (&next - &x).norm();
        x = next;
        t = tn;
        if moved < 1e-13 {
            break;
        }
    }
    let xv = DVector::from_iterator(p, x.transpose().iter().copied());
    let f = (c0 - 2.0 * area * b.dot(&xv) + area * area * xv.dot(&(&g * &xv))).max(0.0);
    let mut dir = z1;
    for (r, &(j, k)) in pairs.iter().enumerate() {
        let coef = if j == k { x[(j, k)] } else { x[(j, k)] + x[(k, j)] };
        for (di, zi) in dir.iter_mut().zip(&zs[r]) {
            *di -= area * coef * zi;
        }
    }
    let wsum: f64 = w.iter().sum();
    Ok((dir, (f / wsum).sqrt()))
}

fn normalize_area(phi: &mut [f64], vertex_area: &[f64]) {
    let area: f64 = vertex_area.iter().zip(phi.iter()).map(|(a, p)| a * (2.0 * p).exp()).sum();
    let shift = 0.5 * area.ln();
    for p in phi.iter_mut() {
        *p -= shift;
    }
}

/// Ascends `λ₁ · area` over metrics `e^{2φ} g` starting from `φ = 0`.
pub fn maximize_in_class(mesh: &SurfaceMesh, metric: &DiscreteMetric, config: &MaximizeConfig) -> Result<MaximizerState> {
    maximize_from(mesh, metric, vec![0.0; mesh.num_vertices()], config)
}

/// Ascent from a given log conformal factor. With zero iterations the factor
/// is returned untouched.
pub fn maximize_from(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    start: Vec<f64>,
    config: &MaximizeConfig,
) -> Result<MaximizerState> {
    if start.len() != mesh.num_vertices() {
        return Err(Error::InvalidArgument("conformal factor length mismatch".into()));
    }
    if !(config.shrink > 0.0 && config.shrink < 1.0) || !(config.min_step > 0.0) {
        return Err(Error::InvalidArgument("need 0 < shrink < 1 and a positive step floor".into()));
    }
    let problem = Problem::new(mesh, metric)?;
    let mut phi = start;
    let mut cur = problem.solve(&phi, config)?;
    let mut state = MaximizerState {
        log_conformal_factor: phi.clone(),
        value: cur.lambda1 * cur.area,
        lambda1: cur.lambda1,
        area: cur.area,
        eigenvalues: cur.eigenvalues.clone(),
        multiplicity: cur.frame.len(),
        eigenframe: cur.frame.clone(),
        history: Vec::new(),
        iterations: 0,
        step: config.initial_step,
        stationarity: f64::NAN,
        converged: false,
        failure: None,
    };
    if config.max_iterations == 0 {
        return Ok(state);
    }
    if (cur.area - 1.0).abs() > 1e-12 {
        normalize_area(&mut phi, &problem.vertex_area);
        cur = problem.solve(&phi, config)?;
    }
    let spacing = (problem.vertex_area.iter().sum::<f64>() / problem.vertex_area.len() as f64).sqrt();
    let tau = (config.smoothing * spacing).powi(2);
    let mut step = config.initial_step;
    let mut accepted = 0usize;
    for it in 0..config.max_iterations {
        state.iterations = it + 1;
        let w = problem.weights(&phi);
        let (dir, rms) = match ascent_direction(&cur.frame, &w, cur.area, &problem.stiffness, tau) {
            Ok(r) => r,
            Err(e) => {
                state.failure = Some(e.to_string());
                break;
            }
        };
        state.stationarity = rms;
        if rms < config.stationarity_tolerance {
            state.converged = true;
            break;
        }
        let value = cur.lambda1 * cur.area;
        let mut improved = None;
        while step >= config.min_step {
            let mut trial: Vec<f64> = phi.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            normalize_area(&mut trial, &problem.vertex_area);
            match problem.solve(&trial, config) {
                Ok(s) if s.lambda1 * s.area > value => {
                    improved = Some((trial, s));
                    break;
                }
                Ok(_) => step *= config.shrink,
                Err(e) => {
                    state.failure = Some(e.to_string());
                    break;
                }
            }
        }
        let Some((trial, s)) = improved else { break };
        phi = trial;
        cur = s;
        accepted += 1;
        let hm = harmonic_map_of(mesh, metric, &problem, &phi, &cur);
        state.history.push(IterationRecord {
            iteration: it + 1,
            value: cur.lambda1 * cur.area,
            step,
            multiplicity: cur.frame.len(),
            stationarity: rms,
            sphericality: hm.as_ref().map_or(f64::NAN, |h| h.sphericality_residual),
            metric_recovery: hm.as_ref().map_or(f64::NAN, |h| h.metric_recovery_residual),
        });
        step = (step / config.shrink).min(config.max_step);
        if let Some(dir) = &config.checkpoint {
            if accepted % config.checkpoint_every.max(1) == 0 {
                fill(&mut state, &phi, &cur, step);
                state.save(dir, "maximizer")?;
            }
        }
    }
    fill(&mut state, &phi, &cur, step);
    if !state.converged && state.failure.is_none() {
        let w = problem.weights(&phi);
        state.stationarity = ascent_direction(&cur.frame, &w, cur.area, &problem.stiffness, tau)?.1;
        state.converged = state.stationarity < config.stationarity_tolerance;
    }
    Ok(state)
}

fn fill(state: &mut MaximizerState, phi: &[f64], cur: &Solved, step: f64) {
    state.log_conformal_factor = phi.to_vec();
    state.value = cur.lambda1 * cur.area;
    state.lambda1 = cur.lambda1;
    state.area = cur.area;
    state.eigenvalues = cur.eigenvalues.clone();
    state.multiplicity = cur.frame.len();
    state.eigenframe = cur.frame.clone();
    state.step = step;
}

/// Independent ascents from several starting factors; returns them all,
/// best first.
pub fn maximize_restarts(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    starts: Vec<Vec<f64>>,
    config: &MaximizeConfig,
) -> Result<Vec<MaximizerState>> {
    let mut out: Vec<MaximizerState> = starts
        .into_par_iter()
        .map(|s| maximize_from(mesh, metric, s, config))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(out)
}

/// `Φ = (u₁, …, u_{l+1})` rescaled so that `|Φ|² ≈ 1`, with the residuals of
/// the two identities an optimal metric satisfies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMap {
    /// One vertex field per component.
    pub components: Vec<Vec<f64>>,
    /// The positive semidefinite `Y` with `|Φ|² = ⟨Y, u uᵀ⟩`.
    pub scaling: Vec<Vec<f64>>,
    pub cluster_size: usize,
    /// `max_v ||Φ(v)|² - 1|`.
    pub sphericality_residual: f64,
    /// Relative L² distance between `|∇Φ|²/λ₁` and the conformal factor `e^{2φ}`.
    pub metric_recovery_residual: f64,
}

/// Least-squares sphere map from the state's eigenframe. A cluster of size
/// one is not an error; the residuals expose it.
pub fn extract_harmonic_map(state: &MaximizerState, mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Result<HarmonicMap> {
    if state.eigenframe.is_empty() {
        return Err(Error::InvalidArgument("state carries no eigenframe".into()));
    }
    if state.log_conformal_factor.len() != mesh.num_vertices() {
        return Err(Error::InvalidArgument("state does not match the mesh".into()));
    }
    let problem = Problem::new(mesh, metric)?;
    let solved = Solved {
        lambda1: state.lambda1,
        area: state.area,
        eigenvalues: state.eigenvalues.clone(),
        frame: state.eigenframe.clone(),
    };
    harmonic_map_of(mesh, metric, &problem, &state.log_conformal_factor, &solved)
}

/// Positive semidefinite `Y` minimizing `∑ w (⟨Y, u uᵀ⟩ - 1)²`. Products of
/// eigenfunctions are often nearly dependent (`cos² + sin² = 1`), so the
/// unconstrained minimum-norm solution uses a relative cutoff and is then
/// pushed back into the cone by projected gradient.
const RIDGE: f64 = 1e-6;

fn sphere_scaling(frame: &[Vec<f64>], w: &[f64]) -> Result<DMatrix<f64>> {
    let m = frame.len();
    let (g, b) = gram(frame, w);
    // a small ridge picks the minimum-norm member of near-degenerate families,
    // which is the balanced (conformal) scaling
    let smax = SymmetricEigen::new(g.clone()).eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let ridge = RIDGE * smax;
    let g = &g + DMatrix::identity(m * m, m * m) * ridge;
    let y0 = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NoConvergence("least squares: Gram matrix is not positive".into()))?
        .solve(&b);
    let psd = |x: &DMatrix<f64>| {
        let eig = SymmetricEigen::new((x + x.transpose()) * 0.5);
        let d = eig.eigenvalues.map(|v| v.max(0.0));
        &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
    };
    let y = DMatrix::from_row_slice(m, m, y0.as_slice());
    let sym = (&y + y.transpose()) * 0.5;
    if SymmetricEigen::new(sym.clone()).eigenvalues.iter().all(|&v| v >= 0.0) {
        return Ok(sym);
    }
    let lip = 2.0 * smax.max(f64::MIN_POSITIVE);
    let grad = |x: &DMatrix<f64>| {
        let xv = DVector::from_iterator(m * m, x.transpose().iter().copied());
        let gv = (&g * &xv - &b) * 2.0;
        DMatrix::from_row_slice(m, m, gv.as_slice())
    };
    let mut x = psd(&sym);
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..2000 {
        let next = psd(&(&z - grad(&z) / lip));
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &x) * ((t - 1.0) / tn);
        let moved = (&next - &x).norm();
        x = next;
        t = tn;
        if moved < 1e-14 {
            break;
        }
    }
    Ok(x)
}

fn harmonic_map_of(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    problem: &Problem,
    phi: &[f64],
    cur: &Solved,
) -> Result<HarmonicMap> {
    let frame = &cur.frame;
    let m = frame.len();
    let w = problem.weights(phi);
    let y = sphere_scaling(frame, &w)?;
    let eig = SymmetricEigen::new(y.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let half = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    let n = mesh.num_vertices();
    let components: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| (0..m).map(|k| half[(j, k)] * frame[k][i]).sum()).collect())
        .collect();
    let sphericality_residual = (0..n)
        .map(|i| (components.iter().map(|c| c[i] * c[i]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    // |∇Φ|² in the reference metric, averaged from triangles to vertices
    let mut grad2 = vec![0.0; mesh.num_triangles()];
    for c in &components {
        for (t, gn) in triangle_gradient_norms(mesh, metric, c).into_iter().enumerate() {
            grad2[t] += gn * gn;
        }
    }
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = metric.triangle_area(mesh, t);
        for &v in tri {
            num[v] += a * grad2[t];
            den[v] += a;
        }
    }
    let (mut diff, mut norm) = (0.0, 0.0);
    for i in 0..n {
        let rho = (2.0 * phi[i]).exp();
        let rec = num[i] / den[i] / cur.lambda1;
        diff += problem.vertex_area[i] * (rec - rho).powi(2);
        norm += problem.vertex_area[i] * rho * rho;
    }
    Ok(HarmonicMap {
        components,
        scaling: (0..m).map(|j| (0..m).map(|k| y[(j, k)]).collect()).collect(),
        cluster_size: m,
        sphericality_residual,
        metric_recovery_residual: (diff / norm).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectraplex_projection() {
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let p = project_spectraplex(&x);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12 && p[(1, 1)].abs() < 1e-12);
        let y = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.3]);
        let q = project_spectraplex(&y);
        assert!((q.trace() - 1.0).abs() < 1e-12);
        assert!(SymmetricEigen::new(q).eigenvalues.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn direction_vanishes_for_constant_sum() {
        // two fields with u1² + u2² constant: cos and sin on a circle of samples
        let n = 64;
        let w = vec![1.0 / n as f64; n];
        let s = 2f64.sqrt();
        let frame: Vec<Vec<f64>> = vec![
            (0..n).map(|i| s * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect(),
            (0..n).map(|i| s * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect(),
        ];
        let k = CsrMatrix::diagonal_matrix(&w);
        let (_, rms) = ascent_direction(&frame, &w, 1.0, &k, 0.0).unwrap();
        assert!(rms < 1e-8, "{rms}");
    }
}
