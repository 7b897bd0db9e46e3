use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SurgerySetup;
use crate::analytic::{merge_limit_spectrum_for, LimitSpectrum};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryLoop, DiscreteMetric, SurfaceMesh};
use crate::spectral::{
    assemble, boundary_tangential_energy, harmonic_extension, solve_spectrum, triangle_gradient_norms,
    BoundaryCondition, EigenOptions,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub epsilon: f64,
    pub h: f64,
    pub eigenvalues: Vec<f64>,
    pub limit: Vec<f64>,
    /// `|λ_k(Σ_{ε,h}) - ν_k^h|` for `k = 0..=k_max`.
    pub deviations: Vec<f64>,
    /// Deviations divided by `ν_k^h` (absolute for `ν_k^h = 0`).
    pub relative_deviations: Vec<f64>,
    pub error: Option<String>,
}

impl GridPoint {
    pub fn max_relative_deviation(&self) -> f64 {
        self.relative_deviations.iter().copied().fold(f64::NAN, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub setup: SurgerySetup,
    pub k_max: usize,
    /// Base spectra keyed by ε (the base mesh depends on ε through its rings).
    pub base_spectra: Vec<(f64, Vec<f64>)>,
    pub limits: Vec<LimitSpectrum>,
    /// Sorted by `h`, then by decreasing ε.
    pub grid: Vec<GridPoint>,
    /// Per `(h, k)`: whether the deviation is non-increasing as ε shrinks.
    pub monotone: Vec<(f64, usize, bool)>,
}

impl SweepResult {
    pub fn points_at(&self, h: f64) -> Vec<&GridPoint> {
        self.grid.iter().filter(|p| p.h == h).collect()
    }

    /// Whether `max_k` relative deviation is non-increasing as ε shrinks, per `h`.
    pub fn max_deviation_monotone(&self, h: f64) -> bool {
        let pts = self.points_at(h);
        pts.windows(2)
            .all(|w| w[1].max_relative_deviation() <= w[0].max_relative_deviation())
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,h,k,lambda,nu,deviation,relative_deviation")?;
        for p in &self.grid {
            if let Some(e) = &p.error {
                writeln!(w, "{},{},,,,,error: {}", p.epsilon, p.h, e.replace(',', ";"))?;
                continue;
            }
            for k in 0..p.deviations.len() {
                writeln!(
                    w,
                    "{},{},{},{:.12e},{:.12e},{:.6e},{:.6e}",
                    p.epsilon, p.h, k, p.eigenvalues[k], p.limit[k], p.deviations[k], p.relative_deviations[k]
                )?;
            }
        }
        Ok(())
    }
}

/// Tabulates `|λ_k(Σ_{ε,h}) - ν_k^h|` over an `(ε, h)` grid. The base
/// spectrum is computed on the same patched mesh so that mesh error does
/// not enter the deviations. Failed points are recorded and skipped.
pub fn convergence_sweep(
    setup: &SurgerySetup,
    h_list: &[f64],
    eps_list: &[f64],
    k_max: usize,
    eigen: &EigenOptions,
) -> Result<SweepResult> {
    if h_list.is_empty() || eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let count = k_max + 1;
    let base: Vec<(f64, Vec<f64>)> = eps_sorted
        .par_iter()
        .map(|&e| -> Result<(f64, Vec<f64>)> {
            let b = setup.patched_base(e)?;
            let ops = assemble(&b.mesh, &b.metric, &BoundaryCondition::Closed)?;
            Ok((e, solve_spectrum(&ops, count, eigen)?.eigenvalues))
        })
        .collect::<Result<_>>()?;
    let base_of: BTreeMap<u64, &Vec<f64>> = base.iter().map(|(e, v)| (e.to_bits(), v)).collect();

    let jobs: Vec<(f64, f64)> = h_list
        .iter()
        .flat_map(|&h| eps_sorted.iter().map(move |&e| (h, e)))
        .collect();
    let grid: Vec<GridPoint> = jobs
        .par_iter()
        .map(|&(h, e)| {
            let bs = base_of[&e.to_bits()];
            let run = || -> Result<GridPoint> {
                let limit = merge_limit_spectrum_for(setup.kind.model(), bs, h, count)?;
                let s = setup.surgered(e, h)?;
                let ev = s.spectrum(count, eigen)?.eigenvalues;
                let deviations: Vec<f64> = ev.iter().zip(&limit.merged).map(|(a, b)| (a - b).abs()).collect();
                let relative_deviations = deviations
                    .iter()
                    .zip(&limit.merged)
                    .map(|(d, nu)| if nu.abs() > 1e-8 { d / nu.abs() } else { *d })
                    .collect();
                Ok(GridPoint {
                    epsilon: e,
                    h,
                    eigenvalues: ev,
                    limit: limit.merged,
                    deviations,
                    relative_deviations,
                    error: None,
                })
            };
            run().unwrap_or_else(|err| GridPoint {
                epsilon: e,
                h,
                eigenvalues: Vec::new(),
                limit: Vec::new(),
                deviations: Vec::new(),
                relative_deviations: Vec::new(),
                error: Some(err.to_string()),
            })
        })
        .collect();
    let limits = h_list
        .iter()
        .map(|&h| merge_limit_spectrum_for(setup.kind.model(), &base[base.len() - 1].1, h, count))
        .collect::<Result<_>>()?;
    let mut monotone = Vec::new();
    for &h in h_list {
        let pts: Vec<&GridPoint> = grid.iter().filter(|p| p.h == h && p.error.is_none()).collect();
        for k in 0..count {
            // solver noise allowance on top of exact monotonicity
            let ok = pts
                .windows(2)
                .all(|w| w[1].deviations[k] <= w[0].deviations[k] + 1e-9 * w[0].limit[k].abs().max(1.0));
            monotone.push((h, k, ok));
        }
    }
    Ok(SweepResult {
        setup: setup.clone(),
        k_max,
        base_spectra: base,
        limits,
        grid,
        monotone,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope (Student t).
    pub ci95: [f64; 2],
    pub r_squared: f64,
    pub points: Vec<[f64; 2]>,
}

fn t_quantile_975(dof: usize) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= 30 {
        T[dof - 1]
    } else {
        1.96
    }
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least three points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let dof = lx.len() - 2;
    let stderr = (sse / dof as f64 / sxx).sqrt();
    let t = t_quantile_975(dof);
    Ok(PowerFit {
        slope,
        intercept,
        slope_stderr: stderr,
        ci95: [slope - t * stderr, slope + t * stderr],
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        points: x.iter().zip(y).map(|(a, b)| [*a, *b]).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaws {
    pub epsilons: Vec<f64>,
    /// Energy in `B_ε` of the harmonic extension of the eigenfunction's trace.
    pub extension_energy: Vec<f64>,
    /// `∫_{∂B_ε} |∂_T u|^2`.
    pub tangential_energy: Vec<f64>,
    /// Largest `|∇u|` on the triangles touching `∂B_ε`.
    pub boundary_gradient: Vec<f64>,
    pub mu1: Vec<f64>,
    pub extension_fit: PowerFit,
    pub tangential_fit: PowerFit,
    pub gradient_fit: PowerFit,
    /// Ring radius and largest `|∇u|` on the triangles between that ring and
    /// the next one out, for the smallest ε.
    pub gradient_profile: Vec<[f64; 2]>,
}

struct NeumannData {
    extension_energy: f64,
    tangential: f64,
    gradient: f64,
    mu1: f64,
    profile: Vec<[f64; 2]>,
}

/// First Neumann eigenfunction of `Σ ∖ B_ε` normalized to unit `L^2` norm.
fn neumann_data(setup: &SurgerySetup, epsilon: f64, eigen: &EigenOptions) -> Result<NeumannData> {
    let base = setup.patched_base(epsilon)?;
    let center = base.centers[0];
    let (pm, pg, loops) = {
        // only the first surgery point matters for the local laws
        let cut = crate::geometry::remove_disk(&base.mesh, &base.metric, center, epsilon)?;
        (cut.mesh, cut.metric, vec![(cut.boundary, cut.vertex_map)])
    };
    let (boundary, vertex_map) = &loops[0];
    let ops = assemble(&pm, &pg, &BoundaryCondition::Closed)?;
    let sp = solve_spectrum(&ops, 2, eigen)?;
    let u = &sp.eigenvectors[1];
    let mu1 = sp.eigenvalues[1];
    let tangential = boundary_tangential_energy(&pm, &pg, u, boundary)?;

    // extend the trace harmonically into the disk of the unpunctured mesh
    let mut old_of = vec![usize::MAX; pm.num_vertices()];
    for (old, new) in vertex_map.iter().enumerate() {
        if let Some(n) = new {
            old_of[*n] = old;
        }
    }
    let patch = base.mesh.patch_at(center).ok_or(Error::NoPolarPatch(center))?;
    let mut interior: Vec<usize> = vec![patch.center.unwrap()];
    for r in &patch.rings {
        if r.radius < epsilon * (1.0 - 1e-9) {
            interior.extend(&r.vertices);
        }
    }
    let bvals: Vec<(usize, f64)> = boundary.vertices.iter().map(|&v| (old_of[v], u[v])).collect();
    let ext = harmonic_extension(&base.mesh, &base.metric, &interior, &bvals)?;

    let gradient = max_gradient_near(&pm, &pg, u, boundary);
    let profile = gradient_profile(&pm, &pg, u, &patch.rings, vertex_map, epsilon);
    Ok(NeumannData {
        extension_energy: ext.energy,
        tangential,
        gradient,
        mu1,
        profile,
    })
}

fn max_gradient_near(mesh: &SurfaceMesh, metric: &DiscreteMetric, u: &[f64], lp: &BoundaryLoop) -> f64 {
    let on: std::collections::HashSet<usize> = lp.vertices.iter().copied().collect();
    let g = triangle_gradient_norms(mesh, metric, u);
    (0..mesh.num_triangles())
        .filter(|&t| mesh.triangles()[t].iter().any(|v| on.contains(v)))
        .map(|t| g[t])
        .fold(0.0, f64::max)
}

fn gradient_profile(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    u: &[f64],
    rings: &[crate::geometry::PatchRing],
    vertex_map: &[Option<usize>],
    epsilon: f64,
) -> Vec<[f64; 2]> {
    let g = triangle_gradient_norms(mesh, metric, u);
    let mut ring_of = vec![usize::MAX; mesh.num_vertices()];
    let kept: Vec<&crate::geometry::PatchRing> = rings.iter().filter(|r| r.radius >= epsilon * (1.0 - 1e-9)).collect();
    for (i, r) in kept.iter().enumerate() {
        for &v in &r.vertices {
            if let Some(n) = vertex_map[v] {
                ring_of[n] = i;
            }
        }
    }
    let mut best = vec![0.0f64; kept.len()];
    for t in 0..mesh.num_triangles() {
        let ids: Vec<usize> = mesh.triangles()[t].iter().map(|&v| ring_of[v]).collect();
        if ids.iter().all(|&i| i != usize::MAX) {
            // a triangle between ring i (outer) and i + 1 (inner) belongs to the inner ring
            let inner = *ids.iter().max().unwrap();
            best[inner] = best[inner].max(g[t]);
        }
    }
    kept.iter().zip(best).map(|(r, b)| [r.radius, b]).collect()
}

/// Fits the local scaling laws of the first Neumann eigenfunction of
/// `Σ ∖ B_ε` over a geometric ε list: extension energy against ε, tangential
/// boundary energy against ε and the boundary gradient against `r = ε`.
pub fn scaling_laws(setup: &SurgerySetup, eps_list: &[f64], eigen: &EigenOptions) -> Result<ScalingLaws> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "scaling laws need at least four radii, got {}",
            eps_list.len()
        )));
    }
    let data: Vec<NeumannData> = eps_list
        .par_iter()
        .map(|&e| neumann_data(setup, e, eigen))
        .collect::<Result<_>>()?;
    let ext: Vec<f64> = data.iter().map(|d| d.extension_energy).collect();
    let tan: Vec<f64> = data.iter().map(|d| d.tangential).collect();
    let grad: Vec<f64> = data.iter().map(|d| d.gradient).collect();
    let smallest = eps_list
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    Ok(ScalingLaws {
        epsilons: eps_list.to_vec(),
        extension_fit: fit_power_law(eps_list, &ext)?,
        tangential_fit: fit_power_law(eps_list, &tan)?,
        gradient_fit: fit_power_law(eps_list, &grad)?,
        extension_energy: ext,
        tangential_energy: tan,
        boundary_gradient: grad,
        mu1: data.iter().map(|d| d.mu1).collect(),
        gradient_profile: data[smallest].profile.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = fit_power_law(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits_are_reported() {
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
    }
}
