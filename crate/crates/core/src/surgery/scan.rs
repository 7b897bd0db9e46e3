use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{model_lambda0_exact, model_lambda0_on, SurgerySetup};
use crate::analytic::model_interval_spectrum;
use crate::error::{Error, Result};
use crate::geometry::{build_cross_cap_with_rings, build_cylinder_with_rings};
use crate::spectral::{assemble, solve_spectrum, BoundaryCondition, EigenOptions};

use super::AttachKind;

/// Which piece an eigenfunction lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    SurfaceLike,
    IntervalLike,
}

impl Branch {
    pub fn classify(model_fraction: f64, threshold: f64) -> Branch {
        if model_fraction > threshold {
            Branch::IntervalLike
        } else {
            Branch::SurfaceLike
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CrossingStatus {
    Crossed,
    NotCrossed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Eigenpairs per solve, counting the constant mode.
    pub k: usize,
    /// Relative gap below which `λ₁` counts as double.
    pub gap_floor: f64,
    /// Golden-section and bisection steps after the grid pass.
    pub refine_steps: usize,
    /// Mass fraction on the model above which a mode is interval-like.
    pub fraction_threshold: f64,
    pub eigen: EigenOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            k: 8,
            gap_floor: 5e-3,
            refine_steps: 6,
            fraction_threshold: 0.5,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub h: f64,
    pub eigenvalues: Vec<f64>,
    /// Mass fraction on the model of each eigenfunction.
    pub model_fractions: Vec<f64>,
    /// `(λ₂ - λ₁) / λ₁`.
    pub gap: f64,
    pub lambda1_branch: Branch,
    pub area: f64,
    pub error: Option<String>,
}

impl ScanSample {
    fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightScan {
    pub setup: SurgerySetup,
    pub epsilon: f64,
    pub bracket: [f64; 2],
    /// `λ₁(Σ)` of the discrete base surface.
    pub lambda1_base: f64,
    pub area_base: f64,
    /// Lowest interval value at the bracket ends.
    pub interval_at_bracket: [f64; 2],
    /// Height where the lowest interval value equals `λ₁(Σ)`.
    pub h_star: f64,
    /// Samples sorted by height.
    pub samples: Vec<ScanSample>,
    /// Height with the smallest gap.
    pub h_epsilon: f64,
    pub gap: f64,
    pub status: CrossingStatus,
    /// Branch of `λ₁` at the two bracket ends.
    pub branch_at_bracket: [Option<Branch>; 2],
    /// Height where `λ₁` changes from surface-like to interval-like, located
    /// by bisection on the branch label.
    pub branch_switch: Option<f64>,
    /// Circumference of the glue seam; the model is built to match it.
    pub circumference: f64,
}

impl HeightScan {
    pub fn sample_at(&self, h: f64) -> Option<&ScanSample> {
        self.samples.iter().find(|s| s.h == h)
    }
}

fn sample(setup: &SurgerySetup, epsilon: f64, h: f64, opts: &ScanOptions) -> ScanSample {
    let run = || -> Result<ScanSample> {
        let s = setup.surgered(epsilon, h)?;
        let sp = s.spectrum(opts.k, &opts.eigen)?;
        let fractions: Vec<f64> = sp.eigenvectors.iter().map(|u| s.model_mass_fraction(u)).collect();
        let l = &sp.eigenvalues;
        if l.len() < 3 {
            return Err(Error::InvalidArgument("scan needs at least three eigenvalues".into()));
        }
        Ok(ScanSample {
            h,
            gap: (l[2] - l[1]) / l[1],
            lambda1_branch: Branch::classify(fractions[1], opts.fraction_threshold),
            eigenvalues: sp.eigenvalues.clone(),
            model_fractions: fractions,
            area: s.area(),
            error: None,
        })
    };
    run().unwrap_or_else(|e| ScanSample {
        h,
        eigenvalues: Vec::new(),
        model_fractions: Vec::new(),
        gap: f64::NAN,
        lambda1_branch: Branch::SurfaceLike,
        area: f64::NAN,
        error: Some(e.to_string()),
    })
}

/// Base spectrum on the patched mesh used for surgery at this ε.
fn base_lambda1(setup: &SurgerySetup, epsilon: f64, eigen: &EigenOptions) -> Result<(f64, f64)> {
    let base = setup.patched_base(epsilon)?;
    let ops = assemble(&base.mesh, &base.metric, &BoundaryCondition::Closed)?;
    let s = solve_spectrum(&ops, 3, eigen)?;
    Ok((s.eigenvalues[1], ops.area))
}

/// Scans `h` over a bracket for the height where `λ₁(Σ_{ε,h})` becomes
/// double. The bracket must satisfy the analytic condition: the lowest
/// interval value lies above `λ₁(Σ)` at `h₀` and below it at `h₁`.
///
/// The grid minimizer of the relative gap `(λ₂ - λ₁)/λ₁` is refined by
/// golden-section search between its grid neighbours. Separately the height
/// where the first eigenfunction moves onto the model is bisected.
pub fn height_scan(
    setup: &SurgerySetup,
    epsilon: f64,
    bracket: [f64; 2],
    grid_size: usize,
    opts: &ScanOptions,
) -> Result<HeightScan> {
    let [h0, h1] = bracket;
    if !(h0 > 0.0 && h1 > h0) || grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "need 0 < h0 < h1 and at least two grid points, got [{h0}, {h1}] with {grid_size}"
        )));
    }
    let model = setup.kind.model();
    let (lambda1, area_base) = base_lambda1(setup, epsilon, &opts.eigen)?;
    let i0 = model_interval_spectrum(model, h0, 1)?[0];
    let i1 = model_interval_spectrum(model, h1, 1)?[0];
    if !(i0 > lambda1 && i1 < lambda1) {
        return Err(Error::BracketViolated {
            h0,
            h1,
            lambda_h0: i0,
            lambda_h1: i1,
            lambda1,
        });
    }
    let h_star = crate::analytic::crossing_height(model, lambda1);
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| h0 + (h1 - h0) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let mut samples: Vec<ScanSample> = grid.par_iter().map(|&h| sample(setup, epsilon, h, opts)).collect();

    let best = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.ok())
        .min_by(|a, b| a.1.gap.total_cmp(&b.1.gap))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NoConvergence("every grid point failed".into()))?;
    // golden-section refinement of the gap around the grid minimizer
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid_size - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut refined: Vec<ScanSample> = Vec::new();
    if hi > lo {
        let mut a = hi - phi * (hi - lo);
        let mut b = lo + phi * (hi - lo);
        let mut sa = sample(setup, epsilon, a, opts);
        let mut sb = sample(setup, epsilon, b, opts);
        for _ in 0..opts.refine_steps {
            let ga = if sa.ok() { sa.gap } else { f64::INFINITY };
            let gb = if sb.ok() { sb.gap } else { f64::INFINITY };
            if ga <= gb {
                hi = b;
                b = a;
                refined.push(std::mem::replace(&mut sb, sa.clone()));
                a = hi - phi * (hi - lo);
                sa = sample(setup, epsilon, a, opts);
            } else {
                lo = a;
                a = b;
                refined.push(std::mem::replace(&mut sa, sb.clone()));
                b = lo + phi * (hi - lo);
                sb = sample(setup, epsilon, b, opts);
            }
        }
        refined.push(sa);
        refined.push(sb);
    }
    samples.extend(refined);
    samples.sort_by(|a, b| a.h.total_cmp(&b.h));
    samples.dedup_by(|a, b| a.h == b.h);

    // bisect the branch change of λ₁ on the first bracketing pair
    let mut branch_switch = None;
    let ok: Vec<&ScanSample> = samples.iter().filter(|s| s.ok()).collect();
    if let Some(w) = ok
        .windows(2)
        .find(|w| w[0].lambda1_branch == Branch::SurfaceLike && w[1].lambda1_branch == Branch::IntervalLike)
    {
        let (mut a, mut b) = (w[0].h, w[1].h);
        let mut extra = Vec::new();
        for _ in 0..opts.refine_steps {
            let m = 0.5 * (a + b);
            let s = sample(setup, epsilon, m, opts);
            if !s.ok() {
                break;
            }
            if s.lambda1_branch == Branch::SurfaceLike {
                a = m;
            } else {
                b = m;
            }
            extra.push(s);
        }
        branch_switch = Some(0.5 * (a + b));
        samples.extend(extra);
        samples.sort_by(|a, b| a.h.total_cmp(&b.h));
        samples.dedup_by(|a, b| a.h == b.h);
    }

    let best = samples
        .iter()
        .filter(|s| s.ok())
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .unwrap();
    let (h_epsilon, gap) = (best.h, best.gap);
    let end = |h: f64| samples.iter().find(|s| s.h == h && s.ok()).map(|s| s.lambda1_branch);
    let circumference = setup.surgered(epsilon, h_epsilon)?.circumference;
    Ok(HeightScan {
        setup: setup.clone(),
        epsilon,
        bracket,
        lambda1_base: lambda1,
        area_base,
        interval_at_bracket: [i0, i1],
        h_star,
        h_epsilon,
        gap,
        status: if gap < opts.gap_floor {
            CrossingStatus::Crossed
        } else {
            CrossingStatus::NotCrossed
        },
        branch_at_bracket: [end(h0), end(h1)],
        branch_switch,
        samples,
        circumference,
    })
}

/// The three numbers of the eigenvalue sandwich
/// `μ₁(Σ ∖ B_ε) ≤ λ₁(Σ_{ε,h}) ≤ λ₀(M_{ε,h})`, with pass flags at tolerance τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub epsilon: f64,
    pub h: f64,
    /// First nonzero Neumann eigenvalue of the punctured surface.
    pub mu1_punctured: f64,
    pub lambda1_surgered: f64,
    /// FEM Dirichlet value of the model at the surgery resolution.
    pub lambda0_model: f64,
    pub lambda0_model_exact: f64,
    /// Relative discretization error of `λ₁(Σ)` at this resolution.
    pub tau: f64,
    pub lambda1_base: f64,
    pub lambda1_base_exact: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }

    pub fn model_relative_error(&self) -> f64 {
        (self.lambda0_model - self.lambda0_model_exact).abs() / self.lambda0_model_exact
    }
}

/// Evaluates the sandwich at `(ε, h)`. Without an explicit `tau` the
/// tolerance is the measured relative error of `λ₁(Σ)` on the same mesh.
pub fn verify_chain(
    setup: &SurgerySetup,
    epsilon: f64,
    h: f64,
    tau: Option<f64>,
    eigen: &EigenOptions,
) -> Result<ChainReport> {
    let base = setup.patched_base(epsilon)?;
    let ops = assemble(&base.mesh, &base.metric, &BoundaryCondition::Closed)?;
    let lambda1_base = solve_spectrum(&ops, 3, eigen)?.eigenvalues[1];
    let exact = setup.base.exact_lambda1();
    let tau = tau.unwrap_or(((lambda1_base - exact) / exact).abs());

    let (pm, pg, loops) = base.punctured()?;
    let ops = assemble(&pm, &pg, &BoundaryCondition::Closed)?;
    let mu1 = solve_spectrum(&ops, 3, eigen)?.eigenvalues[1];

    let s = setup.surgered(epsilon, h)?;
    let lambda1 = s.spectrum(3, eigen)?.eigenvalues[1];

    let n = loops[0].len();
    let (mm, mg) = match setup.kind {
        AttachKind::CrossCap => build_cross_cap_with_rings(s.circumference, h, n, setup.axial_cells)?,
        AttachKind::Handle => build_cylinder_with_rings(s.circumference, h, n, setup.axial_cells)?,
    };
    let lambda0 = model_lambda0_on(&mm, &mg, eigen)?;
    // the closed form for the circumference actually used
    let lambda0_exact = model_lambda0_exact(setup.kind, h);
    Ok(ChainReport {
        epsilon,
        h,
        mu1_punctured: mu1,
        lambda1_surgered: lambda1,
        lambda0_model: lambda0,
        lambda0_model_exact: lambda0_exact,
        tau,
        lambda1_base,
        lambda1_base_exact: exact,
        lower_holds: mu1 <= lambda1 * (1.0 + tau),
        upper_holds: lambda1 <= lambda0 * (1.0 + tau),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCertificate {
    /// `λ₁(Σ) area(Σ)` on the discrete base.
    pub base_value: f64,
    /// `λ₁(Σ_{ε,h_ε}) area(Σ_{ε,h_ε})`.
    pub surgered_value: f64,
    pub epsilon: f64,
    pub h_epsilon: f64,
    pub margin: f64,
    pub area_base: f64,
    pub area_surgered: f64,
    /// `(area(Σ_ε) - area(Σ)) / ε`.
    pub area_gain_per_epsilon: f64,
    pub crossing: CrossingStatus,
    pub gap: f64,
    pub chain: ChainReport,
    pub valid: bool,
}

/// Scans for the crossing, builds `Σ_{ε,h_ε}` and compares `λ₁ · area`
/// against the base. Valid only when the crossing was found, the margin is
/// positive and the sandwich holds.
pub fn monotonicity_certificate(
    setup: &SurgerySetup,
    epsilon: f64,
    bracket: [f64; 2],
    grid_size: usize,
    opts: &ScanOptions,
) -> Result<(MonotonicityCertificate, HeightScan)> {
    let scan = height_scan(setup, epsilon, bracket, grid_size, opts)?;
    let at = scan
        .samples
        .iter()
        .find(|s| s.h == scan.h_epsilon)
        .expect("scan minimizer is a sample");
    let base_value = scan.lambda1_base * scan.area_base;
    let surgered_value = at.eigenvalues[1] * at.area;
    let chain = verify_chain(setup, epsilon, scan.h_epsilon, None, &opts.eigen)?;
    let margin = surgered_value - base_value;
    let cert = MonotonicityCertificate {
        base_value,
        surgered_value,
        epsilon,
        h_epsilon: scan.h_epsilon,
        margin,
        area_base: scan.area_base,
        area_surgered: at.area,
        area_gain_per_epsilon: (at.area - scan.area_base) / epsilon,
        crossing: scan.status,
        gap: scan.gap,
        valid: scan.status == CrossingStatus::Crossed && margin > 0.0 && chain.holds(),
        chain,
    };
    Ok((cert, scan))
}
