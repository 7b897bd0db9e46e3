//! Thin cross-cap and handle surgery on reference surfaces: attaching the
//! flat models, scanning the height for the first-eigenvalue crossing,
//! checking the eigenvalue sandwich, convergence sweeps, scaling laws and
//! monotonicity certificates.

mod report;
mod scan;
mod sweep;

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use report::{write_atomic, write_csv_atomic, write_json_atomic, CheckRecord, VerifyManifest};
pub use scan::{
    height_scan, monotonicity_certificate, verify_chain, Branch, ChainReport, CrossingStatus, HeightScan,
    MonotonicityCertificate, ScanOptions, ScanSample,
};
pub use sweep::{
    convergence_sweep, fit_power_law, scaling_laws, GridPoint, PowerFit, ScalingLaws, SweepResult,
};

use crate::analytic::{self, ModelKind};
use crate::error::{Error, Result};
use crate::geometry::{
    build_cross_cap_with_rings, build_cylinder_with_rings, build_flat_torus, build_graded_sphere, glue_loops,
    loop_length, remove_disk, BoundaryLoop, DiscreteMetric, GluePair, PatchSpec, SurfaceMesh,
};
use crate::spectral::{assemble, solve_spectrum, BoundaryCondition, EigenOptions, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttachKind {
    CrossCap,
    Handle,
}

impl AttachKind {
    pub fn model(self) -> ModelKind {
        match self {
            AttachKind::CrossCap => ModelKind::CrossCap,
            AttachKind::Handle => ModelKind::Cylinder,
        }
    }

    pub fn centers(self) -> usize {
        match self {
            AttachKind::CrossCap => 1,
            AttachKind::Handle => 2,
        }
    }
}

/// Closed reference surfaces that surgery starts from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseSurface {
    /// Unit round sphere, meshed with graded polar rings at both poles.
    RoundSphere,
    /// Flat torus `R^2 / (Z a + Z b)`.
    FlatTorus { basis: [[f64; 2]; 2] },
}

impl BaseSurface {
    /// Equilateral torus of the given area.
    pub fn equilateral_torus(area: f64) -> Self {
        let side = (2.0 * area / 3f64.sqrt()).sqrt();
        BaseSurface::FlatTorus {
            basis: [[side, 0.0], [0.5 * side, 0.5 * 3f64.sqrt() * side]],
        }
    }

    pub fn square_torus(side: f64) -> Self {
        BaseSurface::FlatTorus {
            basis: [[side, 0.0], [0.0, side]],
        }
    }

    /// Exact first nonzero eigenvalue.
    pub fn exact_lambda1(&self) -> f64 {
        match self {
            BaseSurface::RoundSphere => 2.0,
            BaseSurface::FlatTorus { basis } => {
                let [a, b] = *basis;
                let det = a[0] * b[1] - a[1] * b[0];
                // dual basis
                let da = [b[1] / det, -b[0] / det];
                let db = [-a[1] / det, a[0] / det];
                let mut best = f64::INFINITY;
                for m in -6i32..=6 {
                    for n in -6i32..=6 {
                        if m == 0 && n == 0 {
                            continue;
                        }
                        let w = [m as f64 * da[0] + n as f64 * db[0], m as f64 * da[1] + n as f64 * db[1]];
                        best = best.min(4.0 * PI * PI * (w[0] * w[0] + w[1] * w[1]));
                    }
                }
                best
            }
        }
    }

    pub fn exact_area(&self) -> f64 {
        match self {
            BaseSurface::RoundSphere => 4.0 * PI,
            BaseSurface::FlatTorus { basis } => (basis[0][0] * basis[1][1] - basis[0][1] * basis[1][0]).abs(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BaseSurface::RoundSphere => "round-sphere".into(),
            BaseSurface::FlatTorus { basis } => format!("flat-torus{basis:?}"),
        }
    }
}

/// How surgered surfaces are discretized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgerySetup {
    pub base: BaseSurface,
    pub kind: AttachKind,
    /// Cells along the first period of a torus, or meridians of the sphere.
    pub resolution: usize,
    /// Radius of the round polar patches on a torus.
    pub core_radius: f64,
    /// Axial cells of the model; `None` gives square cells.
    pub axial_cells: Option<usize>,
    /// Distance between the two handle feet on a torus, as a fraction of
    /// the first period.
    pub separation: f64,
}

impl SurgerySetup {
    pub fn new(base: BaseSurface, kind: AttachKind, resolution: usize) -> Self {
        let core_radius = match &base {
            BaseSurface::RoundSphere => 1.0,
            BaseSurface::FlatTorus { .. } => 0.2 * base.exact_area().sqrt(),
        };
        SurgerySetup {
            base,
            kind,
            resolution,
            core_radius,
            axial_cells: None,
            separation: 0.5,
        }
        .fit_core()
    }

    /// Moves the handle feet closer together (or apart) and shrinks the
    /// core radius so both patches still fit.
    pub fn with_separation(mut self, separation: f64) -> Self {
        self.separation = separation;
        self.fit_core()
    }

    fn fit_core(mut self) -> Self {
        if let (BaseSurface::FlatTorus { basis }, AttachKind::Handle) = (&self.base, self.kind) {
            // two patches share the gap with their transition blocks
            let period = (basis[0][0] * basis[0][0] + basis[0][1] * basis[0][1]).sqrt();
            let gap = self.separation.min(1.0 - self.separation) * period;
            self.core_radius = self.core_radius.min(0.2 * gap);
        }
        self
    }

    /// The base surface meshed with polar patches whose rings include one at
    /// radius `epsilon` around each surgery center.
    pub fn patched_base(&self, epsilon: f64) -> Result<PatchedBase> {
        let count = self.kind.centers();
        let (mesh, metric) = match &self.base {
            BaseSurface::RoundSphere => build_graded_sphere(self.resolution, epsilon)?,
            BaseSurface::FlatTorus { basis } => {
                let half = 0.5 * self.separation;
                let centers: &[[f64; 2]] = if count == 1 {
                    &[[0.5, 0.5]]
                } else {
                    &[[0.5 - half, 0.5], [0.5 + half, 0.5]]
                };
                let specs: Vec<PatchSpec> = centers
                    .iter()
                    .map(|&center| PatchSpec {
                        center,
                        core_radius: self.core_radius,
                        anchor_radius: epsilon,
                    })
                    .collect();
                build_flat_torus(*basis, self.resolution, &specs)?
            }
        };
        let centers: Vec<usize> = mesh.patches().iter().take(count).map(|p| p.center_label).collect();
        if centers.len() != count {
            return Err(Error::InvalidMesh(format!("base has {} patches, need {count}", centers.len())));
        }
        Ok(PatchedBase {
            mesh,
            metric,
            centers,
            epsilon,
        })
    }

    pub fn spec(&self, base: &PatchedBase, height: f64) -> SurgerySpec {
        SurgerySpec {
            kind: self.kind,
            centers: base.centers.clone(),
            epsilon: base.epsilon,
            height,
            axial_cells: self.axial_cells,
        }
    }

    /// Builds `Σ_{ε,h}`.
    pub fn surgered(&self, epsilon: f64, height: f64) -> Result<Surgered> {
        let base = self.patched_base(epsilon)?;
        attach(&base.mesh, &base.metric, &self.spec(&base, height))
    }
}

/// A base mesh ready for surgery.
#[derive(Clone, Debug)]
pub struct PatchedBase {
    pub mesh: SurfaceMesh,
    pub metric: DiscreteMetric,
    /// Patch center vertices, one per surgery point.
    pub centers: Vec<usize>,
    pub epsilon: f64,
}

impl PatchedBase {
    /// `Σ` with the disks of radius ε removed, and the new boundary loops.
    pub fn punctured(&self) -> Result<(SurfaceMesh, DiscreteMetric, Vec<BoundaryLoop>)> {
        cut_disks(&self.mesh, &self.metric, &self.centers, self.epsilon)
    }
}

/// Parameters of one surgery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgerySpec {
    pub kind: AttachKind,
    /// Polar patch centers: one for a cross cap, two for a handle.
    pub centers: Vec<usize>,
    pub epsilon: f64,
    pub height: f64,
    /// Axial cells of the model. The angular count always equals the vertex
    /// count of the boundary ring it is glued to.
    pub axial_cells: Option<usize>,
}

/// A surgered surface with bookkeeping about its pieces.
#[derive(Clone, Debug)]
pub struct Surgered {
    pub mesh: SurfaceMesh,
    pub metric: DiscreteMetric,
    pub spec: SurgerySpec,
    /// Triangles of the attached model.
    pub model_triangles: Range<usize>,
    /// Glue seams in the surgered mesh.
    pub seams: Vec<BoundaryLoop>,
    pub base_area: f64,
    pub punctured_area: f64,
    pub model_area: f64,
    /// Metric length of each seam. The model is built with this
    /// circumference, so the chart's conformal factor at the center is
    /// absorbed into ε.
    pub circumference: f64,
}

impl Surgered {
    pub fn area(&self) -> f64 {
        self.metric.area(&self.mesh)
    }

    /// Fraction of `∫u^2` carried by the model, with lumped weights.
    pub fn model_mass_fraction(&self, u: &[f64]) -> f64 {
        let mut on_model = 0.0;
        let mut total = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let a = self.metric.triangle_area(&self.mesh, t) / 3.0;
            let s: f64 = self.mesh.triangles()[t].iter().map(|&v| u[v] * u[v]).sum::<f64>() * a;
            total += s;
            if self.model_triangles.contains(&t) {
                on_model += s;
            }
        }
        if total > 0.0 {
            on_model / total
        } else {
            0.0
        }
    }

    pub fn spectrum(&self, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
        let ops = assemble(&self.mesh, &self.metric, &BoundaryCondition::Closed)?;
        solve_spectrum(&ops, k, opts)
    }
}

fn cut_disks(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    centers: &[usize],
    epsilon: f64,
) -> Result<(SurfaceMesh, DiscreteMetric, Vec<BoundaryLoop>)> {
    let mut mesh = mesh.clone();
    let mut metric = metric.clone();
    let mut loops: Vec<BoundaryLoop> = Vec::new();
    // patches are addressed by their original center label, which survives renumbering
    for &c in centers {
        let cut = remove_disk(&mesh, &metric, c, epsilon)?;
        let remap = |v: usize| cut.vertex_map[v].ok_or(Error::OverlappingDisk(v));
        for lp in &mut loops {
            for v in &mut lp.vertices {
                *v = remap(*v)?;
            }
        }
        loops.push(cut.boundary);
        mesh = cut.mesh;
        metric = cut.metric;
    }
    Ok((mesh, metric, loops))
}

/// `(Σ ∖ B_ε) ∪ M_{ε,h}` for a cross cap, or `(Σ ∖ (B_ε(x_1) ∪ B_ε(x_2))) ∪ C_{ε,h}`
/// for a handle. The model's circumference is matched to the metric length
/// of the cut ring.
pub fn attach(mesh: &SurfaceMesh, metric: &DiscreteMetric, spec: &SurgerySpec) -> Result<Surgered> {
    if spec.centers.len() != spec.kind.centers() {
        return Err(Error::InvalidArgument(format!(
            "{:?} needs {} centers, got {}",
            spec.kind,
            spec.kind.centers(),
            spec.centers.len()
        )));
    }
    if spec.kind == AttachKind::Handle && spec.centers[0] == spec.centers[1] {
        return Err(Error::InvalidArgument("handle centers must be distinct".into()));
    }
    if !(spec.height > 0.0 && spec.epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon and height must be positive".into()));
    }
    let topology = mesh.declared_topology();
    let base_area = metric.area(mesh);
    let (cut, cut_metric, loops) = cut_disks(mesh, metric, &spec.centers, spec.epsilon)?;
    let punctured_area = cut_metric.area(&cut);
    let n = loops[0].len();
    if loops.iter().any(|l| l.len() != n) {
        return Err(Error::GlueMismatch("boundary rings have different vertex counts".into()));
    }
    let lengths: Vec<f64> = loops
        .iter()
        .map(|l| loop_length(&cut, &cut_metric, l))
        .collect::<Result<_>>()?;
    let circumference = lengths.iter().sum::<f64>() / lengths.len() as f64;
    let (model, model_metric) = match spec.kind {
        AttachKind::CrossCap => build_cross_cap_with_rings(circumference, spec.height, n, spec.axial_cells)?,
        AttachKind::Handle => build_cylinder_with_rings(circumference, spec.height, n, spec.axial_cells)?,
    };
    let model_area = model_metric.area(&model);
    let model_loops = model.boundary_loops();
    let mut b_loops: Vec<BoundaryLoop> = model_loops.to_vec();
    // the cylinder's loops come out in vertex order: t = 0 first
    b_loops.sort_by_key(|l| l.vertices.iter().copied().min());
    if b_loops.len() != loops.len() {
        return Err(Error::GlueMismatch(format!(
            "model has {} boundary loops, surface has {}",
            b_loops.len(),
            loops.len()
        )));
    }
    let pairs: Vec<GluePair> = loops
        .iter()
        .zip(&b_loops)
        .map(|(a, b)| GluePair {
            a: a.clone(),
            b: b.clone(),
            offset: 0,
        })
        .collect();
    let glued = glue_loops(&cut, &cut_metric, &model, &model_metric, &pairs, 1e-9)?;
    let mut out = glued.mesh;
    if let Some(t) = topology {
        out = out.with_topology(match spec.kind {
            AttachKind::CrossCap => t.with_cross_cap(),
            AttachKind::Handle => t.with_handle(),
        });
    }
    Ok(Surgered {
        mesh: out,
        metric: glued.metric,
        spec: spec.clone(),
        model_triangles: glued.b_triangles,
        seams: loops,
        base_area,
        punctured_area,
        model_area,
        circumference,
    })
}

/// FEM value of the lowest Dirichlet eigenvalue of the model with boundary
/// circumference `2π epsilon`, `n` vertices per ring.
pub fn model_dirichlet_lambda0(
    kind: AttachKind,
    epsilon: f64,
    height: f64,
    n: usize,
    axial_cells: Option<usize>,
    opts: &EigenOptions,
) -> Result<f64> {
    let p = 2.0 * PI * epsilon;
    let (mesh, metric) = match kind {
        AttachKind::CrossCap => build_cross_cap_with_rings(p, height, n, axial_cells)?,
        AttachKind::Handle => build_cylinder_with_rings(p, height, n, axial_cells)?,
    };
    model_lambda0_on(&mesh, &metric, opts)
}

fn model_lambda0_on(mesh: &SurfaceMesh, metric: &DiscreteMetric, opts: &EigenOptions) -> Result<f64> {
    let fixed: Vec<usize> = (0..mesh.boundary_loops().len()).collect();
    let ops = assemble(mesh, metric, &BoundaryCondition::Dirichlet(fixed))?;
    let s = solve_spectrum(&ops, 1, opts)?;
    Ok(s.eigenvalues[0])
}

/// Closed form of the lowest Dirichlet eigenvalue of the model.
pub fn model_lambda0_exact(kind: AttachKind, height: f64) -> f64 {
    analytic::crossing_height(kind.model(), 1.0).powi(2) / (height * height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Topology;

    #[test]
    fn torus_plus_cross_cap_bookkeeping() {
        let setup = SurgerySetup::new(BaseSurface::equilateral_torus(1.0), AttachKind::CrossCap, 24);
        let s = setup.surgered(0.05, 0.3).unwrap();
        assert_eq!(s.mesh.euler_characteristic(), -1);
        assert!(!s.mesh.is_orientable());
        assert_eq!(s.mesh.declared_topology(), Some(Topology::NonOrientable { genus: 3 }));
        assert!(s.mesh.is_closed());
        let want = s.punctured_area + s.model_area;
        assert!((s.area() - want).abs() < 1e-12 * want);
        assert!((s.model_area - 2.0 * PI * 0.05 * 0.3).abs() < 2e-2 * s.model_area);
    }

    #[test]
    fn sphere_plus_handle_is_a_torus() {
        let setup = SurgerySetup::new(BaseSurface::RoundSphere, AttachKind::Handle, 16);
        let s = setup.surgered(0.1, 0.5).unwrap();
        assert_eq!(s.mesh.euler_characteristic(), 0);
        assert!(s.mesh.is_orientable());
        assert_eq!(s.seams.len(), 2);
    }

    #[test]
    fn model_closed_forms() {
        assert!((model_lambda0_exact(AttachKind::CrossCap, 1.0) - PI * PI / 4.0).abs() < 1e-14);
        assert!((model_lambda0_exact(AttachKind::Handle, 1.0) - PI * PI).abs() < 1e-14);
    }

    #[test]
    fn exact_torus_eigenvalue() {
        let b = BaseSurface::equilateral_torus(1.0);
        assert!((b.exact_lambda1() - 8.0 * PI * PI / 3f64.sqrt()).abs() < 1e-10);
        assert!((BaseSurface::square_torus(2.0 * PI).exact_lambda1() - 1.0).abs() < 1e-12);
    }
}
