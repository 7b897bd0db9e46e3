use serde::{Deserialize, Serialize};

use super::mesh::SurfaceMesh;
use crate::error::{Error, Result};

/// A vertex whose total angle differs from `2π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub vertex: usize,
    pub angle: f64,
}

/// Intrinsic piecewise-flat metric: one length per edge, scaled by a
/// per-vertex log conformal factor `u` through `l_ij * exp((u_i + u_j) / 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMetric {
    edge_lengths: Vec<f64>,
    log_conformal_factor: Vec<f64>,
    cone_points: Vec<ConePoint>,
}

/// Area of a triangle from its side lengths (Kahan's stable Heron formula).
/// Returns `None` when the lengths violate the strict triangle inequality.
pub fn triangle_area(l: [f64; 3]) -> Option<f64> {
    let mut s = l;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let [a, b, c] = s;
    if !(c > 0.0) || !(a < b + c) {
        return None;
    }
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if p <= 0.0 {
        return None;
    }
    Some(0.25 * p.sqrt())
}

/// Cotangents of the three corner angles; `l[i]` is the side opposite corner `i`.
pub fn corner_cotangents(l: [f64; 3], area: f64) -> [f64; 3] {
    let sq = [l[0] * l[0], l[1] * l[1], l[2] * l[2]];
    [
        (sq[1] + sq[2] - sq[0]) / (4.0 * area),
        (sq[2] + sq[0] - sq[1]) / (4.0 * area),
        (sq[0] + sq[1] - sq[2]) / (4.0 * area),
    ]
}

pub fn corner_angles(l: [f64; 3], area: f64) -> [f64; 3] {
    let c = corner_cotangents(l, area);
    let mut out = [0.0; 3];
    for i in 0..3 {
        // sin = 2A / (product of adjacent sides)
        let adj = l[(i + 1) % 3] * l[(i + 2) % 3];
        out[i] = (2.0 * area / adj).atan2(c[i] * 2.0 * area / adj);
    }
    out
}

/// Places a triangle in the plane: corner 0 at the origin, corner 1 on the
/// positive x axis, corner 2 in the upper half plane.
pub fn triangle_layout(l: [f64; 3]) -> [[f64; 2]; 3] {
    // side opposite 2 joins corners 0 and 1
    let c01 = l[2];
    let c02 = l[1];
    let c12 = l[0];
    let x = (c02 * c02 + c01 * c01 - c12 * c12) / (2.0 * c01);
    let y = (c02 * c02 - x * x).max(0.0).sqrt();
    [[0.0, 0.0], [c01, 0.0], [x, y]]
}

impl DiscreteMetric {
    pub fn new(mesh: &SurfaceMesh, edge_lengths: Vec<f64>) -> Result<Self> {
        if edge_lengths.len() != mesh.num_edges() {
            return Err(Error::InvalidArgument(format!(
                "{} edge lengths for {} edges",
                edge_lengths.len(),
                mesh.num_edges()
            )));
        }
        if let Some(e) = edge_lengths.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidArgument(format!("edge {e} has non-positive length")));
        }
        let m = DiscreteMetric {
            edge_lengths,
            log_conformal_factor: vec![0.0; mesh.num_vertices()],
            cone_points: Vec::new(),
        };
        m.validate(mesh)?;
        Ok(m)
    }

    /// Induces lengths from vertex positions in some ambient space.
    pub fn from_positions<const D: usize>(mesh: &SurfaceMesh, positions: &[[f64; D]]) -> Result<Self> {
        let lengths = mesh
            .edges()
            .iter()
            .map(|&[a, b]| {
                let mut s = 0.0;
                for k in 0..D {
                    let d = positions[a][k] - positions[b][k];
                    s += d * d;
                }
                s.sqrt()
            })
            .collect();
        Self::new(mesh, lengths)
    }

    pub(crate) fn from_parts(
        edge_lengths: Vec<f64>,
        log_conformal_factor: Vec<f64>,
        cone_points: Vec<ConePoint>,
    ) -> Self {
        DiscreteMetric {
            edge_lengths,
            log_conformal_factor,
            cone_points,
        }
    }

    /// Checks the strict triangle inequality for every (scaled) triangle.
    pub fn validate(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.edge_lengths.len() != mesh.num_edges()
            || self.log_conformal_factor.len() != mesh.num_vertices()
        {
            return Err(Error::InvalidArgument("metric does not match mesh".into()));
        }
        for t in 0..mesh.num_triangles() {
            let l = self.triangle_lengths(mesh, t);
            if triangle_area(l).is_none() {
                return Err(Error::TriangleInequality { triangle: t, lengths: l });
            }
        }
        Ok(())
    }

    /// Unscaled reference lengths.
    pub fn base_edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn log_conformal_factor(&self) -> &[f64] {
        &self.log_conformal_factor
    }

    pub fn cone_points(&self) -> &[ConePoint] {
        &self.cone_points
    }

    pub fn edge_length(&self, mesh: &SurfaceMesh, e: usize) -> f64 {
        let [a, b] = mesh.edges()[e];
        let u = &self.log_conformal_factor;
        self.edge_lengths[e] * (0.5 * (u[a] + u[b])).exp()
    }

    /// Scaled lengths of all edges.
    pub fn edge_lengths(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        (0..mesh.num_edges()).map(|e| self.edge_length(mesh, e)).collect()
    }

    /// Lengths of the sides opposite corners 0, 1, 2 of triangle `t`.
    pub fn triangle_lengths(&self, mesh: &SurfaceMesh, t: usize) -> [f64; 3] {
        let te = mesh.triangle_edges()[t];
        [
            self.edge_length(mesh, te[0]),
            self.edge_length(mesh, te[1]),
            self.edge_length(mesh, te[2]),
        ]
    }

    pub fn triangle_area(&self, mesh: &SurfaceMesh, t: usize) -> f64 {
        triangle_area(self.triangle_lengths(mesh, t)).unwrap_or(0.0)
    }

    pub fn area(&self, mesh: &SurfaceMesh) -> f64 {
        // compensated sum so that glued areas add up to the last bit
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for t in 0..mesh.num_triangles() {
            let y = self.triangle_area(mesh, t) - c;
            let s = sum + y;
            c = (s - sum) - y;
            sum = s;
        }
        sum
    }

    /// Total corner angle at every vertex.
    pub fn angle_sums(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        let mut sums = vec![0.0; mesh.num_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let l = self.triangle_lengths(mesh, t);
            let a = triangle_area(l).unwrap_or(0.0);
            if a <= 0.0 {
                continue;
            }
            let ang = corner_angles(l, a);
            for i in 0..3 {
                sums[tri[i]] += ang[i];
            }
        }
        sums
    }

    /// Interior vertices whose total angle deviates from `2π` by more than `tol`.
    pub fn detect_cone_points(&self, mesh: &SurfaceMesh, tol: f64) -> Vec<ConePoint> {
        let mut on_boundary = vec![false; mesh.num_vertices()];
        for l in mesh.boundary_loops() {
            for &v in &l.vertices {
                on_boundary[v] = true;
            }
        }
        self.angle_sums(mesh)
            .into_iter()
            .enumerate()
            .filter(|&(v, a)| !on_boundary[v] && (a - 2.0 * std::f64::consts::PI).abs() > tol)
            .map(|(vertex, angle)| ConePoint { vertex, angle })
            .collect()
    }

    pub fn with_cone_points(mut self, cones: Vec<ConePoint>) -> Self {
        self.cone_points = cones;
        self
    }

    /// Multiplies every edge length by `c`; areas scale by `c^2`.
    pub fn scaled(&self, c: f64) -> DiscreteMetric {
        assert!(c > 0.0, "scale factor must be positive");
        DiscreteMetric {
            edge_lengths: self.edge_lengths.iter().map(|l| l * c).collect(),
            log_conformal_factor: self.log_conformal_factor.clone(),
            cone_points: self.cone_points.clone(),
        }
    }

    /// Replaces the log conformal factor; the result is checked against the
    /// triangle inequality.
    pub fn with_conformal_factor(&self, mesh: &SurfaceMesh, u: Vec<f64>) -> Result<DiscreteMetric> {
        if u.len() != mesh.num_vertices() {
            return Err(Error::InvalidArgument("conformal factor length mismatch".into()));
        }
        let m = DiscreteMetric {
            edge_lengths: self.edge_lengths.clone(),
            log_conformal_factor: u,
            cone_points: self.cone_points.clone(),
        };
        m.validate(mesh)?;
        Ok(m)
    }

    /// Bakes the conformal factor into the reference lengths.
    pub fn flattened(&self, mesh: &SurfaceMesh) -> DiscreteMetric {
        DiscreteMetric {
            edge_lengths: self.edge_lengths(mesh),
            log_conformal_factor: vec![0.0; mesh.num_vertices()],
            cone_points: self.cone_points.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn heron_matches_equilateral_area() {
        let a = triangle_area([1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(a, 3f64.sqrt() / 4.0, epsilon = 1e-15);
        assert!(triangle_area([1.0, 1.0, 2.0]).is_none());
        assert!(triangle_area([1.0, 1.0, 2.5]).is_none());
    }

    #[test]
    fn equilateral_cotangent_weight() {
        let a = triangle_area([1.0; 3]).unwrap();
        let c = corner_cotangents([1.0; 3], a);
        for ci in c {
            // half-cotangent edge weight is 1/(2 sqrt 3)
            assert_relative_eq!(0.5 * ci, 1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-14);
        }
    }

    #[test]
    fn right_triangle_angles_and_layout() {
        let l = [5.0, 4.0, 3.0]; // right angle at corner 0
        let a = triangle_area(l).unwrap();
        let ang = corner_angles(l, a);
        assert_relative_eq!(ang[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-14);
        assert_relative_eq!(ang.iter().sum::<f64>(), std::f64::consts::PI, epsilon = 1e-14);
        let p = triangle_layout(l);
        let d = |i: usize, j: usize| ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt();
        assert_relative_eq!(d(1, 2), 5.0, epsilon = 1e-14);
        assert_relative_eq!(d(0, 2), 4.0, epsilon = 1e-14);
        assert_relative_eq!(d(0, 1), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn conformal_factor_scales_lengths() {
        let mesh = SurfaceMesh::new(3, vec![[0, 1, 2]]).unwrap();
        let m = DiscreteMetric::new(&mesh, vec![1.0, 1.0, 1.0]).unwrap();
        let c = 2f64.ln();
        let s = m.with_conformal_factor(&mesh, vec![c, c, c]).unwrap();
        assert_relative_eq!(s.area(&mesh), 4.0 * m.area(&mesh), epsilon = 1e-14);
    }

    #[test]
    fn rejects_violated_triangle_inequality() {
        let mesh = SurfaceMesh::new(3, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            DiscreteMetric::new(&mesh, vec![1.0, 1.0, 3.0]),
            Err(Error::TriangleInequality { .. })
        ));
    }
}
