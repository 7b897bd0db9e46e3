use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geometry::{corner_cotangents, triangle_area, DiscreteMetric, SurfaceMesh};

/// Boundary treatment. Loops are indices into `SurfaceMesh::boundary_loops`.
/// Loops not listed as Dirichlet get the natural (Neumann) condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Closed,
    Dirichlet(Vec<usize>),
    Neumann(Vec<usize>),
}

impl BoundaryCondition {
    pub fn tag(&self) -> &'static str {
        match self {
            BoundaryCondition::Closed => "closed",
            BoundaryCondition::Dirichlet(_) => "dirichlet",
            BoundaryCondition::Neumann(_) => "neumann",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassKind {
    #[default]
    Lumped,
    Consistent,
}

/// Stiffness and mass on the free degrees of freedom.
#[derive(Clone, Debug)]
pub struct OperatorPair {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub bc: BoundaryCondition,
    /// Vertex of each degree of freedom.
    pub dofs: Vec<usize>,
    pub num_vertices: usize,
    /// Total area of the surface (including constrained vertices).
    pub area: f64,
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    /// Restricts a vertex field to the degrees of freedom.
    pub fn restrict(&self, field: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&v| field[v]).collect()
    }

    /// Expands a dof vector to a vertex field, zero on constrained vertices.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices];
        for (&v, &y) in self.dofs.iter().zip(x) {
            out[v] = y;
        }
        out
    }
}

/// Per-triangle cotangent stiffness and mass blocks.
pub(crate) struct Element {
    pub vertices: [usize; 3],
    pub stiffness: [[f64; 3]; 3],
    pub area: f64,
}

pub(crate) fn elements(mesh: &SurfaceMesh, metric: &DiscreteMetric, triangles: &[usize]) -> Result<Vec<Element>> {
    triangles
        .par_iter()
        .map(|&t| {
            let l = metric.triangle_lengths(mesh, t);
            let area = triangle_area(l).ok_or(Error::TriangleInequality { triangle: t, lengths: l })?;
            let cot = corner_cotangents(l, area);
            let mut s = [[0.0; 3]; 3];
            for i in 0..3 {
                // the edge opposite corner i joins corners j and k
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let w = 0.5 * cot[i];
                s[j][k] -= w;
                s[k][j] -= w;
                s[j][j] += w;
                s[k][k] += w;
            }
            Ok(Element {
                vertices: mesh.triangles()[t],
                stiffness: s,
                area,
            })
        })
        .collect()
}

/// Full (unconstrained) stiffness and mass over all vertices.
pub(crate) fn assemble_full(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    mass: MassKind,
) -> Result<(CsrMatrix, CsrMatrix, f64)> {
    metric.validate(mesh)?;
    let all: Vec<usize> = (0..mesh.num_triangles()).collect();
    let els = elements(mesh, metric, &all)?;
    let n = mesh.num_vertices();
    let mut kt = Vec::with_capacity(9 * els.len());
    let mut mt = Vec::with_capacity(9 * els.len());
    let mut area = 0.0;
    let mut comp = 0.0;
    for e in &els {
        // compensated area sum
        let y = e.area - comp;
        let t = area + y;
        comp = (t - area) - y;
        area = t;
        for a in 0..3 {
            for b in 0..3 {
                kt.push((e.vertices[a], e.vertices[b], e.stiffness[a][b]));
            }
            match mass {
                MassKind::Lumped => mt.push((e.vertices[a], e.vertices[a], e.area / 3.0)),
                MassKind::Consistent => {
                    for b in 0..3 {
                        let w = if a == b { e.area / 6.0 } else { e.area / 12.0 };
                        mt.push((e.vertices[a], e.vertices[b], w));
                    }
                }
            }
        }
    }
    Ok((CsrMatrix::from_triplets(n, &kt), CsrMatrix::from_triplets(n, &mt), area))
}

/// Cotangent stiffness and (lumped or consistent) mass with the requested
/// boundary condition. Dirichlet vertices are eliminated.
pub fn assemble_with(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    bc: &BoundaryCondition,
    mass: MassKind,
) -> Result<OperatorPair> {
    let (k, m, area) = assemble_full(mesh, metric, mass)?;
    let n = mesh.num_vertices();
    let mut fixed = vec![false; n];
    match bc {
        BoundaryCondition::Closed => {}
        BoundaryCondition::Dirichlet(loops) | BoundaryCondition::Neumann(loops) => {
            for &l in loops {
                let lp = mesh
                    .boundary_loops()
                    .get(l)
                    .ok_or_else(|| Error::InvalidArgument(format!("mesh has no boundary loop {l}")))?;
                if matches!(bc, BoundaryCondition::Dirichlet(_)) {
                    for &v in &lp.vertices {
                        fixed[v] = true;
                    }
                }
            }
        }
    }
    let dofs: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    if dofs.is_empty() {
        return Err(Error::InvalidArgument("no free vertices left".into()));
    }
    let (stiffness, mass) = if dofs.len() == n {
        (k, m)
    } else {
        (k.submatrix(&dofs), m.submatrix(&dofs))
    };
    Ok(OperatorPair {
        stiffness,
        mass,
        bc: bc.clone(),
        dofs,
        num_vertices: n,
        area,
    })
}

/// Lumped-mass assembly.
pub fn assemble(mesh: &SurfaceMesh, metric: &DiscreteMetric, bc: &BoundaryCondition) -> Result<OperatorPair> {
    assemble_with(mesh, metric, bc, MassKind::Lumped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_standard, StandardSurface};

    #[test]
    fn equilateral_weights() {
        let mesh = SurfaceMesh::new(3, vec![[0, 1, 2]]).unwrap();
        let g = DiscreteMetric::new(&mesh, vec![1.0; 3]).unwrap();
        let ops = assemble(&mesh, &g, &BoundaryCondition::Closed).unwrap();
        let w = -ops.stiffness.get(0, 1);
        assert!((w - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn closed_torus_kernel_and_mass() {
        let (m, g) = build_standard(&StandardSurface::square_torus(1.0), 10).unwrap();
        let ops = assemble(&m, &g, &BoundaryCondition::Closed).unwrap();
        assert!((ops.mass.total() - 1.0).abs() < 1e-12);
        let r = ops.stiffness.apply(&vec![1.0; ops.dim()]);
        assert!(r.iter().all(|x| x.abs() < 1e-12));
        assert!(ops.stiffness.asymmetry() < 1e-15);
        let c = assemble_with(&m, &g, &BoundaryCondition::Closed, MassKind::Consistent).unwrap();
        assert!((c.mass.total() - 1.0).abs() < 1e-12);
    }
}
