//! Cotangent finite elements, sparse generalized eigensolvers and the
//! functionals built on them.

mod assemble;
mod eigs;
pub mod sparse;
mod spectrum;

use std::collections::{HashMap, HashSet};

pub use assemble::{assemble, assemble_with, BoundaryCondition, MassKind, OperatorPair};
pub use eigs::{dense_eigenpairs, lobpcg, smallest_eigenpairs, EigenOptions, EigenPairs, SolverMethod};
pub use sparse::{CsrMatrix, Ldl};
pub use spectrum::{
    cluster_values, multiplicity, rayleigh, read_sidecar, solve_spectrum, Spectrum, DEFAULT_CLUSTER_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, triangle_layout, BoundaryLoop, DiscreteMetric, SurfaceMesh};

/// Parity of functions under an involution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Spectrum of the cover restricted to `ι`-even (or odd) functions, solved on
/// the symmetry-reduced system with basis `e_a ± e_ιa`. Eigenvectors are
/// returned as cover fields.
pub fn parity_spectrum(
    cover: &OperatorPair,
    involution: &[usize],
    parity: Parity,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    let n = cover.num_vertices;
    if involution.len() != n {
        return Err(Error::InvalidArgument("involution length does not match the mesh".into()));
    }
    let mut dof_of = vec![usize::MAX; n];
    for (d, &v) in cover.dofs.iter().enumerate() {
        dof_of[v] = d;
    }
    // involution on dofs
    let mut inv = vec![0usize; cover.dim()];
    for (d, &v) in cover.dofs.iter().enumerate() {
        let w = involution[v];
        if w >= n || involution[w] != v || dof_of[w] == usize::MAX {
            return Err(Error::NotAnIsometry(format!("vertex {v} is not paired consistently")));
        }
        inv[d] = dof_of[w];
    }
    let scale_k = cover.stiffness.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let scale_m = cover.mass.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for d in 0..cover.dim() {
        for (e, v) in cover.stiffness.row(d) {
            let w = cover.stiffness.get(inv[d], inv[e]);
            if (v - w).abs() > 1e-9 * scale_k {
                return Err(Error::NotAnIsometry(format!("stiffness entry ({d}, {e}): {v} vs {w}")));
            }
        }
        for (e, v) in cover.mass.row(d) {
            let w = cover.mass.get(inv[d], inv[e]);
            if (v - w).abs() > 1e-9 * scale_m {
                return Err(Error::NotAnIsometry(format!("mass entry ({d}, {e}): {v} vs {w}")));
            }
        }
    }
    // orbit index and sign per dof
    let mut orbit = vec![usize::MAX; cover.dim()];
    let mut sign = vec![1.0; cover.dim()];
    let mut count = 0;
    let mut fixed = Vec::new();
    for d in 0..cover.dim() {
        if orbit[d] != usize::MAX {
            continue;
        }
        orbit[d] = count;
        if inv[d] == d {
            fixed.push(count);
        } else {
            orbit[inv[d]] = count;
            sign[inv[d]] = if parity == Parity::Even { 1.0 } else { -1.0 };
        }
        count += 1;
    }
    // odd functions vanish at fixed points
    let keep: Vec<usize> = if parity == Parity::Odd {
        let f: HashSet<usize> = fixed.into_iter().collect();
        (0..count).filter(|o| !f.contains(o)).collect()
    } else {
        (0..count).collect()
    };
    let mut reduced = vec![usize::MAX; count];
    for (r, &o) in keep.iter().enumerate() {
        reduced[o] = r;
    }
    let reduce = |a: &CsrMatrix| {
        let mut t = Vec::new();
        for d in 0..cover.dim() {
            let rd = reduced[orbit[d]];
            if rd == usize::MAX {
                continue;
            }
            for (e, v) in a.row(d) {
                let re = reduced[orbit[e]];
                if re != usize::MAX {
                    t.push((rd, re, sign[d] * sign[e] * v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), &t)
    };
    let kr = reduce(&cover.stiffness);
    let mr = reduce(&cover.mass);
    let mut o = opts.clone();
    o.count = k;
    let pairs = smallest_eigenpairs(&kr, &mr, &o)?;
    let vectors = pairs
        .vectors
        .iter()
        .map(|x| {
            let mut full = vec![0.0; cover.dim()];
            for d in 0..cover.dim() {
                let r = reduced[orbit[d]];
                if r != usize::MAX {
                    // the reduced mass is twice the quotient mass
                    full[d] = sign[d] * x[r] / 2f64.sqrt();
                }
            }
            cover.expand(&full)
        })
        .collect();
    Ok(Spectrum {
        eigenvalues: pairs.values,
        eigenvectors: vectors,
        bc: cover.bc.clone(),
        cluster_tolerance: DEFAULT_CLUSTER_TOLERANCE,
        residuals: pairs.residuals,
        shift: pairs.shift,
        method: pairs.method,
    })
}

/// Spectrum of the even functions of a double cover, which is the spectrum
/// of the base surface.
pub fn even_spectrum(cover: &OperatorPair, involution: &[usize], k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    parity_spectrum(cover, involution, Parity::Even, k, opts)
}

pub fn odd_spectrum(cover: &OperatorPair, involution: &[usize], k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    parity_spectrum(cover, involution, Parity::Odd, k, opts)
}

/// Harmonic extension of boundary data into a region.
#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    /// Vertex field over the whole mesh (zero outside the region).
    pub values: Vec<f64>,
    /// Dirichlet energy over the region's triangles.
    pub energy: f64,
    /// Largest `|K x|` over interior vertices.
    pub residual: f64,
}

/// Solves the discrete Dirichlet problem on the region made of `interior`
/// vertices and the boundary vertices given in `boundary_values`. Only
/// triangles whose corners all lie in the region contribute.
pub fn harmonic_extension(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    interior: &[usize],
    boundary_values: &[(usize, f64)],
) -> Result<HarmonicExtension> {
    let n = mesh.num_vertices();
    let mut role = vec![0u8; n];
    let mut values = vec![0.0; n];
    for &(v, x) in boundary_values {
        role[v] = 2;
        values[v] = x;
    }
    for &v in interior {
        if role[v] == 2 {
            return Err(Error::InvalidArgument(format!("vertex {v} is both interior and boundary")));
        }
        role[v] = 1;
    }
    let tris: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| mesh.triangles()[t].iter().all(|&v| role[v] != 0))
        .collect();
    let els = assemble::elements(mesh, metric, &tris)?;
    let local: HashMap<usize, usize> = interior.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    if !interior.is_empty() {
        let mut t = Vec::new();
        let mut rhs = vec![0.0; interior.len()];
        for e in &els {
            for a in 0..3 {
                let va = e.vertices[a];
                let Some(&ia) = local.get(&va) else { continue };
                for b in 0..3 {
                    let vb = e.vertices[b];
                    match local.get(&vb) {
                        Some(&ib) => t.push((ia, ib, e.stiffness[a][b])),
                        None => rhs[ia] -= e.stiffness[a][b] * values[vb],
                    }
                }
            }
        }
        let k = CsrMatrix::from_triplets(interior.len(), &t);
        let f = Ldl::factor(&k).map_err(|reason| Error::Factorization { shift: 0.0, reason })?;
        let x = f.solve(&rhs);
        for (&v, &y) in interior.iter().zip(&x) {
            values[v] = y;
        }
        let kx = k.apply(&x);
        let residual = kx.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let energy = region_energy(&els, &values);
        return Ok(HarmonicExtension { values, energy, residual });
    }
    let energy = region_energy(&els, &values);
    Ok(HarmonicExtension {
        values,
        energy,
        residual: 0.0,
    })
}

fn region_energy(els: &[assemble::Element], u: &[f64]) -> f64 {
    els.iter()
        .map(|e| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += u[e.vertices[a]] * e.stiffness[a][b] * u[e.vertices[b]];
                }
            }
            s
        })
        .sum()
}

/// Dirichlet energy `∫|∇u|^2` of a piecewise-linear field over some triangles.
pub fn dirichlet_energy(mesh: &SurfaceMesh, metric: &DiscreteMetric, u: &[f64], triangles: &[usize]) -> Result<f64> {
    let els = assemble::elements(mesh, metric, triangles)?;
    Ok(region_energy(&els, u))
}

/// `∫ |∂_T u|^2` along a closed vertex loop for the piecewise-linear trace:
/// the sum of squared differences divided by segment lengths.
pub fn boundary_tangential_energy(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    u: &[f64],
    lp: &BoundaryLoop,
) -> Result<f64> {
    if lp.len() < 3 {
        return Err(Error::InvalidArgument("loop has fewer than three vertices".into()));
    }
    let mut total = 0.0;
    for (a, b) in lp.segments() {
        let e = mesh
            .edge_index(a, b)
            .ok_or_else(|| Error::InvalidArgument(format!("({a}, {b}) is not an edge")))?;
        let l = metric.edge_length(mesh, e);
        if !(l > 0.0) {
            return Err(Error::InvalidArgument("degenerate loop segment".into()));
        }
        total += (u[b] - u[a]).powi(2) / l;
    }
    Ok(total)
}

/// Gradient norm of a piecewise-linear field on each triangle.
pub fn triangle_gradient_norms(mesh: &SurfaceMesh, metric: &DiscreteMetric, u: &[f64]) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|t| {
            let l = metric.triangle_lengths(mesh, t);
            let p = triangle_layout(l);
            let area = triangle_area(l).unwrap_or(f64::MIN_POSITIVE);
            let tri = mesh.triangles()[t];
            let mut g = [0.0; 2];
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                // gradient of the hat function of corner i: rotated opposite edge / 2A
                let e = [p[k][0] - p[j][0], p[k][1] - p[j][1]];
                let rot = [-e[1], e[0]];
                g[0] += u[tri[i]] * rot[0] / (2.0 * area);
                g[1] += u[tri[i]] * rot[1] / (2.0 * area);
            }
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_linear_field() {
        let mesh = SurfaceMesh::new(3, vec![[0, 1, 2]]).unwrap();
        let pos = [[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]];
        let g = DiscreteMetric::from_positions(&mesh, &pos).unwrap();
        let u: Vec<f64> = pos.iter().map(|p| 3.0 * p[0] - 4.0 * p[1]).collect();
        let n = triangle_gradient_norms(&mesh, &g, &u);
        assert!((n[0] - 5.0).abs() < 1e-12);
    }
}
