use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared topological type of a closed surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Orientable surface of genus `g`, Euler characteristic `2 - 2g`.
    Orientable { genus: usize },
    /// Non-orientable surface with `d` cross caps, Euler characteristic `2 - d`.
    NonOrientable { genus: usize },
}

impl Topology {
    pub fn euler_characteristic(&self) -> i64 {
        match *self {
            Topology::Orientable { genus } => 2 - 2 * genus as i64,
            Topology::NonOrientable { genus } => 2 - genus as i64,
        }
    }

    pub fn is_orientable(&self) -> bool {
        matches!(self, Topology::Orientable { .. })
    }

    /// Topology after attaching a thin handle.
    pub fn with_handle(&self) -> Topology {
        match *self {
            Topology::Orientable { genus } => Topology::Orientable { genus: genus + 1 },
            Topology::NonOrientable { genus } => Topology::NonOrientable { genus: genus + 2 },
        }
    }

    /// Topology after attaching a cross cap (connected sum with RP^2).
    pub fn with_cross_cap(&self) -> Topology {
        match *self {
            Topology::Orientable { genus } => Topology::NonOrientable { genus: 2 * genus + 1 },
            Topology::NonOrientable { genus } => Topology::NonOrientable { genus: genus + 1 },
        }
    }
}

/// A closed vertex cycle on the boundary, listed in the direction induced by
/// its adjacent triangles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub vertices: Vec<usize>,
}

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Consecutive vertex pairs, closing the cycle.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentificationKind {
    /// Periodic translation of a flat fundamental domain.
    Translation,
    /// Glide reflection of the flat Klein bottle.
    GlideReflection,
    /// Antipodal quotient of the sphere.
    Antipodal,
    /// Half-turn identification closing a cross cap.
    HalfTurn,
    /// Two boundary loops stitched together.
    Glue,
}

/// Record of a quotient gluing; `seam` lists the vertices lying on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub kind: IdentificationKind,
    pub seam: Vec<usize>,
}

/// One circle of a polar patch: `vertices[i]` sits at chart polar
/// coordinates `(radius, angles[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchRing {
    pub radius: f64,
    pub vertices: Vec<usize>,
    pub angles: Vec<f64>,
}

/// Geometrically graded rings around a point of a conformally flat chart in
/// which the metric is `f * g_euclid` with `f(center) = 1`.
///
/// Rings are stored from the outermost inward. After a disk is removed the
/// center is gone and the innermost ring is the new boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarPatch {
    pub center: Option<usize>,
    /// The vertex that was the center before removal; stays fixed so callers
    /// can keep addressing the patch by it.
    pub center_label: usize,
    pub rings: Vec<PatchRing>,
    /// Radius of the largest round ring; disks and mollifiers must stay inside.
    pub core_radius: f64,
    /// Radius of the removed disk, if any.
    pub removed_radius: Option<f64>,
}

impl PolarPatch {
    pub fn ring_at(&self, radius: f64) -> Option<&PatchRing> {
        self.rings
            .iter()
            .find(|r| (r.radius - radius).abs() <= 1e-9 * radius.max(1e-300))
    }
}

/// Triangle mesh with optional boundary loops, quotient records and polar
/// patches. Edges are identified by their (unordered) endpoint pair, so the
/// mesh must be a simplicial surface.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    num_vertices: usize,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_lookup: HashMap<(usize, usize), usize>,
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<Vec<usize>>,
    boundary_loops: Vec<BoundaryLoop>,
    pub(crate) identifications: Vec<Identification>,
    pub(crate) patches: Vec<PolarPatch>,
    pub(crate) topology: Option<Topology>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SurfaceMesh {
    /// Builds and validates a mesh. Every vertex must be used, every edge
    /// must have one or two incident triangles, and every vertex star must
    /// be a single fan.
    pub fn new(num_vertices: usize, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let mut seen_faces = HashSet::with_capacity(triangles.len());
        let mut used = vec![false; num_vertices];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= num_vertices {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} >= {num_vertices}"
                    )));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate: {tri:?}")));
            }
            let mut s = *tri;
            s.sort_unstable();
            if !seen_faces.insert(s) {
                return Err(Error::InvalidMesh(format!("triangle {t} is duplicated: {tri:?}")));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }

        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let k = key(a, b);
                let e = *edge_lookup.entry(k).or_insert_with(|| {
                    edges.push([k.0, k.1]);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[e].push(t);
                te[i] = e;
            }
            triangle_edges.push(te);
        }
        for (e, ts) in edge_triangles.iter().enumerate() {
            if ts.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge {:?} is shared by {} triangles",
                    edges[e],
                    ts.len()
                )));
            }
        }

        let mut mesh = SurfaceMesh {
            num_vertices,
            triangles,
            edges,
            edge_lookup,
            triangle_edges,
            edge_triangles,
            boundary_loops: Vec::new(),
            identifications: Vec::new(),
            patches: Vec::new(),
            topology: None,
        };
        mesh.check_vertex_stars()?;
        mesh.boundary_loops = mesh.trace_boundary_loops()?;
        Ok(mesh)
    }

    fn check_vertex_stars(&self) -> Result<()> {
        let stars = self.vertex_triangles();
        for (v, star) in stars.iter().enumerate() {
            // Union the triangles of the star across edges that contain v.
            let mut parent: Vec<usize> = (0..star.len()).collect();
            fn find(p: &mut [usize], mut i: usize) -> usize {
                while p[i] != i {
                    p[i] = p[p[i]];
                    i = p[i];
                }
                i
            }
            let local: HashMap<usize, usize> = star.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            for (i, &t) in star.iter().enumerate() {
                for &e in &self.triangle_edges[t] {
                    let [a, b] = self.edges[e];
                    if a != v && b != v {
                        continue;
                    }
                    for &u in &self.edge_triangles[e] {
                        if let Some(&j) = local.get(&u) {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            parent[ri] = rj;
                        }
                    }
                }
            }
            let roots: HashSet<usize> = (0..star.len()).map(|i| find(&mut parent, i)).collect();
            if roots.len() != 1 {
                return Err(Error::InvalidMesh(format!(
                    "vertex {v} is non-manifold ({} fans)",
                    roots.len()
                )));
            }
        }
        Ok(())
    }

    fn trace_boundary_loops(&self) -> Result<Vec<BoundaryLoop>> {
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut boundary_edges = 0usize;
        for (e, ts) in self.edge_triangles.iter().enumerate() {
            if ts.len() != 1 {
                continue;
            }
            boundary_edges += 1;
            let t = ts[0];
            let i = (0..3).find(|&i| self.triangle_edges[t][i] == e).unwrap();
            let tri = self.triangles[t];
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            next.entry(a).or_default().push(b);
        }
        if boundary_edges == 0 {
            return Ok(Vec::new());
        }
        let directed_ok = next.values().all(|v| v.len() == 1);
        let mut loops = Vec::new();
        if directed_ok {
            let mut starts: Vec<usize> = next.keys().copied().collect();
            starts.sort_unstable();
            let mut visited = HashSet::new();
            for s in starts {
                if visited.contains(&s) {
                    continue;
                }
                let mut cycle = vec![s];
                visited.insert(s);
                let mut cur = next[&s][0];
                while cur != s {
                    if !visited.insert(cur) {
                        return Err(Error::InvalidMesh("boundary is not a union of simple cycles".into()));
                    }
                    cycle.push(cur);
                    cur = next
                        .get(&cur)
                        .ok_or_else(|| Error::InvalidMesh("open boundary chain".into()))?[0];
                }
                loops.push(BoundaryLoop { vertices: cycle });
            }
        } else {
            // Incoherently oriented triangles along the boundary: chain the
            // boundary edges without direction.
            let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
            for (e, ts) in self.edge_triangles.iter().enumerate() {
                if ts.len() == 1 {
                    let [a, b] = self.edges[e];
                    adj.entry(a).or_default().push(b);
                    adj.entry(b).or_default().push(a);
                }
            }
            if adj.values().any(|n| n.len() != 2) {
                return Err(Error::InvalidMesh("boundary vertex with more than two boundary edges".into()));
            }
            let mut starts: Vec<usize> = adj.keys().copied().collect();
            starts.sort_unstable();
            let mut visited = HashSet::new();
            for s in starts {
                if visited.contains(&s) {
                    continue;
                }
                let mut cycle = vec![s];
                visited.insert(s);
                let mut prev = s;
                let mut cur = adj[&s][0];
                while cur != s {
                    visited.insert(cur);
                    cycle.push(cur);
                    let n = &adj[&cur];
                    let nxt = if n[0] != prev { n[0] } else { n[1] };
                    prev = cur;
                    cur = nxt;
                }
                loops.push(BoundaryLoop { vertices: cycle });
            }
        }
        Ok(loops)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge opposite corner `i` of triangle `t` is `triangle_edges()[t][i]`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn edge_triangles(&self, e: usize) -> &[usize] {
        &self.edge_triangles[e]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    pub fn boundary_loops(&self) -> &[BoundaryLoop] {
        &self.boundary_loops
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_loops.is_empty()
    }

    pub fn identifications(&self) -> &[Identification] {
        &self.identifications
    }

    pub fn patches(&self) -> &[PolarPatch] {
        &self.patches
    }

    /// The patch whose (current or former) center is `vertex`.
    pub fn patch_at(&self, vertex: usize) -> Option<&PolarPatch> {
        self.patches.iter().find(|p| p.center_label == vertex)
    }

    pub fn declared_topology(&self) -> Option<Topology> {
        self.topology
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = Some(topology);
        self
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Index of the boundary loop whose vertex set equals `vertices` as a cycle.
    pub fn find_loop(&self, vertices: &[usize]) -> Option<usize> {
        let set: HashSet<usize> = vertices.iter().copied().collect();
        self.boundary_loops
            .iter()
            .position(|l| l.len() == vertices.len() && l.vertices.iter().all(|v| set.contains(v)))
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vertices];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Consistent orientation signs per triangle (+1 keeps the stored order),
    /// or `None` when the surface is non-orientable.
    pub fn orientation(&self) -> Option<Vec<i8>> {
        let n = self.triangles.len();
        let mut sign = vec![0i8; n];
        let mut queue = std::collections::VecDeque::new();
        for seed in 0..n {
            if sign[seed] != 0 {
                continue;
            }
            sign[seed] = 1;
            queue.push_back(seed);
            while let Some(t) = queue.pop_front() {
                for i in 0..3 {
                    let e = self.triangle_edges[t][i];
                    let (a, _b) = (self.triangles[t][(i + 1) % 3], self.triangles[t][(i + 2) % 3]);
                    for &u in &self.edge_triangles[e] {
                        if u == t {
                            continue;
                        }
                        let j = (0..3).find(|&j| self.triangle_edges[u][j] == e).unwrap();
                        let c = self.triangles[u][(j + 1) % 3];
                        // Same direction in both stored triangles means the
                        // stored orders disagree.
                        let agree: i8 = if c == a { -1 } else { 1 };
                        let want = sign[t] * agree;
                        if sign[u] == 0 {
                            sign[u] = want;
                            queue.push_back(u);
                        } else if sign[u] != want {
                            return None;
                        }
                    }
                }
            }
        }
        Some(sign)
    }

    pub fn is_orientable(&self) -> bool {
        self.orientation().is_some()
    }

    /// Returns a copy whose triangles are re-ordered to a coherent orientation
    /// when one exists.
    pub fn oriented(&self) -> Option<SurfaceMesh> {
        let sign = self.orientation()?;
        let tris: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .zip(&sign)
            .map(|(t, &s)| if s > 0 { *t } else { [t[0], t[2], t[1]] })
            .collect();
        let mut out = SurfaceMesh::new(self.num_vertices, tris).ok()?;
        out.identifications = self.identifications.clone();
        out.patches = self.patches.clone();
        out.topology = self.topology;
        Some(out)
    }

    /// Vertices adjacent to `v` through an edge.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vertices];
        for &[a, b] in &self.edges {
            out[a].push(b);
            out[b].push(a);
        }
        out
    }

    pub(crate) fn set_metadata(
        &mut self,
        identifications: Vec<Identification>,
        patches: Vec<PolarPatch>,
        topology: Option<Topology>,
    ) {
        self.identifications = identifications;
        self.patches = patches;
        self.topology = topology;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> SurfaceMesh {
        SurfaceMesh::new(4, vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]).unwrap()
    }

    #[test]
    fn tetrahedron_is_a_closed_orientable_sphere() {
        let m = tetrahedron();
        assert!(m.is_closed());
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_orientable());
    }

    #[test]
    fn single_triangle_has_one_boundary_loop() {
        let m = SurfaceMesh::new(3, vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.boundary_loops()[0].vertices, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_non_manifold_edges_and_unused_vertices() {
        let r = SurfaceMesh::new(5, vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]]);
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
        let r = SurfaceMesh::new(4, vec![[0, 1, 2]]);
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
        let r = SurfaceMesh::new(3, vec![[0, 1, 1]]);
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_bowtie_vertex() {
        // Two triangles touching only at vertex 0.
        let r = SurfaceMesh::new(5, vec![[0, 1, 2], [0, 3, 4]]);
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn topology_bookkeeping() {
        let t = Topology::Orientable { genus: 1 };
        assert_eq!(t.euler_characteristic(), 0);
        assert_eq!(t.with_handle().euler_characteristic(), -2);
        assert_eq!(t.with_cross_cap(), Topology::NonOrientable { genus: 3 });
        assert_eq!(t.with_cross_cap().euler_characteristic(), -1);
        let k = Topology::NonOrientable { genus: 2 };
        assert_eq!(k.euler_characteristic(), 0);
        assert_eq!(k.with_cross_cap().euler_characteristic(), -1);
    }
}
