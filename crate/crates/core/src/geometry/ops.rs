use std::collections::HashMap;
use std::f64::consts::PI;

use super::mesh::{BoundaryLoop, Identification, IdentificationKind, PolarPatch, SurfaceMesh, Topology};
use super::metric::{ConePoint, DiscreteMetric};
use crate::error::{Error, Result};

/// Result of cutting a disk out of a polar patch.
#[derive(Clone, Debug)]
pub struct RemovedDisk {
    pub mesh: SurfaceMesh,
    pub metric: DiscreteMetric,
    /// New boundary in induced orientation, starting at the ring vertex of
    /// chart angle 0.
    pub boundary: BoundaryLoop,
    /// Old vertex index to new index; `None` for deleted vertices.
    pub vertex_map: Vec<Option<usize>>,
}

/// Orientable double cover with its deck involution.
#[derive(Clone, Debug)]
pub struct DoubleCover {
    pub mesh: SurfaceMesh,
    pub metric: DiscreteMetric,
    pub involution: Vec<usize>,
    /// Base vertex of each cover vertex.
    pub projection: Vec<usize>,
}

/// Length of a vertex cycle under the (scaled) metric.
pub fn loop_length(mesh: &SurfaceMesh, metric: &DiscreteMetric, lp: &BoundaryLoop) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in lp.segments() {
        let e = mesh
            .edge_index(a, b)
            .ok_or_else(|| Error::InvalidArgument(format!("loop segment ({a}, {b}) is not an edge")))?;
        total += metric.edge_length(mesh, e);
    }
    Ok(total)
}

/// Keeps the triangles selected by `keep`, drops unused vertices and
/// renumbers the rest in their original order. Edge lengths, conformal
/// factors, cone points, patches and seams follow the renumbering.
fn restrict(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
    keep: impl Fn(usize) -> bool,
) -> Result<(SurfaceMesh, DiscreteMetric, Vec<Option<usize>>)> {
    let mut used = vec![false; mesh.num_vertices()];
    let kept: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| keep(t)).collect();
    for &t in &kept {
        for &v in &mesh.triangles()[t] {
            used[v] = true;
        }
    }
    let mut map = vec![None; mesh.num_vertices()];
    let mut old_of = Vec::new();
    for v in 0..mesh.num_vertices() {
        if used[v] {
            map[v] = Some(old_of.len());
            old_of.push(v);
        }
    }
    let next = old_of.len();
    let tris: Vec<[usize; 3]> = kept
        .iter()
        .map(|&t| {
            let tri = mesh.triangles()[t];
            [map[tri[0]].unwrap(), map[tri[1]].unwrap(), map[tri[2]].unwrap()]
        })
        .collect();
    let mut out = SurfaceMesh::new(next, tris)?;
    let lengths = out
        .edges()
        .iter()
        .map(|&[a, b]| metric.base_edge_lengths()[mesh.edge_index(old_of[a], old_of[b]).unwrap()])
        .collect();
    let u = old_of.iter().map(|&v| metric.log_conformal_factor()[v]).collect();
    let cones = metric
        .cone_points()
        .iter()
        .filter_map(|c| map[c.vertex].map(|vertex| ConePoint { vertex, angle: c.angle }))
        .collect();
    let new_metric = DiscreteMetric::from_parts(lengths, u, cones);
    let ids = mesh
        .identifications()
        .iter()
        .map(|id| Identification {
            kind: id.kind,
            seam: id.seam.iter().filter_map(|&v| map[v]).collect(),
        })
        .collect();
    let patches = mesh.patches().iter().map(|p| remap_patch(p, &map)).collect();
    out.set_metadata(ids, patches, mesh.declared_topology());
    Ok((out, new_metric, map))
}

fn remap_patch(p: &PolarPatch, map: &[Option<usize>]) -> PolarPatch {
    let mut out = p.clone();
    out.center = p.center.and_then(|c| map[c]);
    out.rings.retain(|r| r.vertices.iter().all(|&v| map[v].is_some()));
    for r in &mut out.rings {
        for v in &mut r.vertices {
            *v = map[*v].unwrap();
        }
    }
    out
}

/// Removes the disk of chart radius `epsilon` around the center of a polar
/// patch. The ring at exactly that radius becomes the new boundary.
pub fn remove_disk(mesh: &SurfaceMesh, metric: &DiscreteMetric, center: usize, epsilon: f64) -> Result<RemovedDisk> {
    let patch = mesh.patch_at(center).ok_or(Error::NoPolarPatch(center))?;
    if patch.removed_radius.is_some() || patch.center.is_none() {
        return Err(Error::OverlappingDisk(center));
    }
    if !(epsilon > 0.0) || epsilon >= patch.core_radius {
        return Err(Error::EpsilonTooLarge {
            epsilon,
            patch_radius: patch.core_radius,
        });
    }
    let ring = patch
        .ring_at(epsilon)
        .ok_or(Error::NoRingAtRadius { center, epsilon })?
        .clone();
    let mut doomed = vec![false; mesh.num_vertices()];
    doomed[patch.center.unwrap()] = true;
    for r in &patch.rings {
        if r.radius < ring.radius {
            for &v in &r.vertices {
                doomed[v] = true;
            }
        }
    }
    // the ring must not touch an existing boundary
    let on_boundary: std::collections::HashSet<usize> = mesh
        .boundary_loops()
        .iter()
        .flat_map(|l| l.vertices.iter().copied())
        .collect();
    if ring.vertices.iter().any(|v| on_boundary.contains(v)) || doomed.iter().enumerate().any(|(v, &d)| d && on_boundary.contains(&v)) {
        return Err(Error::OverlappingDisk(center));
    }
    let tris = mesh.triangles();
    let (mut out, new_metric, map) = restrict(mesh, metric, |t| tris[t].iter().all(|&v| !doomed[v]))?;
    for p in &mut out.patches {
        if p.center_label == center {
            p.center = None;
            p.removed_radius = Some(epsilon);
        }
    }
    let ring_new: Vec<usize> = ring.vertices.iter().map(|&v| map[v].unwrap()).collect();
    let idx = out
        .find_loop(&ring_new)
        .ok_or_else(|| Error::InvalidMesh("removed disk did not open a single boundary loop".into()))?;
    let traced = &out.boundary_loops()[idx];
    let boundary = align_loop(traced, ring_new[0]);
    Ok(RemovedDisk {
        mesh: out,
        metric: new_metric,
        boundary,
        vertex_map: map,
    })
}

/// Rotates a cycle so that it starts at `start`, keeping its direction.
fn align_loop(lp: &BoundaryLoop, start: usize) -> BoundaryLoop {
    let k = lp.vertices.iter().position(|&v| v == start).expect("start vertex on loop");
    let n = lp.len();
    BoundaryLoop {
        vertices: (0..n).map(|i| lp.vertices[(k + i) % n]).collect(),
    }
}

/// Orientation of a cycle relative to the adjacent triangles: `true` when the
/// majority of segments run along their triangle's stored order.
fn runs_induced(mesh: &SurfaceMesh, lp: &BoundaryLoop) -> Result<bool> {
    let mut votes = 0i64;
    for (a, b) in lp.segments() {
        let e = mesh
            .edge_index(a, b)
            .ok_or_else(|| Error::GlueMismatch(format!("({a}, {b}) is not an edge")))?;
        let ts = mesh.edge_triangles(e);
        if ts.len() != 1 {
            return Err(Error::GlueMismatch(format!("edge ({a}, {b}) is not on the boundary")));
        }
        let tri = mesh.triangles()[ts[0]];
        let i = tri.iter().position(|&v| v == a).unwrap();
        votes += if tri[(i + 1) % 3] == b { 1 } else { -1 };
    }
    Ok(votes > 0)
}

fn induced(mesh: &SurfaceMesh, lp: &BoundaryLoop) -> Result<BoundaryLoop> {
    if runs_induced(mesh, lp)? {
        Ok(lp.clone())
    } else {
        let n = lp.len();
        Ok(BoundaryLoop {
            vertices: (0..n).map(|i| lp.vertices[(n - i) % n]).collect(),
        })
    }
}

fn unit_disk_like_loop(mesh: &SurfaceMesh, lp: &BoundaryLoop, what: &str) -> Result<()> {
    if mesh.find_loop(&lp.vertices).is_none() {
        return Err(Error::GlueMismatch(format!("{what} is not a boundary loop of its mesh")));
    }
    Ok(())
}

/// Identifies `loop_b` of mesh B with `loop_a` of mesh A. With both loops
/// taken in their induced orientation, `a[i]` is paired with
/// `b[(offset - i) mod n]`, so gluing two oriented pieces stays oriented.
/// Mesh A keeps its vertex numbering; B's remaining vertices are appended.
/// Shared edges take A's lengths. Both metrics are flattened first.
pub fn glue(
    mesh_a: &SurfaceMesh,
    metric_a: &DiscreteMetric,
    loop_a: &BoundaryLoop,
    mesh_b: &SurfaceMesh,
    metric_b: &DiscreteMetric,
    loop_b: &BoundaryLoop,
    offset: usize,
    tolerance: f64,
) -> Result<(SurfaceMesh, DiscreteMetric)> {
    let pair = GluePair {
        a: loop_a.clone(),
        b: loop_b.clone(),
        offset,
    };
    let g = glue_loops(mesh_a, metric_a, mesh_b, metric_b, &[pair], tolerance)?;
    Ok((g.mesh, g.metric))
}

/// One loop identification for [`glue_loops`].
#[derive(Clone, Debug)]
pub struct GluePair {
    pub a: BoundaryLoop,
    pub b: BoundaryLoop,
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub struct Glued {
    pub mesh: SurfaceMesh,
    pub metric: DiscreteMetric,
    /// Vertex of B to vertex of the glued mesh.
    pub b_map: Vec<usize>,
    /// Triangles coming from B occupy this range of the glued mesh.
    pub b_triangles: std::ops::Range<usize>,
}

/// Like [`glue`], but identifies several loop pairs at once, e.g. both ends
/// of a cylinder with two holes of A.
pub fn glue_loops(
    mesh_a: &SurfaceMesh,
    metric_a: &DiscreteMetric,
    mesh_b: &SurfaceMesh,
    metric_b: &DiscreteMetric,
    pairs: &[GluePair],
    tolerance: f64,
) -> Result<Glued> {
    if pairs.is_empty() {
        return Err(Error::GlueMismatch("nothing to glue".into()));
    }
    let na = mesh_a.num_vertices();
    let mut b_map = vec![usize::MAX; mesh_b.num_vertices()];
    let mut seams = Vec::new();
    for pair in pairs {
        unit_disk_like_loop(mesh_a, &pair.a, "first loop")?;
        unit_disk_like_loop(mesh_b, &pair.b, "second loop")?;
        let n = pair.a.len();
        if pair.b.len() != n {
            return Err(Error::GlueMismatch(format!(
                "loops have {} and {} vertices",
                n,
                pair.b.len()
            )));
        }
        let la = loop_length(mesh_a, metric_a, &pair.a)?;
        let lb = loop_length(mesh_b, metric_b, &pair.b)?;
        if (la - lb).abs() > tolerance * la {
            return Err(Error::GlueMismatch(format!(
                "circumferences {la} and {lb} differ by more than {tolerance} relative"
            )));
        }
        let a = induced(mesh_a, &pair.a)?;
        let b = induced(mesh_b, &pair.b)?;
        for i in 0..n {
            let vb = b.vertices[(pair.offset % n + n - i) % n];
            if b_map[vb] != usize::MAX {
                return Err(Error::GlueMismatch(format!("vertex {vb} of B is glued twice")));
            }
            b_map[vb] = a.vertices[i];
        }
        seams.push(a.vertices);
    }
    let mut next = na;
    for slot in b_map.iter_mut() {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    let mut tris = mesh_a.triangles().to_vec();
    tris.extend(
        mesh_b
            .triangles()
            .iter()
            .map(|t| [b_map[t[0]], b_map[t[1]], b_map[t[2]]]),
    );
    let mut out = SurfaceMesh::new(next, tris)?;
    let la_len = metric_a.edge_lengths(mesh_a);
    let lb_len = metric_b.edge_lengths(mesh_b);
    let mut lengths = vec![f64::NAN; out.num_edges()];
    for (e, &[p, q]) in mesh_b.edges().iter().enumerate() {
        lengths[out.edge_index(b_map[p], b_map[q]).unwrap()] = lb_len[e];
    }
    for (e, &[p, q]) in mesh_a.edges().iter().enumerate() {
        lengths[out.edge_index(p, q).unwrap()] = la_len[e];
    }
    let mut cones = metric_a.cone_points().to_vec();
    cones.extend(metric_b.cone_points().iter().map(|c| ConePoint {
        vertex: b_map[c.vertex],
        angle: c.angle,
    }));
    let metric = DiscreteMetric::from_parts(lengths, vec![0.0; next], cones);
    metric.validate(&out)?;

    let mut ids = mesh_a.identifications().to_vec();
    ids.extend(mesh_b.identifications().iter().map(|id| Identification {
        kind: id.kind,
        seam: id.seam.iter().map(|&v| b_map[v]).collect(),
    }));
    ids.extend(seams.into_iter().map(|seam| Identification {
        kind: IdentificationKind::Glue,
        seam,
    }));
    let mut patches = mesh_a.patches().to_vec();
    let bm: Vec<Option<usize>> = b_map.iter().map(|&v| Some(v)).collect();
    patches.extend(mesh_b.patches().iter().map(|p| remap_patch(p, &bm)));
    out.set_metadata(ids, patches, None);
    let b_triangles = mesh_a.num_triangles()..mesh_a.num_triangles() + mesh_b.num_triangles();
    Ok(Glued {
        mesh: out,
        metric,
        b_map,
        b_triangles,
    })
}

/// Flat Möbius band `S^1 x [0, 2h]` modulo `(θ, t) ~ (θ + π, 2h - t)`, with
/// circumference `perimeter`, meshed by `n` (even) vertices per ring. The
/// fundamental strip `t ∈ [0, h]` has its top ring folded by the half turn.
pub fn build_cross_cap_with_perimeter(perimeter: f64, h: f64, n: usize) -> Result<(SurfaceMesh, DiscreteMetric)> {
    build_cross_cap_with_rings(perimeter, h, n, None)
}

/// Cross cap with an explicit number of axial cells on the fundamental strip
/// (default: square cells).
pub fn build_cross_cap_with_rings(
    perimeter: f64,
    h: f64,
    n: usize,
    rings: Option<usize>,
) -> Result<(SurfaceMesh, DiscreteMetric)> {
    if n < 6 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "cross cap needs an even angular resolution of at least 6, got {n}"
        )));
    }
    if !(perimeter > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument("cross cap sizes must be positive".into()));
    }
    let s = perimeter / n as f64;
    let rings = rings.unwrap_or((h / s).round() as usize).max(2);
    let dt = h / rings as f64;
    let id = |i: i64, j: usize| -> usize {
        if j < rings {
            j * n + i.rem_euclid(n as i64) as usize
        } else {
            rings * n + i.rem_euclid((n / 2) as i64) as usize
        }
    };
    let nv = rings * n + n / 2;
    let mut tris = Vec::new();
    let mut tri_pts = Vec::new();
    strip_triangles(n, rings, s, dt, id, &mut tris, &mut tri_pts);
    let (mesh, metric) = finish_strip(nv, tris, tri_pts)?;
    let seam = (rings * n..nv).collect();
    let mut mesh = mesh;
    mesh.set_metadata(
        vec![Identification {
            kind: IdentificationKind::HalfTurn,
            seam,
        }],
        Vec::new(),
        None,
    );
    Ok((mesh, metric))
}

/// Flat cylinder `S^1 x [0, h]` with circumference `perimeter` and `n`
/// vertices per ring. Its boundary loops are the `t = 0` and `t = h` rings.
pub fn build_cylinder_with_perimeter(perimeter: f64, h: f64, n: usize) -> Result<(SurfaceMesh, DiscreteMetric)> {
    build_cylinder_with_rings(perimeter, h, n, None)
}

/// Cylinder with an explicit number of axial cells.
pub fn build_cylinder_with_rings(
    perimeter: f64,
    h: f64,
    n: usize,
    rings: Option<usize>,
) -> Result<(SurfaceMesh, DiscreteMetric)> {
    if n < 3 {
        return Err(Error::Resolution { got: n, min: 3 });
    }
    if !(perimeter > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument("cylinder sizes must be positive".into()));
    }
    let s = perimeter / n as f64;
    let rings = rings.unwrap_or((h / s).round() as usize).max(2);
    let dt = h / rings as f64;
    let id = |i: i64, j: usize| j * n + i.rem_euclid(n as i64) as usize;
    let mut tris = Vec::new();
    let mut tri_pts = Vec::new();
    strip_triangles(n, rings, s, dt, id, &mut tris, &mut tri_pts);
    finish_strip((rings + 1) * n, tris, tri_pts)
}

/// Cross cap with boundary circumference `2π epsilon`.
pub fn build_cross_cap(epsilon: f64, h: f64, n: usize) -> Result<(SurfaceMesh, DiscreteMetric)> {
    build_cross_cap_with_perimeter(2.0 * PI * epsilon, h, n)
}

/// Cylinder with boundary circumferences `2π epsilon`.
pub fn build_cylinder(epsilon: f64, h: f64, n: usize) -> Result<(SurfaceMesh, DiscreteMetric)> {
    build_cylinder_with_perimeter(2.0 * PI * epsilon, h, n)
}

type Tri2 = [[f64; 2]; 3];

fn strip_triangles(
    n: usize,
    rings: usize,
    s: f64,
    dt: f64,
    id: impl Fn(i64, usize) -> usize,
    tris: &mut Vec<[usize; 3]>,
    pts: &mut Vec<Tri2>,
) {
    for j in 0..rings {
        for i in 0..n as i64 {
            let p = |di: i64, dj: usize| [(i + di) as f64 * s, (j + dj) as f64 * dt];
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i as usize + j) % 2 == 0 {
                tris.push([a, b, c]);
                pts.push([p(0, 0), p(1, 0), p(1, 1)]);
                tris.push([a, c, d]);
                pts.push([p(0, 0), p(1, 1), p(0, 1)]);
            } else {
                tris.push([a, b, d]);
                pts.push([p(0, 0), p(1, 0), p(0, 1)]);
                tris.push([b, c, d]);
                pts.push([p(1, 0), p(1, 1), p(0, 1)]);
            }
        }
    }
}

fn finish_strip(nv: usize, tris: Vec<[usize; 3]>, pts: Vec<Tri2>) -> Result<(SurfaceMesh, DiscreteMetric)> {
    let mesh = SurfaceMesh::new(nv, tris)?;
    let mut lengths = vec![f64::NAN; mesh.num_edges()];
    let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    for (t, p) in pts.iter().enumerate() {
        for i in 0..3 {
            let e = mesh.triangle_edges()[t][i];
            lengths[e] = d(p[(i + 1) % 3], p[(i + 2) % 3]);
        }
    }
    let metric = DiscreteMetric::new(&mesh, lengths)?;
    Ok((mesh, metric))
}

/// Orientable double cover of a non-orientable mesh. Cover vertex `2v + s`
/// lies over `v` with local orientation sheet `s`; the deck involution swaps
/// the sheets and has no fixed points.
pub fn orientation_double_cover(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Result<DoubleCover> {
    if mesh.is_orientable() {
        return Err(Error::AlreadyOrientable);
    }
    let nv = mesh.num_vertices();
    let stars = mesh.vertex_triangles();
    let tris = mesh.triangles();
    // sigma[t][i]: does triangle t agree with the reference orientation of
    // the star of its corner i?
    let mut sigma = vec![[0i8; 3]; mesh.num_triangles()];
    for v in 0..nv {
        let star = &stars[v];
        let mut sign: HashMap<usize, i8> = HashMap::new();
        sign.insert(star[0], 1);
        let mut stack = vec![star[0]];
        while let Some(t) = stack.pop() {
            let i = tris[t].iter().position(|&x| x == v).unwrap();
            for k in [1, 2] {
                let w = tris[t][(i + k) % 3];
                let e = mesh.edge_index(v, w).unwrap();
                for &u in mesh.edge_triangles(e) {
                    if u == t || sign.contains_key(&u) {
                        continue;
                    }
                    // coherent neighbours traverse the shared edge in
                    // opposite directions
                    let dir = |tri: [usize; 3]| {
                        let a = tri.iter().position(|&x| x == v).unwrap();
                        tri[(a + 1) % 3] == w
                    };
                    let s = if dir(tris[t]) != dir(tris[u]) { sign[&t] } else { -sign[&t] };
                    sign.insert(u, s);
                    stack.push(u);
                }
            }
        }
        for &t in star {
            let i = tris[t].iter().position(|&x| x == v).unwrap();
            sigma[t][i] = sign[&t];
        }
    }
    let sheet = |v: usize, s: i8| 2 * v + usize::from(s < 0);
    let mut cover_tris = Vec::with_capacity(2 * tris.len());
    for (t, tri) in tris.iter().enumerate() {
        for o in [1i8, -1] {
            let c = [
                sheet(tri[0], o * sigma[t][0]),
                sheet(tri[1], o * sigma[t][1]),
                sheet(tri[2], o * sigma[t][2]),
            ];
            cover_tris.push(if o > 0 { c } else { [c[0], c[2], c[1]] });
        }
    }
    let mut cover = SurfaceMesh::new(2 * nv, cover_tris)?;
    let base = metric.base_edge_lengths();
    let lengths = cover
        .edges()
        .iter()
        .map(|&[a, b]| base[mesh.edge_index(a / 2, b / 2).unwrap()])
        .collect();
    let u = (0..2 * nv).map(|c| metric.log_conformal_factor()[c / 2]).collect();
    let cones = metric
        .cone_points()
        .iter()
        .flat_map(|c| {
            [0, 1].map(|s| ConePoint {
                vertex: 2 * c.vertex + s,
                angle: c.angle,
            })
        })
        .collect();
    let cover_metric = DiscreteMetric::from_parts(lengths, u, cones);
    cover_metric.validate(&cover)?;
    let topology = match mesh.declared_topology() {
        Some(Topology::NonOrientable { genus }) => Some(Topology::Orientable { genus: genus - 1 }),
        _ => None,
    };
    cover.set_metadata(Vec::new(), Vec::new(), topology);
    Ok(DoubleCover {
        mesh: cover,
        metric: cover_metric,
        involution: (0..2 * nv).map(|c| c ^ 1).collect(),
        projection: (0..2 * nv).map(|c| c / 2).collect(),
    })
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Two-stage smoothing of the metric around the removed disk of the patch
/// labelled `center`. On `[ε + δ, ε + 2δ]` the metric is blended into the
/// Euclidean chart metric, and on `[ε, ε + δ]` the Euclidean metric is blended
/// into the cylinder metric `dr^2 + ε^2 dθ^2`, which matches the flat tube
/// glued at radius `ε`. Works on squared edge lengths evaluated at edge
/// midpoints in the chart; the result is returned with a zero conformal
/// factor.
pub fn mollify_metric(mesh: &SurfaceMesh, metric: &DiscreteMetric, center: usize, delta: f64) -> Result<DiscreteMetric> {
    let patch = mesh.patch_at(center).ok_or(Error::NoPolarPatch(center))?;
    let eps = patch
        .removed_radius
        .ok_or_else(|| Error::InvalidArgument(format!("no disk was removed around vertex {center}")))?;
    if delta < 0.0 {
        return Err(Error::InvalidArgument("negative mollification width".into()));
    }
    if delta == 0.0 {
        return Ok(metric.clone());
    }
    let available = 0.5 * (patch.core_radius - eps);
    if delta > available {
        return Err(Error::MollifierTooWide { delta, available });
    }
    let mut polar: HashMap<usize, (f64, f64)> = HashMap::new();
    for r in &patch.rings {
        for (&v, &a) in r.vertices.iter().zip(&r.angles) {
            polar.insert(v, (r.radius, a));
        }
    }
    let mut lengths = metric.edge_lengths(mesh);
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let (Some(&(ra, ta)), Some(&(rb, tb))) = (polar.get(&a), polar.get(&b)) else {
            continue;
        };
        let rm = 0.5 * (ra + rb);
        if rm >= eps + 2.0 * delta {
            continue;
        }
        let mut dth = (tb - ta).rem_euclid(2.0 * PI);
        if dth > PI {
            dth -= 2.0 * PI;
        }
        let dr = rb - ra;
        let euclid = dr * dr + rm * rm * dth * dth;
        let old = lengths[e] * lengths[e];
        let new = if rm >= eps + delta {
            let eta = smoothstep((eps + 2.0 * delta - rm) / delta);
            (1.0 - eta) * old + eta * euclid
        } else {
            let eta = smoothstep((eps + delta - rm) / delta);
            (1.0 - eta) * euclid + eta * (dr * dr + eps * eps * dth * dth)
        };
        lengths[e] = new.sqrt();
    }
    let out = DiscreteMetric::from_parts(lengths, vec![0.0; mesh.num_vertices()], metric.cone_points().to_vec());
    out.validate(mesh)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build::{build_flat_torus, build_standard, PatchSpec, StandardSurface};
    use approx::assert_relative_eq;

    fn patched_torus(eps: f64) -> (SurfaceMesh, DiscreteMetric, usize) {
        let spec = PatchSpec {
            center: [0.5, 0.5],
            core_radius: 0.15,
            anchor_radius: eps,
        };
        let (m, g) = build_flat_torus([[1.0, 0.0], [0.0, 1.0]], 24, &[spec]).unwrap();
        let c = m.patches()[0].center_label;
        (m, g, c)
    }

    #[test]
    fn remove_disk_opens_a_round_hole() {
        let (m, g, c) = patched_torus(0.05);
        let cut = remove_disk(&m, &g, c, 0.05).unwrap();
        assert_eq!(cut.mesh.boundary_loops().len(), 1);
        let len = loop_length(&cut.mesh, &cut.metric, &cut.boundary).unwrap();
        assert!((len - 2.0 * PI * 0.05).abs() < 0.01 * 2.0 * PI * 0.05);
        let lost = g.area(&m) - cut.metric.area(&cut.mesh);
        assert!((lost - PI * 0.0025).abs() < 0.02 * PI * 0.0025);
        assert_eq!(cut.mesh.euler_characteristic(), -1);
    }

    #[test]
    fn remove_disk_errors() {
        let (m, g, c) = patched_torus(0.05);
        assert!(matches!(remove_disk(&m, &g, 0, 0.05), Err(Error::NoPolarPatch(0))));
        assert!(matches!(remove_disk(&m, &g, c, 0.3), Err(Error::EpsilonTooLarge { .. })));
        assert!(matches!(remove_disk(&m, &g, c, 0.043), Err(Error::NoRingAtRadius { .. })));
        let cut = remove_disk(&m, &g, c, 0.05).unwrap();
        assert!(matches!(
            remove_disk(&cut.mesh, &cut.metric, c, 0.05),
            Err(Error::OverlappingDisk(_))
        ));
    }

    #[test]
    fn cross_cap_and_cylinder_models() {
        let (m, g) = build_cross_cap(0.1, 1.0, 16).unwrap();
        assert_eq!(m.boundary_loops().len(), 1);
        assert!(!m.is_orientable());
        assert_eq!(m.euler_characteristic(), 0);
        assert_relative_eq!(g.area(&m), 2.0 * PI * 0.1, max_relative = 1e-12);
        assert!(build_cross_cap(0.1, 1.0, 15).is_err());

        let (m, g) = build_cylinder(0.1, 1.0, 16).unwrap();
        assert_eq!(m.boundary_loops().len(), 2);
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.is_orientable());
        assert_relative_eq!(g.area(&m), 0.2 * PI, max_relative = 1e-12);
    }

    #[test]
    fn glue_cross_cap_into_torus() {
        let (m, g, c) = patched_torus(0.05);
        let cut = remove_disk(&m, &g, c, 0.05).unwrap();
        let n = cut.boundary.len();
        let p = loop_length(&cut.mesh, &cut.metric, &cut.boundary).unwrap();
        let (cm, cg) = build_cross_cap_with_perimeter(p, 0.3, n).unwrap();
        let lb = cm.boundary_loops()[0].clone();
        let (s, sg) = glue(&cut.mesh, &cut.metric, &cut.boundary, &cm, &cg, &lb, 0, 1e-3).unwrap();
        assert!(s.is_closed());
        assert!(!s.is_orientable());
        assert_eq!(s.euler_characteristic(), -1);
        assert_relative_eq!(sg.area(&s), cut.metric.area(&cut.mesh) + cg.area(&cm), max_relative = 1e-12);
    }

    #[test]
    fn glue_rejects_mismatched_circumference() {
        let (m, g, c) = patched_torus(0.05);
        let cut = remove_disk(&m, &g, c, 0.05).unwrap();
        let n = cut.boundary.len();
        let p = loop_length(&cut.mesh, &cut.metric, &cut.boundary).unwrap();
        let (cm, cg) = build_cross_cap_with_perimeter(1.1 * p, 0.3, n).unwrap();
        let lb = cm.boundary_loops()[0].clone();
        assert!(matches!(
            glue(&cut.mesh, &cut.metric, &cut.boundary, &cm, &cg, &lb, 0, 1e-3),
            Err(Error::GlueMismatch(_))
        ));
    }

    #[test]
    fn klein_bottle_cover_is_a_torus() {
        let (m, g) = build_standard(
            &StandardSurface::FlatKleinBottle {
                width: 1.0,
                height: 1.0,
            },
            6,
        )
        .unwrap();
        let cover = orientation_double_cover(&m, &g).unwrap();
        assert!(cover.mesh.is_orientable());
        assert_eq!(cover.mesh.euler_characteristic(), 2 * m.euler_characteristic());
        assert!(cover.involution.iter().enumerate().all(|(v, &w)| v != w && cover.involution[w] == v));
        assert_relative_eq!(cover.metric.area(&cover.mesh), 2.0 * g.area(&m), max_relative = 1e-12);
        let (t, tg) = build_standard(&StandardSurface::square_torus(1.0), 6).unwrap();
        assert!(matches!(orientation_double_cover(&t, &tg), Err(Error::AlreadyOrientable)));
    }

    #[test]
    fn mollify_zero_width_is_identity() {
        let (m, g, c) = patched_torus(0.02);
        let cut = remove_disk(&m, &g, c, 0.02).unwrap();
        let same = mollify_metric(&cut.mesh, &cut.metric, c, 0.0).unwrap();
        assert_eq!(same, cut.metric);
        let soft = mollify_metric(&cut.mesh, &cut.metric, c, 0.02).unwrap();
        assert!(soft.area(&cut.mesh) < cut.metric.area(&cut.mesh));
        assert!(matches!(
            mollify_metric(&cut.mesh, &cut.metric, c, 0.1),
            Err(Error::MollifierTooWide { .. })
        ));
    }
}
