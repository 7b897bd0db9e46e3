//! Reference surfaces: round sphere, flat tori and Klein bottles, the
//! projective plane and flat rectangles, plus flat tori and spheres carrying
//! polar patches (geometrically graded rings around chosen points) on which
//! disks of an exact radius can be removed.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mesh::{Identification, IdentificationKind, PatchRing, PolarPatch, SurfaceMesh, Topology};
use super::metric::DiscreteMetric;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StandardSurface {
    /// Unit round sphere (geodesic icosahedral mesh, `10 n^2 + 2` vertices).
    RoundSphere,
    /// Flat torus `R^2 / (Z a + Z b)` for the lattice basis `[a, b]`.
    FlatTorus { basis: [[f64; 2]; 2] },
    /// Flat Klein bottle: the plane modulo `(x, y) -> (x + width, -y)` and
    /// `(x, y) -> (x, y + height)`.
    FlatKleinBottle { width: f64, height: f64 },
    /// Antipodal quotient of the unit sphere.
    ProjectivePlane,
    /// Flat rectangle with one boundary loop.
    FlatRectangle { width: f64, height: f64 },
}

impl StandardSurface {
    /// Square torus with side `side`.
    pub fn square_torus(side: f64) -> Self {
        StandardSurface::FlatTorus {
            basis: [[side, 0.0], [0.0, side]],
        }
    }

    /// Flat torus of the hexagonal lattice with total area `area`.
    pub fn equilateral_torus(area: f64) -> Self {
        let side = (2.0 * area / 3f64.sqrt()).sqrt();
        StandardSurface::FlatTorus {
            basis: [[side, 0.0], [0.5 * side, 0.5 * 3f64.sqrt() * side]],
        }
    }
}

/// Polar patch request on a flat torus. `center` is given in fractions of
/// the fundamental domain; rings are graded down from `core_radius` so that
/// one lands exactly at `anchor_radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub center: [f64; 2],
    pub core_radius: f64,
    pub anchor_radius: f64,
}

/// Collects triangles with their corner coordinates and derives edge lengths.
struct Assembler {
    num_vertices: usize,
    triangles: Vec<[usize; 3]>,
    lengths: Vec<[f64; 3]>,
}

fn dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

impl Assembler {
    fn new(num_vertices: usize) -> Self {
        Assembler {
            num_vertices,
            triangles: Vec::new(),
            lengths: Vec::new(),
        }
    }

    fn push<const D: usize>(&mut self, v: [usize; 3], p: [[f64; D]; 3]) {
        self.triangles.push(v);
        self.lengths.push([dist(&p[1], &p[2]), dist(&p[2], &p[0]), dist(&p[0], &p[1])]);
    }

    fn finish(self) -> Result<(SurfaceMesh, DiscreteMetric)> {
        let mesh = SurfaceMesh::new(self.num_vertices, self.triangles)?;
        let mut lengths = vec![f64::NAN; mesh.num_edges()];
        for (t, l) in self.lengths.iter().enumerate() {
            for i in 0..3 {
                let e = mesh.triangle_edges()[t][i];
                if lengths[e].is_nan() {
                    lengths[e] = l[i];
                } else if (lengths[e] - l[i]).abs() > 1e-9 * l[i] {
                    return Err(Error::InvalidMesh(format!(
                        "edge {:?} gets inconsistent lengths {} and {}",
                        mesh.edges()[e],
                        lengths[e],
                        l[i]
                    )));
                }
            }
        }
        let metric = DiscreteMetric::new(&mesh, lengths)?;
        Ok((mesh, metric))
    }
}

/// Builds one of the reference surfaces. `resolution` is the icosahedral
/// frequency for spheres and the cell count along the first period for flat
/// surfaces.
pub fn build_standard(kind: &StandardSurface, resolution: usize) -> Result<(SurfaceMesh, DiscreteMetric)> {
    if resolution < 3 {
        return Err(Error::Resolution { got: resolution, min: 3 });
    }
    match kind {
        StandardSurface::RoundSphere => {
            let (pos, tris) = icosphere(resolution);
            let mut asm = Assembler::new(pos.len());
            for t in &tris {
                asm.push(*t, [pos[t[0]], pos[t[1]], pos[t[2]]]);
            }
            let (mesh, metric) = asm.finish()?;
            Ok((mesh.with_topology(Topology::Orientable { genus: 0 }), metric))
        }
        StandardSurface::ProjectivePlane => projective_plane(resolution),
        StandardSurface::FlatTorus { basis } => build_flat_torus(*basis, resolution, &[]),
        StandardSurface::FlatKleinBottle { width, height } => {
            if !(*width > 0.0 && *height > 0.0) {
                return Err(Error::UnsupportedLattice("Klein bottle sides must be positive".into()));
            }
            let nx = resolution;
            let ny = ((resolution as f64) * height / width).round().max(3.0) as usize;
            let grid = FlatGrid {
                nx,
                ny,
                dx: width / nx as f64,
                dy: height / ny as f64,
                wrap: GridWrap::Klein,
            };
            let (mesh, metric) = grid.build(&[])?;
            Ok((mesh.with_topology(Topology::NonOrientable { genus: 2 }), metric))
        }
        StandardSurface::FlatRectangle { width, height } => {
            if !(*width > 0.0 && *height > 0.0) {
                return Err(Error::InvalidArgument("rectangle sides must be positive".into()));
            }
            let nx = resolution;
            let ny = ((resolution as f64) * height / width).round().max(1.0) as usize;
            let grid = FlatGrid {
                nx,
                ny,
                dx: width / nx as f64,
                dy: height / ny as f64,
                wrap: GridWrap::Rectangle,
            };
            grid.build(&[])
        }
    }
}

/// Flat torus with polar patches around the requested points.
pub fn build_flat_torus(
    basis: [[f64; 2]; 2],
    resolution: usize,
    patches: &[PatchSpec],
) -> Result<(SurfaceMesh, DiscreteMetric)> {
    if resolution < 3 {
        return Err(Error::Resolution { got: resolution, min: 3 });
    }
    let (len, bx, height) = reduce_lattice(basis)?;
    let ratio = bx / len;
    let denom = (1..=64usize)
        .find(|&d| {
            let x = d as f64 * ratio;
            (x - x.round()).abs() < 1e-9
        })
        .ok_or_else(|| {
            Error::UnsupportedLattice(format!("shear {ratio} is not a rational with denominator <= 64"))
        })?;
    let nx = resolution.div_ceil(denom) * denom;
    let shift = (nx as f64 * ratio).round() as i64;
    let ny = ((nx as f64) * height / len).round().max(3.0) as usize;
    let grid = FlatGrid {
        nx,
        ny,
        dx: len / nx as f64,
        dy: height / ny as f64,
        wrap: GridWrap::Torus { shift },
    };
    let (mesh, metric) = grid.build(patches)?;
    Ok((mesh.with_topology(Topology::Orientable { genus: 1 }), metric))
}

/// Gauss-reduces the basis and rotates it so that the first vector lies on
/// the x axis. Returns `(|a|, b_x, b_y)` with `0 <= b_x < |a|`.
fn reduce_lattice(basis: [[f64; 2]; 2]) -> Result<(f64, f64, f64)> {
    let [mut a, mut b] = basis;
    let norm = |v: [f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
    let cross = a[0] * b[1] - a[1] * b[0];
    if !(norm(a) > 0.0 && norm(b) > 0.0) || cross.abs() < 1e-12 * norm(a) * norm(b) {
        return Err(Error::UnsupportedLattice("degenerate lattice basis".into()));
    }
    for _ in 0..100 {
        if norm(a) > norm(b) {
            std::mem::swap(&mut a, &mut b);
        }
        let mu = ((a[0] * b[0] + a[1] * b[1]) / (a[0] * a[0] + a[1] * a[1])).round();
        if mu == 0.0 {
            break;
        }
        b = [b[0] - mu * a[0], b[1] - mu * a[1]];
    }
    let len = norm(a);
    let (c, s) = (a[0] / len, a[1] / len);
    let mut bx = c * b[0] + s * b[1];
    let by = (-s * b[0] + c * b[1]).abs();
    bx = bx.rem_euclid(len);
    if (len - bx).abs() < 1e-12 * len {
        bx = 0.0;
    }
    Ok((len, bx, by))
}

#[derive(Clone, Copy, Debug)]
enum GridWrap {
    /// `(i, j + ny) ~ (i - shift, j)` and `(i + nx, j) ~ (i, j)`.
    Torus { shift: i64 },
    /// `(i + nx, j) ~ (i, -j)` and `(i, j + ny) ~ (i, j)`.
    Klein,
    Rectangle,
}

struct FlatGrid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    wrap: GridWrap,
}

/// A patch laid out on grid indices.
struct GridPatch {
    ci: i64,
    cj: i64,
    w: i64,
    core_radius: f64,
    anchor: f64,
}

impl FlatGrid {
    fn columns(&self) -> usize {
        match self.wrap {
            GridWrap::Rectangle => self.nx + 1,
            _ => self.nx,
        }
    }

    fn rows(&self) -> usize {
        match self.wrap {
            GridWrap::Rectangle => self.ny + 1,
            _ => self.ny,
        }
    }

    fn canonical(&self, i: i64, j: i64) -> (usize, usize) {
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        match self.wrap {
            GridWrap::Torus { shift } => {
                let jw = j.div_euclid(ny);
                let jj = j.rem_euclid(ny);
                let ii = (i - shift * jw).rem_euclid(nx);
                (ii as usize, jj as usize)
            }
            GridWrap::Klein => {
                let iw = i.div_euclid(nx);
                let ii = i.rem_euclid(nx);
                let jj = if iw.rem_euclid(2) == 1 { -j } else { j };
                (ii as usize, jj.rem_euclid(ny) as usize)
            }
            GridWrap::Rectangle => (i as usize, j as usize),
        }
    }

    fn layout_patches(&self, specs: &[PatchSpec]) -> Result<Vec<GridPatch>> {
        let h = self.dx.min(self.dy);
        let mut out: Vec<GridPatch> = Vec::new();
        for s in specs {
            if !(s.anchor_radius > 0.0 && s.anchor_radius < s.core_radius) {
                return Err(Error::EpsilonTooLarge {
                    epsilon: s.anchor_radius,
                    patch_radius: s.core_radius,
                });
            }
            let w = (s.core_radius / (0.6 * h)).ceil().max(2.0) as i64;
            let ci = (s.center[0] * self.nx as f64).round() as i64;
            let cj = (s.center[1] * self.ny as f64).round() as i64;
            let margin = if matches!(self.wrap, GridWrap::Rectangle) { 1 } else { 0 };
            if ci - w < margin
                || cj - w < margin
                || ci + w > self.nx as i64 - margin
                || cj + w > self.ny as i64 - margin
            {
                return Err(Error::EpsilonTooLarge {
                    epsilon: s.core_radius,
                    patch_radius: (ci.min(cj).min(self.nx as i64 - ci).min(self.ny as i64 - cj)) as f64 * h,
                });
            }
            for p in &out {
                if (p.ci - ci).abs() <= p.w + w && (p.cj - cj).abs() <= p.w + w {
                    return Err(Error::InvalidArgument("polar patches overlap".into()));
                }
            }
            out.push(GridPatch {
                ci,
                cj,
                w,
                core_radius: s.core_radius,
                anchor: s.anchor_radius,
            });
        }
        Ok(out)
    }

    fn build(&self, specs: &[PatchSpec]) -> Result<(SurfaceMesh, DiscreteMetric)> {
        if self.nx < 3 || (self.ny < 3 && !matches!(self.wrap, GridWrap::Rectangle)) {
            return Err(Error::Resolution { got: self.nx.min(self.ny), min: 3 });
        }
        let patches = self.layout_patches(specs)?;
        let inside_block = |i: i64, j: i64| {
            patches
                .iter()
                .any(|p| (i - p.ci).abs() < p.w && (j - p.cj).abs() < p.w)
        };
        let (cols, rows) = (self.columns(), self.rows());
        let mut grid_id = vec![usize::MAX; cols * rows];
        let mut next = 0usize;
        for j in 0..rows {
            for i in 0..cols {
                if !inside_block(i as i64, j as i64) {
                    grid_id[j * cols + i] = next;
                    next += 1;
                }
            }
        }
        let id = |i: i64, j: i64| {
            let (ii, jj) = self.canonical(i, j);
            grid_id[jj * cols + ii]
        };
        let pos = |i: i64, j: i64| [i as f64 * self.dx, j as f64 * self.dy];

        // Patch vertices come after the grid vertices.
        struct Ring {
            ids: Vec<usize>,
            pts: Vec<[f64; 2]>,
        }
        let mut patch_rings: Vec<Vec<Ring>> = Vec::new();
        let mut patch_records = Vec::new();
        for p in &patches {
            let n = (8 * p.w) as usize;
            let q = (2.0 * PI / n as f64).exp();
            let center = pos(p.ci, p.cj);
            // boundary of the block, counter-clockwise from angle 0
            let mut boundary = Vec::with_capacity(n);
            let w = p.w;
            for k in 0..w {
                boundary.push((p.ci + w, p.cj + k));
            }
            for k in 0..2 * w {
                boundary.push((p.ci + w - k, p.cj + w));
            }
            for k in 0..2 * w {
                boundary.push((p.ci - w, p.cj + w - k));
            }
            for k in 0..2 * w {
                boundary.push((p.ci - w + k, p.cj - w));
            }
            for k in 0..w {
                boundary.push((p.ci + w, p.cj - w + k));
            }
            debug_assert_eq!(boundary.len(), n);
            let mut rings = vec![Ring {
                ids: boundary.iter().map(|&(i, j)| id(i, j)).collect(),
                pts: boundary.iter().map(|&(i, j)| pos(i, j)).collect(),
            }];
            let polar: Vec<(f64, f64)> = boundary
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| {
                    let x = (i - p.ci) as f64 * self.dx;
                    let y = (j - p.cj) as f64 * self.dy;
                    let mut a = y.atan2(x);
                    if k > 0 && a < 0.0 {
                        a += 2.0 * PI;
                    }
                    if k == 0 {
                        a = 0.0;
                    }
                    ((x * x + y * y).sqrt(), a)
                })
                .collect();
            let mean_r = polar.iter().map(|(r, _)| r.ln()).sum::<f64>() / n as f64;
            let transitions = (((mean_r - p.core_radius.ln()) / q.ln()).ceil() as usize).max(2);
            for t in 1..=transitions {
                let s = t as f64 / transitions as f64;
                let mut ids = Vec::with_capacity(n);
                let mut pts = Vec::with_capacity(n);
                for (k, &(rb, ab)) in polar.iter().enumerate() {
                    let beta = 2.0 * PI * k as f64 / n as f64;
                    let r = (rb.ln() * (1.0 - s) + p.core_radius.ln() * s).exp();
                    let a = ab + s * (beta - ab);
                    ids.push(next);
                    next += 1;
                    pts.push([center[0] + r * a.cos(), center[1] + r * a.sin()]);
                }
                rings.push(Ring { ids, pts });
            }
            // round rings below the core radius, one of them exactly at the anchor
            let steps = ((p.core_radius / p.anchor).ln() / q.ln()).round().max(1.0) as usize;
            let qc = (p.core_radius / p.anchor).powf(1.0 / steps as f64);
            let below = ((4.0f64).ln() / qc.ln()).ceil().max(2.0) as usize;
            let mut radii = vec![p.core_radius];
            for k in 1..=steps + below {
                radii.push(if k == steps { p.anchor } else { p.core_radius * qc.powi(-(k as i32)) });
            }
            let mut record_rings = Vec::new();
            for (k, &r) in radii.iter().enumerate() {
                let angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
                if k == 0 {
                    // reuse the last transition ring, which sits on the core circle
                    let last = rings.last().unwrap();
                    record_rings.push(PatchRing {
                        radius: r,
                        vertices: last.ids.clone(),
                        angles,
                    });
                    continue;
                }
                let ids: Vec<usize> = (0..n).map(|i| next + i).collect();
                next += n;
                let pts = angles
                    .iter()
                    .map(|a| [center[0] + r * a.cos(), center[1] + r * a.sin()])
                    .collect();
                record_rings.push(PatchRing {
                    radius: r,
                    vertices: ids.clone(),
                    angles,
                });
                rings.push(Ring { ids, pts });
            }
            let center_id = next;
            next += 1;
            rings.push(Ring {
                ids: vec![center_id],
                pts: vec![center],
            });
            patch_records.push(PolarPatch {
                center: Some(center_id),
                center_label: center_id,
                rings: record_rings,
                core_radius: p.core_radius,
                removed_radius: None,
            });
            patch_rings.push(rings);
        }

        let mut asm = Assembler::new(next);
        let cells_x = self.nx as i64;
        let cells_y = self.ny as i64;
        for j in 0..cells_y {
            for i in 0..cells_x {
                if patches
                    .iter()
                    .any(|p| i >= p.ci - p.w && i < p.ci + p.w && j >= p.cj - p.w && j < p.cj + p.w)
                {
                    continue;
                }
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let (pa, pb, pc, pd) = (pos(i, j), pos(i + 1, j), pos(i + 1, j + 1), pos(i, j + 1));
                if (i + j).rem_euclid(2) == 0 {
                    asm.push([a, b, c], [pa, pb, pc]);
                    asm.push([a, c, d], [pa, pc, pd]);
                } else {
                    asm.push([a, b, d], [pa, pb, pd]);
                    asm.push([b, c, d], [pb, pc, pd]);
                }
            }
        }
        for rings in &patch_rings {
            for k in 0..rings.len() - 1 {
                let (o, inner) = (&rings[k], &rings[k + 1]);
                let n = o.ids.len();
                if inner.ids.len() == 1 {
                    for i in 0..n {
                        let i1 = (i + 1) % n;
                        asm.push([o.ids[i], o.ids[i1], inner.ids[0]], [o.pts[i], o.pts[i1], inner.pts[0]]);
                    }
                    continue;
                }
                for i in 0..n {
                    let i1 = (i + 1) % n;
                    if (i + k) % 2 == 0 {
                        asm.push([o.ids[i], o.ids[i1], inner.ids[i1]], [o.pts[i], o.pts[i1], inner.pts[i1]]);
                        asm.push([o.ids[i], inner.ids[i1], inner.ids[i]], [o.pts[i], inner.pts[i1], inner.pts[i]]);
                    } else {
                        asm.push([o.ids[i], o.ids[i1], inner.ids[i]], [o.pts[i], o.pts[i1], inner.pts[i]]);
                        asm.push([o.ids[i1], inner.ids[i1], inner.ids[i]], [o.pts[i1], inner.pts[i1], inner.pts[i]]);
                    }
                }
            }
        }
        let (mut mesh, metric) = asm.finish()?;
        let mut ids = Vec::new();
        match self.wrap {
            GridWrap::Torus { .. } => {
                let seam: Vec<usize> = (0..cols)
                    .map(|i| grid_id[i])
                    .chain((1..rows).map(|j| grid_id[j * cols]))
                    .filter(|&v| v != usize::MAX)
                    .collect();
                ids.push(Identification {
                    kind: IdentificationKind::Translation,
                    seam,
                });
            }
            GridWrap::Klein => {
                ids.push(Identification {
                    kind: IdentificationKind::GlideReflection,
                    seam: (0..rows).map(|j| grid_id[j * cols]).filter(|&v| v != usize::MAX).collect(),
                });
                ids.push(Identification {
                    kind: IdentificationKind::Translation,
                    seam: (0..cols).map(|i| grid_id[i]).filter(|&v| v != usize::MAX).collect(),
                });
            }
            GridWrap::Rectangle => {}
        }
        mesh.set_metadata(ids, patch_records, None);
        Ok((mesh, metric))
    }
}

/// Geodesic icosphere with `10 n^2 + 2` vertices on the unit sphere; faces
/// are oriented outward.
pub fn icosphere(frequency: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let base: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let n = frequency;
    let mut pos: Vec<[f64; 3]> = Vec::new();
    let mut lookup: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertex = |p: [f64; 3]| -> usize {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let q = [p[0] / r, p[1] / r, p[2] / r];
        let k = [
            (q[0] * 1e9).round() as i64,
            (q[1] * 1e9).round() as i64,
            (q[2] * 1e9).round() as i64,
        ];
        *lookup.entry(k).or_insert_with(|| {
            pos.push(q);
            pos.len() - 1
        })
    };
    let mut tris = Vec::with_capacity(20 * n * n);
    for f in &faces {
        let (a, b, c) = (base[f[0]], base[f[1]], base[f[2]]);
        let point = |i: usize, j: usize| {
            // i steps from a towards b, j from a towards c
            let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
            [
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
                a[2] + s * (b[2] - a[2]) + t * (c[2] - a[2]),
            ]
        };
        let mut idx = vec![vec![0usize; n + 1]; n + 1];
        for i in 0..=n {
            for j in 0..=(n - i) {
                idx[i][j] = vertex(point(i, j));
            }
        }
        for i in 0..n {
            for j in 0..(n - i) {
                tris.push([idx[i][j], idx[i + 1][j], idx[i][j + 1]]);
                if i + j + 1 < n {
                    tris.push([idx[i + 1][j], idx[i + 1][j + 1], idx[i][j + 1]]);
                }
            }
        }
    }
    (pos, tris)
}

/// Antipodal pairing of icosphere vertices.
pub fn antipodal_map(pos: &[[f64; 3]]) -> Vec<usize> {
    let key = |p: &[f64; 3]| {
        [
            (p[0] * 1e8).round() as i64,
            (p[1] * 1e8).round() as i64,
            (p[2] * 1e8).round() as i64,
        ]
    };
    let lookup: HashMap<[i64; 3], usize> = pos.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
    pos.iter()
        .map(|p| lookup[&key(&[-p[0], -p[1], -p[2]])])
        .collect()
}

fn projective_plane(frequency: usize) -> Result<(SurfaceMesh, DiscreteMetric)> {
    let (pos, tris) = icosphere(frequency);
    let anti = antipodal_map(&pos);
    let mut rep_id = HashMap::new();
    let mut reps = Vec::new();
    for v in 0..pos.len() {
        let r = v.min(anti[v]);
        if r == v {
            rep_id.insert(v, reps.len());
            reps.push(v);
        }
    }
    let class = |v: usize| rep_id[&v.min(anti[v])];
    let mut asm = Assembler::new(reps.len());
    let mut seen = std::collections::HashSet::new();
    for t in &tris {
        let q = [class(t[0]), class(t[1]), class(t[2])];
        let mut s = q;
        s.sort_unstable();
        if seen.insert(s) {
            asm.push(q, [pos[t[0]], pos[t[1]], pos[t[2]]]);
        }
    }
    let (mut mesh, metric) = asm.finish()?;
    let seam = reps
        .iter()
        .enumerate()
        .filter(|(_, &v)| pos[v][2].abs() < 1e-9)
        .map(|(i, _)| i)
        .collect();
    mesh.set_metadata(
        vec![Identification {
            kind: IdentificationKind::Antipodal,
            seam,
        }],
        Vec::new(),
        Some(Topology::NonOrientable { genus: 1 }),
    );
    Ok((mesh, metric))
}

/// Round unit sphere meshed by `n_angular` meridians and rings that are
/// geometrically graded towards both poles in the stereographic chart radius
/// `r = 2 tan(polar_angle / 2)`, so that the metric there is `f g_euclid`
/// with `f(pole) = 1`. Each pole carries a polar patch with a ring exactly at
/// chart radius `anchor`.
pub fn build_graded_sphere(n_angular: usize, anchor: f64) -> Result<(SurfaceMesh, DiscreteMetric)> {
    if n_angular < 6 {
        return Err(Error::Resolution { got: n_angular, min: 6 });
    }
    if !(anchor > 0.0 && anchor < 1.0) {
        return Err(Error::EpsilonTooLarge {
            epsilon: anchor,
            patch_radius: 1.0,
        });
    }
    let n = n_angular;
    let q0 = (2.0 * PI / n as f64).exp();
    let steps = ((2.0 / anchor).ln() / q0.ln()).round().max(2.0) as usize;
    let q = (2.0 / anchor).powf(1.0 / steps as f64);
    let below = ((4.0f64).ln() / q.ln()).ceil().max(2.0) as usize;
    let mut radii: Vec<f64> = (0..=steps + below).map(|k| 2.0 * q.powi(-(k as i32))).collect();
    radii[steps] = anchor;
    let angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let point = |r: f64, a: f64, north: bool| {
        let polar = 2.0 * (r / 2.0).atan();
        let z = polar.cos();
        let s = polar.sin();
        [s * a.cos(), s * a.sin(), if north { z } else { -z }]
    };

    // ring 0 is the equator; north rings 1.., then south rings 1..
    let mut ring_ids: Vec<Vec<usize>> = Vec::new();
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let add_ring = |r: f64, north: bool, positions: &mut Vec<[f64; 3]>| -> Vec<usize> {
        angles
            .iter()
            .map(|&a| {
                positions.push(point(r, a, north));
                positions.len() - 1
            })
            .collect()
    };
    let equator = add_ring(radii[0], true, &mut positions);
    ring_ids.push(equator.clone());
    let mut north = vec![equator.clone()];
    for &r in &radii[1..] {
        north.push(add_ring(r, true, &mut positions));
    }
    let mut south = vec![equator];
    for &r in &radii[1..] {
        south.push(add_ring(r, false, &mut positions));
    }
    let north_pole = positions.len();
    positions.push([0.0, 0.0, 1.0]);
    let south_pole = positions.len();
    positions.push([0.0, 0.0, -1.0]);

    let mut asm = Assembler::new(positions.len());
    let band = |rings: &[Vec<usize>], pole: usize, flip: bool, asm: &mut Assembler| {
        let push = |t: [usize; 3], asm: &mut Assembler| {
            let t = if flip { [t[0], t[2], t[1]] } else { t };
            asm.push(t, [positions[t[0]], positions[t[1]], positions[t[2]]]);
        };
        for k in 0..rings.len() - 1 {
            let (o, inner) = (&rings[k], &rings[k + 1]);
            for i in 0..n {
                let i1 = (i + 1) % n;
                if (i + k) % 2 == 0 {
                    push([o[i], o[i1], inner[i1]], asm);
                    push([o[i], inner[i1], inner[i]], asm);
                } else {
                    push([o[i], o[i1], inner[i]], asm);
                    push([o[i1], inner[i1], inner[i]], asm);
                }
            }
        }
        let last = rings.last().unwrap();
        for i in 0..n {
            push([last[i], last[(i + 1) % n], pole], asm);
        }
    };
    band(&north, north_pole, false, &mut asm);
    band(&south, south_pole, true, &mut asm);
    let (mut mesh, metric) = asm.finish()?;

    let make_patch = |rings: &[Vec<usize>], pole: usize| {
        let recs = radii
            .iter()
            .zip(rings)
            .filter(|(r, _)| **r <= 1.0 + 1e-12)
            .map(|(&r, ids)| PatchRing {
                radius: r,
                vertices: ids.clone(),
                angles: angles.clone(),
            })
            .collect::<Vec<_>>();
        let core = recs.first().map(|r| r.radius).unwrap_or(anchor);
        PolarPatch {
            center: Some(pole),
            center_label: pole,
            rings: recs,
            core_radius: core,
            removed_radius: None,
        }
    };
    let patches = vec![make_patch(&north, north_pole), make_patch(&south, south_pole)];
    mesh.set_metadata(Vec::new(), patches, Some(Topology::Orientable { genus: 0 }));
    Ok((mesh, metric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn icosphere_counts() {
        let (p, t) = icosphere(4);
        assert_eq!(p.len(), 10 * 16 + 2);
        assert_eq!(t.len(), 20 * 16);
    }

    #[test]
    fn round_sphere_is_closed_with_euler_two() {
        let (m, g) = build_standard(&StandardSurface::RoundSphere, 8).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_closed() && m.is_orientable());
        assert!((g.area(&m) - 4.0 * PI).abs() < 0.02 * 4.0 * PI);
    }

    #[test]
    fn square_torus_area_and_euler() {
        let side = 2.0 * PI;
        let (m, g) = build_standard(&StandardSurface::square_torus(side), 12).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.is_orientable());
        assert_relative_eq!(g.area(&m), side * side, max_relative = 1e-12);
    }

    #[test]
    fn equilateral_torus_has_equilateral_lattice() {
        let (m, g) = build_standard(&StandardSurface::equilateral_torus(1.0), 9).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert_relative_eq!(g.area(&m), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn klein_bottle_is_non_orientable() {
        let (m, g) = build_standard(
            &StandardSurface::FlatKleinBottle {
                width: 1.0,
                height: 1.0,
            },
            6,
        )
        .unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!(!m.is_orientable());
        assert!(m.is_closed());
        assert_relative_eq!(g.area(&m), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn projective_plane_counts() {
        let (m, g) = build_standard(&StandardSurface::ProjectivePlane, 4).unwrap();
        assert_eq!(m.euler_characteristic(), 1);
        assert!(!m.is_orientable());
        assert!(m.is_closed());
        assert!((g.area(&m) - 2.0 * PI).abs() < 0.05 * 2.0 * PI);
    }

    #[test]
    fn rectangle_has_boundary() {
        let (m, g) = build_standard(
            &StandardSurface::FlatRectangle {
                width: 2.0,
                height: 1.0,
            },
            8,
        )
        .unwrap();
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.euler_characteristic(), 1);
        assert_relative_eq!(g.area(&m), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_lattice_rejected() {
        let r = build_standard(
            &StandardSurface::FlatTorus {
                basis: [[1.0, 0.0], [2.0, 0.0]],
            },
            6,
        );
        assert!(matches!(r, Err(Error::UnsupportedLattice(_))));
        let r = build_standard(&StandardSurface::RoundSphere, 2);
        assert!(matches!(r, Err(Error::Resolution { .. })));
    }

    #[test]
    fn patched_torus_keeps_area_and_topology() {
        let spec = PatchSpec {
            center: [0.5, 0.5],
            core_radius: 0.12,
            anchor_radius: 0.02,
        };
        let (m, g) = build_flat_torus(StandardSurface::square_torus(1.0).basis(), 24, &[spec]).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.is_orientable());
        assert_relative_eq!(g.area(&m), 1.0, max_relative = 1e-12);
        let p = &m.patches()[0];
        assert!(p.ring_at(0.02).is_some());
        assert!(p.ring_at(0.12).is_some());
    }

    #[test]
    fn graded_sphere_has_pole_patches() {
        let (m, g) = build_graded_sphere(32, 0.05).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_orientable());
        assert_eq!(m.patches().len(), 2);
        assert!(m.patches()[0].ring_at(0.05).is_some());
        assert!((g.area(&m) - 4.0 * PI).abs() < 0.02 * 4.0 * PI);
    }
}

impl StandardSurface {
    /// Lattice basis of a flat torus; panics for other kinds.
    pub fn basis(&self) -> [[f64; 2]; 2] {
        match self {
            StandardSurface::FlatTorus { basis } => *basis,
            other => panic!("{other:?} has no lattice basis"),
        }
    }
}
