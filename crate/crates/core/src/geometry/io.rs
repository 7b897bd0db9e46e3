//! Versioned JSON documents for mesh + metric, and OFF triangulations.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::mesh::{Identification, PolarPatch, SurfaceMesh, Topology};
use super::metric::{ConePoint, DiscreteMetric};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshDocument {
    pub schema_version: u32,
    pub num_vertices: usize,
    pub triangles: Vec<[usize; 3]>,
    /// Edges as sorted vertex pairs, parallel to `edge_lengths`.
    pub edges: Vec<[usize; 2]>,
    pub edge_lengths: Vec<f64>,
    pub log_conformal_factor: Vec<f64>,
    pub cone_points: Vec<ConePoint>,
    pub identifications: Vec<Identification>,
    #[serde(default)]
    pub patches: Vec<PolarPatch>,
    #[serde(default)]
    pub topology: Option<Topology>,
}

impl MeshDocument {
    pub fn new(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Self {
        MeshDocument {
            schema_version: SCHEMA_VERSION,
            num_vertices: mesh.num_vertices(),
            triangles: mesh.triangles().to_vec(),
            edges: mesh.edges().to_vec(),
            edge_lengths: metric.base_edge_lengths().to_vec(),
            log_conformal_factor: metric.log_conformal_factor().to_vec(),
            cone_points: metric.cone_points().to_vec(),
            identifications: mesh.identifications().to_vec(),
            patches: mesh.patches().to_vec(),
            topology: mesh.declared_topology(),
        }
    }

    pub fn into_parts(self) -> Result<(SurfaceMesh, DiscreteMetric)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        let mut mesh = SurfaceMesh::new(self.num_vertices, self.triangles)?;
        if self.edges.len() != self.edge_lengths.len() || self.edges.len() != mesh.num_edges() {
            return Err(Error::Parse("edge list does not match the triangles".into()));
        }
        let mut lengths = vec![0.0; mesh.num_edges()];
        for (&[a, b], &l) in self.edges.iter().zip(&self.edge_lengths) {
            let e = mesh
                .edge_index(a, b)
                .ok_or_else(|| Error::Parse(format!("({a}, {b}) is not an edge")))?;
            lengths[e] = l;
        }
        let metric = DiscreteMetric::from_parts(lengths, self.log_conformal_factor, self.cone_points);
        metric.validate(&mesh)?;
        mesh.set_metadata(self.identifications, self.patches, self.topology);
        Ok((mesh, metric))
    }
}

pub fn write_json<W: Write>(w: W, mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Result<()> {
    serde_json::to_writer_pretty(w, &MeshDocument::new(mesh, metric))?;
    Ok(())
}

pub fn read_json<R: std::io::Read>(r: R) -> Result<(SurfaceMesh, DiscreteMetric)> {
    let doc: MeshDocument = serde_json::from_reader(r)?;
    doc.into_parts()
}

/// Reads an OFF triangulation; edge lengths come from the coordinates.
pub fn read_off<R: BufRead>(r: R) -> Result<(SurfaceMesh, DiscreteMetric)> {
    let mut tokens = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    match it.next().as_deref() {
        Some("OFF") => {}
        other => return Err(Error::Parse(format!("expected OFF header, got {other:?}"))),
    }
    let mut num = |what: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("{what}: {e}")))
    };
    let nv = num("vertex count")?;
    let nf = num("face count")?;
    let _ne = num("edge count")?;
    drop(num);
    let mut float = || -> Result<f64> {
        it.next()
            .ok_or_else(|| Error::Parse("truncated OFF file".into()))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(e.to_string()))
    };
    let mut pos = Vec::with_capacity(nv);
    for _ in 0..nv {
        pos.push([float()?, float()?, float()?]);
    }
    let mut tris = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = float()? as usize;
        if k != 3 {
            return Err(Error::Parse(format!("only triangles are supported, got a {k}-gon")));
        }
        tris.push([float()? as usize, float()? as usize, float()? as usize]);
    }
    let mesh = SurfaceMesh::new(nv, tris)?;
    let metric = DiscreteMetric::from_positions(&mesh, &pos)?;
    Ok((mesh, metric))
}

/// Writes an OFF file. Intrinsic metrics have no coordinates, so the caller
/// supplies an embedding.
pub fn write_off<W: Write>(mut w: W, mesh: &SurfaceMesh, positions: &[[f64; 3]]) -> Result<()> {
    if positions.len() != mesh.num_vertices() {
        return Err(Error::InvalidArgument("one position per vertex required".into()));
    }
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} {}", mesh.num_vertices(), mesh.num_triangles(), mesh.num_edges())?;
    for p in positions {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}
