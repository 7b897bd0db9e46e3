use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::assemble::{BoundaryCondition, OperatorPair};
use super::eigs::{smallest_eigenpairs, EigenOptions, SolverMethod};
use crate::error::{Error, Result};

pub const DEFAULT_CLUSTER_TOLERANCE: f64 = 1e-3;

/// Ascending eigenvalues with M-orthonormal eigenvectors expanded to vertex
/// fields (zero on Dirichlet vertices).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub bc: BoundaryCondition,
    pub cluster_tolerance: f64,
    pub residuals: Vec<f64>,
    pub shift: f64,
    pub method: SolverMethod,
}

/// Groups consecutive values whose relative distance is within `tol`.
pub fn cluster_values(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if let Some(last) = out.last_mut() {
            let prev = values[*last.last().unwrap()];
            if (v - prev).abs() <= tol * v.abs().max(prev.abs()) {
                last.push(i);
                continue;
            }
        }
        out.push(vec![i]);
    }
    out
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        cluster_values(&self.eigenvalues, self.cluster_tolerance)
    }

    /// Cluster id per eigenvalue.
    pub fn cluster_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.len()];
        for (c, members) in self.clusters().iter().enumerate() {
            for &i in members {
                ids[i] = c;
            }
        }
        ids
    }

    /// Number of eigenvalues within relative `tol` of `value`.
    pub fn multiplicity(&self, value: f64, tol: f64) -> usize {
        multiplicity(self, value, tol)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue,cluster")?;
        for (i, (v, c)) in self.eigenvalues.iter().zip(self.cluster_ids()).enumerate() {
            writeln!(w, "{i},{v:.15e},{c}")?;
        }
        Ok(())
    }

    /// Writes `<stem>.json` with the eigenvalues and `<stem>.bin` with the
    /// eigenvectors as little-endian `f64`, one eigenvector per row.
    pub fn write_json_with_sidecar(&self, dir: &Path, stem: &str) -> Result<()> {
        let rows = self.eigenvectors.len();
        let cols = self.eigenvectors.first().map_or(0, Vec::len);
        let bin_name = format!("{stem}.bin");
        let mut bytes = Vec::with_capacity(rows * cols * 8);
        for v in &self.eigenvectors {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        std::fs::write(dir.join(&bin_name), bytes)?;
        let doc = serde_json::json!({
            "eigenvalues": self.eigenvalues,
            "clusters": self.cluster_ids(),
            "bc": self.bc.tag(),
            "cluster_tolerance": self.cluster_tolerance,
            "residuals": self.residuals,
            "eigenvectors": {
                "file": bin_name,
                "dtype": "f64-le",
                "layout": "row-major",
                "rows": rows,
                "cols": cols,
            },
        });
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&doc)?)?;
        Ok(())
    }
}

/// Reads the eigenvector sidecar written by [`Spectrum::write_json_with_sidecar`].
pub fn read_sidecar(path: &Path, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() != rows * cols * 8 {
        return Err(Error::Parse(format!(
            "sidecar has {} bytes, expected {}",
            bytes.len(),
            rows * cols * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8 * cols.max(1))
        .take(rows)
        .map(|row| {
            row.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect())
}

/// The `k` smallest eigenpairs of an operator pair.
pub fn solve_spectrum(ops: &OperatorPair, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    let mut o = opts.clone();
    o.count = k;
    let pairs = smallest_eigenpairs(&ops.stiffness, &ops.mass, &o)?;
    Ok(Spectrum {
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors.iter().map(|v| ops.expand(v)).collect(),
        bc: ops.bc.clone(),
        cluster_tolerance: DEFAULT_CLUSTER_TOLERANCE,
        residuals: pairs.residuals,
        shift: pairs.shift,
        method: pairs.method,
    })
}

/// `u^T K u / u^T M u` for a vertex field `u`.
pub fn rayleigh(ops: &OperatorPair, u: &[f64]) -> Result<f64> {
    let x = if u.len() == ops.num_vertices {
        ops.restrict(u)
    } else if u.len() == ops.dim() {
        u.to_vec()
    } else {
        return Err(Error::InvalidArgument("field length matches neither vertices nor dofs".into()));
    };
    let den = ops.mass.bilinear(&x, &x);
    if !(den > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(ops.stiffness.bilinear(&x, &x) / den)
}

pub fn multiplicity(spec: &Spectrum, value: f64, tol: f64) -> usize {
    spec.eigenvalues
        .iter()
        .filter(|&&v| (v - value).abs() <= tol * value.abs().max(v.abs()))
        .count()
}
