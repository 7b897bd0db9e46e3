//! Smallest eigenpairs of the pencil `K u = λ M u` with `K` symmetric
//! positive semidefinite and `M` symmetric positive definite.
//!
//! The main path is a restarted block Krylov method on the shift-inverted
//! operator `(K - σM)^{-1} M` with `σ` below the spectrum, followed by
//! Rayleigh-Ritz on the pencil. LOBPCG with a Jacobi preconditioner is the
//! fallback when no shift can be factored.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sparse::{CsrMatrix, Ldl};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Number of eigenpairs wanted.
    pub count: usize,
    /// Shift for the factorization. `None` picks one below the spectrum.
    pub shift: Option<f64>,
    /// Relative residual target `|Ku - λMu| / |Mu| <= tol * max(1, |λ|)`.
    pub tolerance: f64,
    pub max_restarts: usize,
    /// Block width; at least `max(2 count, count + 6)` is used regardless.
    pub block_size: usize,
    /// Krylov blocks per restart.
    pub krylov_steps: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            count: 6,
            shift: None,
            tolerance: 1e-10,
            max_restarts: 80,
            block_size: 8,
            krylov_steps: 4,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverMethod {
    ShiftInvert,
    Lobpcg,
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// `|Ku - λMu| / |Mu|` per pair.
    pub residuals: Vec<f64>,
    pub shift: f64,
    pub method: SolverMethod,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// M-orthonormal basis kept together with `M` applied to it.
struct Basis<'a> {
    m: &'a CsrMatrix,
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
}

impl<'a> Basis<'a> {
    fn new(m: &'a CsrMatrix) -> Self {
        Basis {
            m,
            v: Vec::new(),
            mv: Vec::new(),
        }
    }

    /// Orthogonalizes `w` against the basis (two passes) and appends it
    /// unless it is numerically dependent.
    fn push(&mut self, mut w: Vec<f64>) -> bool {
        let mut mw = self.m.apply(&w);
        let start = dot(&w, &mw).max(0.0).sqrt();
        if !(start > 0.0) || !start.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (v, mv) in self.v.iter().zip(&self.mv) {
                let c = dot(mv, &w);
                for (x, y) in w.iter_mut().zip(v) {
                    *x -= c * y;
                }
            }
            mw = self.m.apply(&w);
        }
        let r = dot(&w, &mw).max(0.0).sqrt();
        if r <= 1e-10 * start {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= r);
        mw.iter_mut().for_each(|x| *x /= r);
        self.v.push(w);
        self.mv.push(mw);
        true
    }

    fn len(&self) -> usize {
        self.v.len()
    }
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Rayleigh-Ritz of `K` on an M-orthonormal basis.
fn rayleigh_ritz(k: &CsrMatrix, basis: &Basis, keep: usize) -> Ritz {
    let q = basis.len();
    let kv: Vec<Vec<f64>> = basis.v.iter().map(|v| k.apply(v)).collect();
    let mut h = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        for j in 0..=i {
            let x = 0.5 * (dot(&basis.v[i], &kv[j]) + dot(&basis.v[j], &kv[i]));
            h[(i, j)] = x;
            h[(j, i)] = x;
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let n = basis.v[0].len();
    let keep = keep.min(q);
    let mut values = Vec::with_capacity(keep);
    let mut vectors = Vec::with_capacity(keep);
    for &c in order.iter().take(keep) {
        values.push(eig.eigenvalues[c]);
        let mut u = vec![0.0; n];
        for i in 0..q {
            let y = eig.eigenvectors[(i, c)];
            for (x, b) in u.iter_mut().zip(&basis.v[i]) {
                *x += y * b;
            }
        }
        vectors.push(u);
    }
    Ritz { values, vectors }
}

fn residual(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, u: &[f64]) -> f64 {
    let ku = k.apply(u);
    let mu = m.apply(u);
    let r: f64 = ku.iter().zip(&mu).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    r / norm(&mu).max(f64::MIN_POSITIVE)
}

fn random_block(n: usize, b: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..b).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Final M-orthonormalization of a converged set (Ritz vectors are already
/// orthonormal up to rounding; this restores it to machine precision).
fn polish(k: &CsrMatrix, m: &CsrMatrix, values: Vec<f64>, vectors: Vec<Vec<f64>>, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut basis = Basis::new(m);
    for v in vectors {
        basis.push(v);
    }
    if basis.len() < count {
        return (values, basis.v);
    }
    let r = rayleigh_ritz(k, &basis, count);
    (r.values, r.vectors)
}

/// Residual level below which rounding dominates: a small multiple of
/// machine precision times an estimate of the largest eigenvalue.
fn roundoff_floor(k: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let lam_max = k
        .diagonal()
        .iter()
        .zip(m.diagonal())
        .map(|(a, b)| 2.0 * a.abs() / b.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    100.0 * f64::EPSILON * lam_max
}

fn default_shift(m: &CsrMatrix) -> f64 {
    let area = m.total();
    -10.0 / area.max(f64::MIN_POSITIVE)
}

/// Computes the `opts.count` smallest eigenpairs.
pub fn smallest_eigenpairs(k: &CsrMatrix, m: &CsrMatrix, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = k.dim();
    if opts.count == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
            shift: 0.0,
            method: SolverMethod::ShiftInvert,
        });
    }
    if opts.count >= n {
        return Err(Error::InvalidArgument(format!(
            "asked for {} eigenpairs of a {n}-dimensional problem",
            opts.count
        )));
    }
    if n <= 400 {
        return dense_eigenpairs(k, m, opts.count);
    }
    let base = default_shift(m);
    let mut sigma = opts.shift.unwrap_or(base);
    let mut factor = None;
    for attempt in 0..4 {
        match Ldl::factor(&k.add_scaled(-sigma, m)) {
            Ok(f) => {
                if f.negative_pivots() > 0 && attempt == 0 && opts.shift.is_some() {
                    // the requested shift sits inside the spectrum; move below it
                    sigma = base;
                    continue;
                }
                factor = Some(f);
                break;
            }
            Err(_) => {
                sigma = sigma * 1.37 - 1e-3 * base.abs();
            }
        }
    }
    let Some(factor) = factor else {
        return lobpcg(k, m, opts);
    };
    match shift_invert(k, m, &factor, sigma, opts) {
        Ok(p) => Ok(p),
        Err(Error::NoConvergence(_)) => lobpcg(k, m, opts),
        Err(e) => Err(e),
    }
}

fn shift_invert(k: &CsrMatrix, m: &CsrMatrix, factor: &Ldl, sigma: f64, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = k.dim();
    let b = opts.block_size.max(opts.count + 6).max(2 * opts.count).min(n / 2);
    let floor = roundoff_floor(k, m);
    let steps = opts.krylov_steps.max(1);
    let mut block = random_block(n, b, opts.seed);
    let mut worst = f64::INFINITY;
    for _restart in 0..opts.max_restarts {
        let mut basis = Basis::new(m);
        let mut last: Vec<Vec<f64>> = Vec::new();
        for v in block.drain(..) {
            if basis.push(v) {
                last.push(basis.v.last().unwrap().clone());
            }
        }
        for _ in 0..steps {
            if last.is_empty() {
                break;
            }
            let w = last.len();
            let mut rhs = Vec::with_capacity(n * w);
            for v in &last {
                rhs.extend(m.apply(v));
            }
            let sol = factor.solve_block(&rhs, w);
            last.clear();
            for c in 0..w {
                if basis.push(sol[c * n..(c + 1) * n].to_vec()) {
                    last.push(basis.v.last().unwrap().clone());
                }
            }
        }
        let ritz = rayleigh_ritz(k, &basis, b);
        let res: Vec<f64> = (0..opts.count)
            .map(|i| residual(k, m, ritz.values[i], &ritz.vectors[i]))
            .collect();
        worst = (0..opts.count)
            .map(|i| (res[i] - floor).max(0.0) / ritz.values[i].abs().max(1.0))
            .fold(0.0, f64::max);
        if worst <= opts.tolerance {
            let (values, vectors) = polish(k, m, ritz.values, ritz.vectors, opts.count);
            let residuals = (0..opts.count).map(|i| residual(k, m, values[i], &vectors[i])).collect();
            return Ok(EigenPairs {
                values,
                vectors,
                residuals,
                shift: sigma,
                method: SolverMethod::ShiftInvert,
            });
        }
        block = ritz.vectors;
    }
    Err(Error::NoConvergence(format!(
        "shift-invert stopped after {} restarts with relative residual {worst:e}",
        opts.max_restarts
    )))
}

/// Dense reference solver for small problems.
pub fn dense_eigenpairs(k: &CsrMatrix, m: &CsrMatrix, count: usize) -> Result<EigenPairs> {
    let n = k.dim();
    // reduce with M = L L^T
    let mut md = DMatrix::<f64>::zeros(n, n);
    let mut kd = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in m.row(i) {
            md[(i, j)] = v;
        }
        for (j, v) in k.row(i) {
            kd[(i, j)] = v;
        }
    }
    let chol = md
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization {
            shift: 0.0,
            reason: "mass matrix is not positive definite".into(),
        })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization {
            shift: 0.0,
            reason: "singular mass factor".into(),
        })?;
    let mut c = &linv * kd * linv.transpose();
    c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for &o in order.iter().take(count) {
        values.push(eig.eigenvalues[o]);
        let y = eig.eigenvectors.column(o);
        let u = linv.transpose() * y;
        vectors.push(u.iter().copied().collect::<Vec<f64>>());
    }
    let residuals = (0..count).map(|i| residual(k, m, values[i], &vectors[i])).collect();
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
        shift: 0.0,
        method: SolverMethod::ShiftInvert,
    })
}

/// Block LOBPCG with a Jacobi preconditioner.
pub fn lobpcg(k: &CsrMatrix, m: &CsrMatrix, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = k.dim();
    let b = (opts.count + 2).max(4).min(n / 3);
    let diag: Vec<f64> = k
        .diagonal()
        .iter()
        .zip(m.diagonal())
        .map(|(kd, md)| 1.0 / (kd + 1e-3 * md).max(f64::MIN_POSITIVE))
        .collect();
    let mut basis = Basis::new(m);
    for v in random_block(n, b, opts.seed) {
        basis.push(v);
    }
    let mut ritz = rayleigh_ritz(k, &basis, b);
    let floor = roundoff_floor(k, m);
    let mut prev: Vec<Vec<f64>> = Vec::new();
    let max_iter = 50 * opts.max_restarts.max(10);
    let mut worst = f64::INFINITY;
    for _ in 0..max_iter {
        let mut w = Vec::new();
        worst = 0.0;
        for (i, (lam, u)) in ritz.values.iter().zip(&ritz.vectors).enumerate() {
            let ku = k.apply(u);
            let mu = m.apply(u);
            let r: Vec<f64> = ku.iter().zip(&mu).map(|(a, c)| a - lam * c).collect();
            let rel = (norm(&r) / norm(&mu).max(f64::MIN_POSITIVE) - floor).max(0.0) / lam.abs().max(1.0);
            if i < opts.count {
                worst = worst.max(rel);
            }
            if rel > 0.1 * opts.tolerance {
                w.push(r.iter().zip(&diag).map(|(a, d)| a * d).collect::<Vec<f64>>());
            }
        }
        if worst <= opts.tolerance {
            let (values, vectors) = polish(k, m, ritz.values, ritz.vectors, opts.count);
            let residuals = (0..opts.count).map(|i| residual(k, m, values[i], &vectors[i])).collect();
            return Ok(EigenPairs {
                values,
                vectors,
                residuals,
                shift: 0.0,
                method: SolverMethod::Lobpcg,
            });
        }
        let mut basis = Basis::new(m);
        for v in ritz.vectors.iter().cloned().chain(w).chain(prev.iter().cloned()) {
            basis.push(v);
        }
        let next = rayleigh_ritz(k, &basis, b);
        prev = next
            .vectors
            .iter()
            .zip(&ritz.vectors)
            .map(|(a, c)| a.iter().zip(c).map(|(x, y)| x - y).collect())
            .collect();
        ritz = next;
    }
    Err(Error::NoConvergence(format!(
        "LOBPCG stopped after {max_iter} iterations with relative residual {worst:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Periodic 1-D chain: eigenvalues 4 sin^2(πj/n)/h^2 with unit mass h.
    fn ring(n: usize) -> (CsrMatrix, CsrMatrix) {
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.push((i, i, 2.0));
            t.push((i, j, -1.0));
            t.push((j, i, -1.0));
        }
        (CsrMatrix::from_triplets(n, &t), CsrMatrix::diagonal_matrix(&vec![1.0; n]))
    }

    fn exact(n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|j| 4.0 * (PI * j as f64 / n as f64).sin().powi(2)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn shift_invert_finds_degenerate_pairs() {
        let n = 1000;
        let (k, m) = ring(n);
        let opts = EigenOptions {
            count: 7,
            ..Default::default()
        };
        let p = smallest_eigenpairs(&k, &m, &opts).unwrap();
        let ex = exact(n);
        for i in 0..7 {
            assert!((p.values[i] - ex[i]).abs() < 1e-12, "{i}: {} vs {}", p.values[i], ex[i]);
            assert!(p.residuals[i] < 1e-8);
        }
    }

    #[test]
    fn lobpcg_agrees_on_small_problem() {
        let n = 60;
        let (k, m) = ring(n);
        let opts = EigenOptions {
            count: 3,
            tolerance: 1e-9,
            ..Default::default()
        };
        let p = lobpcg(&k, &m, &opts).unwrap();
        let ex = exact(n);
        for i in 0..3 {
            assert!((p.values[i] - ex[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dense_path_matches_formula() {
        let n = 50;
        let (k, m) = ring(n);
        let p = dense_eigenpairs(&k, &m, 5).unwrap();
        let ex = exact(n);
        for i in 0..5 {
            assert!((p.values[i] - ex[i]).abs() < 1e-12);
        }
    }
}
