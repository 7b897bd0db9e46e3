//! Compressed sparse row matrices (symmetric matrices are stored in full),
//! a nested-dissection fill-reducing ordering and an up-looking sparse
//! LDL^T factorization.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; columns are sorted within each row.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut fill = counts.clone();
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n {
            order.clear();
            order.extend(counts[i]..counts[i + 1]);
            order.sort_by_key(|&p| cols[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if cols[p] == last {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    col_idx.push(cols[p]);
                    values.push(vals[p]);
                    last = cols[p];
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        CsrMatrix {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col_idx: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(p) => self.values[self.row_ptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| j == i))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut r = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.values[p] * y[self.col_idx[p]];
            }
            s += x[i] * r;
        }
        s
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, c * v)));
        }
        CsrMatrix::from_triplets(self.n, &t)
    }

    /// Principal submatrix on the given rows/columns, in that order.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let mut t = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if pos[j] != usize::MAX {
                    t.push((k, pos[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), &t)
    }
}

/// Fill-reducing ordering by recursive level-structure bisection. Returns
/// `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let mut perm = Vec::with_capacity(n);
    let mut stamp = vec![0u32; n];
    let mut level = vec![usize::MAX; n];
    let mut clock = 0u32;
    let all: Vec<usize> = (0..n).collect();
    dissect(&adj, all, &mut perm, &mut stamp, &mut level, &mut clock);
    debug_assert_eq!(perm.len(), n);
    perm
}

const LEAF: usize = 64;

/// Breadth-first levels from `root` inside the stamped subset.
fn bfs(adj: &[Vec<usize>], root: usize, stamp: &[u32], tag: u32, level: &mut [usize], out: &mut Vec<usize>) {
    out.clear();
    out.push(root);
    level[root] = 0;
    let mut head = 0;
    while head < out.len() {
        let v = out[head];
        head += 1;
        for &w in &adj[v] {
            if stamp[w] == tag && level[w] == usize::MAX {
                level[w] = level[v] + 1;
                out.push(w);
            }
        }
    }
}

fn dissect(
    adj: &[Vec<usize>],
    set: Vec<usize>,
    perm: &mut Vec<usize>,
    stamp: &mut [u32],
    level: &mut [usize],
    clock: &mut u32,
) {
    if set.len() <= LEAF {
        perm.extend(set);
        return;
    }
    *clock += 1;
    let tag = *clock;
    for &v in &set {
        stamp[v] = tag;
        level[v] = usize::MAX;
    }
    // split off connected components first
    let mut order = Vec::new();
    bfs(adj, set[0], stamp, tag, level, &mut order);
    if order.len() < set.len() {
        let rest: Vec<usize> = set.iter().copied().filter(|&v| level[v] == usize::MAX).collect();
        let comp = order.clone();
        dissect(adj, comp, perm, stamp, level, clock);
        dissect(adj, rest, perm, stamp, level, clock);
        return;
    }
    // pseudo-peripheral root
    let mut root = *order.last().unwrap();
    let mut depth = level[root];
    for _ in 0..4 {
        for &v in &set {
            level[v] = usize::MAX;
        }
        bfs(adj, root, stamp, tag, level, &mut order);
        let far = *order.last().unwrap();
        if level[far] <= depth {
            break;
        }
        depth = level[far];
        root = far;
    }
    let depth = level[*order.last().unwrap()];
    if depth < 2 {
        perm.extend(set);
        return;
    }
    // separator: the level at which half of the vertices have been seen
    let half = order.len() / 2;
    let mid = level[order[half]].clamp(1, depth - 1);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut sep = Vec::new();
    for &v in &order {
        match level[v].cmp(&mid) {
            std::cmp::Ordering::Less => a.push(v),
            std::cmp::Ordering::Equal => sep.push(v),
            std::cmp::Ordering::Greater => b.push(v),
        }
    }
    dissect(adj, a, perm, stamp, level, clock);
    dissect(adj, b, perm, stamp, level, clock);
    perm.extend(sep);
}

/// Sparse `P A P^T = L D L^T` without pivoting.
#[derive(Clone, Debug)]
pub struct Ldl {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl Ldl {
    /// Factors a symmetric matrix stored in full. Fails on a (numerically)
    /// zero pivot.
    pub fn factor(a: &CsrMatrix) -> std::result::Result<Ldl, String> {
        Self::factor_with(a, nested_dissection(a))
    }

    pub fn factor_with(a: &CsrMatrix, perm: Vec<usize>) -> std::result::Result<Ldl, String> {
        let n = a.dim();
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // symbolic: elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (j, _) in a.row(perm[k]) {
                let mut i = pinv[j];
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        lnz.iter_mut().for_each(|c| *c = 0);
        flag.iter_mut().for_each(|f| *f = usize::MAX);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (j, v) in a.row(perm[k]) {
                let mut i = pinv[j];
                if i > k {
                    continue;
                }
                y[i] += v;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                top += 1;
                let yi = y[i];
                y[i] = 0.0;
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
            }
            if !(d[k].abs() > 1e-14 * scale) || !d[k].is_finite() {
                return Err(format!("pivot {k} is {:e}", d[k]));
            }
        }
        Ok(Ldl { n, perm, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative pivots, which equals the number of negative
    /// eigenvalues of the factored matrix.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn fill(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }

    /// Solves for several right-hand sides at once; `b` holds `m` columns of
    /// length `n` back to back.
    pub fn solve_block(&self, b: &[f64], m: usize) -> Vec<f64> {
        let n = self.n;
        // interleave so each row's m values are contiguous
        let mut x = vec![0.0; n * m];
        for c in 0..m {
            for (k, &p) in self.perm.iter().enumerate() {
                x[k * m + c] = b[c * n + p];
            }
        }
        let mut tmp = vec![0.0; m];
        for j in 0..n {
            tmp.copy_from_slice(&x[j * m..(j + 1) * m]);
            for p in self.lp[j]..self.lp[j + 1] {
                let (i, l) = (self.li[p], self.lx[p]);
                let row = &mut x[i * m..(i + 1) * m];
                for c in 0..m {
                    row[c] -= l * tmp[c];
                }
            }
        }
        for j in 0..n {
            let dj = self.d[j];
            for c in 0..m {
                x[j * m + c] /= dj;
            }
        }
        for j in (0..n).rev() {
            tmp.copy_from_slice(&x[j * m..(j + 1) * m]);
            for p in self.lp[j]..self.lp[j + 1] {
                let (i, l) = (self.li[p], self.lx[p]);
                for c in 0..m {
                    tmp[c] -= l * x[i * m + c];
                }
            }
            x[j * m..(j + 1) * m].copy_from_slice(&tmp);
        }
        let mut out = vec![0.0; n * m];
        for c in 0..m {
            for (k, &p) in self.perm.iter().enumerate() {
                out[c * n + p] = x[k * m + c];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn ldl_solves_grid_laplacian() {
        let m = 30;
        let n = m * m;
        let mut t = Vec::new();
        for y in 0..m {
            for x in 0..m {
                let i = y * m + x;
                t.push((i, i, 4.1));
                for (dx, dy) in [(1, 0), (0, 1)] {
                    let (x2, y2) = ((x + dx) % m, (y + dy) % m);
                    let j = y2 * m + x2;
                    t.push((i, j, -1.0));
                    t.push((j, i, -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let f = Ldl::factor(&a).unwrap();
        assert_eq!(f.negative_pivots(), 0);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = f.solve(&b);
        let r = a.apply(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "residual {err}");
        let xb = f.solve_block(&[b.clone(), b.clone()].concat(), 2);
        assert!(xb[..n].iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-14));
        assert!(xb[n..].iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn inertia_counts_negative_eigenvalues() {
        // eigenvalues of the 1-D Dirichlet Laplacian are 2 - 2cos(kπ/(n+1))
        let n = 20;
        let s = 2.0 - 2.0 * (3.3 * std::f64::consts::PI / 21.0).cos();
        let a = laplacian_1d(n, -s);
        let f = Ldl::factor_with(&a, (0..n).collect()).unwrap();
        assert_eq!(f.negative_pivots(), 3);
    }

    #[test]
    fn nested_dissection_is_a_permutation() {
        let a = laplacian_1d(500, 0.0);
        let mut p = nested_dissection(&a);
        p.sort_unstable();
        assert_eq!(p, (0..500).collect::<Vec<_>>());
    }
}
