//! Sparse LDLᵀ factorization of symmetric positive definite matrices.
//!
//! Ordering is reverse Cuthill-McKee. The factorization itself is the classic
//! up-looking algorithm driven by the elimination tree: row `k` of `L` is found
//! by a sparse triangular solve whose pattern is the set of etree paths from the
//! nonzeros of column `k` of the permuted matrix.

use std::collections::VecDeque;

use crate::error::{check_dim, BiotError, Result};

use super::{CsrMatrix, LinearOperator};

/// Reverse Cuthill-McKee ordering of the (symmetric) sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &CsrMatrix) -> Vec<usize> {
    let n = m.nrows();
    let degree: Vec<usize> = (0..n).map(|i| m.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs: Vec<usize> = Vec::new();

    while order.len() < n {
        let start = pseudo_peripheral(m, &visited, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(m.row(v).0.iter().copied().filter(|&u| !visited[u]));
            nbrs.sort_by_key(|&u| (degree[u], u));
            for &u in &nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Lowest-degree unvisited node, pushed outward by repeated BFS sweeps.
fn pseudo_peripheral(m: &CsrMatrix, visited: &[bool], degree: &[usize]) -> usize {
    let mut start = (0..m.nrows())
        .filter(|&i| !visited[i])
        .min_by_key(|&i| (degree[i], i))
        .expect("an unvisited node exists");
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, depth) = bfs_farthest(m, start, visited, degree);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        start = far;
    }
    start
}

fn bfs_farthest(m: &CsrMatrix, start: usize, visited: &[bool], degree: &[usize]) -> (usize, usize) {
    let n = m.nrows();
    let mut level = vec![usize::MAX; n];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &u in m.row(v).0 {
            if !visited[u] && level[u] == usize::MAX {
                level[u] = level[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let depth = level[last];
    let best = (0..n)
        .filter(|&i| level[i] == depth)
        .min_by_key(|&i| (degree[i], i))
        .unwrap_or(last);
    (best, depth)
}

/// Bandwidth of the symmetric matrix under an ordering (`perm[new] = old`).
pub fn bandwidth(m: &CsrMatrix, perm: &[usize]) -> usize {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut bw = 0;
    for r in 0..m.nrows() {
        for &c in m.row(r).0 {
            bw = bw.max(inv[r].abs_diff(inv[c]));
        }
    }
    bw
}

/// `P A Pᵀ = L D Lᵀ` with unit lower triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct SymFactor {
    n: usize,
    perm: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    diag: Vec<f64>,
}

impl SymFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.l_val.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, b.len(), "ldlt solve right-hand side")?;
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yj;
                }
            }
        }
        for (yj, d) in y.iter_mut().zip(&self.diag) {
            *yj /= d;
        }
        for j in (0..n).rev() {
            let mut s = y[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                s -= self.l_val[p] * y[self.l_idx[p]];
            }
            y[j] = s;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}

impl LinearOperator for SymFactor {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y);
    }
}

/// Factors a symmetric positive definite matrix using an RCM ordering. Only
/// the entries with `row <= col` in the permuted ordering are read.
pub fn ldlt_factor(m: &CsrMatrix) -> Result<SymFactor> {
    check_dim(m.nrows(), m.ncols(), "ldlt of non-square matrix")?;
    let perm = reverse_cuthill_mckee(m);
    ldlt_factor_with(m, perm)
}

/// As [`ldlt_factor`] with a caller-supplied ordering (`perm[new] = old`).
pub fn ldlt_factor_with(m: &CsrMatrix, perm: Vec<usize>) -> Result<SymFactor> {
    let n = m.nrows();
    check_dim(n, perm.len(), "ordering length")?;
    let mut pinv = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || pinv[old] != usize::MAX {
            return Err(BiotError::InvalidArgument("ordering is not a permutation".into()));
        }
        pinv[old] = new;
    }

    // Symbolic: elimination tree and column counts.
    let mut parent = vec![usize::MAX; n];
    let mut flag = vec![usize::MAX; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        let (cols, _) = m.row(perm[k]);
        for &c in cols {
            let mut i = pinv[c];
            if i < k {
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
    }
    let mut l_ptr = vec![0usize; n + 1];
    for k in 0..n {
        l_ptr[k + 1] = l_ptr[k] + lnz[k];
    }
    let total = l_ptr[n];
    let mut l_idx = vec![0usize; total];
    let mut l_val = vec![0.0; total];
    let mut diag = vec![0.0; n];

    // Numeric.
    let mut y = vec![0.0; n];
    let mut pattern = vec![0usize; n];
    lnz.iter_mut().for_each(|v| *v = 0);
    flag.iter_mut().for_each(|v| *v = usize::MAX);
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        let (cols, vals) = m.row(perm[k]);
        for (&c, &v) in cols.iter().zip(vals) {
            let mut i = pinv[c];
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
        let mut dk = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let start = l_ptr[i];
            let end = start + lnz[i];
            for p in start..end {
                y[l_idx[p]] -= l_val[p] * yi;
            }
            let lki = yi / diag[i];
            dk -= lki * yi;
            l_idx[end] = k;
            l_val[end] = lki;
            lnz[i] += 1;
        }
        if !(dk > 0.0) || !dk.is_finite() {
            return Err(BiotError::NotSpd {
                row: perm[k],
                pivot: dk,
            });
        }
        diag[k] = dk;
    }

    Ok(SymFactor {
        n,
        perm,
        l_ptr,
        l_idx,
        l_val,
        diag,
    })
}
