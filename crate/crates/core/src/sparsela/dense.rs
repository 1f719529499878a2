//! Small dense kernels: Cholesky, LU solves, cyclic Jacobi eigenvalues and the
//! symmetric-definite generalized eigenproblem. Intended for verification at
//! a few hundred unknowns, not for production solves.

use std::ops::{Index, IndexMut};

use crate::error::{check_dim, BiotError, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.ncols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            m.data[r * ncols..(r + 1) * ncols].copy_from_slice(row);
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim(self.ncols, other.nrows, "matmul inner dimension")?;
        let mut out = Self::zeros(self.nrows, other.ncols);
        for r in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.ncols..(r + 1) * other.ncols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ncols, x.len(), "dense matvec")?;
        Ok((0..self.nrows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn add_scaled(&mut self, s: f64, other: &DenseMatrix) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `self += s * u vᵀ`.
    pub fn add_outer(&mut self, s: f64, u: &[f64], v: &[f64]) {
        for (r, &ur) in u.iter().enumerate() {
            for (c, &vc) in v.iter().enumerate() {
                self[(r, c)] += s * ur * vc;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetrize(&mut self) {
        for r in 0..self.nrows {
            for c in r + 1..self.ncols {
                let v = 0.5 * (self[(r, c)] + self[(c, r)]);
                self[(r, c)] = v;
                self[(c, r)] = v;
            }
        }
    }

    /// Principal submatrix on the given index list.
    pub fn principal(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len(), idx.len());
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                m[(i, j)] = self[(r, c)];
            }
        }
        m
    }

    /// Lower Cholesky factor `L` with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        check_dim(self.nrows, self.ncols, "cholesky of non-square matrix")?;
        let n = self.nrows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(BiotError::NotSpd { row: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(l)
    }

    /// Solves `self x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = self.solve_many(&DenseMatrix::from_rows(&b.iter().map(|&v| vec![v]).collect::<Vec<_>>()))?;
        Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
    }

    /// Solves `self X = B` for a block of right-hand sides.
    pub fn solve_many(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.nrows, self.ncols, "solve with non-square matrix")?;
        check_dim(self.nrows, b.nrows, "solve right-hand side")?;
        let n = self.nrows;
        let m = b.ncols;
        let mut a = self.clone();
        let mut x = b.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if pval <= 1e-300 * scale {
                return Err(BiotError::InvalidState(format!("singular matrix at column {k}")));
            }
            if piv != k {
                for c in 0..n {
                    a.data.swap(k * n + c, piv * n + c);
                }
                for c in 0..m {
                    x.data.swap(k * m + c, piv * m + c);
                }
            }
            let akk = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / akk;
                if f == 0.0 {
                    continue;
                }
                for c in k..n {
                    a[(i, c)] -= f * a[(k, c)];
                }
                for c in 0..m {
                    x[(i, c)] -= f * x[(k, c)];
                }
            }
        }
        for k in (0..n).rev() {
            for c in 0..m {
                let mut s = x[(k, c)];
                for j in k + 1..n {
                    s -= a[(k, j)] * x[(j, c)];
                }
                x[(k, c)] = s / a[(k, k)];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.solve_many(&DenseMatrix::identity(self.nrows))
    }

    /// Numerical rank from the eigenvalues of `self selfᵀ`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let gram = self.matmul(&self.transpose()).expect("shapes agree");
        let eig = symmetric_eigenvalues(&gram);
        let top = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        eig.iter().filter(|&&v| v > rel_tol * top).count()
    }
}

/// Cyclic Jacobi eigenvalue iteration. Returns ascending eigenvalues and, if
/// requested, the eigenvectors as the columns of a matrix.
pub fn jacobi_eigen(a: &DenseMatrix, want_vectors: bool) -> (Vec<f64>, Option<DenseMatrix>) {
    assert_eq!(a.nrows, a.ncols, "eigenvalues of a non-square matrix");
    let n = a.nrows;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = want_vectors.then(|| DenseMatrix::identity(n));
    let total: f64 = m.frobenius_norm();
    if total == 0.0 || n < 2 {
        let eig = (0..n).map(|i| m[(i, i)]).collect();
        return (eig, v);
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                // Skip rotations that cannot change the diagonal in floating point.
                if apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let eig = order.iter().map(|&i| m[(i, i)]).collect();
    let v = v.map(|v| {
        let mut sorted = DenseMatrix::zeros(n, n);
        for (new_c, &c) in order.iter().enumerate() {
            for r in 0..n {
                sorted[(r, new_c)] = v[(r, c)];
            }
        }
        sorted
    });
    (eig, v)
}

pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    jacobi_eigen(a, false).0
}

/// Generalized eigenvalues of `A x = λ B x` with `B` symmetric positive definite,
/// ascending. Reduces to `L⁻¹ A L⁻ᵀ` with `B = L Lᵀ`.
pub fn dense_sym_geig(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(dense_sym_geig_vectors(a, b, false)?.0)
}

/// As [`dense_sym_geig`], optionally returning `B`-orthonormal eigenvectors.
pub fn dense_sym_geig_vectors(
    a: &DenseMatrix,
    b: &DenseMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<DenseMatrix>)> {
    check_dim(a.nrows, b.nrows, "generalized eigenproblem")?;
    check_dim(a.nrows, a.ncols, "generalized eigenproblem")?;
    let n = a.nrows;
    let l = b.cholesky()?;
    // C = L⁻¹ A L⁻ᵀ, computed as two triangular solves.
    let mut y = a.clone();
    forward_substitute_columns(&l, &mut y);
    let mut c = y.transpose();
    forward_substitute_columns(&l, &mut c);
    c.symmetrize();
    let (eig, vecs) = jacobi_eigen(&c, want_vectors);
    let vecs = vecs.map(|mut z| {
        // x = L⁻ᵀ z
        for col in 0..n {
            for i in (0..n).rev() {
                let mut s = z[(i, col)];
                for k in i + 1..n {
                    s -= l[(k, i)] * z[(k, col)];
                }
                z[(i, col)] = s / l[(i, i)];
            }
        }
        z
    });
    Ok((eig, vecs))
}

/// Overwrites every column `y` of `x` with `L⁻¹ y`.
fn forward_substitute_columns(l: &DenseMatrix, x: &mut DenseMatrix) {
    let n = l.nrows;
    for i in 0..n {
        let lii = l[(i, i)];
        for c in 0..x.ncols {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / lii;
        }
    }
}

/// Householder vector `v` (unit length) whose reflector `I - 2 v vᵀ` maps `m`
/// onto a multiple of the first unit vector. Columns `1..n` of the reflector are
/// then an orthonormal basis of the orthogonal complement of `m`.
pub fn householder_for(m: &[f64]) -> Vec<f64> {
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = m.to_vec();
    let alpha = if m[0] >= 0.0 { -norm } else { norm };
    v[0] -= alpha;
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= vn);
    v
}

/// `H A H` for the reflector `H = I - 2 v vᵀ`, with `A` symmetric.
pub fn reflect_symmetric(a: &DenseMatrix, v: &[f64]) -> DenseMatrix {
    let av = a.matvec(v).expect("square");
    let vav: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
    let mut out = a.clone();
    out.add_outer(-2.0, v, &av);
    out.add_outer(-2.0, &av, v);
    out.add_outer(4.0 * vav, v, v);
    out.symmetrize();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                g[(r, c)] = rng.random_range(-1.0..1.0);
            }
        }
        let mut s = g.transpose().matmul(&g).unwrap();
        s.add_scaled(1.0, &DenseMatrix::identity(n));
        s
    }

    #[test]
    fn identical_pencil_has_unit_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_spd(7, &mut rng);
        for e in dense_sym_geig(&b, &b).unwrap() {
            assert!((e - 1.0).abs() < 1e-12);
        }
        let mut two_b = b.clone();
        two_b.add_scaled(1.0, &b);
        for e in dense_sym_geig(&two_b, &b).unwrap() {
            assert!((e - 2.0).abs() < 1e-12);
        }
    }

    /// Brute-force oracle: the characteristic polynomial det(A - t B) changes
    /// sign across every simple generalized eigenvalue.
    #[test]
    fn random_pencil_matches_determinant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 6;
        let b = random_spd(n, &mut rng);
        let mut a = DenseMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..=r {
                let v = rng.random_range(-2.0..2.0);
                a[(r, c)] = v;
                a[(c, r)] = v;
            }
        }
        let (eig, vecs) = dense_sym_geig_vectors(&a, &b, true).unwrap();
        let vecs = vecs.unwrap();
        let det = |t: f64| {
            let mut m = a.clone();
            m.add_scaled(-t, &b);
            lu_det(&m)
        };
        for (k, &e) in eig.iter().enumerate() {
            let d = 1e-6 * e.abs().max(1.0);
            assert!(det(e - d) * det(e + d) < 0.0, "no sign change at {e}");
            // residual ‖A v − λ B v‖ ≤ 1e-8 ‖v‖
            let v: Vec<f64> = (0..n).map(|r| vecs[(r, k)]).collect();
            let av = a.matvec(&v).unwrap();
            let bv = b.matvec(&v).unwrap();
            let res = av.iter().zip(&bv).map(|(x, y)| (x - e * y).powi(2)).sum::<f64>().sqrt();
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * vn);
        }
        assert!(eig.windows(2).all(|w| w[0] <= w[1]));
    }

    fn lu_det(m: &DenseMatrix) -> f64 {
        let n = m.nrows();
        let mut a = m.clone();
        let mut det = 1.0;
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap();
            if piv != k {
                for c in 0..n {
                    let t = a[(k, c)];
                    a[(k, c)] = a[(piv, c)];
                    a[(piv, c)] = t;
                }
                det = -det;
            }
            det *= a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                for c in k..n {
                    a[(i, c)] -= f * a[(k, c)];
                }
            }
        }
        det
    }

    #[test]
    fn non_spd_b_is_rejected() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(dense_sym_geig(&a, &b), Err(BiotError::NotSpd { .. })));
    }

    #[test]
    fn solve_and_inverse() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = a.solve(&[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let ai = a.inverse().unwrap();
        let id = a.matmul(&ai).unwrap();
        assert!((id[(0, 0)] - 1.0).abs() < 1e-15 && id[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn householder_complement_is_orthogonal_to_m() {
        let m = [0.3, -1.0, 2.0, 0.5];
        let v = householder_for(&m);
        // H m = alpha e1, so columns 1.. of H are orthogonal to m.
        let h = {
            let mut h = DenseMatrix::identity(4);
            h.add_outer(-2.0, &v, &v);
            h
        };
        for c in 1..4 {
            let dot: f64 = (0..4).map(|r| h[(r, c)] * m[r]).sum();
            assert!(dot.abs() < 1e-14);
        }
        let a = random_spd(4, &mut ChaCha8Rng::seed_from_u64(3));
        let hah = h.matmul(&a).unwrap().matmul(&h).unwrap();
        let fast = reflect_symmetric(&a, &v);
        let mut diff = hah.clone();
        diff.add_scaled(-1.0, &fast);
        assert!(diff.max_abs() < 1e-13);
    }

    #[test]
    fn rank_of_rank_deficient_matrix() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        assert_eq!(a.rank(1e-12), 1);
    }
}
