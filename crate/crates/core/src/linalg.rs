//! Dense linear algebra for desk-scale problems: row-major matrices,
//! Cholesky, LU solves, weighted least-norm solves and rank/null-space
//! computations used by the LP and QP solvers.

use crate::error::{FlexError, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have the same length;
    /// `cols` is needed to describe an empty (0-row) matrix.
    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(FlexError::Dimension(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(FlexError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(FlexError::Dimension(format!(
                "pushed row has length {}, expected {}",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Submatrix built from the listed rows.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(FlexError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ y`
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetrized(&self) -> Matrix {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: Matrix,
}

impl CholeskyFactor {
    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Identity factor of size `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            l: Matrix::identity(n),
        }
    }

    /// `L x`
    pub fn mul_l(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..=i).map(|k| self.l[(i, k)] * x[k]).sum())
            .collect()
    }

    /// `Lᵀ x`
    pub fn mul_lt(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (i..n).map(|k| self.l[(k, i)] * x[k]).sum())
            .collect()
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_l(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y` by back substitution.
    pub fn solve_lt(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `A x = b` with `A = L Lᵀ`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lt(&self.solve_l(b))
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> Matrix {
        self.l.matmul(&self.l.transpose()).expect("square factor")
    }

    /// `‖L⁻¹ v‖²`, i.e. `vᵀ A⁻¹ v`.
    pub fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let w = self.solve_l(v);
        dot(&w, &w)
    }
}

/// Cholesky factorization of a symmetric matrix. Fails with `NotSpd` when a
/// pivot drops to `1e-13 · max diag(A)` or below.
pub fn cholesky(a: &Matrix) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(FlexError::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a[(i, i)]));
    let floor = 1e-13 * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) || max_diag <= 0.0 {
            return Err(FlexError::NotSpd(format!("pivot {d:.3e} at column {j}")));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(CholeskyFactor { l })
}

/// LU factorization with partial pivoting, `P A = L U` stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(FlexError::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let tol = 1e-12 * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv < tol || pv == 0.0 {
                return Err(FlexError::Singular { step: k, pivot: pv });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let piv = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Solves the square system `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(FlexError::Dimension(format!(
            "rhs of length {} for {} rows",
            b.len(),
            a.rows()
        )));
    }
    Ok(Lu::new(a)?.solve(b))
}

/// Minimizes `xᵀ W x` subject to `A x = b` where `W = L Lᵀ`.
///
/// Whitens with `u = Lᵀ x`, so the problem becomes the minimum Euclidean
/// norm solution of `(A L⁻ᵀ) u = b`.
pub fn least_norm(a: &Matrix, b: &[f64], w: &CholeskyFactor) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if m > n || b.len() != m || w.dim() != n {
        return Err(FlexError::Dimension(format!(
            "least_norm with A {m}x{n}, b {}, W {}",
            b.len(),
            w.dim()
        )));
    }
    // rows of B = A L⁻ᵀ are (L⁻¹ a_i)ᵀ
    let rows: Vec<Vec<f64>> = (0..m).map(|i| w.solve_l(a.row(i))).collect();
    let bmat = Matrix::from_rows(n, &rows)?;
    let rank = row_rank(&bmat, 1e-10);
    if rank < m {
        return Err(FlexError::RankDeficient { rank, rows: m });
    }
    let mut gram = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = dot(bmat.row(i), bmat.row(j));
        }
    }
    let y = solve_linear(&gram, b)?;
    let u = bmat.tr_matvec(&y);
    Ok(w.solve_lt(&u))
}

/// Numerical row rank by Gaussian elimination with complete pivoting; pivots
/// at or below `tol · max|A|` count as zero.
pub fn row_rank(a: &Matrix, tol: f64) -> usize {
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0;
    }
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let mut rank = 0;
    for _ in 0..rows.min(cols) {
        let mut best = (0, 0, 0.0);
        for i in rank..rows {
            for j in rank..cols {
                let v = m[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= tol * scale {
            break;
        }
        let (pi, pj, _) = best;
        for j in 0..cols {
            let t = m[(pi, j)];
            m[(pi, j)] = m[(rank, j)];
            m[(rank, j)] = t;
        }
        for i in 0..rows {
            let t = m[(i, pj)];
            m[(i, pj)] = m[(i, rank)];
            m[(i, rank)] = t;
        }
        let piv = m[(rank, rank)];
        for i in (rank + 1)..rows {
            let f = m[(i, rank)] / piv;
            if f != 0.0 {
                for j in rank..cols {
                    m[(i, j)] -= f * m[(rank, j)];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Orthonormal basis of the null space of `A` (as columns of an `n × k`
/// matrix) together with the numerical rank, via Householder QR with column
/// pivoting of `Aᵀ`.
pub fn null_space(a: &Matrix, tol: f64) -> (Matrix, usize) {
    let n = a.cols();
    let m = a.rows();
    // work on Aᵀ (n × m); columns are the rows of A
    let mut r = a.transpose();
    let mut q = Matrix::identity(n);
    let scale = a.max_abs();
    let mut norms: Vec<f64> = (0..m).map(|j| norm2(&r.col(j))).collect();
    let mut rank = 0;
    let mut cols: Vec<usize> = (0..m).collect();
    for k in 0..m.min(n) {
        // column pivoting
        let (p, pn) =
            (k..m)
                .map(|j| (j, norms[cols[j]]))
                .fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if scale == 0.0 || pn <= tol * scale {
            break;
        }
        cols.swap(k, p);
        let c = cols[k];
        // Householder reflector on column c, rows k..n
        let x: Vec<f64> = (k..n).map(|i| r[(i, c)]).collect();
        let alpha = if x[0] >= 0.0 { -norm2(&x) } else { norm2(&x) };
        let mut v = x.clone();
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn > 0.0 {
            for vi in v.iter_mut() {
                *vi /= vn;
            }
            for j in 0..m {
                let s: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
                for i in k..n {
                    r[(i, j)] -= 2.0 * v[i - k] * s;
                }
            }
            // accumulate Q = Q H
            for i in 0..n {
                let s: f64 = (k..n).map(|t| q[(i, t)] * v[t - k]).sum();
                for t in k..n {
                    q[(i, t)] -= 2.0 * s * v[t - k];
                }
            }
        }
        for &j in cols.iter().skip(k + 1) {
            norms[j] = (k + 1..n)
                .map(|i| r[(i, j)] * r[(i, j)])
                .sum::<f64>()
                .sqrt();
        }
        rank += 1;
    }
    let mut z = Matrix::zeros(n, n - rank);
    for i in 0..n {
        for j in rank..n {
            z[(i, j - rank)] = q[(i, j)];
        }
    }
    (z, rank)
}

/// Diagonally pivoted Cholesky of a symmetric positive semidefinite matrix.
///
/// Returns `(perm, L, rank)` with `P A Pᵀ ≈ L Lᵀ` where only the first `rank`
/// columns of `L` are populated. A pivot below `-tol` means the input is
/// indefinite.
pub(crate) fn pivoted_cholesky(a: &Matrix, tol: f64) -> Result<(Vec<usize>, Matrix, usize)> {
    let n = a.rows();
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = Matrix::zeros(n, n);
    let scale = (0..n)
        .fold(0.0_f64, |m, i| m.max(a[(i, i)].abs()))
        .max(1e-300);
    let mut rank = 0;
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, w[(i, i)]))
            .fold((k, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if pv <= tol * scale {
            // remaining Schur complement must be ~0 for a PSD input
            for i in k..n {
                if w[(i, i)] < -1e-8 * scale {
                    return Err(FlexError::NotPsd(format!(
                        "negative pivot {:.3e}",
                        w[(i, i)]
                    )));
                }
            }
            break;
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let t = w[(p, j)];
                w[(p, j)] = w[(k, j)];
                w[(k, j)] = t;
            }
            for i in 0..n {
                let t = w[(i, p)];
                w[(i, p)] = w[(i, k)];
                w[(i, k)] = t;
            }
            for j in 0..k {
                let t = l[(p, j)];
                l[(p, j)] = l[(k, j)];
                l[(k, j)] = t;
            }
        }
        let d = pv.sqrt();
        l[(k, k)] = d;
        for i in (k + 1)..n {
            l[(i, k)] = w[(i, k)] / d;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                w[(i, j)] -= l[(i, k)] * l[(j, k)];
            }
        }
        rank += 1;
    }
    Ok((perm, l, rank))
}
