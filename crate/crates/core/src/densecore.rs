//! Small dense linear algebra: row-major matrices, pivoted LU, and
//! block-wise application of Kronecker-structured operators `(S ⊗ G) v`.
//!
//! Every matrix in this crate is tiny (a handful of basis coefficients
//! times the phase-space dimension), so nothing here tries to be clever
//! about cache blocking.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::DimensionError;

/// Pivots smaller than this (relative to the largest entry of the matrix)
/// flag the factorization as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, DimensionError> {
        if self.cols != rhs.rows {
            return Err(DimensionError::new(
                "matmul",
                format!("{}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(l, j)];
                }
            }
        }
        Ok(out)
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, DimensionError> {
        if x.len() != self.cols {
            return Err(DimensionError::new(
                "matvec",
                format!("{}x{} * vector of length {}", self.rows, self.cols, x.len()),
            ));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Largest absolute entry difference; `f64::INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Dense Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let (p, q) = (rhs.rows, rhs.cols);
        Matrix::from_fn(self.rows * p, self.cols * q, |i, j| {
            self[(i / p, j / q)] * rhs[(i % p, j % q)]
        })
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

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Pivoted LU factorization `P M = L U`, stored compactly.
#[derive(Clone, Debug)]
pub struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    singular: bool,
}

impl LuFactor {
    /// Factorizes a square matrix with partial pivoting. Never fails: a
    /// numerically singular input sets [`LuFactor::is_singular`] and
    /// [`LuFactor::solve`] refuses to run.
    pub fn new(m: &Matrix) -> Result<Self, DimensionError> {
        if !m.is_square() {
            return Err(DimensionError::new(
                "lu_factor",
                format!("matrix is {}x{}", m.rows(), m.cols()),
            ));
        }
        let n = m.rows();
        let mut lu = m.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut singular = !m.is_finite() || (n > 0 && scale == 0.0);
        let tol = PIVOT_THRESHOLD * scale;

        for col in 0..n {
            let (piv, piv_abs) =
                (col..n)
                    .map(|r| (r, lu[r * n + col].abs()))
                    .fold(
                        (col, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(piv_abs > tol) {
                singular = true;
                continue;
            }
            if piv != col {
                for j in 0..n {
                    lu.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
            }
            let d = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / d;
                lu[r * n + col] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        lu[r * n + j] -= factor * lu[col * n + j];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            singular,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `M x = b` in place. Returns `false` (leaving `b` untouched)
    /// when the factor is singular.
    pub fn solve_in_place(&self, b: &mut [f64]) -> bool {
        if self.singular {
            return false;
        }
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
        true
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        if b.len() != self.n {
            return None;
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x).then_some(x)
    }
}

/// Block vector of `blocks` contiguous blocks, each of length `block_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    block_dim: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(blocks: usize, block_dim: usize) -> Self {
        Self {
            block_dim,
            data: vec![0.0; blocks * block_dim],
        }
    }

    pub fn from_vec(block_dim: usize, data: Vec<f64>) -> Result<Self, DimensionError> {
        if block_dim == 0 || data.len() % block_dim != 0 {
            return Err(DimensionError::new(
                "block_vector",
                format!("length {} is not a multiple of {}", data.len(), block_dim),
            ));
        }
        Ok(Self { block_dim, data })
    }

    #[inline]
    pub fn blocks(&self) -> usize {
        if self.block_dim == 0 {
            0
        } else {
            self.data.len() / self.block_dim
        }
    }

    #[inline]
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    #[inline]
    pub fn block(&self, j: usize) -> &[f64] {
        &self.data[j * self.block_dim..(j + 1) * self.block_dim]
    }

    #[inline]
    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.block_dim..(j + 1) * self.block_dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &BlockVector) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn max_abs_diff(&self, other: &BlockVector) -> f64 {
        if self.data.len() != other.data.len() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A linear map on a `dim()`-dimensional space, given either as an explicit
/// matrix or matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl LinearOperator for Matrix {
    fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out);
    }
}

/// Matrix-free operator backed by a closure `f(x, out)`.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

fn check_kron_dims(s: &Matrix, d: usize, v: &BlockVector) -> Result<(), DimensionError> {
    if !s.is_square() || s.rows() != v.blocks() || d != v.block_dim() {
        return Err(DimensionError::new(
            "kron_apply",
            format!(
                "S is {}x{}, G is {d}x{d}, v has {} blocks of {}",
                s.rows(),
                s.cols(),
                v.blocks(),
                v.block_dim()
            ),
        ));
    }
    Ok(())
}

/// `(S ⊗ G) v`, computed as `out_i = Σ_j S_ij (G v_j)` so `G` is applied
/// once per block.
pub fn kron_apply<G: LinearOperator + ?Sized>(
    s: &Matrix,
    g: &G,
    v: &BlockVector,
) -> Result<BlockVector, DimensionError> {
    let d = g.dim();
    check_kron_dims(s, d, v)?;
    let blocks = v.blocks();
    let mut gv = BlockVector::zeros(blocks, d);
    for j in 0..blocks {
        g.apply(v.block(j), gv.block_mut(j));
    }
    Ok(kron_scalar_apply_unchecked(s, &gv))
}

/// `(S ⊗ I_d) v`.
pub fn kron_scalar_apply(s: &Matrix, v: &BlockVector) -> Result<BlockVector, DimensionError> {
    check_kron_dims(s, v.block_dim(), v)?;
    Ok(kron_scalar_apply_unchecked(s, v))
}

fn kron_scalar_apply_unchecked(s: &Matrix, v: &BlockVector) -> BlockVector {
    let blocks = v.blocks();
    let mut out = BlockVector::zeros(blocks, v.block_dim());
    for i in 0..blocks {
        let oi = out.block_mut(i);
        for j in 0..blocks {
            let sij = s[(i, j)];
            if sij == 0.0 {
                continue;
            }
            for (o, x) in oi.iter_mut().zip(v.block(j)) {
                *o += sij * x;
            }
        }
    }
    out
}

/// Applies `G` to every block independently, i.e. `(I_s ⊗ G) v`.
pub fn blockwise_apply<G: LinearOperator + ?Sized>(g: &G, v: &BlockVector) -> BlockVector {
    let mut out = BlockVector::zeros(v.blocks(), v.block_dim());
    for j in 0..v.blocks() {
        g.apply(v.block(j), out.block_mut(j));
    }
    out
}

/// Inverts a small well-conditioned matrix through its LU factor.
pub fn invert(m: &Matrix) -> Option<Matrix> {
    let lu = LuFactor::new(m).ok()?;
    let n = m.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        if !lu.solve_in_place(&mut e) {
            return None;
        }
        for i in 0..n {
            inv[(i, j)] = e[i];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hilbert(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64)
    }

    #[test]
    fn identity_solve_is_noop() {
        let lu = LuFactor::new(&Matrix::identity(3)).unwrap();
        assert_eq!(lu.solve(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn permutation_solve_swaps() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let lu = LuFactor::new(&m).unwrap();
        assert_eq!(lu.solve(&[2.0, 7.0]).unwrap(), vec![7.0, 2.0]);
    }

    #[test]
    fn hilbert4_matches_exact_inverse() {
        // Exact integer inverse of the 4x4 Hilbert matrix.
        let inv = [
            [16.0, -120.0, 240.0, -140.0],
            [-120.0, 1200.0, -2700.0, 1680.0],
            [240.0, -2700.0, 6480.0, -4200.0],
            [-140.0, 1680.0, -4200.0, 2800.0],
        ];
        let h = hilbert(4);
        let v = [1.0, 2.0, -1.0, 0.5];
        let exact: Vec<f64> = inv
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let x = LuFactor::new(&h).unwrap().solve(&v).unwrap();
        let err = x
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = exact.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(err / scale < 1e-10, "rel err {}", err / scale);

        let r = h.matvec(&x).unwrap();
        let res = r
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(res / 2.0 <= 1e-10);
    }

    #[test]
    fn singular_matrix_is_flagged() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let lu = LuFactor::new(&m).unwrap();
        assert!(lu.is_singular());
        assert!(lu.solve(&[1.0, 1.0]).is_none());

        assert!(LuFactor::new(&Matrix::zeros(3, 3)).unwrap().is_singular());
        let nan = Matrix::from_rows(&[&[f64::NAN, 0.0], &[0.0, 1.0]]);
        assert!(LuFactor::new(&nan).unwrap().is_singular());
    }

    #[test]
    fn non_square_rejected() {
        assert!(LuFactor::new(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn kron_identity_is_noop() {
        let v = BlockVector::from_vec(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let out = kron_apply(&Matrix::identity(3), &Matrix::identity(2), &v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn kron_swap_and_scale() {
        let s = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let g = Matrix::from_rows(&[&[3.0]]);
        let v = BlockVector::from_vec(1, vec![2.0, -5.0]).unwrap();
        let out = kron_apply(&s, &g, &v).unwrap();
        assert_eq!(out.as_slice(), &[-15.0, 6.0]);
    }

    #[test]
    fn kron_matrix_free_operator() {
        let s = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, -1.0]]);
        let g = Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let op = FnOperator::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -x[0];
        });
        let v = BlockVector::from_vec(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            kron_apply(&s, &g, &v).unwrap(),
            kron_apply(&s, &op, &v).unwrap()
        );
    }

    #[test]
    fn kron_dimension_mismatch() {
        let v = BlockVector::from_vec(2, vec![0.0; 6]).unwrap();
        assert!(kron_apply(&Matrix::identity(2), &Matrix::identity(2), &v).is_err());
        assert!(kron_apply(&Matrix::identity(3), &Matrix::identity(3), &v).is_err());
        assert!(kron_scalar_apply(&Matrix::identity(2), &v).is_err());
    }

    #[test]
    fn kron_scalar_matches_identity_operator() {
        let s = Matrix::from_rows(&[&[0.3, -1.2, 2.0], &[1.0, 0.0, 0.5], &[-0.7, 4.0, 1.0]]);
        let v = BlockVector::from_vec(2, vec![1.0, -2.0, 0.25, 3.0, 5.0, -1.5]).unwrap();
        assert_eq!(
            kron_scalar_apply(&s, &v).unwrap(),
            kron_apply(&s, &Matrix::identity(2), &v).unwrap()
        );
    }

    #[test]
    fn invert_roundtrip() {
        let m = Matrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, -1.0], &[0.0, 2.0, 5.0]]);
        let inv = invert(&m).unwrap();
        assert!(inv.matmul(&m).unwrap().max_abs_diff(&Matrix::identity(3)) < 1e-14);
        assert!(invert(&Matrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn dense_kron_layout() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Matrix::from_rows(&[&[0.0, 5.0], &[6.0, 7.0]]);
        let k = a.kron(&b);
        assert_eq!(k.row(0), &[0.0, 5.0, 0.0, 10.0]);
        assert_eq!(k.row(3), &[18.0, 21.0, 24.0, 28.0]);
    }
}
