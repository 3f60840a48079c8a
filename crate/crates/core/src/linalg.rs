//! Dense row-major matrices and the symmetric distance matrix type.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        crate::error::check_dim("matrix data length", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            crate::error::check_dim("matrix row length", cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
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
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
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

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        crate::error::check_dim("matmul inner dimension", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`, i.e. the matrix of row-by-row dot products.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        crate::error::check_dim("row dot products", self.cols, other.cols)?;
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `max |self − other|` over all entries.
    pub fn sup_distance(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| f64::max(acc, libm::fabs(a - b)))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, a| f64::max(acc, libm::fabs(*a)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Inner product with four independent partial sums, which lets the
/// compiler vectorize the reduction.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Tolerance for the symmetry invariant of [`DistanceMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Symmetric, nonnegative, finite `n × n` matrix.
///
/// The diagonal is allowed to be nonzero: fixed points of the
/// independent-coupling operator are diffuse.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    /// Validates squareness, finiteness, nonnegativity and symmetry within
    /// [`SYMMETRY_TOL`]. The stored matrix is re-symmetrized exactly.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Validation(format!(
                "distance matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "distance ({i},{j}) = {v} is not finite and nonnegative"
                    )));
                }
                if libm::fabs(v - m[(j, i)]) > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "distance matrix not symmetric at ({i},{j}): {v} vs {}",
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self(symmetrize(m)))
    }

    /// Wraps a matrix that is already known to satisfy the invariants.
    pub(crate) fn from_symmetric(m: Matrix) -> Self {
        debug_assert_eq!(m.rows(), m.cols());
        Self(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn sup_distance(&self, other: &DistanceMatrix) -> f64 {
        self.0.sup_distance(&other.0)
    }

    pub fn max_entry(&self) -> f64 {
        self.0.max_abs()
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(mut m: Matrix) -> Matrix {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_against_loop() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, 0.5], [0.0, -1.0], [2.0, 1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[7.0, 1.5, 16.0, 3.0]);
        let bt = b.transpose();
        assert_eq!(a.matmul_transposed(&bt).unwrap(), c);
    }

    #[test]
    fn distance_matrix_rejects_asymmetry_and_negatives() {
        let asym = Matrix::from_rows(&[[0.0, 1.0], [1.1, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(asym).is_err());
        let neg = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(neg).is_err());
        let diffuse = Matrix::from_rows(&[[0.5, 1.0], [1.0, 0.5]]).unwrap();
        assert!(DistanceMatrix::new(diffuse).is_ok());
    }
}
