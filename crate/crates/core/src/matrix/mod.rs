//! Dense row-major matrices and the numerical primitives built on them.
//!
//! Element `(i, j)` of a `rows × cols` matrix lives at `data[i * cols + j]`.
//! Products are dispatched to `matrixmultiply`'s blocked `dgemm`, which
//! accepts arbitrary strides, so transposed operands are never copied.

mod io;
mod qr;
mod random;
mod spectral;

pub use io::{read_csv, read_nmfb, write_csv, write_nmfb, NMFB_MAGIC, NMFB_VERSION};
pub use qr::{householder_basis, orthonormal_basis, HouseholderBasis, RANK_TOLERANCE};
pub(crate) use random::{gaussian_from_rng, seeded_rng, uniform_open_from_rng};
pub use random::{gaussian_matrix, uniform_open_matrix, RngSeed};
pub use spectral::{
    gram_spectral_radius, spectral_norm_sq, SPECTRAL_MAX_ITERS, SPECTRAL_SAFETY, SPECTRAL_TOL,
};

use crate::error::{Error, Result};
use std::fmt;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{}", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list().entries(self.row_iter()).finish()?;
        }
        Ok(())
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

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
            m.data[i * n + i] = 1.0;
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

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!(
                    "row {i} has {} entries, expected {cols}",
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

    /// Builds a diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.data.len()];
        // blocked to keep both sides cache-resident on large inputs
        const B: usize = 32;
        for ib in (0..self.rows).step_by(B) {
            for jb in (0..self.cols).step_by(B) {
                for i in ib..(ib + B).min(self.rows) {
                    for j in jb..(jb + B).min(self.cols) {
                        out[j * self.rows + i] = self.data[i * self.cols + j];
                    }
                }
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    /// `self · other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        gemm(self, Op::N, other, Op::N)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        gemm(self, Op::T, other, Op::N)
    }

    /// `self · other` written into `out`, which must be `self.rows() × other.cols()`.
    pub fn matmul_into(&self, other: &DenseMatrix, out: &mut DenseMatrix) -> Result<()> {
        gemm_into(self, Op::N, other, Op::N, out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        gemm(self, Op::N, other, Op::T)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "subtraction")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "addition")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Sum of squared entries.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `‖self − other‖_F`, computed without materializing the difference.
    pub fn distance(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(other, "distance")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(other, "comparison")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Frobenius inner product `⟨self, other⟩`.
    pub fn dot(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(other, "inner product")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub(crate) fn check_same_shape(&self, other: &DenseMatrix, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Frobenius norm `√(Σ entries²)`.
pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.frobenius_norm_sq().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    N,
    T,
}

fn product_shape(a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op) -> Result<(usize, usize)> {
    let (m, k) = match op_a {
        Op::N => (a.rows, a.cols),
        Op::T => (a.cols, a.rows),
    };
    let (k2, n) = match op_b {
        Op::N => (b.rows, b.cols),
        Op::T => (b.cols, b.rows),
    };
    if k != k2 {
        return Err(Error::dim(format!(
            "product of {m}x{k} and {k2}x{n} operands"
        )));
    }
    Ok((m, n))
}

fn gemm(a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op) -> Result<DenseMatrix> {
    let (m, n) = product_shape(a, op_a, b, op_b)?;
    let mut out = DenseMatrix::zeros(m, n);
    gemm_into(a, op_a, b, op_b, &mut out)?;
    Ok(out)
}

/// Overwrites `out` with `op(a)·op(b)`; `out` must already have the product's shape.
fn gemm_into(
    a: &DenseMatrix,
    op_a: Op,
    b: &DenseMatrix,
    op_b: Op,
    out: &mut DenseMatrix,
) -> Result<()> {
    let (m, n) = product_shape(a, op_a, b, op_b)?;
    if out.shape() != (m, n) {
        return Err(Error::dim(format!(
            "product is {m}x{n}, output buffer is {}x{}",
            out.rows, out.cols
        )));
    }
    let k = match op_a {
        Op::N => a.cols,
        Op::T => a.rows,
    };
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        out.data.iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }
    // (row stride, column stride) of the logical operand
    let (rsa, csa) = match op_a {
        Op::N => (a.cols as isize, 1),
        Op::T => (1, a.cols as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (b.cols as isize, 1),
        Op::T => (1, b.cols as isize),
    };
    // SAFETY: the pointers cover exactly the stated m×k, k×n and m×n extents
    // with the strides above; `out` is a distinct &mut so it aliases neither
    // `a` nor `b`. beta = 0 means the old contents of `out` are never read.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn frobenius_basics() {
        assert_eq!(frobenius_norm(&DenseMatrix::zeros(3, 4)), 0.0);
        let m = DenseMatrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_norm(&m), 5.0);
    }

    #[test]
    fn frobenius_matches_trace_of_gram() {
        let m = gaussian_matrix(37, 11, RngSeed(5)).unwrap();
        let gram = m.t_matmul(&m).unwrap();
        let trace: f64 = (0..gram.rows()).map(|i| gram.get(i, i)).sum();
        let f = frobenius_norm(&m);
        assert!((f - trace.sqrt()).abs() <= 1e-12 * f);
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn product_shape_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
        assert!(a.t_matmul(&DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn products_match_naive() {
        let a = gaussian_matrix(13, 7, RngSeed(1)).unwrap();
        let b = gaussian_matrix(7, 9, RngSeed(2)).unwrap();
        let c = gaussian_matrix(13, 9, RngSeed(3)).unwrap();
        assert!(a.matmul(&b).unwrap().max_abs_diff(&naive(&a, &b)).unwrap() < 1e-12);
        let atc = a.t_matmul(&c).unwrap();
        assert!(atc.max_abs_diff(&naive(&a.transpose(), &c)).unwrap() < 1e-12);
        let abt = c.matmul_t(&b).unwrap();
        assert!(abt.max_abs_diff(&naive(&c, &b.transpose())).unwrap() < 1e-12);
    }

    #[test]
    fn identity_product_is_exact() {
        let a = gaussian_matrix(40, 30, RngSeed(9)).unwrap();
        assert_eq!(DenseMatrix::identity(40).matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&DenseMatrix::identity(30)).unwrap(), a);
    }

    proptest! {
        #[test]
        fn transpose_is_involution(rows in 1usize..70, cols in 1usize..70, seed in any::<u64>()) {
            let m = gaussian_matrix(rows, cols, RngSeed(seed)).unwrap();
            let t = m.transpose();
            prop_assert_eq!(t.shape(), (cols, rows));
            prop_assert_eq!(t.get(cols - 1, 0), m.get(0, cols - 1));
            prop_assert_eq!(t.transpose(), m);
        }
    }
}
