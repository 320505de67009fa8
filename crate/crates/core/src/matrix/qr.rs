use super::DenseMatrix;
use crate::error::{Error, Result};

/// A diagonal entry of R below this fraction of the largest one counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Reduced Householder QR output: an orthonormal basis plus rank diagnostics.
#[derive(Clone, Debug)]
pub struct HouseholderBasis {
    /// `rows × cols`, orthonormal columns.
    pub q: DenseMatrix,
    /// Diagonal of the triangular factor.
    pub r_diag: Vec<f64>,
    /// Count of diagonal entries above `RANK_TOLERANCE` relative to the largest.
    pub numerical_rank: usize,
}

/// Reduced QR by Householder reflections.
///
/// Never fails on rank deficiency: the reflector product always has
/// orthonormal columns, so `q` is valid even when `m` is not of full column
/// rank. Callers that need full rank inspect `numerical_rank`.
pub fn householder_basis(m: &DenseMatrix) -> Result<HouseholderBasis> {
    let (rows, cols) = m.shape();
    if cols == 0 || rows < cols {
        return Err(Error::dim(format!(
            "QR basis needs rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::Domain("QR input has non-finite entries".into()));
    }

    // column-major working copy: a[j] is column j
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r_diag = Vec::with_capacity(cols);

    for j in 0..cols {
        let x = &a[j][j..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = x.to_vec();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.iter_mut().for_each(|t| *t /= vnorm);
            for col in a.iter_mut().skip(j + 1) {
                reflect(&v, &mut col[j..]);
            }
            r_diag.push(alpha);
        } else {
            // column already zero below the diagonal
            r_diag.push(x[0]);
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 … H_{k−1} applied to the first `cols` columns of I
    let mut q_cols: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; rows];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.iter().all(|&t| t == 0.0) {
            continue;
        }
        for col in q_cols.iter_mut().skip(j) {
            reflect(v, &mut col[j..]);
        }
        // columns left of j are still unit vectors e_i with i < j, untouched by H_j
    }

    let mut q = DenseMatrix::zeros(rows, cols);
    for (j, col) in q_cols.iter().enumerate() {
        for (i, &val) in col.iter().enumerate() {
            q.set(i, j, val);
        }
    }

    let largest = r_diag.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    let numerical_rank = if largest == 0.0 {
        0
    } else {
        r_diag
            .iter()
            .filter(|d| d.abs() > RANK_TOLERANCE * largest)
            .count()
    };

    Ok(HouseholderBasis {
        q,
        r_diag,
        numerical_rank,
    })
}

/// `x ← (I − 2vvᵀ)x` for a unit vector `v`.
#[inline]
fn reflect(v: &[f64], x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let s = 2.0 * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// Orthonormal basis `Q` (same shape as `m`) of the column span of a
/// full-column-rank matrix.
pub fn orthonormal_basis(m: &DenseMatrix) -> Result<DenseMatrix> {
    let basis = householder_basis(m)?;
    if basis.numerical_rank < m.cols() {
        return Err(Error::RankDeficient {
            rank: basis.numerical_rank,
            cols: m.cols(),
        });
    }
    Ok(basis.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm, gaussian_matrix, RngSeed};
    use proptest::prelude::*;

    fn gram_deviation(q: &DenseMatrix) -> f64 {
        let g = q.t_matmul(q).unwrap();
        g.max_abs_diff(&DenseMatrix::identity(q.cols())).unwrap()
    }

    #[test]
    fn identity_input() {
        let q = orthonormal_basis(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(gram_deviation(&q), 0.0);
        for i in 0..3 {
            assert_eq!(q.get(i, i).abs(), 1.0);
        }
    }

    #[test]
    fn collinear_columns_rejected() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        match orthonormal_basis(&m) {
            Err(Error::RankDeficient { rank, cols }) => {
                assert_eq!(rank, 1);
                assert_eq!(cols, 2);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn wide_input_rejected() {
        assert!(matches!(
            orthonormal_basis(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rank_deficient_basis_still_orthonormal() {
        let a = gaussian_matrix(60, 4, RngSeed(1)).unwrap();
        let b = gaussian_matrix(4, 10, RngSeed(2)).unwrap();
        let basis = householder_basis(&a.matmul(&b).unwrap()).unwrap();
        assert_eq!(basis.numerical_rank, 4);
        assert!(gram_deviation(&basis.q) <= 1e-12);
    }

    #[test]
    fn gaussian_500x25_is_orthonormal() {
        let m = gaussian_matrix(500, 25, RngSeed(77)).unwrap();
        let q = orthonormal_basis(&m).unwrap();
        assert!(gram_deviation(&q) <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn orthonormal_and_span_preserving(rows in 25usize..300, cols in 1usize..26, seed in any::<u64>()) {
            let m = gaussian_matrix(rows, cols, RngSeed(seed)).unwrap();
            let q = orthonormal_basis(&m).unwrap();
            prop_assert!(gram_deviation(&q) <= 1e-10);
            let proj = q.matmul(&q.t_matmul(&m).unwrap()).unwrap();
            prop_assert!(m.distance(&proj).unwrap() <= 1e-8 * frobenius_norm(&m));
        }
    }
}
