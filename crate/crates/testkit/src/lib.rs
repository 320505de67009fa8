//! Reference oracles for tests.
//!
//! Deliberately free of any dependency on `nenmf-core`: every routine here
//! works on plain nested `Vec`s with textbook algorithms so it can check the
//! library without sharing code paths with it.

pub type Rows = Vec<Vec<f64>>;

pub fn transpose(a: &[Vec<f64>]) -> Rows {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

/// Textbook triple-loop product.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner);
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Singular values in descending order by one-sided Jacobi rotations.
pub fn singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    // work on the orientation with fewer columns
    let mut m: Rows = if cols <= rows {
        transpose(a)
    } else {
        a.to_vec()
    };
    // m is now a list of column vectors
    let n = m.len();
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = m[p].iter().map(|v| v * v).sum();
                let beta: f64 = m[q].iter().map(|v| v * v).sum();
                let gamma: f64 = m[p].iter().zip(&m[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = m.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = m
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Cosines of the principal angles between the spans of two
/// orthonormal-column matrices (singular values of `Q1ᵀ Q2`).
pub fn principal_angle_cosines(q1: &[Vec<f64>], q2: &[Vec<f64>]) -> Vec<f64> {
    singular_values(&matmul(&transpose(q1), q2))
}

/// Solves a square linear system by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Rows, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for r in (col + 1)..n {
            let f = a[r][col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn unconstrained_on(a: &[Vec<f64>], b: &[f64], passive: &[usize]) -> Vec<f64> {
    let k = passive.len();
    let gram: Rows = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| a.iter().map(|row| row[passive[i]] * row[passive[j]]).sum())
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = (0..k)
        .map(|i| a.iter().zip(b).map(|(row, bi)| row[passive[i]] * bi).sum())
        .collect();
    solve(gram, rhs)
}

/// Lawson–Hanson active-set solution of `min_{x ≥ 0} ‖A x − b‖₂`.
pub fn nnls_active_set(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.first().map_or(0, Vec::len);
    let scale: f64 = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
        * b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale.max(1.0);
    let mut x = vec![0.0; n];
    let mut passive: Vec<usize> = Vec::new();

    let dual = |x: &[f64]| -> Vec<f64> {
        let resid: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(row, bi)| bi - row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        (0..n)
            .map(|j| a.iter().zip(&resid).map(|(row, r)| row[j] * r).sum())
            .collect()
    };

    for _ in 0..(3 * n + 10) {
        let w = dual(&x);
        let candidate = (0..n)
            .filter(|j| !passive.contains(j))
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive.push(j);
        loop {
            let z = unconstrained_on(a, b, &passive);
            if z.iter().all(|&v| v > 0.0) {
                for (&idx, &v) in passive.iter().zip(&z) {
                    x[idx] = v;
                }
                break;
            }
            let mut step = f64::INFINITY;
            for (&idx, &v) in passive.iter().zip(&z) {
                if v <= 0.0 {
                    step = step.min(x[idx] / (x[idx] - v));
                }
            }
            for (&idx, &v) in passive.iter().zip(&z) {
                x[idx] += step * (v - x[idx]);
            }
            passive.retain(|&idx| {
                if x[idx] <= tol {
                    x[idx] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
    }
    x
}

/// Central finite difference `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Unevaluated sum `hi + lo` carrying roughly twice the precision of `f64`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let t = s - a;
        Self {
            hi: s,
            lo: (a - (s - t)) + (b - t),
        }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::renorm(s.hi, s.lo + self.lo + o.lo)
    }
}

impl std::ops::Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        self + -o
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }
}

/// `½‖B − A·F‖²_F` evaluated in double-double arithmetic.
pub fn half_residual_sq_dd(a: &[Vec<f64>], b: &[Vec<f64>], f: &[Vec<f64>]) -> DoubleDouble {
    let dd = DoubleDouble::from_f64;
    let mut total = DoubleDouble::default();
    for (arow, brow) in a.iter().zip(b) {
        for (j, &bij) in brow.iter().enumerate() {
            let mut r = dd(bij);
            for (k, &aik) in arow.iter().enumerate() {
                r = r - dd(aik) * dd(f[k][j]);
            }
            total = total + r * r;
        }
    }
    total * dd(0.5)
}

/// Central difference whose function values carry double-double precision, so
/// that cancellation between `f(x + h)` and `f(x − h)` costs no accuracy.
pub fn central_difference_dd(f: impl Fn(&[f64]) -> DoubleDouble, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let (up_x, down_x) = (x[i] + h, x[i] - h);
            probe[i] = up_x;
            let up = f(&probe);
            probe[i] = down_x;
            let down = f(&probe);
            probe[i] = x[i];
            let step = DoubleDouble::from_f64(up_x) - DoubleDouble::from_f64(down_x);
            (up - down).to_f64() / step.to_f64()
        })
        .collect()
}

/// Simple xorshift stream for test data that must not come from the library's RNG.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_f64(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        (x >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform on (−1, 1).
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Rows {
        (0..rows)
            .map(|_| (0..cols).map(|_| self.symmetric()).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_keeps_small_terms() {
        let one = DoubleDouble::from_f64(1.0);
        let tiny = DoubleDouble::from_f64(1e-20);
        let diff = one + tiny - one;
        assert_eq!(diff.to_f64(), 1e-20);
        let a = DoubleDouble::from_f64(1.0 + f64::EPSILON);
        let sq = a * a - one;
        assert_eq!(sq.hi, 2.0 * f64::EPSILON);
        assert_eq!(sq.lo, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn dd_difference_of_quadratic_is_exact() {
        // d/dx ½(3 − 2x)² at x = 0.25 is −2(3 − 0.5) = −5
        let a = vec![vec![2.0]];
        let b = vec![vec![3.0]];
        let g = central_difference_dd(
            |x| half_residual_sq_dd(&a, &b, &[vec![x[0]]]),
            &[0.25],
            1e-6,
        );
        assert!((g[0] + 5.0).abs() < 1e-14, "{}", g[0]);
    }

    #[test]
    fn svd_of_diagonal() {
        let a = vec![vec![3.0, 0.0], vec![0.0, -4.0], vec![0.0, 0.0]];
        let s = singular_values(&a);
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn svd_frobenius_identity() {
        let a = XorShift(99).matrix(9, 5);
        let s = singular_values(&a);
        let sum: f64 = s.iter().map(|v| v * v).sum();
        assert!((sum.sqrt() - frobenius(&a)).abs() < 1e-12);
    }

    #[test]
    fn nnls_kkt_conditions() {
        let mut rng = XorShift(1234);
        let a = rng.matrix(20, 6);
        let b: Vec<f64> = (0..20).map(|_| rng.symmetric()).collect();
        let x = nnls_active_set(&a, &b);
        let resid: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(row, bi)| bi - row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        for j in 0..6 {
            let w: f64 = a.iter().zip(&resid).map(|(row, r)| row[j] * r).sum();
            assert!(x[j] >= 0.0);
            if x[j] > 0.0 {
                assert!(w.abs() < 1e-10, "{w}");
            } else {
                assert!(w <= 1e-10, "{w}");
            }
        }
    }

    #[test]
    fn finite_difference_of_quadratic() {
        let g = central_difference(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 1.0], 1e-6);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }
}
