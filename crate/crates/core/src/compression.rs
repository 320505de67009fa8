//! Randomized compression operators for NMF.
//!
//! A [`SketchPair`] holds a left operator `L` (`ν × n`) and a right operator
//! `R` (`m × ν`). They compress the data once, `X_L = L·X` and `X_R = X·R`,
//! and the factors on every outer iteration, `G_L = L·G` and `F_R = F·R`.
//!
//! Three constructions are provided:
//!
//! * Gaussian: scaled i.i.d. normal matrices, `L = Ω_L / √ν`.
//! * Power iteration: `(XXᵀ)^q X Ω` with a single orthonormalization at the
//!   end. Cheap, but the iterate's columns align with the dominant singular
//!   direction as `q` grows.
//! * Subspace iteration: the same products with a QR after every
//!   multiplication, which keeps the basis well conditioned for any `q`.
//!
//! For both iterative schemes `L·Lᵀ = I_ν` and `Rᵀ·R = I_ν`. `L` is the
//! transpose of an `n × ν` basis for the column space of `X`; `R` is an
//! `m × ν` basis for its row space.

use crate::error::{Error, Result};
use crate::matrix::{
    gaussian_from_rng, householder_basis, read_nmfb, seeded_rng, write_nmfb, DenseMatrix, RngSeed,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchScheme {
    Gaussian,
    PowerIteration,
    SubspaceIteration,
    /// `L = R = I`; compression degenerates to the uncompressed problem.
    Identity,
}

impl SketchScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SketchScheme::Gaussian => "gaussian",
            SketchScheme::PowerIteration => "power_iteration",
            SketchScheme::SubspaceIteration => "subspace_iteration",
            SketchScheme::Identity => "identity",
        }
    }

    /// Whether the construction guarantees orthonormal rows of `L` and columns of `R`.
    pub fn is_orthonormal(self) -> bool {
        !matches!(self, SketchScheme::Gaussian)
    }
}

impl fmt::Display for SketchScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SketchScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SketchScheme::Gaussian),
            "power_iteration" | "power" => Ok(SketchScheme::PowerIteration),
            "subspace_iteration" | "subspace" => Ok(SketchScheme::SubspaceIteration),
            "identity" => Ok(SketchScheme::Identity),
            other => Err(Error::Config(format!("unknown sketch scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SketchPair {
    l: DenseMatrix,
    r: DenseMatrix,
    nu: usize,
    scheme: SketchScheme,
    q: usize,
    seed: RngSeed,
}

#[derive(Serialize, Deserialize)]
struct SketchHeader {
    scheme: SketchScheme,
    nu: usize,
    q: usize,
    seed: RngSeed,
    n: usize,
    m: usize,
}

impl SketchPair {
    /// Wraps explicit operators, checking `L` is `ν × n` and `R` is `m × ν`.
    pub fn new(
        l: DenseMatrix,
        r: DenseMatrix,
        scheme: SketchScheme,
        q: usize,
        seed: RngSeed,
    ) -> Result<Self> {
        let nu = l.rows();
        if nu == 0 || r.cols() != nu {
            return Err(Error::dim(format!(
                "sketch operators L {}x{} and R {}x{} disagree on the target rank",
                l.rows(),
                l.cols(),
                r.rows(),
                r.cols()
            )));
        }
        Ok(Self {
            l,
            r,
            nu,
            scheme,
            q,
            seed,
        })
    }

    /// Identity operators for a square `n × n` problem.
    pub fn identity(n: usize) -> Self {
        Self {
            l: DenseMatrix::identity(n),
            r: DenseMatrix::identity(n),
            nu: n,
            scheme: SketchScheme::Identity,
            q: 0,
            seed: RngSeed(0),
        }
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn scheme(&self) -> SketchScheme {
        self.scheme
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    /// Number of data rows `n` the pair applies to.
    pub fn n(&self) -> usize {
        self.l.cols()
    }

    /// Number of data columns `m` the pair applies to.
    pub fn m(&self) -> usize {
        self.r.rows()
    }

    /// `max|L·Lᵀ − I|` and `max|Rᵀ·R − I|`.
    pub fn orthonormality_error(&self) -> Result<(f64, f64)> {
        let eye = DenseMatrix::identity(self.nu);
        let left = self.l.matmul_t(&self.l)?.max_abs_diff(&eye)?;
        let right = self.r.t_matmul(&self.r)?.max_abs_diff(&eye)?;
        Ok((left, right))
    }

    /// Writes `L.nmfb`, `R.nmfb` and `sketch.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_nmfb(dir.join("L.nmfb"), &self.l)?;
        write_nmfb(dir.join("R.nmfb"), &self.r)?;
        let header = SketchHeader {
            scheme: self.scheme,
            nu: self.nu,
            q: self.q,
            seed: self.seed,
            n: self.n(),
            m: self.m(),
        };
        let path = dir.join("sketch.json");
        let text = serde_json::to_string_pretty(&header).expect("header serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("sketch.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: SketchHeader =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        let pair = Self::new(
            read_nmfb(dir.join("L.nmfb"))?,
            read_nmfb(dir.join("R.nmfb"))?,
            header.scheme,
            header.q,
            header.seed,
        )?;
        if pair.nu != header.nu || pair.n() != header.n || pair.m() != header.m {
            return Err(Error::format(
                &path,
                "header disagrees with operator shapes",
            ));
        }
        Ok(pair)
    }
}

/// The compressed data `X_L = L·X` (`ν × m`) and `X_R = X·R` (`n × ν`).
#[derive(Clone, Debug)]
pub struct CompressedProblem {
    pub x_l: DenseMatrix,
    pub x_r: DenseMatrix,
}

pub fn compress_problem(x: &DenseMatrix, sketch: &SketchPair) -> Result<CompressedProblem> {
    if sketch.n() != x.rows() || sketch.m() != x.cols() {
        return Err(Error::dim(format!(
            "sketch built for {}x{} data applied to {}x{}",
            sketch.n(),
            sketch.m(),
            x.rows(),
            x.cols()
        )));
    }
    Ok(CompressedProblem {
        x_l: sketch.l.matmul(x)?,
        x_r: x.matmul(&sketch.r)?,
    })
}

/// Scaled Gaussian operators: `L = Ω_L/√ν` with `Ω_L` `ν × n`, `R = Ω_R/√ν`
/// with `Ω_R` `m × ν`, both drawn from one stream in that order.
pub fn gaussian_sketch_pair(n: usize, m: usize, nu: usize, seed: RngSeed) -> Result<SketchPair> {
    if nu == 0 || n == 0 || m == 0 {
        return Err(Error::dim(format!(
            "Gaussian sketch needs positive sizes, got n={n}, m={m}, nu={nu}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let scale = 1.0 / (nu as f64).sqrt();
    let l = gaussian_from_rng(nu, n, &mut rng).scaled(scale);
    let r = gaussian_from_rng(m, nu, &mut rng).scaled(scale);
    Ok(SketchPair {
        l,
        r,
        nu,
        scheme: SketchScheme::Gaussian,
        q: 0,
        seed,
    })
}

fn check_iterative_args(x: &DenseMatrix, nu: usize, q: usize) -> Result<()> {
    let (n, m) = x.shape();
    if nu == 0 || nu > n.min(m) {
        return Err(Error::dim(format!(
            "target rank {nu} must lie in 1..={} for {n}x{m} data",
            n.min(m)
        )));
    }
    if q == 0 {
        return Err(Error::Config(
            "sketch iteration count q must be >= 1".into(),
        ));
    }
    if x.is_zero() {
        return Err(Error::ZeroMatrix("sketching an all-zero matrix"));
    }
    Ok(())
}

/// Draws `Ω_L` (`m × ν`) then `Ω_R` (`ν × n`) and returns the starting
/// blocks `X·Ω_L` (`n × ν`) and `(Ω_R·X)ᵀ` (`m × ν`).
fn starting_blocks(
    x: &DenseMatrix,
    nu: usize,
    seed: RngSeed,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, m) = x.shape();
    let mut rng = seeded_rng(seed);
    let omega_l = gaussian_from_rng(m, nu, &mut rng);
    let omega_r = gaussian_from_rng(nu, n, &mut rng);
    let left = x.matmul(&omega_l)?;
    let right = omega_r.matmul(x)?.transpose();
    Ok((left, right))
}

/// A basis lost all but its dominant direction although the starting block had more.
fn collapsed(rank: usize, initial_rank: usize) -> bool {
    rank < initial_rank && rank <= 1
}

/// Orthonormal basis for the range of the operator `forward` (`X` or `Xᵀ`),
/// refined by `q` round trips with a QR after every multiplication.
fn subspace_chain(
    forward: impl Fn(&DenseMatrix) -> Result<DenseMatrix>,
    backward: impl Fn(&DenseMatrix) -> Result<DenseMatrix>,
    start: &DenseMatrix,
    q: usize,
) -> Result<DenseMatrix> {
    let first = householder_basis(start)?;
    let initial_rank = first.numerical_rank;
    let mut basis = first.q;
    let orthonormalize = |block: DenseMatrix| -> Result<DenseMatrix> {
        let b = householder_basis(&block)?;
        if collapsed(b.numerical_rank, initial_rank) {
            return Err(Error::RankDeficient {
                rank: b.numerical_rank,
                cols: block.cols(),
            });
        }
        Ok(b.q)
    };
    for _ in 0..q {
        let tilde = orthonormalize(backward(&basis)?)?;
        basis = orthonormalize(forward(&tilde)?)?;
    }
    Ok(basis)
}

/// Same products as [`subspace_chain`] with a single QR at the end.
fn power_chain(
    forward: impl Fn(&DenseMatrix) -> Result<DenseMatrix>,
    backward: impl Fn(&DenseMatrix) -> Result<DenseMatrix>,
    start: &DenseMatrix,
    q: usize,
) -> Result<DenseMatrix> {
    let initial_rank = householder_basis(start)?.numerical_rank;
    let mut block = start.clone();
    for _ in 0..q {
        block = forward(&backward(&block)?)?;
        if !block.is_finite() {
            return Err(Error::NumericalCollapse {
                rank: 0,
                cols: block.cols(),
            });
        }
    }
    let basis = householder_basis(&block)?;
    if collapsed(basis.numerical_rank, initial_rank) {
        return Err(Error::NumericalCollapse {
            rank: basis.numerical_rank,
            cols: block.cols(),
        });
    }
    Ok(basis.q)
}

type Chain = fn(
    &dyn Fn(&DenseMatrix) -> Result<DenseMatrix>,
    &dyn Fn(&DenseMatrix) -> Result<DenseMatrix>,
    &DenseMatrix,
    usize,
) -> Result<DenseMatrix>;

fn iterative_pair(
    x: &DenseMatrix,
    nu: usize,
    q: usize,
    seed: RngSeed,
    scheme: SketchScheme,
    chain: Chain,
) -> Result<SketchPair> {
    check_iterative_args(x, nu, q)?;
    let (left_start, right_start) = starting_blocks(x, nu, seed)?;
    let apply_x = |b: &DenseMatrix| x.matmul(b);
    let apply_xt = |b: &DenseMatrix| x.t_matmul(b);
    // column space of X: forward X, backward Xᵀ; row space: the reverse
    let q_left = chain(&apply_x, &apply_xt, &left_start, q)?;
    let q_right = chain(&apply_xt, &apply_x, &right_start, q)?;
    Ok(SketchPair {
        l: q_left.transpose(),
        r: q_right,
        nu,
        scheme,
        q,
        seed,
    })
}

/// Randomized subspace iteration: re-orthonormalizes after every product.
pub fn subspace_iteration_pair(
    x: &DenseMatrix,
    nu: usize,
    q: usize,
    seed: RngSeed,
) -> Result<SketchPair> {
    iterative_pair(
        x,
        nu,
        q,
        seed,
        SketchScheme::SubspaceIteration,
        |f, b, s, q| subspace_chain(f, b, s, q),
    )
}

/// Randomized power iteration: orthonormalizes only the final block.
pub fn power_iteration_pair(
    x: &DenseMatrix,
    nu: usize,
    q: usize,
    seed: RngSeed,
) -> Result<SketchPair> {
    iterative_pair(
        x,
        nu,
        q,
        seed,
        SketchScheme::PowerIteration,
        |f, b, s, q| power_chain(f, b, s, q),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm, uniform_open_matrix};
    use crate::nnls::{solve_nnls, InnerSolverConfig};

    fn low_rank(n: usize, m: usize, p: usize, seed: u64) -> DenseMatrix {
        let g = uniform_open_matrix(n, p, RngSeed(seed)).unwrap();
        let f = uniform_open_matrix(p, m, RngSeed(seed + 1)).unwrap();
        g.matmul(&f).unwrap()
    }

    fn left_residual(x: &DenseMatrix, s: &SketchPair) -> f64 {
        let proj = s.l().t_matmul(&s.l().matmul(x).unwrap()).unwrap();
        x.distance(&proj).unwrap() / frobenius_norm(x)
    }

    fn right_residual(x: &DenseMatrix, s: &SketchPair) -> f64 {
        let proj = x.matmul(s.r()).unwrap().matmul_t(s.r()).unwrap();
        x.distance(&proj).unwrap() / frobenius_norm(x)
    }

    #[test]
    fn gaussian_shapes_scaling_and_determinism() {
        let s = gaussian_sketch_pair(500, 400, 25, RngSeed(3)).unwrap();
        assert_eq!(s.l().shape(), (25, 500));
        assert_eq!(s.r().shape(), (400, 25));
        let var = s.l().frobenius_norm_sq() / s.l().data().len() as f64;
        assert!((var - 0.04).abs() <= 0.004, "variance {var}");
        assert_eq!(s, gaussian_sketch_pair(500, 400, 25, RngSeed(3)).unwrap());
        assert!(gaussian_sketch_pair(5, 5, 0, RngSeed(1)).is_err());
    }

    #[test]
    fn subspace_captures_noiseless_range() {
        let x = low_rank(120, 90, 6, 10);
        let s = subspace_iteration_pair(&x, 10, 4, RngSeed(2)).unwrap();
        assert_eq!(s.l().shape(), (10, 120));
        assert_eq!(s.r().shape(), (90, 10));
        let (el, er) = s.orthonormality_error().unwrap();
        assert!(el <= 1e-10 && er <= 1e-10);
        assert!(left_residual(&x, &s) <= 1e-8);
        assert!(right_residual(&x, &s) <= 1e-8);
    }

    #[test]
    fn power_q1_captures_noiseless_range() {
        let x = low_rank(100, 80, 5, 20);
        let s = power_iteration_pair(&x, 8, 1, RngSeed(4)).unwrap();
        assert!(left_residual(&x, &s) <= 1e-6);
        assert!(right_residual(&x, &s) <= 1e-6);
    }

    #[test]
    fn argument_validation() {
        let x = low_rank(20, 15, 3, 1);
        assert!(matches!(
            subspace_iteration_pair(&x, 16, 2, RngSeed(1)),
            Err(Error::Dimension(_))
        ));
        assert!(subspace_iteration_pair(&x, 5, 0, RngSeed(1)).is_err());
        assert!(matches!(
            power_iteration_pair(&DenseMatrix::zeros(20, 15), 5, 1, RngSeed(1)),
            Err(Error::ZeroMatrix(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let x = low_rank(60, 50, 4, 5);
        let a = subspace_iteration_pair(&x, 7, 2, RngSeed(9)).unwrap();
        let b = subspace_iteration_pair(&x, 7, 2, RngSeed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn compress_shapes_and_identity() {
        let x = low_rank(30, 30, 4, 7);
        let id = SketchPair::identity(30);
        let c = compress_problem(&x, &id).unwrap();
        assert_eq!(c.x_l, x);
        assert_eq!(c.x_r, x);

        let s = subspace_iteration_pair(&x, 6, 1, RngSeed(1)).unwrap();
        let c = compress_problem(&x, &s).unwrap();
        assert_eq!(c.x_l.shape(), (6, 30));
        assert_eq!(c.x_r.shape(), (30, 6));
        assert!(frobenius_norm(&c.x_l) <= frobenius_norm(&x) * (1.0 + 1e-12));

        let wrong = gaussian_sketch_pair(31, 30, 6, RngSeed(1)).unwrap();
        assert!(compress_problem(&x, &wrong).is_err());
    }

    #[test]
    fn power_collapses_at_large_q() {
        // geometric spectrum from 1 down to 1e-4
        let (n, r) = (80, 10);
        let u = crate::matrix::orthonormal_basis(
            &crate::matrix::gaussian_matrix(n, r, RngSeed(1)).unwrap(),
        )
        .unwrap();
        let v = crate::matrix::orthonormal_basis(
            &crate::matrix::gaussian_matrix(n, r, RngSeed(2)).unwrap(),
        )
        .unwrap();
        let sv: Vec<f64> = (0..r)
            .map(|i| 10f64.powf(-4.0 * i as f64 / (r - 1) as f64))
            .collect();
        let x = u
            .matmul(&DenseMatrix::diag(&sv))
            .unwrap()
            .matmul_t(&v)
            .unwrap();
        let stable = subspace_iteration_pair(&x, 12, 40, RngSeed(3)).unwrap();
        assert!(left_residual(&x, &stable) <= 1e-10);
        match power_iteration_pair(&x, 12, 40, RngSeed(3)) {
            Err(Error::NumericalCollapse { .. }) => {}
            Ok(s) => assert!(left_residual(&x, &s) >= 10.0 * left_residual(&x, &stable)),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn gaussian_scaling_does_not_move_compressed_argmin() {
        let x = low_rank(40, 40, 3, 11);
        let s = gaussian_sketch_pair(40, 40, 8, RngSeed(5)).unwrap();
        let g = uniform_open_matrix(40, 3, RngSeed(6)).unwrap();
        let f0 = uniform_open_matrix(3, 40, RngSeed(7)).unwrap();
        let cfg = InnerSolverConfig {
            max_iter: 20_000,
            grad_tol: 1e-12,
            ..Default::default()
        };
        let solve_with = |l: &DenseMatrix| {
            let x_l = l.matmul(&x).unwrap();
            let g_l = l.matmul(&g).unwrap();
            solve_nnls(&g_l, &x_l, &f0, &cfg).unwrap()
        };
        let a = solve_with(s.l());
        let b = solve_with(&s.l().scaled(3.7));
        assert!(
            a.max_abs_diff(&b).unwrap()
                <= 1e-6 * a.data().iter().fold(1.0, |m, v| f64::max(m, v.abs()))
        );
    }

    #[test]
    fn sketch_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = gaussian_sketch_pair(12, 9, 3, RngSeed(8)).unwrap();
        s.write_dir(dir.path()).unwrap();
        assert_eq!(SketchPair::read_dir(dir.path()).unwrap(), s);
    }
}
