use super::DenseMatrix;
use crate::error::{Error, Result};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Seed of a reproducible random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl fmt::Display for RngSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub(crate) fn seeded_rng(seed: RngSeed) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.0)
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::dim(format!(
            "random matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    Ok(())
}

pub(crate) fn gaussian_from_rng(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DenseMatrix { rows, cols, data }
}

pub(crate) fn uniform_open_from_rng(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.sample(Open01);
            v
        })
        .collect();
    DenseMatrix { rows, cols, data }
}

/// `rows × cols` matrix of i.i.d. standard normal entries, a pure function of its arguments.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: RngSeed) -> Result<DenseMatrix> {
    check_dims(rows, cols)?;
    Ok(gaussian_from_rng(rows, cols, &mut seeded_rng(seed)))
}

/// `rows × cols` matrix of i.i.d. uniform entries on the open interval (0, 1).
pub fn uniform_open_matrix(rows: usize, cols: usize, seed: RngSeed) -> Result<DenseMatrix> {
    check_dims(rows, cols)?;
    Ok(uniform_open_from_rng(rows, cols, &mut seeded_rng(seed)))
}
