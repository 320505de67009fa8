//! Synthetic benchmark problems: nonnegative low-rank ground truth plus
//! Gaussian noise rescaled to an exact signal-to-noise ratio.

use crate::error::{Error, Result};
use crate::matrix::{
    gaussian_from_rng, read_nmfb, seeded_rng, uniform_open_from_rng, write_nmfb, DenseMatrix,
    RngSeed,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub x: DenseMatrix,
    pub g_true: DenseMatrix,
    pub f_true: DenseMatrix,
    /// `f64::INFINITY` means no noise was added.
    pub snr_db_target: f64,
    pub snr_db_realized: f64,
    pub negative_fraction: f64,
    pub seed: RngSeed,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    n: usize,
    m: usize,
    p: usize,
    snr_db_target: Option<f64>,
    snr_db_realized: Option<f64>,
    negative_fraction: f64,
    seed: RngSeed,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn m(&self) -> usize {
        self.x.cols()
    }

    pub fn p(&self) -> usize {
        self.g_true.cols()
    }

    /// Writes `X.nmfb`, `G_true.nmfb`, `F_true.nmfb` and `meta.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_nmfb(dir.join("X.nmfb"), &self.x)?;
        write_nmfb(dir.join("G_true.nmfb"), &self.g_true)?;
        write_nmfb(dir.join("F_true.nmfb"), &self.f_true)?;
        let finite = |v: f64| v.is_finite().then_some(v);
        let meta = Meta {
            n: self.n(),
            m: self.m(),
            p: self.p(),
            snr_db_target: finite(self.snr_db_target),
            snr_db_realized: finite(self.snr_db_realized),
            negative_fraction: self.negative_fraction,
            seed: self.seed,
        };
        let path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("meta.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Meta =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        let x = read_nmfb(dir.join("X.nmfb"))?;
        let g_true = read_nmfb(dir.join("G_true.nmfb"))?;
        let f_true = read_nmfb(dir.join("F_true.nmfb"))?;
        if x.shape() != (meta.n, meta.m)
            || g_true.shape() != (meta.n, meta.p)
            || f_true.shape() != (meta.p, meta.m)
        {
            return Err(Error::format(&path, "matrix shapes disagree with metadata"));
        }
        Ok(Self {
            x,
            g_true,
            f_true,
            snr_db_target: meta.snr_db_target.unwrap_or(f64::INFINITY),
            snr_db_realized: meta.snr_db_realized.unwrap_or(f64::INFINITY),
            negative_fraction: meta.negative_fraction,
            seed: meta.seed,
        })
    }
}

/// Draws `G_true`, `F_true` uniform on `(0, 1)` and adds Gaussian noise scaled
/// so that `10·log₁₀(‖G·F‖² / ‖N‖²)` equals `snr_db`. Pass `f64::INFINITY`
/// for noiseless data.
pub fn generate_problem(
    n: usize,
    m: usize,
    p: usize,
    snr_db: f64,
    seed: RngSeed,
) -> Result<ProblemInstance> {
    if p == 0 || p > n.min(m) {
        return Err(Error::dim(format!(
            "rank {p} must lie in 1..={} for {n}x{m} data",
            n.min(m)
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Domain(format!(
            "SNR must be finite or +inf, got {snr_db}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let g_true = uniform_open_from_rng(n, p, &mut rng);
    let f_true = uniform_open_from_rng(p, m, &mut rng);
    let clean = g_true.matmul(&f_true)?;

    let (x, snr_db_realized) = if snr_db.is_infinite() {
        (clean, f64::INFINITY)
    } else {
        let mut noise = gaussian_from_rng(n, m, &mut rng);
        let signal = clean.frobenius_norm_sq();
        let target_noise = signal / 10f64.powf(snr_db / 10.0);
        noise.scale_in_place((target_noise / noise.frobenius_norm_sq()).sqrt());
        let realized = 10.0 * (signal / noise.frobenius_norm_sq()).log10();
        (clean.add(&noise)?, realized)
    };
    let negatives = x.data().iter().filter(|&&v| v < 0.0).count();
    Ok(ProblemInstance {
        negative_fraction: negatives as f64 / (n * m) as f64,
        x,
        g_true,
        f_true,
        snr_db_target: snr_db,
        snr_db_realized,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nenmf_testkit as oracle;

    fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
        m.row_iter().map(<[f64]>::to_vec).collect()
    }

    #[test]
    fn noiseless_is_exact_product() {
        let inst = generate_problem(20, 15, 3, f64::INFINITY, RngSeed(1)).unwrap();
        assert_eq!(inst.x, inst.g_true.matmul(&inst.f_true).unwrap());
        assert_eq!(inst.negative_fraction, 0.0);
    }

    #[test]
    fn noise_floor_at_30_db() {
        let inst = generate_problem(500, 500, 15, 30.0, RngSeed(2)).unwrap();
        let clean = oracle::matmul(&rows(&inst.g_true), &rows(&inst.f_true));
        let x = rows(&inst.x);
        let noise: f64 = x
            .iter()
            .flatten()
            .zip(clean.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let floor = noise / oracle::frobenius(&x);
        assert!(
            (floor - 10f64.powf(-1.5)).abs() < 0.001 * 10f64.powf(-1.5),
            "{floor}"
        );
        let snr = 20.0 * (oracle::frobenius(&clean) / noise).log10();
        assert!((snr - 30.0).abs() <= 0.1);
        assert!((inst.snr_db_realized - 30.0).abs() <= 1e-9);
        assert!(inst.negative_fraction < 1e-3);
    }

    #[test]
    fn clean_product_has_rank_p() {
        let inst = generate_problem(40, 30, 6, f64::INFINITY, RngSeed(3)).unwrap();
        let sv = oracle::singular_values(&rows(&inst.x));
        assert!(sv[5] > 1e-8 * sv[0]);
        assert!(sv[6] < 1e-10 * sv[0]);
    }

    #[test]
    fn deterministic_and_validated() {
        let a = generate_problem(30, 30, 4, 20.0, RngSeed(4)).unwrap();
        assert_eq!(a, generate_problem(30, 30, 4, 20.0, RngSeed(4)).unwrap());
        assert_ne!(
            a.x,
            generate_problem(30, 30, 4, 20.0, RngSeed(5)).unwrap().x
        );
        assert!(generate_problem(10, 30, 11, 30.0, RngSeed(1)).is_err());
        assert!(generate_problem(10, 30, 3, f64::NAN, RngSeed(1)).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for snr in [25.0, f64::INFINITY] {
            let inst = generate_problem(12, 9, 2, snr, RngSeed(6)).unwrap();
            inst.save(dir.path()).unwrap();
            assert_eq!(ProblemInstance::load(dir.path()).unwrap(), inst);
        }
    }
}
