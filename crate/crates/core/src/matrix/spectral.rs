use super::{random::seeded_rng, DenseMatrix, RngSeed};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

pub const SPECTRAL_TOL: f64 = 1e-9;
pub const SPECTRAL_MAX_ITERS: usize = 100;
/// Applied to the estimate when power iteration does not converge.
pub const SPECTRAL_SAFETY: f64 = 1.01;

const START_SEED: RngSeed = RngSeed(0x005E_ED0F_5EC7);

/// Estimates `σ_max(G)²` by power iteration on `GᵀG`.
///
/// The returned value is `‖GᵀG·v‖` for the final unit iterate `v`, inflated
/// by [`SPECTRAL_SAFETY`] if `max_iters` ran out, and never above `‖G‖_F²`.
pub fn spectral_norm_sq(g: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64> {
    if g.is_zero() {
        return Err(Error::ZeroMatrix("spectral norm of an all-zero matrix"));
    }
    let cols = g.cols();
    let upper = g.frobenius_norm_sq();
    let mut gv = vec![0.0; g.rows()];
    let apply = |v: &[f64], out: &mut [f64]| {
        for (i, slot) in gv.iter_mut().enumerate() {
            *slot = g.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &s) in gv.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(g.row(i)) {
                *o += a * s;
            }
        }
    };
    Ok(power_iterate(cols, apply, tol, max_iters).min(upper))
}

/// Largest eigenvalue of a symmetric positive semidefinite Gram matrix `H = AᵀA`,
/// by the same power iteration as [`spectral_norm_sq`].
pub fn gram_spectral_radius(h: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64> {
    if h.rows() != h.cols() {
        return Err(Error::dim(format!(
            "Gram matrix must be square, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let trace: f64 = (0..h.rows()).map(|i| h.get(i, i)).sum();
    if trace <= 0.0 {
        return Err(Error::ZeroMatrix(
            "spectral radius of an all-zero Gram matrix",
        ));
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = h.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    };
    Ok(power_iterate(h.cols(), apply, tol, max_iters).min(trace))
}

fn power_iterate(
    dim: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
    max_iters: usize,
) -> f64 {
    let mut rng = seeded_rng(START_SEED);
    let mut v: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs() + 0.1)
        .collect();
    normalize(&mut v);
    let mut hv = vec![0.0; dim];
    let mut estimate = 0.0;
    for _ in 0..max_iters.max(1) {
        apply(&v, &mut hv);
        let next = norm(&hv);
        if next == 0.0 {
            // v fell into the null space; any positive start avoids this for PSD inputs
            return estimate;
        }
        let converged = estimate > 0.0 && (next - estimate).abs() <= tol * next;
        estimate = next;
        if converged {
            return estimate;
        }
        v.iter_mut().zip(&hv).for_each(|(vi, hi)| *vi = hi / next);
    }
    estimate * SPECTRAL_SAFETY
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}
