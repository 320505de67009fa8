//! Nesterov-accelerated projected gradient for
//! `min_{F ≥ 0} ½‖B − A·F‖²_F`, the inner loop of NeNMF.
//!
//! The solver works on the Gram form of the problem: with `H = AᵀA` and
//! `C = AᵀB` the gradient is `H·F − C`, so each inner iteration costs one
//! `p × p` by `p × c` product regardless of how many rows `A` has.
//!
//! Per iteration `k` (with `Y₀ = F₋₁ = F⁰`, `α₀ = 1`):
//!
//! ```text
//! F_k     = max(0, Y_k − ∇f(Y_k) / L)
//! α_{k+1} = (1 + √(4α_k² + 1)) / 2
//! Y_{k+1} = F_k + ((α_k − 1) / α_{k+1}) · (F_k − F_{k−1})
//! ```
//!
//! The returned factor is the projected iterate with the lowest objective
//! seen, never the extrapolation point, so it is always feasible and never
//! worse than the warm start.

use crate::error::{Error, Result};
use crate::matrix::{gram_spectral_radius, DenseMatrix, SPECTRAL_MAX_ITERS, SPECTRAL_TOL};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverConfig {
    /// Cap on inner iterations per subproblem.
    pub max_iter: usize,
    /// Stop once the projected-gradient norm falls below this fraction of its
    /// value at the warm start.
    pub grad_tol: f64,
    /// Multiplier on the estimated Lipschitz constant.
    pub lipschitz_safety: f64,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-4,
            lipschitz_safety: 1.0,
        }
    }
}

impl InnerSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("inner max_iter must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config("inner grad_tol must be positive".into()));
        }
        if !(self.lipschitz_safety >= 1.0) {
            return Err(Error::Config("lipschitz_safety must be >= 1".into()));
        }
        Ok(())
    }
}

/// Next term of the momentum weight sequence.
pub fn alpha_next(alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be >= 1, got {alpha}")));
    }
    Ok((1.0 + (4.0 * alpha * alpha + 1.0).sqrt()) / 2.0)
}

/// `Aᵀ·(A·F − B)`, the gradient of `½‖B − A·F‖²_F` with respect to `F`.
pub fn gradient(a: &DenseMatrix, b: &DenseMatrix, f: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() || a.cols() != f.rows() || b.cols() != f.cols() {
        return Err(Error::dim(format!(
            "gradient: A {}x{}, B {}x{}, F {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            f.rows(),
            f.cols()
        )));
    }
    let residual = a.matmul(f)?.sub(b)?;
    a.t_matmul(&residual)
}

/// Frobenius norm of the gradient projected onto the feasible directions at `F`.
pub fn projected_gradient_norm(f: &DenseMatrix, grad: &DenseMatrix) -> Result<f64> {
    f.check_same_shape(grad, "projected gradient")?;
    Ok(projected_sq(f.data(), grad.data()).sqrt())
}

#[inline]
fn projected_sq(f: &[f64], grad: &[f64]) -> f64 {
    f.iter()
        .zip(grad)
        .map(|(&x, &g)| {
            let p = if x > 0.0 { g } else { g.min(0.0) };
            p * p
        })
        .sum()
}

/// `½‖B − A·F‖²_F` evaluated directly.
pub fn objective(a: &DenseMatrix, b: &DenseMatrix, f: &DenseMatrix) -> Result<f64> {
    Ok(0.5 * a.matmul(f)?.sub(b)?.frobenius_norm_sq())
}

/// The subproblem in Gram form: `H = AᵀA` (`p × p`) and `C = AᵀB` (`p × c`).
#[derive(Clone, Debug)]
pub struct GramProblem {
    gram: DenseMatrix,
    cross: DenseMatrix,
}

impl GramProblem {
    pub fn new(a: &DenseMatrix, b: &DenseMatrix) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::dim(format!(
                "NNLS: A has {} rows, B has {}",
                a.rows(),
                b.rows()
            )));
        }
        Self::from_parts(a.t_matmul(a)?, a.t_matmul(b)?)
    }

    pub fn from_parts(gram: DenseMatrix, cross: DenseMatrix) -> Result<Self> {
        if gram.rows() != gram.cols() || gram.rows() != cross.rows() {
            return Err(Error::dim(format!(
                "Gram {}x{} incompatible with cross term {}x{}",
                gram.rows(),
                gram.cols(),
                cross.rows(),
                cross.cols()
            )));
        }
        Ok(Self { gram, cross })
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn cross(&self) -> &DenseMatrix {
        &self.cross
    }

    /// `∇f(F) = H·F − C`, given a precomputed `H·F`.
    fn gradient_from(&self, hf: &DenseMatrix) -> DenseMatrix {
        let mut g = hf.clone();
        g.data_mut()
            .iter_mut()
            .zip(self.cross.data())
            .for_each(|(gi, ci)| *gi -= ci);
        g
    }

    pub fn lipschitz(&self, safety: f64) -> Result<f64> {
        Ok(safety * gram_spectral_radius(&self.gram, SPECTRAL_TOL, SPECTRAL_MAX_ITERS)?)
    }

    /// Runs the accelerated projected gradient from the warm start `f0`.
    pub fn solve(&self, f0: &DenseMatrix, cfg: &InnerSolverConfig) -> Result<NnlsOutcome> {
        cfg.validate()?;
        if f0.rows() != self.gram.rows() || f0.cols() != self.cross.cols() {
            return Err(Error::dim(format!(
                "warm start is {}x{}, expected {}x{}",
                f0.rows(),
                f0.cols(),
                self.gram.rows(),
                self.cross.cols()
            )));
        }
        if f0.data().iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Domain("warm start must be entrywise >= 0".into()));
        }
        let lipschitz = self.lipschitz(cfg.lipschitz_safety)?;

        let mut state = InnerSolverState::new(self, f0.clone(), lipschitz)?;
        let pg0 = state.initial_pg_norm;
        if !pg0.is_finite() {
            return Err(Error::NumericalFailure {
                outer_iter: None,
                inner_iter: 0,
            });
        }
        if pg0 == 0.0 {
            return Ok(NnlsOutcome {
                solution: f0.clone(),
                iterations: 0,
                best_iteration: None,
                initial_pg_norm: 0.0,
                final_pg_norm: 0.0,
                lipschitz,
            });
        }

        let stop_at = cfg.grad_tol * pg0;
        // The best iterate usually stays in the live buffers; it is copied
        // out only when it is about to be overwritten.
        let mut best = Best::Start;
        let mut kept = DenseMatrix::zeros(0, 0);
        let mut best_delta = 0.0;
        let mut final_pg = pg0;

        while state.k < cfg.max_iter {
            if let Best::Live(b) = best {
                if b + 1 == state.k {
                    kept = state.f_prev.clone();
                    best = Best::Kept(b);
                }
            }
            let report = state.step(self)?;
            final_pg = report.pg_norm;
            if report.objective_change < best_delta {
                best_delta = report.objective_change;
                best = Best::Live(state.k);
            }
            if report.pg_norm <= stop_at {
                break;
            }
        }

        let (best_iteration, solution) = match best {
            Best::Start => (None, f0.clone()),
            Best::Live(b) if b == state.k => (Some(b), state.f_curr),
            Best::Live(b) => (Some(b), state.f_prev),
            Best::Kept(b) => (Some(b), kept),
        };
        Ok(NnlsOutcome {
            solution,
            iterations: state.k,
            best_iteration,
            initial_pg_norm: pg0,
            final_pg_norm: final_pg,
            lipschitz,
        })
    }
}

const LANES: usize = 8;

/// Fused pass over the new iterate `F_k`: projected-gradient norm², the
/// exact objective increment from `F_{k−1}` (as its linear and quadratic
/// parts), the extrapolation `Y_{k+1}` and the next projected step.
#[allow(clippy::too_many_arguments)]
fn sweep(
    f: &[f64],
    fp: &[f64],
    hf: &[f64],
    hfp: &[f64],
    c: &[f64],
    beta: f64,
    inv_l: f64,
    y: &mut [f64],
    next: &mut [f64],
) -> (f64, f64, f64) {
    // independent accumulator lanes shorten the reduction dependency chains
    let mut pg_sq = [0.0; LANES];
    let mut linear = [0.0; LANES];
    let mut quad = [0.0; LANES];
    let split = f.len() - f.len() % LANES;
    let chunks = f[..split]
        .chunks_exact(LANES)
        .zip(fp.chunks_exact(LANES))
        .zip(hf.chunks_exact(LANES))
        .zip(hfp.chunks_exact(LANES))
        .zip(c.chunks_exact(LANES))
        .zip(y.chunks_exact_mut(LANES))
        .zip(next.chunks_exact_mut(LANES));
    for ((((((f, fp), hf), hfp), c), y), next) in chunks {
        for l in 0..LANES {
            let g = hf[l] - c[l];
            // gradient component along a feasible direction
            let p = if f[l] > 0.0 || g < 0.0 { g } else { 0.0 };
            pg_sq[l] += p * p;
            // f(F_k) − f(F_{k−1}) = ⟨∇f(F_{k−1}), D⟩ + ½⟨D, H·D⟩, D = F_k − F_{k−1}
            let d = f[l] - fp[l];
            let hd = hf[l] - hfp[l];
            linear[l] += (hfp[l] - c[l]) * d;
            quad[l] += d * hd;
            let yi = f[l] + beta * d;
            let step = yi - (hf[l] + beta * hd - c[l]) * inv_l;
            y[l] = yi;
            next[l] = if step > 0.0 { step } else { 0.0 };
        }
    }
    for i in split..f.len() {
        let l = i - split;
        let g = hf[i] - c[i];
        let p = if f[i] > 0.0 || g < 0.0 { g } else { 0.0 };
        pg_sq[l] += p * p;
        let d = f[i] - fp[i];
        let hd = hf[i] - hfp[i];
        linear[l] += (hfp[i] - c[i]) * d;
        quad[l] += d * hd;
        let yi = f[i] + beta * d;
        let step = yi - (hf[i] + beta * hd - c[i]) * inv_l;
        y[i] = yi;
        next[i] = if step > 0.0 { step } else { 0.0 };
    }
    let total = |a: [f64; LANES]| a.iter().sum::<f64>();
    (total(pg_sq), total(linear), total(quad))
}

#[derive(Clone, Copy)]
enum Best {
    Start,
    Live(usize),
    Kept(usize),
}

/// Result of one subproblem solve.
#[derive(Clone, Debug)]
pub struct NnlsOutcome {
    pub solution: DenseMatrix,
    /// Inner iterations performed.
    pub iterations: usize,
    /// Iteration whose projected iterate was returned; `None` means the warm
    /// start itself was kept.
    pub best_iteration: Option<usize>,
    pub initial_pg_norm: f64,
    pub final_pg_norm: f64,
    pub lipschitz: f64,
}

impl NnlsOutcome {
    /// The warm start already satisfied the KKT conditions exactly.
    pub fn stationary_start(&self) -> bool {
        self.initial_pg_norm == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// Projected-gradient norm at the new `F_k`.
    pub pg_norm: f64,
    /// `f(F_k) − f(F⁰)`.
    pub objective_change: f64,
}

/// Iterate state of the accelerated projected gradient.
///
/// The projection of the next step is computed in the same sweep as the
/// extrapolation, so `candidate` already holds `max(0, Y_k − ∇f(Y_k)/L)`.
#[derive(Clone, Debug)]
pub struct InnerSolverState {
    pub k: usize,
    pub alpha: f64,
    pub y: DenseMatrix,
    pub f_prev: DenseMatrix,
    pub f_curr: DenseMatrix,
    pub lipschitz: f64,
    pub initial_pg_norm: f64,
    /// `f(F_k) − f(F⁰)`, summed from exact per-step increments.
    pub objective_change: f64,
    candidate: DenseMatrix,
    hf_prev: DenseMatrix,
    hf_curr: DenseMatrix,
}

impl InnerSolverState {
    pub fn new(problem: &GramProblem, f0: DenseMatrix, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) {
            return Err(Error::Domain(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        let hf = problem.gram.matmul(&f0)?;
        let g0 = problem.gradient_from(&hf);
        let initial_pg_norm = projected_sq(f0.data(), g0.data()).sqrt();
        let mut candidate = f0.clone();
        candidate
            .data_mut()
            .iter_mut()
            .zip(g0.data())
            .for_each(|(f, g)| *f = (*f - g / lipschitz).max(0.0));
        Ok(Self {
            k: 0,
            alpha: 1.0,
            y: f0.clone(),
            f_prev: f0.clone(),
            f_curr: f0,
            lipschitz,
            initial_pg_norm,
            objective_change: 0.0,
            candidate,
            hf_prev: hf.clone(),
            hf_curr: hf,
        })
    }

    /// One projected gradient step from `Y_k` followed by extrapolation.
    pub fn step(&mut self, problem: &GramProblem) -> Result<StepReport> {
        // F_{k−1} is dead: its buffer takes the candidate, which becomes F_{k+1}
        std::mem::swap(&mut self.f_prev, &mut self.candidate);
        std::mem::swap(&mut self.f_prev, &mut self.f_curr);
        problem.gram.matmul_into(&self.f_curr, &mut self.hf_prev)?;
        std::mem::swap(&mut self.hf_prev, &mut self.hf_curr);

        let alpha_new = alpha_next(self.alpha)?;
        let beta = (self.alpha - 1.0) / alpha_new;
        let inv_l = 1.0 / self.lipschitz;

        let (pg_sq, linear, quad) = sweep(
            self.f_curr.data(),
            self.f_prev.data(),
            self.hf_curr.data(),
            self.hf_prev.data(),
            problem.cross.data(),
            beta,
            inv_l,
            self.y.data_mut(),
            self.candidate.data_mut(),
        );
        let pg_norm = pg_sq.sqrt();
        let increment = linear + 0.5 * quad;
        if !pg_norm.is_finite() || !increment.is_finite() {
            return Err(Error::NumericalFailure {
                outer_iter: None,
                inner_iter: self.k,
            });
        }
        self.objective_change += increment;
        self.alpha = alpha_new;
        self.k += 1;
        Ok(StepReport {
            pg_norm,
            objective_change: self.objective_change,
        })
    }
}

/// Solves `min_{F ≥ 0} ½‖B − A·F‖²_F` from the warm start `f0`.
pub fn solve_nnls(
    a: &DenseMatrix,
    b: &DenseMatrix,
    f0: &DenseMatrix,
    cfg: &InnerSolverConfig,
) -> Result<DenseMatrix> {
    if a.rows() != b.rows() || a.cols() != f0.rows() || b.cols() != f0.cols() {
        return Err(Error::dim(format!(
            "NNLS: A {}x{}, B {}x{}, F0 {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            f0.rows(),
            f0.cols()
        )));
    }
    if a.is_zero() {
        return Err(Error::ZeroMatrix("NNLS design matrix"));
    }
    Ok(GramProblem::new(a, b)?.solve(f0, cfg)?.solution)
}
