//! Outer alternating loop of NeNMF, plain and compressed.
//!
//! Each outer iteration updates `G` and then `F`, each by one call to the
//! Nesterov NNLS solver warm-started from the current factor. The `G`
//! update is solved in transposed form, `min_{Gᵀ ≥ 0} ‖Xᵀ − Fᵀ·Gᵀ‖`, so a
//! single kernel serves both half-steps.
//!
//! The compressed variant precomputes `X_L = L·X` and `X_R = X·R`, then per
//! iteration solves `min_{G ≥ 0} ‖X_R − G·(F·R)‖` and
//! `min_{F ≥ 0} ‖X_L − (L·G)·F‖`. Metrics are always evaluated against the
//! full `X` with the solver clock paused.

use crate::compression::{compress_problem, SketchPair};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, seeded_rng, uniform_open_from_rng, DenseMatrix, RngSeed};
use crate::nnls::{GramProblem, InnerSolverConfig};
use crate::trace::{residual_norm, ConvergenceTrace, SolverClock, TraceRecord};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    /// `n × p`
    pub g: DenseMatrix,
    /// `p × m`
    pub f: DenseMatrix,
}

impl FactorPair {
    pub fn new(g: DenseMatrix, f: DenseMatrix) -> Result<Self> {
        if g.cols() != f.rows() || g.cols() == 0 {
            return Err(Error::dim(format!(
                "factors {}x{} and {}x{} do not share a rank",
                g.rows(),
                g.cols(),
                f.rows(),
                f.cols()
            )));
        }
        Ok(Self { g, f })
    }

    pub fn rank(&self) -> usize {
        self.g.cols()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.g.min_value() >= 0.0 && self.f.min_value() >= 0.0
    }

    fn check_against(&self, n: usize, m: usize) -> Result<()> {
        if self.g.rows() != n || self.f.cols() != m {
            return Err(Error::dim(format!(
                "factors give a {}x{} product, data is {n}x{m}",
                self.g.rows(),
                self.f.cols()
            )));
        }
        if !self.is_nonnegative() {
            return Err(Error::Domain(
                "initial factors must be entrywise >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform `(0, 1)` factors drawn from one stream, `G` first.
pub fn init_factors(n: usize, m: usize, p: usize, seed: RngSeed) -> Result<FactorPair> {
    if p == 0 || p > n.min(m) {
        return Err(Error::dim(format!(
            "rank {p} must lie in 1..={} for {n}x{m} data",
            n.min(m)
        )));
    }
    let mut rng = seeded_rng(seed);
    let g = uniform_open_from_rng(n, p, &mut rng);
    let f = uniform_open_from_rng(p, m, &mut rng);
    Ok(FactorPair { g, f })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub inner: InnerSolverConfig,
    /// Solver-clock budget; `0` or infinite disables it.
    pub time_budget_seconds: f64,
    /// `0` disables the cap.
    pub max_outer_iterations: usize,
    /// Stop once the full-data RRE reaches this value; `0` disables it.
    pub rre_target: f64,
    /// Evaluate metrics every this many outer iterations (the last one is always evaluated).
    pub trace_every: usize,
    /// Solver time already spent before the loop, e.g. building the sketch.
    pub charged_setup_seconds: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            inner: InnerSolverConfig::default(),
            time_budget_seconds: 15.0,
            max_outer_iterations: 0,
            rre_target: 0.0,
            trace_every: 1,
            charged_setup_seconds: 0.0,
        }
    }
}

impl OuterConfig {
    fn budget(&self) -> Option<f64> {
        (self.time_budget_seconds > 0.0 && self.time_budget_seconds.is_finite())
            .then_some(self.time_budget_seconds)
    }

    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if self.budget().is_none() && self.max_outer_iterations == 0 {
            return Err(Error::Config(
                "need a positive time budget or an outer iteration cap".into(),
            ));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be >= 1".into()));
        }
        if !(self.rre_target >= 0.0) {
            return Err(Error::Config("rre_target must be >= 0".into()));
        }
        if !(self.charged_setup_seconds >= 0.0) || !self.charged_setup_seconds.is_finite() {
            return Err(Error::Config(
                "charged setup time must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeBudget,
    IterationCap,
    RreTarget,
    /// Both half-steps started at an exact KKT point.
    Stationary,
    /// `X = G·F` exactly.
    ExactFit,
}

/// What the observer sees after every outer iteration (and once before the first).
#[derive(Debug)]
pub struct OuterStep<'a> {
    pub outer_iter: usize,
    pub solver_elapsed_seconds: f64,
    pub wall_elapsed_seconds: f64,
    pub factors: &'a FactorPair,
    /// Present on iterations where metrics were evaluated.
    pub record: Option<TraceRecord>,
}

pub trait Observer {
    fn observe(&mut self, step: &OuterStep<'_>);
}

impl<F: FnMut(&OuterStep<'_>)> Observer for F {
    fn observe(&mut self, step: &OuterStep<'_>) {
        self(step)
    }
}

impl Observer for ConvergenceTrace {
    fn observe(&mut self, step: &OuterStep<'_>) {
        if let Some(r) = step.record {
            self.push(r);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub factors: FactorPair,
    pub outer_iterations: usize,
    pub stop: StopReason,
    pub solver_seconds: f64,
    pub wall_seconds: f64,
}

/// Per-iteration operands: data for the `G` half-step and for the `F` half-step.
struct Operands<'a> {
    x: &'a DenseMatrix,
    /// `X` or `X_R` (`n × m` or `n × ν`).
    g_data: &'a DenseMatrix,
    /// `X` or `X_L` (`n × m` or `ν × m`).
    f_data: &'a DenseMatrix,
    sketch: Option<&'a SketchPair>,
}

/// `G ← argmin_{G ≥ 0} ‖data − G·right‖`, through the transposed problem.
fn update_left(
    data: &DenseMatrix,
    right: &DenseMatrix,
    g: &DenseMatrix,
    cfg: &InnerSolverConfig,
) -> Result<(DenseMatrix, bool)> {
    let problem = GramProblem::from_parts(right.matmul_t(right)?, right.matmul_t(data)?)?;
    let out = problem.solve(&g.transpose(), cfg)?;
    Ok((out.solution.transpose(), out.stationary_start()))
}

/// `F ← argmin_{F ≥ 0} ‖data − left·F‖`.
fn update_right(
    data: &DenseMatrix,
    left: &DenseMatrix,
    f: &DenseMatrix,
    cfg: &InnerSolverConfig,
) -> Result<(DenseMatrix, bool)> {
    let problem = GramProblem::from_parts(left.t_matmul(left)?, left.t_matmul(data)?)?;
    let out = problem.solve(f, cfg)?;
    let stationary = out.stationary_start();
    Ok((out.solution, stationary))
}

fn outer_iteration(
    ops: &Operands<'_>,
    factors: &mut FactorPair,
    cfg: &InnerSolverConfig,
) -> Result<bool> {
    let f_r = match ops.sketch {
        Some(s) => factors.f.matmul(s.r())?,
        None => factors.f.clone(),
    };
    let (g, g_still) = update_left(ops.g_data, &f_r, &factors.g, cfg)?;
    factors.g = g;

    let g_l = match ops.sketch {
        Some(s) => s.l().matmul(&factors.g)?,
        None => factors.g.clone(),
    };
    let (f, f_still) = update_right(ops.f_data, &g_l, &factors.f, cfg)?;
    factors.f = f;

    Ok(g_still && f_still)
}

fn run(
    ops: Operands<'_>,
    mut factors: FactorPair,
    cfg: &OuterConfig,
    mut clock: SolverClock,
    observer: &mut dyn Observer,
) -> Result<Factorization> {
    clock.pause();
    let x_norm = frobenius_norm(ops.x);
    if x_norm == 0.0 {
        return Err(Error::DivisionByZero("relative error of an all-zero X"));
    }
    let evaluate = |factors: &FactorPair, t: usize, clock: &SolverClock| -> Result<TraceRecord> {
        let objective = residual_norm(ops.x, &factors.g, &factors.f)?;
        Ok(TraceRecord {
            outer_iter: t,
            solver_elapsed_seconds: clock.solver_elapsed().as_secs_f64(),
            wall_elapsed_seconds: clock.wall_elapsed().as_secs_f64(),
            rre: objective / x_norm,
            objective,
        })
    };

    let initial = evaluate(&factors, 0, &clock)?;
    observer.observe(&OuterStep {
        outer_iter: 0,
        solver_elapsed_seconds: initial.solver_elapsed_seconds,
        wall_elapsed_seconds: initial.wall_elapsed_seconds,
        factors: &factors,
        record: Some(initial),
    });
    let finish = |factors: FactorPair, t: usize, stop: StopReason, clock: &SolverClock| {
        Ok(Factorization {
            factors,
            outer_iterations: t,
            stop,
            solver_seconds: clock.solver_elapsed().as_secs_f64(),
            wall_seconds: clock.wall_elapsed().as_secs_f64(),
        })
    };
    if initial.objective == 0.0 {
        return finish(factors, 0, StopReason::ExactFit, &clock);
    }
    if cfg.rre_target > 0.0 && initial.rre <= cfg.rre_target {
        return finish(factors, 0, StopReason::RreTarget, &clock);
    }
    clock.resume();

    let mut t = 0;
    loop {
        t += 1;
        let stationary =
            outer_iteration(&ops, &mut factors, &cfg.inner).map_err(|e| e.at_outer(t))?;
        clock.pause();

        let solver_now = clock.solver_elapsed().as_secs_f64();
        let stop = if stationary {
            Some(StopReason::Stationary)
        } else if cfg.max_outer_iterations > 0 && t >= cfg.max_outer_iterations {
            Some(StopReason::IterationCap)
        } else if cfg.budget().is_some_and(|b| solver_now >= b) {
            Some(StopReason::TimeBudget)
        } else {
            None
        };

        let record = if stop.is_some() || t % cfg.trace_every == 0 {
            Some(evaluate(&factors, t, &clock)?)
        } else {
            None
        };
        observer.observe(&OuterStep {
            outer_iter: t,
            solver_elapsed_seconds: solver_now,
            wall_elapsed_seconds: clock.wall_elapsed().as_secs_f64(),
            factors: &factors,
            record,
        });

        let stop = stop.or_else(|| {
            let r = record?;
            if r.objective == 0.0 {
                Some(StopReason::ExactFit)
            } else if cfg.rre_target > 0.0 && r.rre <= cfg.rre_target {
                Some(StopReason::RreTarget)
            } else {
                None
            }
        });
        if let Some(stop) = stop {
            return finish(factors, t, stop, &clock);
        }
        clock.resume();
    }
}

/// Plain NeNMF on the full data.
pub fn factorize_vanilla(
    x: &DenseMatrix,
    init: FactorPair,
    cfg: &OuterConfig,
    observer: &mut dyn Observer,
) -> Result<Factorization> {
    cfg.validate()?;
    init.check_against(x.rows(), x.cols())?;
    let clock = SolverClock::start(Duration::from_secs_f64(cfg.charged_setup_seconds));
    let ops = Operands {
        x,
        g_data: x,
        f_data: x,
        sketch: None,
    };
    run(ops, init, cfg, clock, observer)
}

/// NeNMF on the compressed subproblems; compressing `X` is charged to the solver clock.
pub fn factorize_compressed(
    x: &DenseMatrix,
    sketch: &SketchPair,
    init: FactorPair,
    cfg: &OuterConfig,
    observer: &mut dyn Observer,
) -> Result<Factorization> {
    cfg.validate()?;
    init.check_against(x.rows(), x.cols())?;
    if sketch.nu() < init.rank() {
        return Err(Error::Config(format!(
            "sketch rank {} is below factorization rank {}",
            sketch.nu(),
            init.rank()
        )));
    }
    let clock = SolverClock::start(Duration::from_secs_f64(cfg.charged_setup_seconds));
    let compressed = compress_problem(x, sketch)?;
    let ops = Operands {
        x,
        g_data: &compressed.x_r,
        f_data: &compressed.x_l,
        sketch: Some(sketch),
    };
    run(ops, init, cfg, clock, observer)
}
