//! The `generate` and `run` subcommands.

use crate::spec::{Method, RunSpec};
use crate::stats::median;
use anyhow::{bail, Context, Result};
use nenmf_core::{
    factorize_compressed, factorize_vanilla, gaussian_sketch_pair, generate_problem, init_factors,
    iterations_to_target, power_iteration_pair, subspace_iteration_pair, time_to_target,
    ConvergenceTrace, DenseMatrix, Error, OuterConfig, ProblemInstance, RngSeed, SketchPair,
    SketchScheme, StopReason,
};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const RUNSPEC_FILE: &str = "runspec.json";
pub const SUMMARY_FILE: &str = "summary.csv";
/// Sketch seeds tried (`s, s+1, …`) before a rank failure is reported.
pub const SKETCH_ATTEMPTS: u64 = 5;

pub fn instance_dir(root: &Path, seed: RngSeed) -> PathBuf {
    root.join(format!("instance_seed{seed}"))
}

pub fn trace_file_name(method: Method, seed: RngSeed) -> String {
    format!("trace_{method}_seed{seed}.csv")
}

fn prepare_output(spec: &RunSpec) -> Result<()> {
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    spec.write(&dir.join(RUNSPEC_FILE))
}

fn for_each_seed<T: Send>(spec: &RunSpec, job: impl Fn(RngSeed) -> T + Sync + Send) -> Vec<T> {
    if spec.serial {
        spec.seeds.iter().map(|&s| job(s)).collect()
    } else {
        spec.seeds.par_iter().map(|&s| job(s)).collect()
    }
}

fn worker_count(spec: &RunSpec) -> usize {
    if spec.serial {
        1
    } else {
        rayon::current_num_threads().min(spec.seeds.len())
    }
}

/// Writes one instance directory per seed plus the resolved spec.
pub fn cmd_generate(spec: &RunSpec) -> Result<Vec<PathBuf>> {
    prepare_output(spec)?;
    for_each_seed(spec, |seed| {
        let inst = generate_problem(spec.n, spec.m, spec.p, spec.snr_db, seed)
            .with_context(|| format!("seed {seed}: generating instance"))?;
        let dir = instance_dir(&spec.output_dir, seed);
        inst.save(&dir)
            .with_context(|| format!("seed {seed}: writing instance"))?;
        Ok(dir)
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub sketch_seed: Option<RngSeed>,
    pub sketch_build_seconds: f64,
    pub stop: StopReason,
    pub outer_iterations: usize,
    pub final_rre: f64,
    pub solver_seconds: f64,
    pub wall_seconds: f64,
    /// One entry per requested target; `None` when never reached.
    pub time_to_target: Vec<Option<f64>>,
    pub iterations_to_target: Vec<Option<usize>>,
}

#[derive(Debug)]
pub struct SeedReport {
    pub seed: RngSeed,
    pub outcome: std::result::Result<SeedResult, String>,
}

#[derive(Debug)]
pub struct RunReport {
    pub spec: RunSpec,
    pub workers: usize,
    pub seeds: Vec<SeedReport>,
}

impl RunReport {
    pub fn successes(&self) -> impl Iterator<Item = (RngSeed, &SeedResult)> {
        self.seeds
            .iter()
            .filter_map(|s| s.outcome.as_ref().ok().map(|r| (s.seed, r)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (RngSeed, &str)> {
        self.seeds
            .iter()
            .filter_map(|s| s.outcome.as_ref().err().map(|e| (s.seed, e.as_str())))
    }

    pub fn median_final_rre(&self) -> Option<f64> {
        median(self.successes().map(|(_, r)| r.final_rre).collect())
    }

    /// Median time to the `i`-th target; unreached seeds count as infinite.
    pub fn median_time_to_target(&self, i: usize) -> Option<f64> {
        median(
            self.successes()
                .map(|(_, r)| r.time_to_target[i].unwrap_or(f64::INFINITY))
                .collect(),
        )
    }
}

/// Runs every seed, writing one trace CSV per seed and `summary.csv`.
/// A failing seed is recorded and does not stop the others.
pub fn cmd_run(spec: &RunSpec) -> Result<RunReport> {
    prepare_output(spec)?;
    let seeds = for_each_seed(spec, |seed| SeedReport {
        seed,
        outcome: run_seed(spec, seed).map_err(|e| format!("seed {seed}: {e:#}")),
    });
    let report = RunReport {
        spec: spec.clone(),
        workers: worker_count(spec),
        seeds,
    };
    write_summary(&report)?;
    Ok(report)
}

fn load_instance(spec: &RunSpec, seed: RngSeed) -> Result<ProblemInstance> {
    let Some(root) = &spec.instances else {
        return Ok(generate_problem(spec.n, spec.m, spec.p, spec.snr_db, seed)?);
    };
    let inst = ProblemInstance::load(instance_dir(root, seed))?;
    if (inst.n(), inst.m(), inst.p()) != (spec.n, spec.m, spec.p) {
        bail!(
            "stored instance is {}x{} with p = {}, run asks for {}x{} with p = {}",
            inst.n(),
            inst.m(),
            inst.p(),
            spec.n,
            spec.m,
            spec.p
        );
    }
    Ok(inst)
}

/// Builds the sketch, moving to the next seed on rank failures.
pub fn build_sketch(
    x: &DenseMatrix,
    scheme: SketchScheme,
    nu: usize,
    q: usize,
    first_seed: RngSeed,
) -> Result<SketchPair> {
    let mut last = None;
    for attempt in 0..SKETCH_ATTEMPTS {
        let seed = RngSeed(first_seed.0.wrapping_add(attempt));
        let built = match scheme {
            SketchScheme::Gaussian => gaussian_sketch_pair(x.rows(), x.cols(), nu, seed),
            SketchScheme::PowerIteration => power_iteration_pair(x, nu, q, seed),
            SketchScheme::SubspaceIteration => subspace_iteration_pair(x, nu, q, seed),
            SketchScheme::Identity => Ok(SketchPair::identity(x.rows())),
        };
        match built {
            Ok(sketch) => return Ok(sketch),
            Err(e @ (Error::RankDeficient { .. } | Error::NumericalCollapse { .. })) => {
                last = Some(e)
            }
            Err(e) => return Err(e.into()),
        }
    }
    let e = last.expect("at least one attempt");
    Err(anyhow::Error::new(e).context(format!(
        "building {scheme} sketch failed for {SKETCH_ATTEMPTS} seeds from {first_seed}"
    )))
}

fn run_seed(spec: &RunSpec, seed: RngSeed) -> Result<SeedResult> {
    let inst = load_instance(spec, seed)?;
    let init = init_factors(spec.n, spec.m, spec.p, RunSpec::init_seed(seed))?;
    let mut cfg = OuterConfig {
        time_budget_seconds: spec.budget_s,
        max_outer_iterations: spec.max_outer,
        rre_target: spec.rre_stop,
        trace_every: spec.trace_every,
        ..Default::default()
    };
    cfg.inner.max_iter = spec.max_inner;

    let mut trace = ConvergenceTrace::new(spec.method.as_str());
    let (sketch_seed, sketch_build_seconds, outcome) = match spec.method.scheme() {
        None => (
            None,
            0.0,
            factorize_vanilla(&inst.x, init, &cfg, &mut trace)?,
        ),
        Some(scheme) => {
            let started = Instant::now();
            let sketch =
                build_sketch(&inst.x, scheme, spec.nu, spec.q, RunSpec::sketch_seed(seed))?;
            let build = started.elapsed().as_secs_f64();
            cfg.charged_setup_seconds = build;
            let out = factorize_compressed(&inst.x, &sketch, init, &cfg, &mut trace)?;
            (Some(sketch.seed()), build, out)
        }
    };

    let path = spec.output_dir.join(trace_file_name(spec.method, seed));
    trace.write_csv(&path)?;
    let last = trace.last().expect("traces always hold the initial record");
    Ok(SeedResult {
        sketch_seed,
        sketch_build_seconds,
        stop: outcome.stop,
        outer_iterations: last.outer_iter,
        final_rre: last.rre,
        solver_seconds: last.solver_elapsed_seconds,
        wall_seconds: last.wall_elapsed_seconds,
        time_to_target: spec
            .targets
            .iter()
            .map(|&t| time_to_target(&trace, t))
            .collect(),
        iterations_to_target: spec
            .targets
            .iter()
            .map(|&t| iterations_to_target(&trace, t))
            .collect(),
    })
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::TimeBudget => "time_budget",
        StopReason::IterationCap => "iteration_cap",
        StopReason::RreTarget => "rre_target",
        StopReason::Stationary => "stationary",
        StopReason::ExactFit => "exact_fit",
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn finite(v: Option<f64>) -> String {
    opt(v.filter(|v| v.is_finite()).map(|v| format!("{v:.6}")))
}

fn write_summary(report: &RunReport) -> Result<()> {
    let spec = &report.spec;
    let mut out = String::from(
        "seed,status,sketch_seed,sketch_build_s,stop_reason,outer_iters,final_rre,solver_s,wall_s",
    );
    for t in &spec.targets {
        write!(out, ",time_to_{t}")?;
    }
    for t in &spec.targets {
        write!(out, ",iters_to_{t}")?;
    }
    out.push_str(",workers,error\n");

    for s in &report.seeds {
        match &s.outcome {
            Ok(r) => {
                write!(
                    out,
                    "{},ok,{},{:.6},{},{},{:.9e},{:.6},{:.6}",
                    s.seed,
                    opt(r.sketch_seed),
                    r.sketch_build_seconds,
                    stop_name(r.stop),
                    r.outer_iterations,
                    r.final_rre,
                    r.solver_seconds,
                    r.wall_seconds
                )?;
                for t in &r.time_to_target {
                    write!(out, ",{}", finite(*t))?;
                }
                for i in &r.iterations_to_target {
                    write!(out, ",{}", opt(*i))?;
                }
                writeln!(out, ",{},", report.workers)?;
            }
            Err(e) => {
                write!(out, "{},failed,,,,,,,", s.seed)?;
                for _ in 0..2 * spec.targets.len() {
                    out.push(',');
                }
                writeln!(out, ",{},\"{}\"", report.workers, e.replace('"', "'"))?;
            }
        }
    }

    let ok: Vec<&SeedResult> = report.successes().map(|(_, r)| r).collect();
    let med = |f: &dyn Fn(&SeedResult) -> f64| median(ok.iter().map(|r| f(r)).collect());
    write!(
        out,
        "median,,,{},,{},{},{},{}",
        finite(med(&|r| r.sketch_build_seconds)),
        opt(med(&|r| r.outer_iterations as f64)),
        opt(med(&|r| r.final_rre).map(|v| format!("{v:.9e}"))),
        finite(med(&|r| r.solver_seconds)),
        finite(med(&|r| r.wall_seconds)),
    )?;
    for i in 0..spec.targets.len() {
        write!(out, ",{}", finite(report.median_time_to_target(i)))?;
    }
    for i in 0..spec.targets.len() {
        let m = med(&|r| r.iterations_to_target[i].map_or(f64::INFINITY, |k| k as f64));
        write!(out, ",{}", opt(m.filter(|v| v.is_finite())))?;
    }
    writeln!(out, ",{},", report.workers)?;

    let path = spec.output_dir.join(SUMMARY_FILE);
    std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))
}
