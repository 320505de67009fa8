//! The `compare` subcommand: per-method statistics recomputed from trace CSVs.

use crate::run::{trace_file_name, RUNSPEC_FILE};
use crate::spec::{Method, RunSpec};
use crate::stats::Spread;
use anyhow::{Context, Result};
use nenmf_core::{iterations_to_target, time_to_target, ConvergenceTrace};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

/// Run directories that do not describe the same problems.
#[derive(Debug)]
pub struct IncomparableRuns(pub String);

impl fmt::Display for IncomparableRuns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "runs are not comparable: {}", self.0)
    }
}

impl std::error::Error for IncomparableRuns {}

#[derive(Clone, Debug)]
pub struct MethodStats {
    pub dir: PathBuf,
    pub method: Method,
    /// Seeds with a trace on disk.
    pub traced_seeds: usize,
    pub final_rre: Spread,
    /// Solver seconds; infinite where the target was never reached.
    pub time_to_target: Spread,
    pub iterations_to_target: Spread,
    /// Median time-to-target relative to the first listed run.
    pub speedup_ratio: f64,
}

fn check_comparable(base: &RunSpec, other: &RunSpec, dir: &Path) -> Result<()> {
    let mismatch = |what: &str| -> Result<()> {
        Err(IncomparableRuns(format!("{} differs in {what}", dir.display())).into())
    };
    if (base.n, base.m, base.p) != (other.n, other.m, other.p) {
        return mismatch("problem size (n, m, p)");
    }
    if base.snr_db.to_bits() != other.snr_db.to_bits() {
        return mismatch("SNR");
    }
    if base.seeds != other.seeds {
        return mismatch("seeds");
    }
    if base.instances.is_some() != other.instances.is_some() {
        return mismatch("instance source");
    }
    Ok(())
}

fn load_traces(dir: &Path, spec: &RunSpec) -> Result<Vec<ConvergenceTrace>> {
    let mut traces = Vec::new();
    for &seed in &spec.seeds {
        let path = dir.join(trace_file_name(spec.method, seed));
        if path.exists() {
            traces.push(ConvergenceTrace::read_csv(&path)?);
        }
    }
    if traces.is_empty() {
        anyhow::bail!("{} holds no {} traces", dir.display(), spec.method);
    }
    Ok(traces)
}

/// Compares run directories against the first one at a target RRE.
pub fn cmd_compare(dirs: &[PathBuf], target: f64) -> Result<Vec<MethodStats>> {
    if dirs.len() < 2 {
        anyhow::bail!("compare needs at least two run directories");
    }
    if !(target > 0.0 && target.is_finite()) {
        anyhow::bail!("target RRE must be positive and finite");
    }
    let specs = dirs
        .iter()
        .map(|d| RunSpec::read(&d.join(RUNSPEC_FILE)))
        .collect::<Result<Vec<_>>>()?;
    for (spec, dir) in specs.iter().zip(dirs).skip(1) {
        check_comparable(&specs[0], spec, dir)?;
    }

    let mut stats = Vec::new();
    for (spec, dir) in specs.iter().zip(dirs) {
        let traces =
            load_traces(dir, spec).with_context(|| format!("loading {}", dir.display()))?;
        let finals: Vec<f64> = traces.iter().filter_map(|t| t.final_rre()).collect();
        let times: Vec<f64> = traces
            .iter()
            .map(|t| time_to_target(t, target).unwrap_or(f64::INFINITY))
            .collect();
        let iters: Vec<f64> = traces
            .iter()
            .map(|t| iterations_to_target(t, target).map_or(f64::INFINITY, |k| k as f64))
            .collect();
        stats.push(MethodStats {
            dir: dir.clone(),
            method: spec.method,
            traced_seeds: traces.len(),
            final_rre: Spread::of(&finals).expect("nonempty"),
            time_to_target: Spread::of(&times).expect("nonempty"),
            iterations_to_target: Spread::of(&iters).expect("nonempty"),
            speedup_ratio: f64::NAN,
        });
    }
    let base = stats[0].time_to_target.median;
    for s in &mut stats {
        s.speedup_ratio = s.time_to_target.median / base;
    }
    Ok(stats)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

pub fn comparison_csv(stats: &[MethodStats]) -> String {
    let mut out = String::from(
        "dir,method,seeds,final_rre_median,final_rre_min,final_rre_max,\
         time_median,time_min,time_max,iters_median,iters_min,iters_max,speedup_ratio\n",
    );
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{:.9e},{:.9e},{:.9e},{},{},{},{},{},{},{}",
            s.dir.display(),
            s.method,
            s.traced_seeds,
            s.final_rre.median,
            s.final_rre.min,
            s.final_rre.max,
            num(s.time_to_target.median),
            num(s.time_to_target.min),
            num(s.time_to_target.max),
            num(s.iterations_to_target.median),
            num(s.iterations_to_target.min),
            num(s.iterations_to_target.max),
            num(s.speedup_ratio),
        );
    }
    out
}

pub fn comparison_table(stats: &[MethodStats], target: f64) -> String {
    let show = |v: f64| {
        if v.is_finite() {
            format!("{v:.3}")
        } else {
            "-".to_string()
        }
    };
    let mut out = format!(
        "{:<10} {:>5} {:>28} {:>26} {:>20} {:>8}\n",
        "method",
        "seeds",
        "final RRE med [min, max]",
        format!("time to {target} s med"),
        "iters to target med",
        "ratio"
    );
    for s in stats {
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>10.5} [{:.5}, {:.5}] {:>26} {:>20} {:>8}",
            s.method.as_str(),
            s.traced_seeds,
            s.final_rre.median,
            s.final_rre.min,
            s.final_rre.max,
            show(s.time_to_target.median),
            show(s.iterations_to_target.median),
            show(s.speedup_ratio),
        );
    }
    out
}
