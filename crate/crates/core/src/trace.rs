//! Relative reconstruction error, convergence traces and the solver clock.

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, DenseMatrix};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

pub const TRACE_CSV_HEADER: &str = "outer_iter,solver_elapsed_s,wall_elapsed_s,rre,objective";

/// `‖X − G·F‖_F / ‖X‖_F`.
pub fn rre(x: &DenseMatrix, g: &DenseMatrix, f: &DenseMatrix) -> Result<f64> {
    let norm = frobenius_norm(x);
    if norm == 0.0 {
        return Err(Error::DivisionByZero("relative error of an all-zero X"));
    }
    Ok(residual_norm(x, g, f)? / norm)
}

/// `‖X − G·F‖_F`.
pub fn residual_norm(x: &DenseMatrix, g: &DenseMatrix, f: &DenseMatrix) -> Result<f64> {
    let approx = g.matmul(f)?;
    x.distance(&approx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    pub solver_elapsed_seconds: f64,
    pub wall_elapsed_seconds: f64,
    pub rre: f64,
    /// `‖X − G·F‖_F`
    pub objective: f64,
}

/// Records of one run plus a free-form snapshot of its configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub method: String,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|last| last.outer_iter < record.outer_iter));
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_rre(&self) -> Option<f64> {
        self.records.last().map(|r| r.rre)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "{TRACE_CSV_HEADER}")?;
            for r in &self.records {
                writeln!(
                    w,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.outer_iter,
                    r.solver_elapsed_seconds,
                    r.wall_elapsed_seconds,
                    r.rre,
                    r.objective
                )?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }

    /// Reads records written by [`write_csv`](Self::write_csv); `method` and
    /// `config` are left for the caller to fill in.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == TRACE_CSV_HEADER => {}
            _ => return Err(Error::format(path, "missing trace header")),
        }
        let mut trace = ConvergenceTrace::default();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(path, format!("bad record on line {}", i + 2));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            let record = TraceRecord {
                outer_iter: fields[0].trim().parse().map_err(|_| bad())?,
                solver_elapsed_seconds: num(fields[1])?,
                wall_elapsed_seconds: num(fields[2])?,
                rre: num(fields[3])?,
                objective: num(fields[4])?,
            };
            if trace
                .records
                .last()
                .is_some_and(|last| last.outer_iter >= record.outer_iter)
            {
                return Err(Error::format(path, "iteration indices not increasing"));
            }
            trace.records.push(record);
        }
        Ok(trace)
    }
}

/// Smallest solver time at which the trace reached `rre ≤ target`.
pub fn time_to_target(trace: &ConvergenceTrace, target_rre: f64) -> Option<f64> {
    trace
        .records
        .iter()
        .filter(|r| r.rre <= target_rre)
        .map(|r| r.solver_elapsed_seconds)
        .reduce(f64::min)
}

/// First outer iteration at which the trace reached `rre ≤ target`.
pub fn iterations_to_target(trace: &ConvergenceTrace, target_rre: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.rre <= target_rre)
        .map(|r| r.outer_iter)
}

/// Monotonic stopwatch that can be paused while metrics are evaluated.
///
/// Solver time excludes paused spans; wall time does not. Both start from an
/// optional pre-charged offset (e.g. sketch construction done beforehand).
#[derive(Debug)]
pub struct SolverClock {
    started: Instant,
    offset: Duration,
    paused_total: Duration,
    paused_at: Option<Instant>,
}

impl SolverClock {
    pub fn start(offset: Duration) -> Self {
        Self {
            started: Instant::now(),
            offset,
            paused_total: Duration::ZERO,
            paused_at: None,
        }
    }

    pub fn pause(&mut self) {
        if self.paused_at.is_none() {
            self.paused_at = Some(Instant::now());
        }
    }

    pub fn resume(&mut self) {
        if let Some(at) = self.paused_at.take() {
            self.paused_total += at.elapsed();
        }
    }

    pub fn solver_elapsed(&self) -> Duration {
        let now = self.paused_at.unwrap_or_else(Instant::now);
        self.offset + now.duration_since(self.started) - self.paused_total
    }

    pub fn wall_elapsed(&self) -> Duration {
        self.offset + self.started.elapsed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{gaussian_matrix, uniform_open_matrix, RngSeed};
    use proptest::prelude::*;

    fn record(outer_iter: usize, t: f64, rre: f64) -> TraceRecord {
        TraceRecord {
            outer_iter,
            solver_elapsed_seconds: t,
            wall_elapsed_seconds: t,
            rre,
            objective: rre,
        }
    }

    #[test]
    fn rre_edge_cases() {
        let g = uniform_open_matrix(6, 2, RngSeed(1)).unwrap();
        let f = uniform_open_matrix(2, 5, RngSeed(2)).unwrap();
        let x = g.matmul(&f).unwrap();
        assert!(rre(&x, &g, &f).unwrap() < 1e-15);
        assert_eq!(rre(&x, &DenseMatrix::zeros(6, 2), &f).unwrap(), 1.0);
        assert!(matches!(
            rre(&DenseMatrix::zeros(6, 5), &g, &f),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn rre_invariant_under_factor_rescaling() {
        let x = gaussian_matrix(20, 15, RngSeed(3)).unwrap();
        let g = uniform_open_matrix(20, 4, RngSeed(4)).unwrap();
        let f = uniform_open_matrix(4, 15, RngSeed(5)).unwrap();
        let base = rre(&x, &g, &f).unwrap();
        for c in [0.5, 2.0, 7.3] {
            let r = rre(&x, &g.scaled(c), &f.scaled(1.0 / c)).unwrap();
            assert!((r - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn time_to_target_cases() {
        let mut t = ConvergenceTrace::new("x");
        t.push(record(1, 0.1, 0.5));
        t.push(record(2, 0.2, 0.04));
        assert_eq!(time_to_target(&t, 0.05), Some(0.2));
        assert_eq!(time_to_target(&t, 0.6), Some(0.1));
        assert_eq!(time_to_target(&t, 0.01), None);
        assert_eq!(iterations_to_target(&t, 0.05), Some(2));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = ConvergenceTrace::new("vanilla");
        t.push(record(0, 0.0, 1.0));
        t.push(TraceRecord {
            outer_iter: 3,
            solver_elapsed_seconds: 0.123_456_789_012_345_6,
            wall_elapsed_seconds: 0.2,
            rre: 0.031_622_776_601_683_79,
            objective: 1_234.567_890_123,
        });
        t.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(TRACE_CSV_HEADER));
        let back = ConvergenceTrace::read_csv(&path).unwrap();
        assert_eq!(back.records, t.records);
    }

    #[test]
    fn clock_pause_excludes_time() {
        let mut c = SolverClock::start(Duration::from_millis(5));
        c.pause();
        std::thread::sleep(Duration::from_millis(20));
        c.resume();
        assert!(c.solver_elapsed() + Duration::from_millis(15) <= c.wall_elapsed());
        assert!(c.solver_elapsed() >= Duration::from_millis(5));
    }

    proptest! {
        #[test]
        fn time_to_target_monotone(rres in proptest::collection::vec(0.0f64..1.0, 1..30), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let mut t = ConvergenceTrace::new("p");
            for (i, r) in rres.iter().enumerate() {
                t.push(record(i, i as f64 * 0.1, *r));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            match (time_to_target(&t, lo), time_to_target(&t, hi)) {
                (Some(tl), Some(th)) => prop_assert!(th <= tl),
                (Some(_), None) => prop_assert!(false, "larger target unreachable"),
                _ => {}
            }
        }
    }
}
