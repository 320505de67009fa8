//! Benchmark driver for plain and compressed NeNMF: problem generation,
//! timed multi-seed runs with trace output, and cross-method comparison.

pub mod compare;
pub mod run;
pub mod spec;
mod stats;

pub use compare::{cmd_compare, IncomparableRuns, MethodStats};
pub use run::{cmd_generate, cmd_run, RunReport, SeedReport, SeedResult};
pub use spec::{Method, RunSpec, SpecArgs};
pub use stats::{median, Spread};
