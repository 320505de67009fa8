//! Nonnegative matrix factorization by Nesterov-accelerated alternating
//! nonnegative least squares, optionally compressed by randomized sketches.
//!
//! The main entry points are [`factorize_vanilla`] and
//! [`factorize_compressed`]; sketches come from [`gaussian_sketch_pair`],
//! [`power_iteration_pair`] and [`subspace_iteration_pair`].

pub mod compression;
pub mod error;
pub mod matrix;
pub mod nenmf;
pub mod nnls;
pub mod synthetic;
pub mod trace;

pub use compression::{
    compress_problem, gaussian_sketch_pair, power_iteration_pair, subspace_iteration_pair,
    CompressedProblem, SketchPair, SketchScheme,
};
pub use error::{Error, Result};
pub use matrix::{
    frobenius_norm, gaussian_matrix, orthonormal_basis, read_nmfb, spectral_norm_sq, write_nmfb,
    DenseMatrix, RngSeed,
};
pub use nenmf::{
    factorize_compressed, factorize_vanilla, init_factors, FactorPair, Factorization, Observer,
    OuterConfig, OuterStep, StopReason,
};
pub use nnls::{
    alpha_next, gradient, projected_gradient_norm, solve_nnls, GramProblem, InnerSolverConfig,
};
pub use synthetic::{generate_problem, ProblemInstance};
pub use trace::{
    iterations_to_target, rre, time_to_target, ConvergenceTrace, TraceRecord, TRACE_CSV_HEADER,
};
