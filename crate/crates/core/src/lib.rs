//! Elastic-net regression with one-shot low-rank curvature.
//!
//! The pipeline: sketch `A/√n` with randomized block Lanczos ([`sketch`]),
//! build the structured approximate Hessian `H` ([`hessian`]), then minimize
//! the composite objective with the inexact accelerated scaled proximal SVRG
//! ([`svrg`]) whose subproblems are solved by a fixed-budget accelerated
//! scheme with warm start ([`prox`]). First-order reference solvers live in
//! [`baselines`].

pub mod baselines;
pub mod data;
pub mod error;
pub mod hessian;
pub mod linalg;
pub mod prox;
pub mod rng;
pub mod sketch;
pub mod svrg;
pub mod trace;

pub use baselines::{BaselineConfig, Method};
pub use data::Problem;
pub use hessian::{HessianModel, MuMode, SmoothnessProfile};
pub use sketch::{LowRankFactors, SketchConfig};
pub use svrg::{Sampling, SolverConfig};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector, SparseMatrix};
pub use trace::{EpochMeasure, SolverTrace, TraceRow};
