//! Low-rank plus dictionary-sparse matrix demixing.
//!
//! Given an observation `M = L + D S` with a known dictionary `D`, this crate
//! recovers the low-rank part `L` and the sparse coefficients `S` by convex
//! programming, for both entry-wise and column-wise sparsity of `S`. Around the
//! solver it provides the incoherence diagnostics and recovery bounds for the
//! problem, a dual-certificate verifier for tiny instances, synthetic instance
//! generators with a phase-transition harness, the pseudo-inverse and
//! matched-filter baselines, ROC evaluation, and a hyperspectral target
//! localization pipeline.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats, parallel runners and the command-line tool live in
//! the companion `drpca` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod apg;
pub mod baselines;
pub mod diagnostics;
mod error;
pub mod eval;
pub mod hsi;
pub mod linalg;
pub mod model;
pub mod prox;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use model::{Components, DemixProblem, OracleModel, SolverConfig, SparsityMode};
