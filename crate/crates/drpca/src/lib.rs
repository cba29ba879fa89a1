//! File formats, parallel drivers and the command-line interface on top of
//! `drpca-core`.

pub mod cli;
pub mod formats;
pub mod parallel;

pub use drpca_core as core;
