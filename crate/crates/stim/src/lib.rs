//! File formats, evaluation harness and command line for `stim-core`.
//!
//! The `stim` binary wraps these modules; everything it does is also
//! reachable as a library call.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod metadata;
pub mod run;
pub mod tvg_format;

pub use error::{Result, StimError};
