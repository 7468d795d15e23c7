//! File formats, dataset tooling and run orchestration for `facepolicy-core`.

pub mod checkpoint;
pub mod config;
pub mod dataset;
mod error;
pub mod eval;
pub mod format;
pub mod pipeline;

pub use error::{Error, Result};
