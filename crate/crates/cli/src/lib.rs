//! Operator surface for encrypted CNN inference: activation fitting, key and batch files,
//! the file pipeline, benchmarks and a framed TCP transport.

pub mod batch;
pub mod bench;
pub mod config;
mod error;
pub mod fit;
pub mod pipeline;
pub mod protocol;

pub use error::{CliError, ExitKind};
