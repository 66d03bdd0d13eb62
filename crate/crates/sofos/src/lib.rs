//! IO, benchmarking, CLI and HTTP service around `sofos-core`.

pub mod bench;
pub mod cli;
pub mod error;
pub mod json;
pub mod learn;
pub mod ntriples;
pub mod server;

pub use error::{Result, SofosError};
pub use sofos_core;
