//! Materialized view selection for aggregate queries over RDF graphs.
//!
//! A facet is an analytical query `SELECT X agg(u) WHERE P GROUP BY X`. Every
//! subset of `X` defines a coarser view of it, and together the views form a
//! lattice ordered by inclusion. This crate builds that lattice, prices its
//! nodes under several cost models, picks `k` views greedily, materializes
//! them as blank-node group encodings and answers incoming queries from the
//! cheapest usable view.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, timing, the CLI and
//! the HTTP service live in the `sofos` crate.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod cost;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod graph;
pub mod lattice;
pub mod materialize;
pub mod query;
pub mod regressor;
pub mod rewrite;
pub mod select;
pub mod term;
pub mod workload;

pub use error::{Error, Result};
