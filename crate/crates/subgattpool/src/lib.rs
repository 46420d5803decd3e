//! Graph classification with subgraph attention and hierarchical pooling.
//!
//! The crate is organised bottom-up: `numcore` provides dense matrices with
//! reverse-mode autodiff, `graphdata` loads and synthesises datasets,
//! `pathsampler` enumerates rooted simple paths, `layers` and `netpool`
//! assemble the network, and `trainer` drives optimisation, cross-validation
//! and the clustering / attention evaluations.

pub mod error;
pub mod graphdata;
pub mod layers;
pub mod netpool;
pub mod numcore;
pub mod pathsampler;
pub mod rng;
pub mod trainer;

pub use error::{EngineError, Result};
