//! Deterministic simulator for federated model aggregation.
//!
//! Clients train small text classifiers on private shards; a server combines
//! their parameter vectors each round with one of three rules: full-batch
//! averaging, example-weighted averaging, or average-difference descent
//! (`theta <- theta - eps * mean_k(theta - theta_k)`).

pub mod aggregation;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod orchestration;
pub mod rng;

pub use error::{Error, Result};
