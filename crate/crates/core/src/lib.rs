//! Robust, differentially private Bayesian inference by posterior sampling.
//!
//! The crate computes smoothness certificates for likelihood/prior pairs,
//! turns them into privacy and robustness guarantees, answers queries by
//! drawing a fresh posterior sample per query, simulates a sampling
//! adversary, and checks every bound against independent numerical oracles.

pub mod adversary;
pub mod calculus;
pub mod error;
pub mod families;
pub mod mechanism;
pub mod metrics;
pub mod rng;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
