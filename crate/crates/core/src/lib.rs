//! Sample average approximation with biased sampling.
//!
//! Monte Carlo and multilevel Monte Carlo SAA solvers for a scalar CVaR
//! problem, with a geometric Brownian motion put-option sampler and a nested
//! expectation sampler.

pub mod cli;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod objective;
pub mod samplers;
pub mod solvers;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
