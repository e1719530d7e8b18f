//! Configuration planning for speculative decoding split between an edge
//! drafter and a cloud verifier.
//!
//! Given measured drafting throughput, power and acceptance rates, the crate
//! evaluates goodput, verification cost efficiency and energy per accepted
//! token for every (draft model, quantisation, speculative length)
//! configuration, picks objective-optimal configurations, computes the
//! goodput/energy Pareto front, and cross-checks the closed-form round model
//! with a token-level Monte Carlo simulation.

pub mod acceptance;
pub mod error;
pub mod metrics;
pub mod planner;
pub mod profile;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
