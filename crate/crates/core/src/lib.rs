//! Single-asset daily trading laboratory.
//!
//! A continuous-action trading environment over daily closes, a TD3 agent
//! and a discrete DQN agent built on a small dense-network kernel, rule-based
//! baselines, performance metrics with a paired one-sided t-test, and an
//! experiment harness that ties them together.

pub mod agents;
pub mod baselines;
pub mod data;
pub mod env;
pub mod error;
pub mod harness;
pub mod neuralnet;
pub mod stats;

pub use error::{Error, Result};
