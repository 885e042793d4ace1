//! Similarity graphs for nearest neighbor search, refined by a learned
//! edge-keeping policy.
//!
//! A heuristic graph (complete or NSW) is searched with a stochastic agent
//! that keeps or drops each out-edge at every expansion. The agent is trained
//! with policy gradients to find the true nearest neighbor with as few
//! distance computations as possible, and the learned probabilities are
//! thresholded at 0.5 into a plain graph.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod graph;
pub mod policy;
pub mod pruning;
pub mod search;
pub mod trainer;

pub use error::{Error, Result};
