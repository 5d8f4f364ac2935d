//! Learned attitude and rate estimators operating on event frames.

mod config;
mod estimate;
mod network;

pub use config::{NetworkConfig, Variant};
pub use estimate::Estimate;
pub use network::{EstimatorNetwork, NetworkState, StateVars, StepVars};
