//! Time-optimal velocity control for a path-following ground vehicle.
//!
//! A model-based planner (velocity limit curve + bang-bang integration, run
//! as a receding-horizon controller) and a deterministic policy-gradient
//! learner that drives either on its own, on top of the planner's action, or
//! with the planner's action as an extra input feature.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod nn;
pub mod paths;
pub mod planner;
pub mod rl;

pub use error::{Error, Result};
