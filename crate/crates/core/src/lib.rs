//! Stereotype simulation and mitigation on synthetic tabular data.

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mitigation;
pub mod models;
pub mod rng;
pub mod transforms;

pub use error::{Result, StereoError};
pub use rng::RandomSeed;
