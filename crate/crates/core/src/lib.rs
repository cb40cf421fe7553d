//! Data-driven topology correction for low-voltage distribution networks.
//!
//! The pipeline identifies, from smart-meter voltage-magnitude series alone:
//!
//! 1. switch-bar states (random-forest classification),
//! 2. user-feeder connections (MFP-distance clustering, or KNN/MFP label
//!    propagation when partial recordings exist),
//! 3. per-customer phase labels (correlation clustering on normalized data).
//!
//! A synthetic-network generator with a three-phase radial power-flow oracle
//! makes every stage testable at desk scale.

pub mod assign;
pub mod cluster;
pub mod config;
pub mod correlate;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod select;
pub mod switchid;
pub mod synth;

pub use error::{Error, Result};
