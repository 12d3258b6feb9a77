//! Sleep-wake and scheduling policies for status updating when time stamps are noisy.
//!
//! A server that stamps samples makes larger stamp errors the less it has slept,
//! so waiting before sampling trades age of information (AoI) for credibility.
//! This crate solves the single-process problem exactly, evaluates and tunes
//! round-robin and asymmetric schedules for several processes, and ships a
//! seeded Monte Carlo simulator that checks every analytic quantity.

pub mod error;
pub mod experiments;
pub mod model;
pub mod multi;
pub mod numeric;
pub mod sim;
pub mod single;

pub use error::{Error, Result};
pub use model::{ProcessSpec, RecoveryFunction, ServiceDistribution, SystemConfig, ThresholdPolicy};
