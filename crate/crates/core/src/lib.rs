//! Aerial-RIS assisted multi-user MISO downlink: channel simulation, sum-rate
//! evaluation and a DDPG agent that jointly learns the base-station precoder
//! and the RIS phase shifts.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod neural;
pub mod rng;
pub mod system;

pub use error::{Error, Result};
