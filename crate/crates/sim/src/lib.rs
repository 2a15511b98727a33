//! Simulation of fair, privacy-preserving collaborative learning over a
//! token ledger, with baselines and an experiment harness.

pub mod config;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod rng;

pub use config::{Config, FrameworkKind};
pub use error::{Result, SimError};
