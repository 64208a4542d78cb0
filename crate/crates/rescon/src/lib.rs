//! Simulator and analysis toolkit for resilient multi-agent consensus under
//! malicious agents.
//!
//! Legitimate agents run a confidence-anchored averaging protocol: each round
//! they re-weight neighbors by the sign of an accumulated trust score and mix
//! the result with their initial state through a decaying confidence parameter
//! `lambda_t = c * exp(-gamma * t)`. The crate provides
//!
//! * [`topology`]: random geometric communication graphs with a
//!   legitimate/malicious partition,
//! * [`trust`]: stochastic trust observations, the per-edge trust ledger and
//!   its misclassification bound,
//! * [`protocol`]: the update rule itself, its exact split into legitimate and
//!   malicious input contributions, and the nominal (attack-free) oracle,
//! * [`analysis`]: closed-form deviation bounds and empirical deviation
//!   metrics,
//! * [`harness`]: Monte Carlo orchestration, parameter sweeps, trace
//!   persistence and replay.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod topology;
pub mod trust;

pub use error::{Error, Result};
