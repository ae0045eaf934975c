//! Trace-driven, packet-level simulation lab for real-time video congestion
//! control.
//!
//! The crate is organised around a single bottleneck link ([`simcore`]) fed by
//! synthetic or recorded bandwidth traces ([`traces`]). Video frames are
//! modelled through quality profiles ([`codec`]) for a loss-tolerant neural
//! codec and for a traditional codec that blocks on incomplete frames. Rate
//! control comes from rule-based controllers and a safeguard wrapper
//! ([`controllers`]) or from a PPO-trained policy ([`rl`]). Sessions reduce to
//! QoE reports through [`metrics`], and [`experiment`] drives whole
//! experiment matrices (trace generation, training, evaluation, plotting).
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod codec;
pub mod controllers;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod rl;
pub mod simcore;
pub mod traces;

pub use error::{Error, Result};
