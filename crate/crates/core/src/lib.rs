//! Consensus ADMM over a simulated peer-to-peer network with per-edge
//! adaptive penalties, plus a distributed probabilistic PCA model.
//!
//! The crate is `no_std` and needs only `alloc`. Enable `parallel` to run
//! node phases on a rayon pool; results are bit-identical to the sequential
//! mode.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod data;
pub mod engine;
pub mod metrics;
pub mod penalty;
pub mod ppca;
pub mod quadratic;
pub mod topology;

pub use engine::{run, ConsensusModel, IterationRecord, RunConfig, RunError, RunOutput};
pub use penalty::{EdgePenaltyState, EvalPoint, PenaltyConfig, Scheme};
pub use topology::{Graph, Topology};
