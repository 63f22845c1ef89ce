//! Restless multi-armed bandit models for data-center demand response.
//!
//! Every data center is a restless arm whose state is the position of its
//! cyclic VM job queue. When the grid operator activates an arm, the data
//! center looks ahead in its queue and swaps high-power jobs for low-power
//! ones, earning the energy savings minus a QoS penalty for delayed
//! interactive jobs. Passive arms just execute the next batch.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO:
//!
//! - [`workload`]: VM jobs, the power and QoS cost models, a seeded synthetic
//!   trace generator and the trace filter.
//! - [`arm`]: ground-truth arm construction, rescheduling and rewards.
//! - [`whittle`]: subsidy-MDP value iteration, indexability checks, Whittle
//!   indices and a brute-force joint-MDP oracle for small systems.
//! - [`learning`]: Dirichlet, Gaussian and linear-Gaussian posteriors.
//! - [`policy`]: Oracle Whittle, State-Thompson, Thompson-Whittle, the
//!   trust-mixed variant and EXP4 behind one [`policy::Policy`] trait.
//! - [`sim`]: contexts, noisy state decoding, the episode engine and summaries.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod arm;
pub mod error;
pub mod kernel;
pub mod learning;
pub mod linalg;
pub mod policy;
#[cfg(any(test, feature = "reference"))]
pub mod reference;
pub mod rng;
pub mod sim;
pub mod whittle;
pub mod workload;

pub use error::{Error, Result};
