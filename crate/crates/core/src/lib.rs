//! Simulator and learning harness for imperfect, energy-constrained underwater
//! acoustic sensor networks.
//!
//! The crate is `no_std` (with `alloc`). Everything here is pure computation over
//! explicitly passed random streams; file formats, configuration parsing and the
//! command line live in the `uasn` companion crate.
//!
//! Layout:
//!
//! * [`acoustics`]: absorption, transmission loss, fading, ambient noise, SINR, rate.
//! * [`world`]: deployment, drift, energy books, malfunctions, the mobile interferer.
//! * [`metrics`]: capacity, reuse, Jain fairness, waste, utility, delivery figures.
//! * [`env`]: the Dec-POMDP wrapper producing observations and team rewards.
//! * [`agent`]: recurrent Q-network, replay, additive value mixing, TD updates.
//! * [`curricula`]: malfunction-rate schedules and checkpoint evaluation.
//! * [`baselines`]: Greedy, Random, N-TDMA and an independent tabular Q-learner.
//! * [`training`]: the episode loop tying the learner to a curriculum.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod acoustics;
pub mod agent;
pub mod baselines;
pub mod curricula;
pub mod env;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod rollout;
pub mod seeding;
pub mod training;
pub mod world;

pub use error::{Error, Result};
