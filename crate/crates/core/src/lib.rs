//! Multi-style cooperative exploration for off-policy actor-critic control.
//!
//! The crate bundles everything needed to run and verify the method end to end:
//!
//! - [`numerics`]: dense MLPs with analytic backprop, Adam, soft target
//!   updates, finite-difference gradient checks and a bit-exact snapshot format.
//! - [`envs`]: pendulum swing-up and a sparse-reward point-mass maze.
//! - [`replay`]: ring-buffer experience replay with skill-labeled transitions.
//! - [`agent`]: twin critics with optional opposite targets, the four styled
//!   value estimators, the skill-conditioned actor, and the training loop for
//!   `ccep`, `ccep-separate`, `td3` and `ddpg`.
//! - [`metrics`]: evaluation rollouts, grid coverage and per-style divergence.
//! - [`tabular`]: exact value iteration / policy evaluation used to check the
//!   greedy-policy performance-gap bound on random MDPs.
//! - [`harness`]: configuration, CSV logging, multi-seed benches, experiments
//!   and the SVG chart emitter behind the `ccep` binary.
//!
//! Independent trials (seeds, random MDPs, gradient checks) run through
//! [`exec::Execution`], which uses rayon when the `parallel` feature is on and
//! falls back to plain iteration otherwise. Every run is single-threaded and
//! bit-deterministic given its seed, so both modes produce identical output.

pub mod agent;
pub mod envs;
pub mod error;
pub mod exec;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod replay;
pub mod seed;
pub mod tabular;

pub use error::{Error, Result};
