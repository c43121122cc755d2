//! Desk-scale laboratory for group-relative RL on a toy mixture-of-experts policy.
//!
//! The crate wires together six subsystems:
//!
//! - [`policy`] — a minimal autoregressive policy with one genuine top-k MoE
//!   block, with analytic gradients of token log-probabilities.
//! - [`rollout`] — group sampling under a frozen policy, router-trace
//!   recording, and an emulated train/inference gate mismatch so router
//!   replay's effect is measurable.
//! - [`reward`] — tool-call trace parsing and matching rewards, constraint
//!   verifiers, a ternary judge mapping, and length/repetition reshaping.
//! - [`zvp`] — zero-variance group detection, the analytic zero-variance-rate
//!   law for Bernoulli rewards, prompt filtering, group-normalized advantages,
//!   and entropy-guided advantage reshaping for residual zero-variance groups.
//! - [`optim`] — three clipped-surrogate objectives (token-ratio, sequence-ratio,
//!   and entropy-grouped) with hand-derived gradients, plus the training loop.
//! - [`sim`] — a deterministic discrete-event simulator of the rollout/reward
//!   pipeline: length-balanced assignment, reward overlap, and throughput
//!   multipliers, emitting stacked speedup reports.
//!
//! Everything is deterministic under a seed, and every numeric claim is backed
//! by an independent oracle in the test suite (finite differences, exhaustive
//! enumeration, Monte Carlo, or event-by-event re-simulation).

pub mod error;
pub mod gradcheck;
pub mod optim;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod rollout;
pub mod sim;
pub mod tasks;
pub mod zvp;

pub use error::{Error, Result};
