//! Verification and correction toolkit for distributed robot-swarm designs.
//!
//! A swarm is described as identical communicating finite-state machines.
//! This crate can check such a design for timing-induced illegal joint
//! states, deadlocks, and internal divergence; rewrite a faulty design by
//! inserting a priority-queue consensus handshake around the triggering
//! transition; and replay either design in a discrete-event simulator
//! parameterized by per-substrate timing distributions.

pub mod analysis;
pub mod csp;
pub mod refactor;
pub mod sim;
pub mod speclang;

pub use csp::{CspError, ExploreConfig};
