//! Substrate-parameterized execution of swarm designs.
//!
//! The same design behaves differently on different hardware: what decides
//! whether a timing window is ever hit is how long each transition takes
//! there. A substrate profile gives those durations as uniform bands, a
//! scenario drives the probabilistic branches, and the engine plays the
//! design as a discrete-event system — one seeded run at a time
//! ([`simulate`]) or aggregated over many seeds ([`run_campaign`]).

mod campaign;
mod engine;
mod log;
mod sampler;

pub use campaign::{run_campaign, CampaignReport};
pub use log::{Incident, LogEvent, LogKind, ObservedRow, SimLog, Termination};
pub use sampler::{duration, latency, sample_ms, Obs, MIN_DURATION_NS, NS_PER_MS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::speclang::{validate, SwarmSpec, ValidationError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("design failed validation before simulation: {0}")]
    Invalid(#[from] ValidationError),
    #[error("the design has no profile named `{name}`")]
    UnknownProfile { name: String },
    #[error("initial state `{state}` has no runnable transition under profile `{profile}`")]
    ProfileIncomplete { state: String, profile: String },
    #[error("event `{event}` is decided internally but no scenario detect rule covers it")]
    ScenarioMissing { event: String },
    #[error("not executable as a machine: {reason}")]
    NotMachine { reason: String },
    #[error("state `{state}` is not executable: {detail}")]
    UnsupportedShape { state: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub profile: String,
    pub horizon_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub profile: String,
    pub horizon_ms: f64,
    pub seed0: u64,
    pub runs: u32,
}

/// Plays one seeded run of the design on the named substrate profile.
pub fn simulate(spec: &SwarmSpec, cfg: &SimConfig) -> Result<SimLog, SimError> {
    validate(spec)?;
    engine::run_prepared(spec, cfg)
}
