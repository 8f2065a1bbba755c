//! What a run leaves behind: a timestamped event log, the incidents the
//! illegal-state predicates flagged, aggregated duration observations, and
//! how the run ended.

use serde::{Deserialize, Serialize};

use crate::analysis::MetaState;
use crate::csp::{CommEvent, EventLabel, Trace, TraceEvent};
use crate::speclang::MetaStatePredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every robot reached a state with no outgoing transitions.
    Completed,
    /// Nothing further can ever happen, yet robots are still waiting.
    Deadlocked,
    /// The clock ran out with the swarm still making progress.
    HorizonReached,
}

/// One moment where the joint state first satisfied an illegal-state
/// predicate (re-arming only after the predicate clears).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incident {
    pub t_ns: u64,
    pub meta: MetaState,
    pub predicate: MetaStatePredicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LogKind {
    Internal { name: String },
    Send { channel: String, message: String, to: u32 },
    Receive { channel: String, message: String, from: u32 },
    StateChange { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t_ns: u64,
    pub robot: u32,
    #[serde(flatten)]
    pub kind: LogKind,
}

/// Aggregate of the duration draws for one transition across a run (or a
/// whole campaign).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRow {
    pub from: String,
    pub to: String,
    pub samples: u64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub seed: u64,
    pub profile: String,
    pub horizon_ns: u64,
    pub end_ns: u64,
    pub terminated: Termination,
    pub final_meta: MetaState,
    pub incidents: Vec<Incident>,
    pub observed: Vec<ObservedRow>,
    pub notes: Vec<String>,
    pub events: Vec<LogEvent>,
}

impl SimLog {
    /// Projects the run onto the design's observable alphabet: internal
    /// events keep their robot index, and each delivered message becomes a
    /// single communication at its receive time.
    pub fn projected_trace(&self) -> Trace {
        let mut out = Vec::new();
        for ev in &self.events {
            match &ev.kind {
                LogKind::Internal { name } => {
                    out.push(TraceEvent::Event(EventLabel {
                        name: name.clone(),
                        robot_index: Some(ev.robot),
                        payload: None,
                    }));
                }
                LogKind::Receive { channel, message, from } => {
                    out.push(TraceEvent::Comm(CommEvent {
                        channel: channel.clone(),
                        message: crate::csp::MessageValue::new(message.clone()),
                        writer: Some(*from),
                        reader: Some(ev.robot),
                    }));
                }
                LogKind::Send { .. } | LogKind::StateChange { .. } => {}
            }
        }
        out
    }
}
