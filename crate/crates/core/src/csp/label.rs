//! Transition labels and observable traces.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::term::{EventLabel, MessageValue};

/// A completed rendezvous: one writer and one reader exchanged `message` on
/// `channel`. Indices are present once the term has been composed from
/// per-robot instances.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommEvent {
    pub channel: String,
    pub message: MessageValue,
    pub writer: Option<u32>,
    pub reader: Option<u32>,
}

impl fmt::Display for CommEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.channel, self.message)?;
        match (self.writer, self.reader) {
            (Some(w), Some(r)) => write!(f, "({w}->{r})"),
            (Some(w), None) => write!(f, "({w}->?)"),
            (None, Some(r)) => write!(f, "(?->{r})"),
            (None, None) => Ok(()),
        }
    }
}

/// Label on a single semantic step. The derived order (events, then
/// communications, then internal steps) fixes the successor ordering
/// everywhere the explorer needs determinism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransitionLabel {
    Event(EventLabel),
    Comm(CommEvent),
    Tau,
}

impl TransitionLabel {
    pub fn is_observable(&self) -> bool {
        !matches!(self, TransitionLabel::Tau)
    }

    /// The observable projection, if any.
    pub fn observe(&self) -> Option<TraceEvent> {
        match self {
            TransitionLabel::Event(e) => Some(TraceEvent::Event(e.clone())),
            TransitionLabel::Comm(c) => Some(TraceEvent::Comm(c.clone())),
            TransitionLabel::Tau => None,
        }
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionLabel::Event(e) => e.fmt(f),
            TransitionLabel::Comm(c) => c.fmt(f),
            TransitionLabel::Tau => f.write_str("tau"),
        }
    }
}

/// An entry in an observable trace: internal steps are already erased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraceEvent {
    Event(EventLabel),
    Comm(CommEvent),
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Event(e) => e.fmt(f),
            TraceEvent::Comm(c) => c.fmt(f),
        }
    }
}

pub type Trace = Vec<TraceEvent>;

/// Renders a trace in angle-bracket form, e.g. `<l.0 d.0 c.p(0->1)>`.
pub fn format_trace(trace: &[TraceEvent]) -> String {
    let parts: Vec<String> = trace.iter().map(|e| e.to_string()).collect();
    format!("<{}>", parts.join(" "))
}
