//! A small process-calculus kernel in the traces model.
//!
//! Terms are built from prefixing, sequencing, external and internal choice,
//! interleaving, and event-synchronized parallel composition. Channel
//! operations rendezvous pairwise and atomically across any parallel
//! boundary; an unmatched operation blocks. Internal steps arise only from
//! internal choice, and trace observation erases them.

pub mod explore;
pub mod label;
pub mod semantics;
pub mod term;

pub use explore::{admits_trace, find_locks, traces, LockReport, LockWitness};
pub use label::{format_trace, CommEvent, Trace, TraceEvent, TransitionLabel};
pub use semantics::{derive, normalize, step, CspError, Derivations, ExploreConfig, SemanticState};
pub use term::{
    Action, ChannelDir, ChannelOp, Definitions, EventLabel, MessagePattern, MessageValue, ProcessTerm,
};
