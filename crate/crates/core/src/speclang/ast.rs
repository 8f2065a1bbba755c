//! Data model for swarm design files: the robot state machine, its process
//! definitions, channel declarations, per-substrate timing profiles, illegal
//! joint-state predicates, and the optional environment scenario.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::csp::Definitions;

/// A symbol on a state-machine transition: a plain event or one side of a
/// channel operation. The three forms are distinct alphabet members even
/// when they share an underlying name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionSym {
    Event(String),
    Write { channel: String, message: String },
    Read { channel: String, message: String },
}

impl fmt::Display for ActionSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSym::Event(e) => f.write_str(e),
            ActionSym::Write { channel, message } => write!(f, "{channel}!{message}"),
            ActionSym::Read { channel, message } => write!(f, "{channel}?{message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FsmTransition {
    pub from: String,
    pub sym: ActionSym,
    pub to: String,
}

/// A deterministic finite-state machine over action symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmSpec {
    pub states: BTreeSet<String>,
    pub initial: String,
    /// Kept sorted by `(from, sym)`; determinism is a validation invariant.
    pub transitions: Vec<FsmTransition>,
}

impl FsmSpec {
    pub fn alphabet(&self) -> BTreeSet<ActionSym> {
        self.transitions.iter().map(|t| t.sym.clone()).collect()
    }

    pub fn target(&self, state: &str, sym: &ActionSym) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.sym == *sym)
            .map(|t| t.to.as_str())
    }

    pub fn rows_from<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a FsmTransition> {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    pub fn sort(&mut self) {
        self.transitions.sort();
        self.transitions.dedup();
    }
}

/// Mean and spread of a duration, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub mean_ms: f64,
    pub dev_ms: f64,
}

impl TimingParams {
    pub const ZERO: TimingParams = TimingParams { mean_ms: 0.0, dev_ms: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub from: String,
    pub to: String,
    pub timing: TimingParams,
}

/// Durations for the state transitions a substrate realizes, keyed by the
/// (from, to) state pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingMatrix {
    pub rows: Vec<TimingRow>,
}

impl TimingMatrix {
    pub fn get(&self, from: &str, to: &str) -> Option<TimingParams> {
        self.rows
            .iter()
            .find(|r| r.from == from && r.to == to)
            .map(|r| r.timing)
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    }
}

/// One execution substrate: how long each transition takes there, plus the
/// one-way message latency (zero unless declared).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateProfile {
    pub name: String,
    pub timing: TimingMatrix,
    pub comm_latency: TimingParams,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelDecl {
    pub name: String,
    pub messages: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatePattern {
    Any,
    Is(String),
}

impl fmt::Display for StatePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePattern::Any => f.write_str("_"),
            StatePattern::Is(s) => f.write_str(s),
        }
    }
}

/// A predicate over the joint state of all robots. The design is faulty if
/// any reachable joint state satisfies one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetaStatePredicate {
    /// Violated when more than `n` robots occupy `state` simultaneously.
    AtMostNInState { state: String, n: u32 },
    /// Violated when the joint state matches slot-for-slot (`Any` matches
    /// every state). One slot per robot index.
    ForbiddenPattern { pattern: Vec<StatePattern> },
}

/// Resolution rule for a detection-style branching: with `probability` the
/// `positive` transition is taken, otherwise the `negative` one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRule {
    pub positive: String,
    pub probability: f64,
    pub negative: String,
}

/// How the environment drives the swarm during simulation: how often a robot
/// encounters something worth inspecting, and how detection resolves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub encounter: Option<TimingParams>,
    pub detect: Vec<DetectRule>,
}

/// A complete swarm design: `k` identical robots, their state machine and
/// the process definitions giving it communication semantics, the channels
/// they share, timing profiles per substrate, and the joint states the
/// design must never reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmSpec {
    pub k: u32,
    pub fsm: FsmSpec,
    pub defs: Definitions,
    /// Name of the root process; always the machine's initial state.
    pub root: String,
    pub channels: Vec<ChannelDecl>,
    pub profiles: Vec<SubstrateProfile>,
    pub illegal: Vec<MetaStatePredicate>,
    pub scenario: Option<ScenarioSpec>,
}

impl SwarmSpec {
    pub fn profile(&self, name: &str) -> Option<&SubstrateProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelDecl> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn message_declared(&self, channel: &str, message: &str) -> bool {
        self.channel(channel)
            .map(|c| c.messages.contains(message))
            .unwrap_or(false)
    }

    /// The substrate-independent part of the design, for comparing two
    /// designs while ignoring timing data and scenario calibration.
    pub fn structure(&self) -> DesignStructure {
        DesignStructure {
            k: self.k,
            fsm: self.fsm.clone(),
            defs: self.defs.clone(),
            root: self.root.clone(),
            channels: self.channels.clone(),
            illegal: self.illegal.clone(),
        }
    }
}

/// What two designs must share to count as the same design: everything
/// except timing profiles and scenario calibration, which describe the world
/// the design runs in rather than the design itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignStructure {
    pub k: u32,
    pub fsm: FsmSpec,
    pub defs: Definitions,
    pub root: String,
    pub channels: Vec<ChannelDecl>,
    pub illegal: Vec<MetaStatePredicate>,
}
