//! Well-formedness checks run on every parsed design. A design that
//! validates has a deterministic machine, resolvable process references,
//! declared channels, sane timing parameters, and predicates that fit the
//! swarm size — and its process block agrees with its machine block.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::csp::{Action, ChannelDir, MessagePattern, ProcessTerm};

use super::ast::{ActionSym, MetaStatePredicate, StatePattern, SwarmSpec};
use super::convert::csp_to_fsm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("swarm size must be at least 1")]
    ZeroRobots,
    #[error("initial state `{0}` is not a declared state")]
    InitialStateUnknown(String),
    #[error("transition endpoint `{0}` is not a declared state")]
    TransitionStateUnknown(String),
    #[error("state `{state}` has two transitions on `{sym}`")]
    NondeterministicMachine { state: String, sym: String },
    #[error("process `{0}` is referenced but never defined")]
    UndefinedProcess(String),
    #[error("no process is defined for the initial state `{0}`")]
    RootProcessMissing(String),
    #[error("channel `{0}` is used but never declared")]
    UndeclaredChannel(String),
    #[error("channel `{channel}` carries no message `{message}`")]
    UndeclaredMessage { channel: String, message: String },
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("duplicate profile `{0}`")]
    DuplicateProfile(String),
    #[error("profile `{profile}` mentions unknown state `{state}`")]
    ProfileStateUnknown { profile: String, state: String },
    #[error("profile `{profile}` row {from} -> {to}: mean must be positive and dev non-negative")]
    BadTiming { profile: String, from: String, to: String },
    #[error("predicate mentions unknown state `{0}`")]
    PredicateStateUnknown(String),
    #[error("forbidden pattern has {got} slots but the swarm has {expected} robots")]
    WrongPatternLength { expected: usize, got: usize },
    #[error("detection rule event `{0}` is not in the machine alphabet")]
    DetectEventUnknown(String),
    #[error("detection probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("machine and process blocks disagree: {0}")]
    MachineMismatch(String),
}

pub fn validate(spec: &SwarmSpec) -> Result<(), ValidationError> {
    if spec.k == 0 {
        return Err(ValidationError::ZeroRobots);
    }

    // Machine block.
    if !spec.fsm.states.contains(&spec.fsm.initial) {
        return Err(ValidationError::InitialStateUnknown(spec.fsm.initial.clone()));
    }
    let mut seen_rows: BTreeSet<(&str, &ActionSym)> = BTreeSet::new();
    for t in &spec.fsm.transitions {
        for endpoint in [&t.from, &t.to] {
            if !spec.fsm.states.contains(endpoint) {
                return Err(ValidationError::TransitionStateUnknown(endpoint.clone()));
            }
        }
        if !seen_rows.insert((t.from.as_str(), &t.sym)) {
            return Err(ValidationError::NondeterministicMachine {
                state: t.from.clone(),
                sym: t.sym.to_string(),
            });
        }
    }

    // Process block.
    if let Some(name) = spec.defs.first_dangling_ref(None) {
        return Err(ValidationError::UndefinedProcess(name));
    }
    if !spec.defs.contains(&spec.root) {
        return Err(ValidationError::RootProcessMissing(spec.root.clone()));
    }
    let mut duplicate_check = BTreeSet::new();
    for c in &spec.channels {
        if !duplicate_check.insert(c.name.as_str()) {
            return Err(ValidationError::DuplicateChannel(c.name.clone()));
        }
    }
    for (_, body) in spec.defs.iter() {
        check_channel_usage(spec, body)?;
    }

    // Profiles.
    let mut profile_names = BTreeSet::new();
    for p in &spec.profiles {
        if !profile_names.insert(p.name.as_str()) {
            return Err(ValidationError::DuplicateProfile(p.name.clone()));
        }
        for row in &p.timing.rows {
            for state in [&row.from, &row.to] {
                if !spec.fsm.states.contains(state) {
                    return Err(ValidationError::ProfileStateUnknown {
                        profile: p.name.clone(),
                        state: state.clone(),
                    });
                }
            }
            if !(row.timing.mean_ms > 0.0) || row.timing.dev_ms < 0.0 {
                return Err(ValidationError::BadTiming {
                    profile: p.name.clone(),
                    from: row.from.clone(),
                    to: row.to.clone(),
                });
            }
        }
        if p.comm_latency.mean_ms < 0.0 || p.comm_latency.dev_ms < 0.0 {
            return Err(ValidationError::BadTiming {
                profile: p.name.clone(),
                from: "comm".into(),
                to: "latency".into(),
            });
        }
    }

    // Predicates.
    for pred in &spec.illegal {
        match pred {
            MetaStatePredicate::AtMostNInState { state, .. } => {
                if !spec.fsm.states.contains(state) {
                    return Err(ValidationError::PredicateStateUnknown(state.clone()));
                }
            }
            MetaStatePredicate::ForbiddenPattern { pattern } => {
                if pattern.len() != spec.k as usize {
                    return Err(ValidationError::WrongPatternLength {
                        expected: spec.k as usize,
                        got: pattern.len(),
                    });
                }
                for slot in pattern {
                    if let StatePattern::Is(s) = slot {
                        if !spec.fsm.states.contains(s) {
                            return Err(ValidationError::PredicateStateUnknown(s.clone()));
                        }
                    }
                }
            }
        }
    }

    // Scenario.
    if let Some(sc) = &spec.scenario {
        let alphabet = spec.fsm.alphabet();
        for rule in &sc.detect {
            for ev in [&rule.positive, &rule.negative] {
                if !alphabet.contains(&ActionSym::Event(ev.clone())) {
                    return Err(ValidationError::DetectEventUnknown(ev.clone()));
                }
            }
            if !(0.0..=1.0).contains(&rule.probability) {
                return Err(ValidationError::BadProbability(rule.probability));
            }
        }
    }

    // The two views of the robot must describe the same machine. When the
    // process block is too expressive to flatten, it stands alone.
    if let Ok(derived) = csp_to_fsm(&spec.defs, &spec.root) {
        if derived.initial != spec.fsm.initial {
            return Err(ValidationError::MachineMismatch(format!(
                "initial state `{}` vs `{}`",
                spec.fsm.initial, derived.initial
            )));
        }
        if derived.states != spec.fsm.states {
            return Err(ValidationError::MachineMismatch(format!(
                "states {:?} vs {:?}",
                spec.fsm.states, derived.states
            )));
        }
        let mut declared = spec.fsm.transitions.clone();
        declared.sort();
        let mut flattened = derived.transitions.clone();
        flattened.sort();
        if declared != flattened {
            for t in &flattened {
                if !declared.contains(t) {
                    return Err(ValidationError::MachineMismatch(format!(
                        "process block implies undeclared transition `{} {} -> {}`",
                        t.sym, t.from, t.to
                    )));
                }
            }
            for t in &declared {
                if !flattened.contains(t) {
                    return Err(ValidationError::MachineMismatch(format!(
                        "declared transition `{} {} -> {}` is absent from the process block",
                        t.sym, t.from, t.to
                    )));
                }
            }
        }
    }

    Ok(())
}

fn check_channel_usage(spec: &SwarmSpec, term: &ProcessTerm) -> Result<(), ValidationError> {
    match term {
        ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => Ok(()),
        ProcessTerm::Prefix(Action::Channel(op), p) => {
            if spec.channel(&op.channel).is_none() {
                return Err(ValidationError::UndeclaredChannel(op.channel.clone()));
            }
            if op.direction == ChannelDir::Write {
                if let MessagePattern::Value(v) = &op.message {
                    if !spec.message_declared(&op.channel, &v.0) {
                        return Err(ValidationError::UndeclaredMessage {
                            channel: op.channel.clone(),
                            message: v.0.clone(),
                        });
                    }
                }
            }
            check_channel_usage(spec, p)
        }
        ProcessTerm::Prefix(_, p) => check_channel_usage(spec, p),
        ProcessTerm::Seq(a, b)
        | ProcessTerm::ExtChoice(a, b)
        | ProcessTerm::IntChoice(a, b)
        | ProcessTerm::Interleave(a, b) => {
            check_channel_usage(spec, a)?;
            check_channel_usage(spec, b)
        }
        ProcessTerm::SyncParallel(a, b, _) => {
            check_channel_usage(spec, a)?;
            check_channel_usage(spec, b)
        }
    }
}
