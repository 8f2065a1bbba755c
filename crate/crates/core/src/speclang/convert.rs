//! Conversion between the machine view and the process view of a robot.
//!
//! A machine becomes one process definition per state, offering one guarded
//! branch per outgoing transition. Flattening a process environment back to
//! a machine inverts that: each definition body is walked root-to-reference,
//! and every path becomes a transition labelled with the first action after
//! the last choice point on that path — earlier actions on the path are
//! internal detail of the macro-transition. Finite interleavings and
//! sequencing are expanded away first; anything genuinely beyond a finite
//! machine (recursion inside parallel operands, termination mid-body) is
//! rejected.

use thiserror::Error;

use crate::csp::{
    Action, ChannelDir, ChannelOp, Definitions, EventLabel, MessagePattern, MessageValue,
    ProcessTerm,
};

use super::ast::{ActionSym, ChannelDecl, FsmSpec, FsmTransition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConvertError {
    #[error("not expressible as a state machine: {reason}")]
    NotFsmConvertible { reason: String },
}

fn unconvertible<T>(reason: impl Into<String>) -> Result<T, ConvertError> {
    Err(ConvertError::NotFsmConvertible { reason: reason.into() })
}

/// Builds a process environment from a machine: one definition per state,
/// with channel reads resolved against the given declarations.
pub fn fsm_to_csp(fsm: &FsmSpec, channels: &[ChannelDecl]) -> Definitions {
    let mut defs = Definitions::new();
    for state in &fsm.states {
        let mut branches: Vec<ProcessTerm> = Vec::new();
        for row in fsm.rows_from(state) {
            branches.push(ProcessTerm::prefix(
                sym_to_action(&row.sym, channels),
                ProcessTerm::named(row.to.clone()),
            ));
        }
        let body = match branches.len() {
            0 => ProcessTerm::Stop,
            _ => {
                let mut it = branches.into_iter();
                let first = it.next().expect("non-empty");
                it.fold(first, ProcessTerm::ext_choice)
            }
        };
        defs.define(state.clone(), body);
    }
    defs
}

fn sym_to_action(sym: &ActionSym, channels: &[ChannelDecl]) -> Action {
    match sym {
        ActionSym::Event(e) => Action::Event(EventLabel::new(e.clone())),
        ActionSym::Write { channel, message } => {
            Action::Channel(ChannelOp::write(channel.clone(), message.clone()))
        }
        ActionSym::Read { channel, message } => {
            let declared = channels
                .iter()
                .any(|c| &c.name == channel && c.messages.contains(message));
            let pattern = if declared {
                MessagePattern::Value(MessageValue::new(message.clone()))
            } else {
                MessagePattern::Binder(message.clone())
            };
            Action::Channel(ChannelOp::read(channel.clone(), pattern))
        }
    }
}

fn action_to_sym(action: &Action) -> ActionSym {
    match action {
        Action::Event(e) => ActionSym::Event(e.name.clone()),
        Action::Channel(op) => match op.direction {
            ChannelDir::Write => ActionSym::Write {
                channel: op.channel.clone(),
                message: op.message.to_string(),
            },
            ChannelDir::Read => ActionSym::Read {
                channel: op.channel.clone(),
                message: op.message.to_string(),
            },
        },
    }
}

/// One macro-transition together with the full micro-action path that
/// realizes it: everything the robot does between leaving `from` and
/// becoming `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RowPath {
    pub from: String,
    pub sym: ActionSym,
    pub to: String,
    /// Every action along the branch, in order. `actions[guard_index]`
    /// is the transition's label; earlier entries happen before the
    /// branch is decided, later ones after.
    pub actions: Vec<Action>,
    pub guard_index: usize,
}

/// Walks every definition and returns one labelled path per branch.
/// Rejects anything a deterministic machine cannot express, including two
/// branches that share a label but disagree on their internal actions.
pub fn row_paths(defs: &Definitions, root: &str) -> Result<Vec<RowPath>, ConvertError> {
    if !defs.contains(root) {
        return unconvertible(format!("root process `{root}` is not defined"));
    }
    let mut paths: Vec<RowPath> = Vec::new();
    for (name, body) in defs.iter() {
        let body = expand(body)?;
        if body == ProcessTerm::Stop {
            continue;
        }
        walk_paths(name, &body, Vec::new(), None, &mut paths)?;
    }
    paths.sort();
    paths.dedup();
    for p in &paths {
        if !defs.contains(&p.to) {
            return unconvertible(format!(
                "a branch of `{}` continues as undefined `{}`",
                p.from, p.to
            ));
        }
    }
    for pair in paths.windows(2) {
        if pair[0].from == pair[1].from && pair[0].sym == pair[1].sym {
            let detail = if pair[0].to == pair[1].to {
                "two branches agree on the target but not on their internal actions"
            } else {
                "two branches lead to different targets"
            };
            return unconvertible(format!(
                "state `{}` is nondeterministic on `{}`: {detail}",
                pair[0].from, pair[0].sym
            ));
        }
    }
    Ok(paths)
}

/// Flattens a process environment to the machine it denotes, with `root` as
/// the initial state. Every definition becomes a state.
pub fn csp_to_fsm(defs: &Definitions, root: &str) -> Result<FsmSpec, ConvertError> {
    let transitions = row_paths(defs, root)?
        .into_iter()
        .map(|p| FsmTransition { from: p.from, sym: p.sym, to: p.to })
        .collect();
    Ok(FsmSpec {
        states: defs.names().cloned().collect(),
        initial: root.to_string(),
        transitions,
    })
}

/// Rewrites away sequencing and finite interleaving so only prefixes,
/// choices, references, and leaves remain.
fn expand(term: &ProcessTerm) -> Result<ProcessTerm, ConvertError> {
    match term {
        ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => Ok(term.clone()),
        ProcessTerm::Prefix(a, p) => Ok(ProcessTerm::prefix(a.clone(), expand(p)?)),
        ProcessTerm::ExtChoice(a, b) => Ok(ProcessTerm::ext_choice(expand(a)?, expand(b)?)),
        ProcessTerm::IntChoice(a, b) => Ok(ProcessTerm::int_choice(expand(a)?, expand(b)?)),
        ProcessTerm::Seq(a, b) => {
            let a = expand(a)?;
            let b = expand(b)?;
            substitute_at_termination(&a, &b)
        }
        ProcessTerm::Interleave(a, b) => {
            let a = expand(a)?;
            let b = expand(b)?;
            shuffle(&a, &b)
        }
        ProcessTerm::SyncParallel(..) => {
            unconvertible("synchronized parallel composition has no machine counterpart")
        }
    }
}

fn substitute_at_termination(
    term: &ProcessTerm,
    cont: &ProcessTerm,
) -> Result<ProcessTerm, ConvertError> {
    match term {
        ProcessTerm::Skip => Ok(cont.clone()),
        ProcessTerm::Stop => Ok(ProcessTerm::Stop),
        ProcessTerm::NamedRef(n) => {
            unconvertible(format!("sequencing after reference `{n}` has no machine counterpart"))
        }
        ProcessTerm::Prefix(a, p) => {
            Ok(ProcessTerm::prefix(a.clone(), substitute_at_termination(p, cont)?))
        }
        ProcessTerm::ExtChoice(a, b) => Ok(ProcessTerm::ext_choice(
            substitute_at_termination(a, cont)?,
            substitute_at_termination(b, cont)?,
        )),
        ProcessTerm::IntChoice(a, b) => Ok(ProcessTerm::int_choice(
            substitute_at_termination(a, cont)?,
            substitute_at_termination(b, cont)?,
        )),
        other => unconvertible(format!("cannot sequence after `{other}`")),
    }
}

fn first_steps(term: &ProcessTerm) -> Result<Vec<(Action, ProcessTerm)>, ConvertError> {
    match term {
        ProcessTerm::Skip | ProcessTerm::Stop => Ok(Vec::new()),
        ProcessTerm::Prefix(a, p) => Ok(vec![(a.clone(), (**p).clone())]),
        ProcessTerm::ExtChoice(a, b) => {
            let mut out = first_steps(a)?;
            out.extend(first_steps(b)?);
            Ok(out)
        }
        ProcessTerm::IntChoice(..) => {
            unconvertible("internal choice inside an interleaving cannot be flattened")
        }
        ProcessTerm::NamedRef(n) => {
            unconvertible(format!("interleaving around reference `{n}` cannot be flattened"))
        }
        other => unconvertible(format!("cannot flatten interleaving around `{other}`")),
    }
}

fn shuffle(a: &ProcessTerm, b: &ProcessTerm) -> Result<ProcessTerm, ConvertError> {
    if *a == ProcessTerm::Skip {
        return Ok(b.clone());
    }
    if *b == ProcessTerm::Skip {
        return Ok(a.clone());
    }
    let mut branches: Vec<(Action, ProcessTerm)> = Vec::new();
    for (act, rest) in first_steps(a)? {
        branches.push((act, shuffle(&rest, b)?));
    }
    for (act, rest) in first_steps(b)? {
        branches.push((act, shuffle(a, &rest)?));
    }
    branches.sort_by(|x, y| format!("{}{}", x.0, x.1).cmp(&format!("{}{}", y.0, y.1)));
    branches.dedup();
    let mut it = branches.into_iter().map(|(act, rest)| ProcessTerm::prefix(act, rest));
    match it.next() {
        None => Ok(ProcessTerm::Stop),
        Some(first) => Ok(it.fold(first, ProcessTerm::ext_choice)),
    }
}

fn walk_paths(
    state: &str,
    term: &ProcessTerm,
    path: Vec<Action>,
    guard: Option<usize>,
    out: &mut Vec<RowPath>,
) -> Result<(), ConvertError> {
    match term {
        ProcessTerm::Prefix(act, p) => {
            let mut path = path;
            path.push(act.clone());
            let g = guard.or(Some(path.len() - 1));
            walk_paths(state, p, path, g, out)
        }
        ProcessTerm::ExtChoice(a, b) | ProcessTerm::IntChoice(a, b) => {
            walk_paths(state, a, path.clone(), None, out)?;
            walk_paths(state, b, path, None, out)
        }
        ProcessTerm::NamedRef(n) => match guard {
            Some(guard_index) => {
                out.push(RowPath {
                    from: state.to_string(),
                    sym: action_to_sym(&path[guard_index]),
                    to: n.clone(),
                    actions: path,
                    guard_index,
                });
                Ok(())
            }
            None => unconvertible(format!(
                "a branch of `{state}` reaches `{n}` without a guarding action"
            )),
        },
        ProcessTerm::Skip => unconvertible(format!(
            "a branch of `{state}` terminates; machines have no final states"
        )),
        ProcessTerm::Stop => unconvertible(format!(
            "a branch of `{state}` halts without a continuation state"
        )),
        other => unconvertible(format!("unexpected operator survived flattening: `{other}`")),
    }
}
