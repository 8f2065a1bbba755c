//! Process terms, event labels, and the definition environment.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An opaque message atom carried on a channel. No algebra is defined on
/// payloads; two messages are interchangeable exactly when their names match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageValue(pub String);

impl MessageValue {
    pub fn new(name: impl Into<String>) -> Self {
        MessageValue(name.into())
    }
}

impl fmt::Display for MessageValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A visible event. After swarm composition every event carries the index of
/// the robot instance that performs it, so witness traces can attribute blame.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventLabel {
    pub name: String,
    pub robot_index: Option<u32>,
    pub payload: Option<MessageValue>,
}

impl EventLabel {
    pub fn new(name: impl Into<String>) -> Self {
        EventLabel { name: name.into(), robot_index: None, payload: None }
    }

    pub fn with_index(mut self, index: u32) -> Self {
        self.robot_index = Some(index);
        self
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if let Some(p) = &self.payload {
            write!(f, "({p})")?;
        }
        if let Some(i) = self.robot_index {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelDir {
    Write,
    Read,
}

/// What a read is willing to accept: a concrete atom (matching read) or a
/// binder that accepts anything. Binders only name the message for display;
/// continuations cannot refer to them (no message algebra).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessagePattern {
    Value(MessageValue),
    Binder(String),
}

impl fmt::Display for MessagePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessagePattern::Value(v) => v.fmt(f),
            MessagePattern::Binder(b) => f.write_str(b),
        }
    }
}

/// One half of a rendezvous: `c!m` or `c?m`. Writes always carry a concrete
/// message. Like events, channel ops gain a robot index during composition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelOp {
    pub channel: String,
    pub direction: ChannelDir,
    pub message: MessagePattern,
    pub robot_index: Option<u32>,
}

impl ChannelOp {
    pub fn write(channel: impl Into<String>, msg: impl Into<String>) -> Self {
        ChannelOp {
            channel: channel.into(),
            direction: ChannelDir::Write,
            message: MessagePattern::Value(MessageValue::new(msg)),
            robot_index: None,
        }
    }

    pub fn read(channel: impl Into<String>, pattern: MessagePattern) -> Self {
        ChannelOp { channel: channel.into(), direction: ChannelDir::Read, message: pattern, robot_index: None }
    }
}

impl fmt::Display for ChannelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sigil = match self.direction {
            ChannelDir::Write => '!',
            ChannelDir::Read => '?',
        };
        write!(f, "{}{}{}", self.channel, sigil, self.message)?;
        if let Some(i) = self.robot_index {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

/// The action guarding a Prefix: either a plain event or a channel operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Event(EventLabel),
    Channel(ChannelOp),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Event(e) => e.fmt(f),
            Action::Channel(c) => c.fmt(f),
        }
    }
}

/// Algebraic process term. `SyncParallel` synchronizes on the event names in
/// its sync set; channel operations rendezvous across *any* parallel operator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProcessTerm {
    Skip,
    Stop,
    NamedRef(String),
    Prefix(Action, Box<ProcessTerm>),
    Seq(Box<ProcessTerm>, Box<ProcessTerm>),
    ExtChoice(Box<ProcessTerm>, Box<ProcessTerm>),
    IntChoice(Box<ProcessTerm>, Box<ProcessTerm>),
    Interleave(Box<ProcessTerm>, Box<ProcessTerm>),
    SyncParallel(Box<ProcessTerm>, Box<ProcessTerm>, BTreeSet<String>),
}

impl ProcessTerm {
    pub fn prefix(action: Action, cont: ProcessTerm) -> Self {
        ProcessTerm::Prefix(action, Box::new(cont))
    }

    pub fn event_prefix(name: &str, cont: ProcessTerm) -> Self {
        ProcessTerm::prefix(Action::Event(EventLabel::new(name)), cont)
    }

    pub fn named(name: impl Into<String>) -> Self {
        ProcessTerm::NamedRef(name.into())
    }

    pub fn seq(a: ProcessTerm, b: ProcessTerm) -> Self {
        ProcessTerm::Seq(Box::new(a), Box::new(b))
    }

    pub fn ext_choice(a: ProcessTerm, b: ProcessTerm) -> Self {
        ProcessTerm::ExtChoice(Box::new(a), Box::new(b))
    }

    pub fn int_choice(a: ProcessTerm, b: ProcessTerm) -> Self {
        ProcessTerm::IntChoice(Box::new(a), Box::new(b))
    }

    pub fn interleave(a: ProcessTerm, b: ProcessTerm) -> Self {
        ProcessTerm::Interleave(Box::new(a), Box::new(b))
    }

    pub fn sync_parallel(a: ProcessTerm, b: ProcessTerm, sync: BTreeSet<String>) -> Self {
        ProcessTerm::SyncParallel(Box::new(a), Box::new(b), sync)
    }

    /// Fold a non-empty list into a left-associated interleaving.
    pub fn interleave_all(mut terms: Vec<ProcessTerm>) -> ProcessTerm {
        assert!(!terms.is_empty(), "interleave_all needs at least one term");
        let mut acc = terms.remove(0);
        for t in terms {
            acc = ProcessTerm::interleave(acc, t);
        }
        acc
    }

    /// Names of all processes this term refers to (transitively shallow:
    /// only the refs syntactically present in this term).
    pub fn referenced_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut BTreeSet<String>) {
        match self {
            ProcessTerm::Skip | ProcessTerm::Stop => {}
            ProcessTerm::NamedRef(n) => {
                out.insert(n.clone());
            }
            ProcessTerm::Prefix(_, p) => p.collect_refs(out),
            ProcessTerm::Seq(a, b)
            | ProcessTerm::ExtChoice(a, b)
            | ProcessTerm::IntChoice(a, b)
            | ProcessTerm::Interleave(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            ProcessTerm::SyncParallel(a, b, _) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
        }
    }

    /// Precedence level used by the printer: higher binds tighter.
    fn level(&self) -> u8 {
        match self {
            ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => 4,
            ProcessTerm::Prefix(..) => 3,
            ProcessTerm::Seq(..) => 2,
            ProcessTerm::ExtChoice(..) | ProcessTerm::IntChoice(..) => 1,
            ProcessTerm::Interleave(..) | ProcessTerm::SyncParallel(..) => 0,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for ProcessTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTerm::Skip => f.write_str("SKIP"),
            ProcessTerm::Stop => f.write_str("STOP"),
            ProcessTerm::NamedRef(n) => f.write_str(n),
            ProcessTerm::Prefix(a, p) => {
                write!(f, "{a} -> ")?;
                p.fmt_child(f, 3)
            }
            ProcessTerm::Seq(a, b) => {
                a.fmt_child(f, 2)?;
                f.write_str(" ; ")?;
                b.fmt_child(f, 3)
            }
            ProcessTerm::ExtChoice(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" [] ")?;
                b.fmt_child(f, 2)
            }
            ProcessTerm::IntChoice(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" |~| ")?;
                b.fmt_child(f, 2)
            }
            ProcessTerm::Interleave(a, b) => {
                a.fmt_child(f, 0)?;
                f.write_str(" ||| ")?;
                b.fmt_child(f, 1)
            }
            ProcessTerm::SyncParallel(a, b, sync) => {
                a.fmt_child(f, 0)?;
                let evs: Vec<&str> = sync.iter().map(String::as_str).collect();
                write!(f, " [|{}|] ", evs.join(","))?;
                b.fmt_child(f, 1)
            }
        }
    }
}

/// Named process definitions (the recursion environment).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definitions {
    defs: BTreeMap<String, ProcessTerm>,
}

impl Definitions {
    pub fn new() -> Self {
        Definitions::default()
    }

    pub fn define(&mut self, name: impl Into<String>, body: ProcessTerm) {
        self.defs.insert(name.into(), body);
    }

    pub fn get(&self, name: &str) -> Option<&ProcessTerm> {
        self.defs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.defs.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ProcessTerm)> {
        self.defs.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.defs.keys()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Checks that every reference occurring in any body (or in `root`) is
    /// defined, returning the first dangling name.
    pub fn first_dangling_ref(&self, root: Option<&ProcessTerm>) -> Option<String> {
        let mut candidates: Vec<&ProcessTerm> = self.defs.values().collect();
        if let Some(r) = root {
            candidates.push(r);
        }
        for term in candidates {
            for name in term.referenced_names() {
                if !self.contains(&name) {
                    return Some(name);
                }
            }
        }
        None
    }
}
