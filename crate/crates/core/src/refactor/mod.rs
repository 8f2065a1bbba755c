//! Automatic correction of a faulty design: serialize the triggering
//! transition through a consensus handshake. The robot that first claims
//! the shared channel becomes master for the round, every other robot
//! acknowledges and waits for its task, and a circular priority queue
//! fixes message fan-out order and rotates for fairness.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{
    Action, ChannelDir, ChannelOp, Definitions, EventLabel, MessagePattern, MessageValue,
    ProcessTerm,
};
use crate::speclang::{validate, ActionSym, FsmTransition, SwarmSpec, TimingRow};
use crate::analysis::AnalysisReport;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefactorError {
    #[error("the analysis report contains nothing to correct")]
    NothingToRefactor,
    #[error("triggering event `{0}` matches no machine transition")]
    TriggerNotInMachine(String),
    #[error("state `{0}` has no passive receive branch to relocate into the slave role")]
    NoPassiveBranch(String),
    #[error("a circular queue needs at least two robots, got {0}")]
    QueueTooSmall(u32),
    #[error("rewritten design failed its own consistency check: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationPolicy {
    /// The order never changes; robot 0 always wins fan-out priority.
    Static,
    /// After every completed consensus round each robot advances the
    /// queue by one, so mastership priority circulates.
    RotateAfterRound,
}

/// A globally agreed robot ordering. All robots hold an identical copy and
/// apply the same deterministic rotation, which is what keeps their copies
/// identical without further communication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityQueue {
    pub order: Vec<u32>,
    pub rotation_policy: RotationPolicy,
}

impl PriorityQueue {
    /// The fan-out order robot `owner` uses: every other robot, starting
    /// from the position after `owner` and wrapping around.
    pub fn others_after(&self, owner: u32) -> Vec<u32> {
        let n = self.order.len();
        let Some(pos) = self.order.iter().position(|&r| r == owner) else {
            return Vec::new();
        };
        (1..n).map(|i| self.order[(pos + i) % n]).collect()
    }

    pub fn rotate(&mut self) {
        if !self.order.is_empty() {
            self.order.rotate_left(1);
        }
    }
}

impl fmt::Display for PriorityQueue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.order.iter().map(|r| r.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Identity ordering over `k` robots, rotated after each round.
pub fn create_queue(k: u32) -> Result<PriorityQueue, RefactorError> {
    if k < 2 {
        return Err(RefactorError::QueueTooSmall(k));
    }
    Ok(PriorityQueue { order: (0..k).collect(), rotation_policy: RotationPolicy::RotateAfterRound })
}

/// Naming and wiring for one synthesized consensus round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusParams {
    /// State the winner proceeds to once every peer has acknowledged.
    pub target_state: String,
    /// The event being serialized.
    pub trigger: EventLabel,
    pub k: u32,
    pub sync_channel: String,
    pub sync_message: String,
    pub ack_message: String,
    /// Payload the master later hands each slave.
    pub task_message: String,
    /// Where a slave goes after receiving its task.
    pub slave_target: String,
    pub master_state: String,
    pub ack_wait_state: String,
    pub slave_state: String,
    /// Annotation event marking a successful mastership claim.
    pub claim_mark: String,
    /// Annotation event marking a robot that stood down.
    pub yield_mark: String,
}

impl ConsensusParams {
    /// Conventional naming for a consensus round entering `target_state`
    /// on `trigger` among `k` robots.
    pub fn new(target_state: &str, trigger: EventLabel, k: u32) -> Self {
        ConsensusParams {
            target_state: target_state.to_string(),
            trigger,
            k,
            sync_channel: "c".into(),
            sync_message: "s".into(),
            ack_message: "ack".into(),
            task_message: "p".into(),
            slave_target: "F".into(),
            master_state: "C_m".into(),
            ack_wait_state: "A".into(),
            slave_state: "C_s".into(),
            claim_mark: "m".into(),
            yield_mark: "nq".into(),
        }
    }
}

/// The synthesized states: a claim state whose outcome is decided by who
/// wins the shared channel, an acknowledgement-collection state for the
/// winner, and a standby state for everyone else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusBlock {
    pub trigger: EventLabel,
    pub master_state: String,
    pub ack_wait_state: String,
    pub slave_state: String,
    pub sync_channel: String,
    pub defs: Definitions,
}

fn write_op(channel: &str, msg: &str) -> Action {
    Action::Channel(ChannelOp::write(channel, msg))
}

fn read_op(channel: &str, msg: &str) -> Action {
    Action::Channel(ChannelOp::read(
        channel,
        MessagePattern::Value(MessageValue::new(msg)),
    ))
}

fn event(name: &str) -> Action {
    Action::Event(EventLabel::new(name))
}

/// Builds the consensus states for one round.
///
/// The claim state races all contenders on the shared channel: the first
/// robot whose synchronization request is taken wins, marks the claim, and
/// finishes notifying the remaining peers (`k-1` requests in total); a
/// contender that instead observes a peer's request before winning stands
/// down into the standby state. The winner then collects one
/// acknowledgement per peer — in any arrival order — and proceeds to the
/// target state, whose own behaviour distributes the tasks. A standby
/// robot acknowledges, waits for its task, and proceeds like any passive
/// receiver. With `k = 1` the block degenerates: no requests, no
/// acknowledgements, and the claim is unopposed.
pub fn obtain_consensus(params: &ConsensusParams) -> ConsensusBlock {
    let p = params;
    let fanout = p.k.saturating_sub(1) as usize;

    // Claim branch: first request is the decisive one, the claim mark
    // follows it, then the remaining requests go out.
    let mut claim = ProcessTerm::named(p.ack_wait_state.clone());
    for _ in 1..fanout {
        claim = ProcessTerm::prefix(write_op(&p.sync_channel, &p.sync_message), claim);
    }
    claim = ProcessTerm::prefix(event(&p.claim_mark), claim);
    if fanout >= 1 {
        claim = ProcessTerm::prefix(write_op(&p.sync_channel, &p.sync_message), claim);
    }
    let stand_down = ProcessTerm::prefix(
        read_op(&p.sync_channel, &p.sync_message),
        ProcessTerm::prefix(event(&p.yield_mark), ProcessTerm::named(p.slave_state.clone())),
    );
    let master_body = ProcessTerm::ext_choice(claim, stand_down);

    let ack_read = || {
        ProcessTerm::prefix(read_op(&p.sync_channel, &p.ack_message), ProcessTerm::Skip)
    };
    let collector = match fanout {
        0 => ProcessTerm::Skip,
        n => ProcessTerm::interleave_all((0..n).map(|_| ack_read()).collect()),
    };
    let ack_wait_body = ProcessTerm::seq(collector, ProcessTerm::named(p.target_state.clone()));

    let slave_body = ProcessTerm::prefix(
        write_op(&p.sync_channel, &p.ack_message),
        ProcessTerm::prefix(
            read_op(&p.sync_channel, &p.task_message),
            ProcessTerm::named(p.slave_target.clone()),
        ),
    );

    let mut defs = Definitions::new();
    defs.define(p.master_state.clone(), master_body);
    defs.define(p.ack_wait_state.clone(), ack_wait_body);
    defs.define(p.slave_state.clone(), slave_body);
    ConsensusBlock {
        trigger: p.trigger.clone(),
        master_state: p.master_state.clone(),
        ack_wait_state: p.ack_wait_state.clone(),
        slave_state: p.slave_state.clone(),
        sync_channel: p.sync_channel.clone(),
        defs,
    }
}

/// A corrected design plus the artifacts of its correction.
#[derive(Debug, Clone, PartialEq)]
pub struct RefactorOutcome {
    pub corrected: SwarmSpec,
    pub queue: PriorityQueue,
    pub consensus: ConsensusBlock,
    pub notes: Vec<String>,
}

fn fresh(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    for i in 2.. {
        let cand = format!("{base}{i}");
        if !taken.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// Rewires a faulty design around the reported triggering events.
///
/// For the trigger's source state, the triggered transition is redirected
/// into the claim state and the passive receive branch becomes the entry
/// into standby; the trigger's original target keeps its behaviour but
/// fans its task hand-off out to every peer. Timing rows follow the
/// transitions they measured: the trigger's duration moves with the
/// redirect, and the relocated receive keeps its duration on the standby
/// exit. Durations for the brand-new consensus transitions cannot be
/// invented here and are left to be measured per substrate.
pub fn refactor_design(
    spec: &SwarmSpec,
    report: &AnalysisReport,
) -> Result<RefactorOutcome, RefactorError> {
    if report.witnesses.is_empty() || report.triggering_events.is_empty() {
        return Err(RefactorError::NothingToRefactor);
    }
    let trigger = report
        .triggering_events
        .iter()
        .next()
        .expect("non-empty set")
        .clone();
    let mut notes = Vec::new();
    if report.triggering_events.len() > 1 {
        notes.push(format!(
            "multiple triggering events reported; serializing `{}` (one consensus round per run of this tool)",
            trigger.name
        ));
    }

    // Locate the machine row the trigger fires.
    let row = spec
        .fsm
        .transitions
        .iter()
        .find(|t| t.sym == ActionSym::Event(trigger.name.clone()))
        .cloned()
        .ok_or_else(|| RefactorError::TriggerNotInMachine(trigger.name.clone()))?;
    let source_state = row.from.clone();
    let target_state = row.to.clone();

    // The passive receive branch of the source state: the transition that
    // used to deliver the task directly. Its channel becomes the
    // consensus channel and its target the standby exit.
    let passive = spec
        .fsm
        .rows_from(&source_state)
        .find(|t| matches!(t.sym, ActionSym::Read { .. }))
        .cloned()
        .ok_or_else(|| RefactorError::NoPassiveBranch(source_state.clone()))?;
    let (task_channel, task_message) = match &passive.sym {
        ActionSym::Read { channel, message } => (channel.clone(), message.clone()),
        _ => unreachable!(),
    };
    let slave_target = passive.to.clone();

    let taken_states: BTreeSet<String> = spec.fsm.states.clone();
    let taken_msgs: BTreeSet<String> = spec
        .channel(&task_channel)
        .map(|c| c.messages.clone())
        .unwrap_or_default();

    let mut params = ConsensusParams::new(&target_state, trigger.clone(), spec.k);
    params.sync_channel = task_channel.clone();
    params.task_message = task_message.clone();
    params.slave_target = slave_target.clone();
    params.master_state = fresh("C_m", &taken_states);
    params.ack_wait_state = fresh("A", &taken_states);
    params.slave_state = fresh("C_s", &taken_states);
    params.sync_message = fresh("s", &taken_msgs);
    params.ack_message = fresh("ack", &taken_msgs);
    let block = obtain_consensus(&params);

    let mut corrected = spec.clone();

    // Machine rows.
    let mut transitions: Vec<FsmTransition> = Vec::new();
    for t in &spec.fsm.transitions {
        if t.from == source_state && t.sym == ActionSym::Event(trigger.name.clone()) {
            transitions.push(FsmTransition {
                from: t.from.clone(),
                sym: t.sym.clone(),
                to: params.master_state.clone(),
            });
        } else if t.from == passive.from && t.sym == passive.sym {
            transitions.push(FsmTransition {
                from: t.from.clone(),
                sym: ActionSym::Read {
                    channel: params.sync_channel.clone(),
                    message: params.sync_message.clone(),
                },
                to: params.slave_state.clone(),
            });
        } else {
            transitions.push(t.clone());
        }
    }
    transitions.push(FsmTransition {
        from: params.master_state.clone(),
        sym: ActionSym::Write {
            channel: params.sync_channel.clone(),
            message: params.sync_message.clone(),
        },
        to: params.ack_wait_state.clone(),
    });
    transitions.push(FsmTransition {
        from: params.master_state.clone(),
        sym: ActionSym::Read {
            channel: params.sync_channel.clone(),
            message: params.sync_message.clone(),
        },
        to: params.slave_state.clone(),
    });
    transitions.push(FsmTransition {
        from: params.ack_wait_state.clone(),
        sym: ActionSym::Read {
            channel: params.sync_channel.clone(),
            message: params.ack_message.clone(),
        },
        to: target_state.clone(),
    });
    transitions.push(FsmTransition {
        from: params.slave_state.clone(),
        sym: ActionSym::Write {
            channel: params.sync_channel.clone(),
            message: params.ack_message.clone(),
        },
        to: slave_target.clone(),
    });
    corrected.fsm.states.extend([
        params.master_state.clone(),
        params.ack_wait_state.clone(),
        params.slave_state.clone(),
    ]);
    corrected.fsm.transitions = transitions;
    corrected.fsm.sort();

    // Process bodies: surgical rewrite of the source state, fan-out in the
    // target state, and the three new definitions.
    let mut defs = Definitions::new();
    for (name, body) in spec.defs.iter() {
        let new_body = if *name == source_state {
            rewrite_source_body(body, &params, &target_state, &passive.sym)
        } else if *name == target_state {
            multiply_task_send(body, &params)
        } else {
            body.clone()
        };
        defs.define(name.clone(), new_body);
    }
    for (name, body) in block.defs.iter() {
        defs.define(name.clone(), body.clone());
    }
    corrected.defs = defs;

    // Channel vocabulary.
    for chan in corrected.channels.iter_mut() {
        if chan.name == params.sync_channel {
            chan.messages.insert(params.sync_message.clone());
            chan.messages.insert(params.ack_message.clone());
        }
    }

    // Timing rows follow the transitions they measured; rows for edges
    // that no longer exist are dropped, new edges get none.
    let surviving_edges: BTreeSet<(String, String)> = corrected
        .fsm
        .transitions
        .iter()
        .map(|t| (t.from.clone(), t.to.clone()))
        .collect();
    for profile in corrected.profiles.iter_mut() {
        let mut rows: Vec<TimingRow> = Vec::new();
        for r in &profile.timing.rows {
            let mut r = r.clone();
            if r.from == source_state && r.to == target_state {
                r.to = params.master_state.clone();
            } else if r.from == source_state && r.to == slave_target {
                r.from = params.slave_state.clone();
            }
            if surviving_edges.contains(&(r.from.clone(), r.to.clone())) {
                rows.push(r);
            }
        }
        profile.timing.rows = rows;
        profile.timing.sort();
    }
    notes.push(format!(
        "transitions out of `{}`, `{}`, and into `{}` need substrate timing measurements before simulation",
        params.master_state, params.slave_state, params.slave_state
    ));
    notes.push(
        "standby robots acknowledge and then wait for their task; they deliberately do not \
         also collect acknowledgements, which would let a bystander mistake itself for the winner"
            .to_string(),
    );

    let queue = create_queue(spec.k)?;

    validate(&corrected).map_err(|e| RefactorError::Inconsistent(e.to_string()))?;
    Ok(RefactorOutcome { corrected, queue, consensus: block, notes })
}

/// In the trigger's source state: redirect the triggered branch to the
/// claim state and replace the passive receive branch with the standby
/// entry.
fn rewrite_source_body(
    body: &ProcessTerm,
    params: &ConsensusParams,
    orig_target: &str,
    passive_sym: &ActionSym,
) -> ProcessTerm {
    fn retarget(term: &ProcessTerm, from: &str, to: &str) -> ProcessTerm {
        match term {
            ProcessTerm::NamedRef(n) if n == from => ProcessTerm::named(to),
            ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => term.clone(),
            ProcessTerm::Prefix(a, p) => ProcessTerm::prefix(a.clone(), retarget(p, from, to)),
            ProcessTerm::Seq(a, b) => {
                ProcessTerm::seq(retarget(a, from, to), retarget(b, from, to))
            }
            ProcessTerm::ExtChoice(a, b) => {
                ProcessTerm::ext_choice(retarget(a, from, to), retarget(b, from, to))
            }
            ProcessTerm::IntChoice(a, b) => {
                ProcessTerm::int_choice(retarget(a, from, to), retarget(b, from, to))
            }
            ProcessTerm::Interleave(a, b) => {
                ProcessTerm::interleave(retarget(a, from, to), retarget(b, from, to))
            }
            ProcessTerm::SyncParallel(a, b, s) => ProcessTerm::sync_parallel(
                retarget(a, from, to),
                retarget(b, from, to),
                s.clone(),
            ),
        }
    }

    fn sym_of(action: &Action) -> ActionSym {
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

    fn rw(
        term: &ProcessTerm,
        guard_pending: bool,
        params: &ConsensusParams,
        orig_target: &str,
        passive_sym: &ActionSym,
    ) -> ProcessTerm {
        match term {
            ProcessTerm::Prefix(act, cont) => {
                if guard_pending {
                    let sym = sym_of(act);
                    if sym == *passive_sym {
                        return ProcessTerm::prefix(
                            read_op(&params.sync_channel, &params.sync_message),
                            ProcessTerm::named(params.slave_state.clone()),
                        );
                    }
                    if sym == ActionSym::Event(params.trigger.name.clone()) {
                        return ProcessTerm::prefix(
                            act.clone(),
                            retarget(cont, orig_target, &params.master_state),
                        );
                    }
                }
                ProcessTerm::prefix(act.clone(), rw(cont, false, params, orig_target, passive_sym))
            }
            ProcessTerm::ExtChoice(a, b) => ProcessTerm::ext_choice(
                rw(a, true, params, orig_target, passive_sym),
                rw(b, true, params, orig_target, passive_sym),
            ),
            ProcessTerm::IntChoice(a, b) => ProcessTerm::int_choice(
                rw(a, true, params, orig_target, passive_sym),
                rw(b, true, params, orig_target, passive_sym),
            ),
            ProcessTerm::Seq(a, b) => ProcessTerm::seq(
                rw(a, guard_pending, params, orig_target, passive_sym),
                rw(b, false, params, orig_target, passive_sym),
            ),
            other => other.clone(),
        }
    }

    rw(body, true, params, orig_target, passive_sym)
}

/// In the trigger's target state: the single task hand-off becomes one
/// hand-off per peer (and disappears entirely for a lone robot).
fn multiply_task_send(body: &ProcessTerm, params: &ConsensusParams) -> ProcessTerm {
    fn go(term: &ProcessTerm, params: &ConsensusParams, done: &mut bool) -> ProcessTerm {
        if *done {
            return term.clone();
        }
        match term {
            ProcessTerm::Prefix(Action::Channel(op), cont)
                if op.direction == ChannelDir::Write
                    && op.channel == params.sync_channel
                    && op.message
                        == MessagePattern::Value(MessageValue::new(params.task_message.clone())) =>
            {
                *done = true;
                let fanout = params.k.saturating_sub(1);
                let mut out = (**cont).clone();
                for _ in 0..fanout {
                    out = ProcessTerm::prefix(
                        write_op(&params.sync_channel, &params.task_message),
                        out,
                    );
                }
                out
            }
            ProcessTerm::Prefix(a, p) => {
                ProcessTerm::prefix(a.clone(), go(p, params, done))
            }
            ProcessTerm::Seq(a, b) => {
                let a2 = go(a, params, done);
                let b2 = go(b, params, done);
                ProcessTerm::seq(a2, b2)
            }
            ProcessTerm::ExtChoice(a, b) => {
                let a2 = go(a, params, done);
                let b2 = go(b, params, done);
                ProcessTerm::ext_choice(a2, b2)
            }
            ProcessTerm::IntChoice(a, b) => {
                let a2 = go(a, params, done);
                let b2 = go(b, params, done);
                ProcessTerm::int_choice(a2, b2)
            }
            other => other.clone(),
        }
    }
    let mut done = false;
    go(body, params, &mut done)
}
