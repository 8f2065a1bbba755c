//! Discrete-event execution of one swarm run.
//!
//! Robots occupy machine states and move along their transitions after
//! substrate-sampled delays. Communication is a rendezvous over a shared
//! medium: a sender that reaches a hand-off blocks until some peer is
//! actually listening, channel acquisition is decided at the instant a
//! send meets an armed receive (carrier-sense arbitration), and the
//! message itself then takes the profile's transfer latency to arrive.
//! Crucially, initiating a send does not yet resolve a state's choice: a
//! robot whose own request is still unserved keeps listening, and if a
//! rival's request reaches it first, its pending request is withdrawn —
//! the same resolution rule the process semantics give to an external
//! choice between a write and a read.
//!
//! Branches decided internally by the design (a detection, say) are driven
//! by the scenario block: encounters arrive as a renewal process, each one
//! resolves the branch by the declared probability, and from that moment
//! until the chosen transition completes the robot is committed and deaf —
//! which is precisely the window that makes joint faults reachable.
//!
//! Narrowings against the full process semantics, chosen to keep runs
//! deterministic per seed: a state's self-timed branches are offered one
//! at a time in completion order rather than all at once, an encounter is
//! skipped while such an offer is outstanding, and interleaved receives
//! are collected sequentially in arrival order. None of these affect the
//! shipped designs, whose states have at most one self-timed branch.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::analysis::{internal_choice_guards, violates, MetaState};
use crate::csp::{Action, ChannelDir, MessagePattern, MessageValue};
use crate::speclang::{
    row_paths, ScenarioSpec, SubstrateProfile, SwarmSpec, TimingParams,
};

use super::log::{Incident, LogEvent, LogKind, ObservedRow, SimLog, Termination};
use super::sampler::{duration, latency, Obs, NS_PER_MS};
use super::{SimConfig, SimError};

/// One transition's execution plan: where it goes, the micro-actions along
/// the way, and how long the substrate says it takes.
#[derive(Debug, Clone)]
struct RowPlan {
    to: String,
    actions: Vec<Action>,
    guard_index: usize,
    timing: TimingParams,
}

/// A transition whose first action is a receive: armed on state entry,
/// fired by a matching send.
#[derive(Debug, Clone)]
struct ReadPlan {
    to: String,
    actions: Vec<Action>,
    timing: TimingParams,
    channel: String,
    pattern: MessagePattern,
}

/// An encounter-driven branch pair.
#[derive(Debug, Clone)]
struct DetectPlan {
    probability: f64,
    positive: Option<RowPlan>,
    negative: Option<RowPlan>,
}

#[derive(Debug, Clone, Default)]
struct StatePlan {
    detect: Option<DetectPlan>,
    timers: Vec<RowPlan>,
    reads: Vec<ReadPlan>,
    has_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum EvKind {
    Encounter { robot: u32, gen: u64 },
    Timer { robot: u32, gen: u64, idx: usize },
    DetectDone { robot: u32, gen: u64, positive: bool },
    ReadDone { robot: u32, gen: u64, idx: usize },
}

impl EvKind {
    fn owner(&self) -> (u32, u64) {
        match *self {
            EvKind::Encounter { robot, gen }
            | EvKind::Timer { robot, gen, .. }
            | EvKind::DetectDone { robot, gen, .. }
            | EvKind::ReadDone { robot, gen, .. } => (robot, gen),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Ev {
    t: u64,
    seq: u64,
    kind: EvKind,
}

#[derive(Debug, Clone)]
struct PendingSend {
    sender: u32,
    gen: u64,
    channel: String,
    message: MessageValue,
    initiated_ns: u64,
    seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReadSlot {
    /// A state's receive transition, armed while the robot is idle there.
    GuardRow { idx: usize },
    /// A receive in the middle of an already-committed transition.
    MidChain,
}

#[derive(Debug, Clone)]
struct ArmedRead {
    reader: u32,
    gen: u64,
    channel: String,
    pattern: MessagePattern,
    armed_ns: u64,
    seq: u64,
    slot: ReadSlot,
}

/// The transition a robot is currently executing.
#[derive(Debug, Clone)]
struct ChainExec {
    to: String,
    actions: Vec<Action>,
    pos: usize,
    /// Until the first action actually occurs, the robot is still offering
    /// its other branches; a send that merely sits pending does not commit.
    committed: bool,
    served: BTreeSet<u32>,
}

#[derive(Debug)]
struct Robot {
    state: String,
    gen: u64,
    rng: ChaCha12Rng,
    chain: Option<ChainExec>,
}

fn pattern_accepts(pattern: &MessagePattern, message: &MessageValue) -> bool {
    match pattern {
        MessagePattern::Value(v) => v == message,
        MessagePattern::Binder(_) => true,
    }
}

/// Classifies every state's transitions against the profile and scenario.
fn build_plans(
    spec: &SwarmSpec,
    profile: &SubstrateProfile,
) -> Result<(BTreeMap<String, Rc<StatePlan>>, Vec<String>), SimError> {
    let paths = row_paths(&spec.defs, &spec.root)
        .map_err(|e| SimError::NotMachine { reason: e.to_string() })?;
    let mut by_row: BTreeMap<(String, crate::speclang::ActionSym), &crate::speclang::RowPath> =
        BTreeMap::new();
    for p in &paths {
        by_row.insert((p.from.clone(), p.sym.clone()), p);
    }

    let scenario: Option<&ScenarioSpec> = spec.scenario.as_ref();
    let guards = internal_choice_guards(&spec.defs);
    for g in &guards {
        let covered = scenario
            .map(|s| s.detect.iter().any(|r| r.positive == *g || r.negative == *g))
            .unwrap_or(false);
        if !covered {
            return Err(SimError::ScenarioMissing { event: g.clone() });
        }
    }

    let mut notes: BTreeSet<String> = BTreeSet::new();
    let mut plans = BTreeMap::new();
    for state in &spec.fsm.states {
        let mut plan = StatePlan::default();
        let mut detect_rule: Option<usize> = None;
        for row in spec.fsm.rows_from(state) {
            plan.has_rows = true;
            let path = by_row.get(&(state.clone(), row.sym.clone())).ok_or_else(|| {
                SimError::NotMachine {
                    reason: format!(
                        "machine row `{}` on `{}` has no counterpart in the process definitions",
                        state, row.sym
                    ),
                }
            })?;
            for act in &path.actions {
                if let Action::Channel(op) = act {
                    if op.direction == ChannelDir::Write
                        && matches!(op.message, MessagePattern::Binder(_))
                    {
                        return Err(SimError::UnsupportedShape {
                            state: state.clone(),
                            detail: format!("a send on `{}` has no concrete message", op.channel),
                        });
                    }
                }
            }
            let timing = profile.timing.get(state, &row.to);
            let rule_idx = match &row.sym {
                crate::speclang::ActionSym::Event(e) => scenario.and_then(|s| {
                    s.detect.iter().position(|r| r.positive == *e || r.negative == *e)
                }),
                _ => None,
            };
            if let Some(ri) = rule_idx {
                if let Some(prev) = detect_rule {
                    if prev != ri {
                        return Err(SimError::UnsupportedShape {
                            state: state.clone(),
                            detail: "two different detect rules apply to one state".into(),
                        });
                    }
                } else {
                    detect_rule = Some(ri);
                    let rule = &scenario.expect("rule index from scenario").detect[ri];
                    plan.detect = Some(DetectPlan {
                        probability: rule.probability,
                        positive: None,
                        negative: None,
                    });
                }
                for act in &path.actions[..path.guard_index] {
                    if !matches!(act, Action::Event(_)) {
                        return Err(SimError::UnsupportedShape {
                            state: state.clone(),
                            detail: "communication before a detection branch is decided".into(),
                        });
                    }
                }
                let Some(timing) = timing else {
                    notes.insert(format!(
                        "profile `{}` has no timing for {} -> {}; that branch cannot complete",
                        profile.name, state, row.to
                    ));
                    continue;
                };
                let rp = RowPlan {
                    to: row.to.clone(),
                    actions: path.actions.clone(),
                    guard_index: path.guard_index,
                    timing,
                };
                let rule = &scenario.expect("rule index from scenario").detect[ri];
                let dp = plan.detect.as_mut().expect("created above");
                if let crate::speclang::ActionSym::Event(e) = &row.sym {
                    if *e == rule.positive {
                        dp.positive = Some(rp);
                    } else {
                        dp.negative = Some(rp);
                    }
                }
                continue;
            }
            if path.guard_index != 0 {
                return Err(SimError::UnsupportedShape {
                    state: state.clone(),
                    detail: format!(
                        "actions precede the label `{}` but no detect rule decides the branch",
                        row.sym
                    ),
                });
            }
            let Some(timing) = timing else {
                notes.insert(format!(
                    "profile `{}` has no timing for {} -> {}; that transition is disabled",
                    profile.name, state, row.to
                ));
                continue;
            };
            match &path.actions[0] {
                Action::Channel(op) if op.direction == ChannelDir::Read => {
                    plan.reads.push(ReadPlan {
                        to: row.to.clone(),
                        actions: path.actions.clone(),
                        timing,
                        channel: op.channel.clone(),
                        pattern: op.message.clone(),
                    });
                }
                _ => {
                    plan.timers.push(RowPlan {
                        to: row.to.clone(),
                        actions: path.actions.clone(),
                        guard_index: 0,
                        timing,
                    });
                }
            }
        }
        if plan.detect.as_ref().is_some_and(|dp| dp.positive.is_none() && dp.negative.is_none()) {
            plan.detect = None;
        }
        if plan.detect.is_some() && scenario.and_then(|s| s.encounter).is_none() {
            notes.insert(format!(
                "state `{state}` branches on detection but the scenario gives no encounter rate; \
                 those branches never fire"
            ));
            plan.detect = None;
        }
        plans.insert(state.clone(), Rc::new(plan));
    }

    let initial = plans.get(&spec.fsm.initial).expect("initial state validated");
    if initial.has_rows
        && initial.detect.is_none()
        && initial.timers.is_empty()
        && initial.reads.is_empty()
    {
        return Err(SimError::ProfileIncomplete {
            state: spec.fsm.initial.clone(),
            profile: profile.name.clone(),
        });
    }
    Ok((plans, notes.into_iter().collect()))
}

struct Engine<'a> {
    spec: &'a SwarmSpec,
    profile: &'a SubstrateProfile,
    encounter: Option<TimingParams>,
    plans: BTreeMap<String, Rc<StatePlan>>,
    robots: Vec<Robot>,
    heap: BinaryHeap<Reverse<Ev>>,
    pending: Vec<PendingSend>,
    armed: Vec<ArmedRead>,
    seq: u64,
    now: u64,
    horizon_ns: u64,
    events: Vec<LogEvent>,
    incidents: Vec<Incident>,
    observed: BTreeMap<(String, String), Obs>,
    notes: Vec<String>,
    illegal_now: Vec<bool>,
    seed: u64,
}

pub(crate) fn run_prepared(spec: &SwarmSpec, cfg: &SimConfig) -> Result<SimLog, SimError> {
    let profile = spec
        .profile(&cfg.profile)
        .ok_or_else(|| SimError::UnknownProfile { name: cfg.profile.clone() })?;
    let (plans, notes) = build_plans(spec, profile)?;
    let robots = (0..spec.k)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            Robot { state: spec.fsm.initial.clone(), gen: 0, rng, chain: None }
        })
        .collect();
    let engine = Engine {
        spec,
        profile,
        encounter: spec.scenario.as_ref().and_then(|s| s.encounter),
        plans,
        robots,
        heap: BinaryHeap::new(),
        pending: Vec::new(),
        armed: Vec::new(),
        seq: 0,
        now: 0,
        horizon_ns: (cfg.horizon_ms * NS_PER_MS).round().max(0.0) as u64,
        events: Vec::new(),
        incidents: Vec::new(),
        observed: BTreeMap::new(),
        notes,
        illegal_now: vec![false; spec.illegal.len()],
        seed: cfg.seed,
    };
    Ok(engine.run())
}

impl Engine<'_> {
    fn run(mut self) -> SimLog {
        let meta = self.meta();
        for (i, pred) in self.spec.illegal.iter().enumerate() {
            let v = violates(&meta, pred);
            if v {
                self.incidents.push(Incident { t_ns: 0, meta: meta.clone(), predicate: pred.clone() });
            }
            self.illegal_now[i] = v;
        }
        for r in 0..self.robots.len() {
            self.enter_state(r, 0);
        }
        self.match_pass();

        let (terminated, end_ns) = loop {
            let Some(Reverse(ev)) = self.heap.pop() else {
                let all_done = self.robots.iter().all(|r| {
                    r.chain.is_none() && !self.plans[&r.state].has_rows
                });
                let kind =
                    if all_done { Termination::Completed } else { Termination::Deadlocked };
                break (kind, self.now);
            };
            if ev.t > self.horizon_ns {
                break (Termination::HorizonReached, self.horizon_ns);
            }
            let (robot, gen) = ev.kind.owner();
            if self.robots[robot as usize].gen != gen {
                continue;
            }
            self.now = ev.t;
            self.handle(ev.kind, ev.t);
            self.match_pass();
        };

        self.events.sort_by_key(|e| e.t_ns);
        let observed = self
            .observed
            .into_iter()
            .map(|((from, to), o)| ObservedRow {
                from,
                to,
                samples: o.n,
                mean_ms: o.mean,
                min_ms: o.min,
                max_ms: o.max,
            })
            .collect();
        SimLog {
            seed: self.seed,
            profile: self.profile.name.clone(),
            horizon_ns: self.horizon_ns,
            end_ns,
            terminated,
            final_meta: MetaState(self.robots.iter().map(|r| r.state.clone()).collect()),
            incidents: self.incidents,
            observed,
            notes: self.notes,
            events: self.events,
        }
    }

    fn meta(&self) -> MetaState {
        MetaState(self.robots.iter().map(|r| r.state.clone()).collect())
    }

    fn log(&mut self, t: u64, robot: usize, kind: LogKind) {
        self.events.push(LogEvent { t_ns: t, robot: robot as u32, kind });
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn push_ev(&mut self, t: u64, kind: EvKind) {
        let seq = self.next_seq();
        self.heap.push(Reverse(Ev { t, seq, kind }));
    }

    fn observe(&mut self, from: &str, to: &str, ms: f64) {
        self.observed.entry((from.to_string(), to.to_string())).or_default().push(ms);
    }

    /// Withdraws everything the robot currently has in flight: armed
    /// receives, unserved sends, and (via generation) scheduled timers.
    fn invalidate(&mut self, r: usize) {
        self.robots[r].gen += 1;
        let gen = self.robots[r].gen;
        self.armed.retain(|a| !(a.reader as usize == r && a.gen < gen));
        self.pending.retain(|s| !(s.sender as usize == r && s.gen < gen));
    }

    fn enter_state(&mut self, r: usize, t: u64) {
        let state = self.robots[r].state.clone();
        let plan = Rc::clone(&self.plans[&state]);
        if plan.detect.is_some() {
            if let Some(p) = self.encounter {
                let (_, ns) = duration(&mut self.robots[r].rng, p);
                let gen = self.robots[r].gen;
                self.push_ev(t + ns, EvKind::Encounter { robot: r as u32, gen });
            }
        }
        for (idx, row) in plan.timers.iter().enumerate() {
            let (ms, ns) = duration(&mut self.robots[r].rng, row.timing);
            self.observe(&state, &row.to, ms);
            let gen = self.robots[r].gen;
            self.push_ev(t + ns, EvKind::Timer { robot: r as u32, gen, idx });
        }
        for (idx, row) in plan.reads.iter().enumerate() {
            let seq = self.next_seq();
            self.armed.push(ArmedRead {
                reader: r as u32,
                gen: self.robots[r].gen,
                channel: row.channel.clone(),
                pattern: row.pattern.clone(),
                armed_ns: t,
                seq,
                slot: ReadSlot::GuardRow { idx },
            });
        }
    }

    fn state_change(&mut self, r: usize, to: &str, t: u64) {
        self.invalidate(r);
        self.robots[r].chain = None;
        let from = self.robots[r].state.clone();
        self.log(t, r, LogKind::StateChange { from, to: to.to_string() });
        self.robots[r].state = to.to_string();
        let meta = self.meta();
        for (i, pred) in self.spec.illegal.iter().enumerate() {
            let v = violates(&meta, pred);
            if v && !self.illegal_now[i] {
                self.incidents.push(Incident {
                    t_ns: t,
                    meta: meta.clone(),
                    predicate: pred.clone(),
                });
            }
            self.illegal_now[i] = v;
        }
        self.enter_state(r, t);
    }

    /// First actual occurrence inside a transition: the robot stops
    /// offering its alternatives.
    fn commit_chain(&mut self, r: usize) {
        self.invalidate(r);
        if let Some(chain) = self.robots[r].chain.as_mut() {
            chain.committed = true;
        }
    }

    fn advance_chain(&mut self, r: usize, t: u64) {
        loop {
            let Some(chain) = self.robots[r].chain.as_ref() else { return };
            if chain.pos >= chain.actions.len() {
                let to = chain.to.clone();
                self.state_change(r, &to, t);
                return;
            }
            let act = chain.actions[chain.pos].clone();
            let committed = chain.committed;
            match act {
                Action::Event(e) => {
                    if !committed {
                        self.commit_chain(r);
                    }
                    self.log(t, r, LogKind::Internal { name: e.name });
                    self.robots[r].chain.as_mut().expect("active chain").pos += 1;
                }
                Action::Channel(op) => {
                    let gen = self.robots[r].gen;
                    let seq = self.next_seq();
                    match op.direction {
                        ChannelDir::Write => {
                            let message = match op.message {
                                MessagePattern::Value(v) => v,
                                MessagePattern::Binder(_) => unreachable!("checked at build"),
                            };
                            self.pending.push(PendingSend {
                                sender: r as u32,
                                gen,
                                channel: op.channel,
                                message,
                                initiated_ns: t,
                                seq,
                            });
                        }
                        ChannelDir::Read => {
                            self.armed.push(ArmedRead {
                                reader: r as u32,
                                gen,
                                channel: op.channel,
                                pattern: op.message,
                                armed_ns: t,
                                seq,
                                slot: ReadSlot::MidChain,
                            });
                        }
                    }
                    return;
                }
            }
        }
    }

    fn handle(&mut self, kind: EvKind, t: u64) {
        match kind {
            EvKind::Encounter { robot, .. } => {
                let r = robot as usize;
                if self.robots[r].chain.is_some() {
                    return;
                }
                let state = self.robots[r].state.clone();
                let Some(dp) = self.plans[&state].detect.clone() else { return };
                self.invalidate(r);
                let positive = self.robots[r].rng.random::<f64>() < dp.probability;
                let branch = if positive { &dp.positive } else { &dp.negative };
                match branch {
                    None => {
                        // The branch cannot complete under this profile;
                        // resume scanning.
                        self.enter_state(r, t);
                    }
                    Some(rp) => {
                        for act in &rp.actions[..rp.guard_index] {
                            if let Action::Event(e) = act {
                                self.log(t, r, LogKind::Internal { name: e.name.clone() });
                            }
                        }
                        let (ms, ns) = duration(&mut self.robots[r].rng, rp.timing);
                        self.observe(&state, &rp.to, ms);
                        let gen = self.robots[r].gen;
                        self.push_ev(
                            t + ns,
                            EvKind::DetectDone { robot, gen, positive },
                        );
                    }
                }
            }
            EvKind::DetectDone { robot, positive, .. } => {
                let r = robot as usize;
                let state = self.robots[r].state.clone();
                let Some(dp) = self.plans[&state].detect.clone() else { return };
                let rp = if positive { dp.positive } else { dp.negative };
                let rp = rp.expect("scheduled only for a present branch");
                self.robots[r].chain = Some(ChainExec {
                    to: rp.to,
                    actions: rp.actions,
                    pos: rp.guard_index,
                    committed: true,
                    served: BTreeSet::new(),
                });
                self.advance_chain(r, t);
            }
            EvKind::Timer { robot, idx, .. } => {
                let r = robot as usize;
                if self.robots[r].chain.is_some() {
                    return;
                }
                let state = self.robots[r].state.clone();
                let rp = self.plans[&state].timers[idx].clone();
                self.robots[r].chain = Some(ChainExec {
                    to: rp.to,
                    actions: rp.actions,
                    pos: 0,
                    committed: false,
                    served: BTreeSet::new(),
                });
                self.advance_chain(r, t);
            }
            EvKind::ReadDone { robot, idx, .. } => {
                let r = robot as usize;
                let state = self.robots[r].state.clone();
                let rp = self.plans[&state].reads[idx].clone();
                self.robots[r].chain = Some(ChainExec {
                    to: rp.to,
                    actions: rp.actions,
                    pos: 1,
                    committed: true,
                    served: BTreeSet::new(),
                });
                self.advance_chain(r, t);
            }
        }
    }

    /// Pairs pending sends with armed receives until none match, earliest
    /// send first, earliest listener first.
    fn match_pass(&mut self) {
        loop {
            let mut best: Option<(usize, usize, (u64, u32, u64))> = None;
            for (si, s) in self.pending.iter().enumerate() {
                let skey = (s.initiated_ns, s.sender, s.seq);
                if let Some((bsi, ..)) = best {
                    let b = &self.pending[bsi];
                    if skey >= (b.initiated_ns, b.sender, b.seq) {
                        continue;
                    }
                }
                let served = self.robots[s.sender as usize]
                    .chain
                    .as_ref()
                    .map(|c| c.served.clone())
                    .unwrap_or_default();
                let mut rbest: Option<(usize, (u64, u32, u64))> = None;
                for (ri, a) in self.armed.iter().enumerate() {
                    if a.reader == s.sender
                        || served.contains(&a.reader)
                        || a.channel != s.channel
                        || !pattern_accepts(&a.pattern, &s.message)
                    {
                        continue;
                    }
                    let rkey = (a.armed_ns, a.reader, a.seq);
                    if rbest.as_ref().is_none_or(|(_, k)| rkey < *k) {
                        rbest = Some((ri, rkey));
                    }
                }
                if let Some((ri, _)) = rbest {
                    best = Some((si, ri, skey));
                }
            }
            let Some((si, ri, _)) = best else { return };
            self.execute_match(si, ri);
        }
    }

    fn execute_match(&mut self, si: usize, ri: usize) {
        let s = self.pending.swap_remove(si);
        let a = self.armed.swap_remove(ri);
        let t = self.now.max(s.initiated_ns).max(a.armed_ns);
        let lat = latency(&mut self.robots[s.sender as usize].rng, self.profile.comm_latency);
        let recv_t = t + lat;
        self.log(
            t,
            s.sender as usize,
            LogKind::Send {
                channel: s.channel.clone(),
                message: s.message.to_string(),
                to: a.reader,
            },
        );
        self.log(
            recv_t,
            a.reader as usize,
            LogKind::Receive {
                channel: s.channel.clone(),
                message: s.message.to_string(),
                from: s.sender,
            },
        );

        // Receiver side.
        let rr = a.reader as usize;
        match a.slot {
            ReadSlot::GuardRow { idx } => {
                self.invalidate(rr);
                self.robots[rr].chain = None;
                let state = self.robots[rr].state.clone();
                let row = self.plans[&state].reads[idx].clone();
                let (ms, ns) = duration(&mut self.robots[rr].rng, row.timing);
                self.observe(&state, &row.to, ms);
                let gen = self.robots[rr].gen;
                self.push_ev(recv_t + ns, EvKind::ReadDone { robot: a.reader, gen, idx });
            }
            ReadSlot::MidChain => {
                self.robots[rr].chain.as_mut().expect("mid-chain read").pos += 1;
                self.advance_chain(rr, recv_t);
            }
        }

        // Sender side: the send has now actually occurred.
        let ss = s.sender as usize;
        if self.robots[ss].chain.as_ref().is_some_and(|c| !c.committed) {
            self.commit_chain(ss);
        }
        let chain = self.robots[ss].chain.as_mut().expect("sending chain");
        chain.served.insert(a.reader);
        chain.pos += 1;
        self.advance_chain(ss, t);
    }
}
