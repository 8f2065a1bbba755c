//! Swarm-level analysis: compose `k` tagged robot instances, explore the
//! joint behaviour while tracking every robot's machine state, and report
//! reachable illegal joint states, deadlocks, and livelocks with replayable
//! witness traces.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::explore::strongly_connected;
use crate::csp::semantics::SemanticState;
use crate::csp::{
    admits_trace, normalize, step, Action, CspError, Definitions, EventLabel, ExploreConfig,
    ProcessTerm, Trace, TraceEvent, TransitionLabel,
};
use crate::speclang::{ActionSym, MetaStatePredicate, StatePattern, SwarmSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error(transparent)]
    Kernel(#[from] CspError),
}

/// The joint machine state: one state name per robot index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MetaState(pub Vec<String>);

impl MetaState {
    pub fn uniform(state: &str, k: u32) -> Self {
        MetaState(vec![state.to_string(); k as usize])
    }

    pub fn count_in(&self, state: &str) -> usize {
        self.0.iter().filter(|s| *s == state).count()
    }
}

impl fmt::Display for MetaState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(String::as_str).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Does `meta` violate `pred`?
pub fn violates(meta: &MetaState, pred: &MetaStatePredicate) -> bool {
    match pred {
        MetaStatePredicate::AtMostNInState { state, n } => meta.count_in(state) > *n as usize,
        MetaStatePredicate::ForbiddenPattern { pattern } => {
            pattern.len() == meta.0.len()
                && pattern.iter().zip(&meta.0).all(|(slot, actual)| match slot {
                    StatePattern::Any => true,
                    StatePattern::Is(s) => s == actual,
                })
        }
    }
}

pub fn violated_predicate<'a>(
    meta: &MetaState,
    preds: &'a [MetaStatePredicate],
) -> Option<&'a MetaStatePredicate> {
    preds.iter().find(|p| violates(meta, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessClass {
    IllegalMeta,
    Deadlock,
    Livelock,
}

impl fmt::Display for WitnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WitnessClass::IllegalMeta => "illegal-meta",
            WitnessClass::Deadlock => "deadlock",
            WitnessClass::Livelock => "livelock",
        })
    }
}

/// A replayable counterexample: the shortest observable path the search
/// found to a bad joint state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub trace: Trace,
    pub final_meta: MetaState,
    pub classification: WitnessClass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub explored_states: usize,
    pub depth: usize,
    pub witnesses: Vec<Witness>,
    pub budget_hit: bool,
    /// Design-level events (no robot index) that tip the swarm into a
    /// reported fault; the correction stage serializes these.
    pub triggering_events: BTreeSet<EventLabel>,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn witnesses_of(&self, class: WitnessClass) -> impl Iterator<Item = &Witness> {
        self.witnesses.iter().filter(move |w| w.classification == class)
    }

    pub fn is_clean(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// The joint process: per-robot instances of the definitions with every
/// action tagged by robot index, interleaved. Channels stay shared, so
/// communication crosses robot boundaries by rendezvous.
#[derive(Debug, Clone)]
pub struct ComposedSwarm {
    pub term: ProcessTerm,
    pub env: Definitions,
    pub k: u32,
}

fn instance_name(name: &str, robot: u32) -> String {
    format!("{name}#{robot}")
}

fn tag_term(term: &ProcessTerm, robot: u32) -> ProcessTerm {
    match term {
        ProcessTerm::Skip => ProcessTerm::Skip,
        ProcessTerm::Stop => ProcessTerm::Stop,
        ProcessTerm::NamedRef(n) => ProcessTerm::named(instance_name(n, robot)),
        ProcessTerm::Prefix(a, p) => {
            let action = match a {
                Action::Event(e) => {
                    let mut e = e.clone();
                    e.robot_index = Some(robot);
                    Action::Event(e)
                }
                Action::Channel(op) => {
                    let mut op = op.clone();
                    op.robot_index = Some(robot);
                    Action::Channel(op)
                }
            };
            ProcessTerm::prefix(action, tag_term(p, robot))
        }
        ProcessTerm::Seq(a, b) => ProcessTerm::seq(tag_term(a, robot), tag_term(b, robot)),
        ProcessTerm::ExtChoice(a, b) => {
            ProcessTerm::ext_choice(tag_term(a, robot), tag_term(b, robot))
        }
        ProcessTerm::IntChoice(a, b) => {
            ProcessTerm::int_choice(tag_term(a, robot), tag_term(b, robot))
        }
        ProcessTerm::Interleave(a, b) => {
            ProcessTerm::interleave(tag_term(a, robot), tag_term(b, robot))
        }
        ProcessTerm::SyncParallel(a, b, s) => {
            ProcessTerm::sync_parallel(tag_term(a, robot), tag_term(b, robot), s.clone())
        }
    }
}

pub fn compose_swarm(spec: &SwarmSpec) -> ComposedSwarm {
    let mut env = Definitions::new();
    let mut roots = Vec::new();
    for robot in 0..spec.k {
        for (name, body) in spec.defs.iter() {
            env.define(instance_name(name, robot), tag_term(body, robot));
        }
        roots.push(ProcessTerm::named(instance_name(&spec.root, robot)));
    }
    ComposedSwarm { term: ProcessTerm::interleave_all(roots), env, k: spec.k }
}

/// Advances the joint machine state along one observed transition. A label
/// with no matching machine row leaves that robot's state unchanged, and
/// internal steps never move anything.
pub fn advance_meta(spec: &SwarmSpec, meta: &MetaState, label: &TransitionLabel) -> MetaState {
    let mut next = meta.clone();
    let mut apply = |robot: Option<u32>, sym: ActionSym| {
        if let Some(i) = robot {
            let i = i as usize;
            if let Some(target) = spec.fsm.target(&next.0[i], &sym) {
                next.0[i] = target.to_string();
            }
        }
    };
    match label {
        TransitionLabel::Tau => {}
        TransitionLabel::Event(e) => apply(e.robot_index, ActionSym::Event(e.name.clone())),
        TransitionLabel::Comm(c) => {
            apply(
                c.writer,
                ActionSym::Write { channel: c.channel.clone(), message: c.message.0.clone() },
            );
            apply(
                c.reader,
                ActionSym::Read { channel: c.channel.clone(), message: c.message.0.clone() },
            );
        }
    }
    next
}

/// First action name reachable in each branch of every internal choice in
/// the definitions — the events whose outcome the environment decides.
pub fn internal_choice_guards(defs: &Definitions) -> BTreeSet<String> {
    fn first_action_name(term: &ProcessTerm) -> Option<String> {
        match term {
            ProcessTerm::Prefix(Action::Event(e), _) => Some(e.name.clone()),
            ProcessTerm::Prefix(Action::Channel(_), _) => None,
            ProcessTerm::Seq(a, _) => first_action_name(a),
            ProcessTerm::ExtChoice(a, b) | ProcessTerm::IntChoice(a, b) => {
                first_action_name(a).or_else(|| first_action_name(b))
            }
            _ => None,
        }
    }
    fn collect(term: &ProcessTerm, out: &mut BTreeSet<String>) {
        match term {
            ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => {}
            ProcessTerm::Prefix(_, p) => collect(p, out),
            ProcessTerm::IntChoice(a, b) => {
                for branch in [a, b] {
                    if let Some(name) = first_action_name(branch) {
                        out.insert(name);
                    }
                    collect(branch, out);
                }
            }
            ProcessTerm::Seq(a, b)
            | ProcessTerm::ExtChoice(a, b)
            | ProcessTerm::Interleave(a, b) => {
                collect(a, out);
                collect(b, out);
            }
            ProcessTerm::SyncParallel(a, b, _) => {
                collect(a, out);
                collect(b, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    for (_, body) in defs.iter() {
        collect(body, &mut out);
    }
    out
}

fn design_event(name: &str) -> EventLabel {
    EventLabel::new(name)
}

/// For an illegal-meta witness: each offending robot's last event that
/// moved it into the predicate-violating state, as design-level labels.
fn entering_events(spec: &SwarmSpec, witness: &Witness) -> Vec<EventLabel> {
    let offenders: BTreeSet<usize> = match violated_predicate(&witness.final_meta, &spec.illegal) {
        Some(MetaStatePredicate::AtMostNInState { state, .. }) => witness
            .final_meta
            .0
            .iter()
            .enumerate()
            .filter(|(_, s)| *s == state)
            .map(|(i, _)| i)
            .collect(),
        Some(MetaStatePredicate::ForbiddenPattern { pattern }) => pattern
            .iter()
            .enumerate()
            .filter(|(_, slot)| matches!(slot, StatePattern::Is(_)))
            .map(|(i, _)| i)
            .collect(),
        None => BTreeSet::new(),
    };
    let mut meta = MetaState::uniform(&spec.fsm.initial, spec.k);
    let mut last_entering: Vec<Option<EventLabel>> = vec![None; spec.k as usize];
    for ev in &witness.trace {
        let label = match ev {
            TraceEvent::Event(e) => TransitionLabel::Event(e.clone()),
            TraceEvent::Comm(c) => TransitionLabel::Comm(c.clone()),
        };
        let next = advance_meta(spec, &meta, &label);
        for i in 0..spec.k as usize {
            if next.0[i] != meta.0[i] {
                let name = match ev {
                    TraceEvent::Event(e) => e.name.clone(),
                    TraceEvent::Comm(c) => format!("{}.{}", c.channel, c.message),
                };
                last_entering[i] = Some(design_event(&name));
            }
        }
        meta = next;
    }
    offenders
        .into_iter()
        .filter_map(|i| last_entering[i].clone())
        .collect()
}

/// The events whose occurrence tipped each witness into fault: for illegal
/// joint states, the events that carried the offending robots into the
/// forbidden configuration; for deadlock and livelock witnesses, the first
/// environment-decided branching event on the trace.
pub fn triggering_events(spec: &SwarmSpec, witnesses: &[Witness]) -> BTreeSet<EventLabel> {
    let guards = internal_choice_guards(&spec.defs);
    let mut out = BTreeSet::new();
    for w in witnesses {
        match w.classification {
            WitnessClass::IllegalMeta => {
                out.extend(entering_events(spec, w));
            }
            WitnessClass::Deadlock | WitnessClass::Livelock => {
                for ev in &w.trace {
                    if let TraceEvent::Event(e) = ev {
                        if guards.contains(&e.name) {
                            out.insert(design_event(&e.name));
                            break;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Bounded breadth-first model check of the composed swarm. Nodes pair the
/// process term with the joint machine state, so two routes to the same
/// term through different machine histories stay distinct. Depth counts
/// semantic steps, internal ones included; witness traces are shortest by
/// that measure.
pub fn locked(
    spec: &SwarmSpec,
    depth: usize,
    cfg: &ExploreConfig,
) -> Result<AnalysisReport, AnalysisError> {
    let composed = compose_swarm(spec);
    let root_term = normalize(&composed.term);
    let root_meta = MetaState::uniform(&spec.fsm.initial, spec.k);

    let mut report = AnalysisReport { depth, ..AnalysisReport::default() };
    let mut index: HashMap<(ProcessTerm, MetaState), usize> = HashMap::new();
    let mut nodes: Vec<(ProcessTerm, MetaState)> = Vec::new();
    let mut traces: Vec<Trace> = Vec::new();
    let mut edges: Vec<Vec<(Option<usize>, bool)>> = Vec::new();
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();

    let mut singleton_offer_note = false;

    index.insert((root_term.clone(), root_meta.clone()), 0);
    nodes.push((root_term, root_meta.clone()));
    traces.push(Vec::new());
    edges.push(Vec::new());
    queue.push_back((0, 0));
    if violated_predicate(&root_meta, &spec.illegal).is_some() {
        report.witnesses.push(Witness {
            trace: Vec::new(),
            final_meta: root_meta,
            classification: WitnessClass::IllegalMeta,
        });
    }

    while let Some((idx, d)) = queue.pop_front() {
        let (term, meta) = nodes[idx].clone();
        let state = SemanticState::analyze(&term, &composed.env, cfg).map_err(AnalysisError::from)?;
        let succs = step(&state, &composed.env, cfg).map_err(AnalysisError::from)?;
        if succs.is_empty() && term != ProcessTerm::Skip {
            // A lone robot's unanswered broadcast is vacuous rather than
            // deadlocked: there is no peer the design could have waited for.
            if spec.k == 1 && !state.pending_rendezvous.is_empty() {
                singleton_offer_note = true;
            } else {
                report.witnesses.push(Witness {
                    trace: traces[idx].clone(),
                    final_meta: meta.clone(),
                    classification: WitnessClass::Deadlock,
                });
            }
            continue;
        }
        for (lab, succ) in succs {
            let is_tau = lab == TransitionLabel::Tau;
            let next_meta = advance_meta(spec, &meta, &lab);
            let key = (succ.term.clone(), next_meta.clone());
            let target = match index.get(&key) {
                Some(&t) => Some(t),
                None => {
                    if d >= depth {
                        None
                    } else if nodes.len() >= cfg.state_budget {
                        report.budget_hit = true;
                        None
                    } else {
                        let t = nodes.len();
                        index.insert(key.clone(), t);
                        let mut tr = traces[idx].clone();
                        if let Some(ev) = lab.observe() {
                            tr.push(ev);
                        }
                        if violated_predicate(&next_meta, &spec.illegal).is_some() {
                            report.witnesses.push(Witness {
                                trace: tr.clone(),
                                final_meta: next_meta.clone(),
                                classification: WitnessClass::IllegalMeta,
                            });
                        }
                        nodes.push(key);
                        traces.push(tr);
                        edges.push(Vec::new());
                        queue.push_back((t, d + 1));
                        Some(t)
                    }
                }
            };
            edges[idx].push((target, is_tau));
        }
    }

    report.explored_states = nodes.len();

    let sccs = strongly_connected(&edges);
    let mut scc_of = vec![usize::MAX; nodes.len()];
    for (ci, comp) in sccs.iter().enumerate() {
        for &m in comp {
            scc_of[m] = ci;
        }
    }
    for comp in &sccs {
        let ci = scc_of[comp[0]];
        let mut internal_tau_edges = 0usize;
        let mut internal_all_tau = true;
        let mut observable_out = false;
        for &m in comp {
            for (target, is_tau) in &edges[m] {
                if !is_tau {
                    observable_out = true;
                }
                if let Some(t) = target {
                    if scc_of[*t] == ci {
                        internal_tau_edges += 1;
                        if !is_tau {
                            internal_all_tau = false;
                        }
                    }
                }
            }
        }
        if internal_tau_edges > 0 && internal_all_tau && !observable_out {
            let entry = *comp.iter().min().expect("non-empty component");
            report.witnesses.push(Witness {
                trace: traces[entry].clone(),
                final_meta: nodes[entry].1.clone(),
                classification: WitnessClass::Livelock,
            });
        }
    }

    if singleton_offer_note {
        report.notes.push(
            "a single-robot run stalls on its own broadcast; with no peers this is reported as \
             vacuous rather than as a deadlock"
                .to_string(),
        );
    }

    report.triggering_events = triggering_events(spec, &report.witnesses);
    Ok(report)
}

/// Replays a witness trace through the composed process to confirm the
/// semantics admits it.
pub fn replay_witness(
    spec: &SwarmSpec,
    witness: &Witness,
    cfg: &ExploreConfig,
) -> Result<bool, AnalysisError> {
    let composed = compose_swarm(spec);
    Ok(admits_trace(&composed.term, &composed.env, &witness.trace, cfg)?)
}

/// `n_states^k` with explicit overflow reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaStateCount {
    pub value: u128,
    pub saturated: bool,
}

pub fn meta_state_count(n_states: usize, k: u32) -> MetaStateCount {
    match (n_states as u128).checked_pow(k) {
        Some(value) => MetaStateCount { value, saturated: false },
        None => MetaStateCount { value: u128::MAX, saturated: true },
    }
}

pub fn design_meta_state_count(spec: &SwarmSpec) -> MetaStateCount {
    meta_state_count(spec.fsm.states.len(), spec.k)
}
