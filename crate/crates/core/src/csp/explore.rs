//! Bounded exploration of the transition system: trace enumeration, trace
//! membership, and detection of deadlocked or internally diverging states.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use super::label::{Trace, TransitionLabel};
use super::semantics::{normalize, step, CspError, ExploreConfig, SemanticState};
use super::term::{Definitions, ProcessTerm};

fn bare_state(term: ProcessTerm) -> SemanticState {
    SemanticState { term, pending_rendezvous: BTreeSet::new() }
}

/// Enumerates every observable trace of length at most `max_len`. The result
/// is prefix-closed and always contains the empty trace. Internal steps are
/// erased and contribute no length.
pub fn traces(
    term: &ProcessTerm,
    env: &Definitions,
    max_len: usize,
    cfg: &ExploreConfig,
) -> Result<BTreeSet<Trace>, CspError> {
    let mut found: BTreeSet<Trace> = BTreeSet::new();
    found.insert(Vec::new());
    let root = normalize(term);
    let mut visited: HashSet<(ProcessTerm, Trace)> = HashSet::new();
    let mut queue: VecDeque<(ProcessTerm, Trace)> = VecDeque::new();
    visited.insert((root.clone(), Vec::new()));
    queue.push_back((root, Vec::new()));
    while let Some((t, tr)) = queue.pop_front() {
        let succs = step(&bare_state(t), env, cfg)?;
        for (lab, succ) in succs {
            let cand = match lab.observe() {
                None => (succ.term, tr.clone()),
                Some(ev) => {
                    if tr.len() == max_len {
                        continue;
                    }
                    let mut next = tr.clone();
                    next.push(ev);
                    found.insert(next.clone());
                    (succ.term, next)
                }
            };
            if visited.contains(&cand) {
                continue;
            }
            if visited.len() >= cfg.state_budget {
                return Err(CspError::ExplorationBudgetExceeded {
                    visited: visited.len(),
                    budget: cfg.state_budget,
                    partial: found,
                });
            }
            visited.insert(cand.clone());
            queue.push_back(cand);
        }
    }
    Ok(found)
}

fn tau_closure(
    seed: BTreeSet<ProcessTerm>,
    env: &Definitions,
    cfg: &ExploreConfig,
) -> Result<BTreeSet<ProcessTerm>, CspError> {
    let mut closed = seed.clone();
    let mut work: Vec<ProcessTerm> = seed.into_iter().collect();
    while let Some(t) = work.pop() {
        for (lab, succ) in step(&bare_state(t), env, cfg)? {
            if lab == TransitionLabel::Tau && closed.insert(succ.term.clone()) {
                if closed.len() > cfg.state_budget {
                    return Err(CspError::ExplorationBudgetExceeded {
                        visited: closed.len(),
                        budget: cfg.state_budget,
                        partial: BTreeSet::new(),
                    });
                }
                work.push(succ.term);
            }
        }
    }
    Ok(closed)
}

/// Replays `trace` against the term without enumerating the full language:
/// a subset of simultaneously-possible states is advanced one observable
/// event at a time, closing under internal steps in between.
pub fn admits_trace(
    term: &ProcessTerm,
    env: &Definitions,
    trace: &[super::label::TraceEvent],
    cfg: &ExploreConfig,
) -> Result<bool, CspError> {
    let mut current = tau_closure([normalize(term)].into_iter().collect(), env, cfg)?;
    for ev in trace {
        let mut next: BTreeSet<ProcessTerm> = BTreeSet::new();
        for t in &current {
            for (lab, succ) in step(&bare_state(t.clone()), env, cfg)? {
                if lab.observe().as_ref() == Some(ev) {
                    next.insert(succ.term);
                }
            }
        }
        if next.is_empty() {
            return Ok(false);
        }
        current = tau_closure(next, env, cfg)?;
    }
    Ok(true)
}

/// A state found stuck (deadlock) or trapped in internal cycling (livelock),
/// with the shortest observable path the search found to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockWitness {
    pub trace: Trace,
    pub term: ProcessTerm,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LockReport {
    pub explored_states: usize,
    pub max_depth: usize,
    pub deadlocks: Vec<LockWitness>,
    pub livelocks: Vec<LockWitness>,
    pub budget_hit: bool,
}

/// Breadth-first search to `max_depth` semantic steps (internal steps
/// count). A state with no successors that is not successful termination is
/// a deadlock — including states whose only remaining behaviour is channel
/// offers that no peer will ever answer. Livelocks are strongly connected
/// components whose internal edges are all internal steps and whose members
/// offer nothing observable. Hitting the state budget flags the report and
/// keeps the findings so far.
pub fn find_locks(
    term: &ProcessTerm,
    env: &Definitions,
    max_depth: usize,
    cfg: &ExploreConfig,
) -> Result<LockReport, CspError> {
    let root = normalize(term);
    let mut index: HashMap<ProcessTerm, usize> = HashMap::new();
    let mut states: Vec<ProcessTerm> = Vec::new();
    let mut discovery_trace: Vec<Trace> = Vec::new();
    // (target index or None when the edge leaves the explored set, is_tau)
    let mut edges: Vec<Vec<(Option<usize>, bool)>> = Vec::new();
    let mut report = LockReport { max_depth, ..LockReport::default() };

    index.insert(root.clone(), 0);
    states.push(root.clone());
    discovery_trace.push(Vec::new());
    edges.push(Vec::new());
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    queue.push_back((0, 0));

    while let Some((idx, depth)) = queue.pop_front() {
        let succs = step(&bare_state(states[idx].clone()), env, cfg)?;
        if succs.is_empty() {
            if states[idx] != ProcessTerm::Skip {
                report.deadlocks.push(LockWitness {
                    trace: discovery_trace[idx].clone(),
                    term: states[idx].clone(),
                });
            }
            continue;
        }
        for (lab, succ) in succs {
            let is_tau = lab == TransitionLabel::Tau;
            let known = index.get(&succ.term).copied();
            let target = match known {
                Some(t) => Some(t),
                None => {
                    if depth >= max_depth {
                        None
                    } else if states.len() >= cfg.state_budget {
                        report.budget_hit = true;
                        None
                    } else {
                        let t = states.len();
                        index.insert(succ.term.clone(), t);
                        states.push(succ.term.clone());
                        let mut tr = discovery_trace[idx].clone();
                        if let Some(ev) = lab.observe() {
                            tr.push(ev);
                        }
                        discovery_trace.push(tr);
                        edges.push(Vec::new());
                        queue.push_back((t, depth + 1));
                        Some(t)
                    }
                }
            };
            edges[idx].push((target, is_tau));
        }
    }

    report.explored_states = states.len();

    // Strongly connected components over the explored subgraph.
    let sccs = strongly_connected(&edges);
    let mut scc_of = vec![usize::MAX; states.len()];
    for (ci, comp) in sccs.iter().enumerate() {
        for &m in comp {
            scc_of[m] = ci;
        }
    }
    let mut livelock_sccs: Vec<&Vec<usize>> = Vec::new();
    for comp in &sccs {
        let ci = scc_of[comp[0]];
        let mut internal_edges = 0usize;
        let mut internal_all_tau = true;
        let mut observable_out = false;
        for &m in comp {
            for (target, is_tau) in &edges[m] {
                if !is_tau {
                    observable_out = true;
                }
                if let Some(t) = target {
                    if scc_of[*t] == ci {
                        internal_edges += 1;
                        if !is_tau {
                            internal_all_tau = false;
                        }
                    }
                }
            }
        }
        if internal_edges > 0 && internal_all_tau && !observable_out {
            livelock_sccs.push(comp);
        }
    }
    for comp in livelock_sccs {
        let entry = *comp.iter().min().expect("component is never empty");
        report.livelocks.push(LockWitness {
            trace: discovery_trace[entry].clone(),
            term: states[entry].clone(),
        });
    }
    report
        .livelocks
        .sort_by_key(|w| (w.trace.len(), format!("{:?}", w.term)));
    Ok(report)
}

/// Iterative Tarjan over an adjacency list whose edges may dangle
/// (`None` targets are ignored).
pub(crate) fn strongly_connected(edges: &[Vec<(Option<usize>, bool)>]) -> Vec<Vec<usize>> {
    let n = edges.len();
    let mut index_counter = 0usize;
    let mut indices = vec![usize::MAX; n];
    let mut lowlink = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut result: Vec<Vec<usize>> = Vec::new();

    #[derive(Clone, Copy)]
    struct Frame {
        node: usize,
        edge: usize,
    }

    for start in 0..n {
        if indices[start] != usize::MAX {
            continue;
        }
        let mut call_stack = vec![Frame { node: start, edge: 0 }];
        indices[start] = index_counter;
        lowlink[start] = index_counter;
        index_counter += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(frame) = call_stack.last_mut() {
            let v = frame.node;
            if frame.edge < edges[v].len() {
                let e = frame.edge;
                frame.edge += 1;
                if let (Some(w), _) = edges[v][e] {
                    if indices[w] == usize::MAX {
                        indices[w] = index_counter;
                        lowlink[w] = index_counter;
                        index_counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call_stack.push(Frame { node: w, edge: 0 });
                    } else if on_stack[w] {
                        lowlink[v] = lowlink[v].min(indices[w]);
                    }
                }
            } else {
                call_stack.pop();
                if let Some(parent) = call_stack.last() {
                    lowlink[parent.node] = lowlink[parent.node].min(lowlink[v]);
                }
                if lowlink[v] == indices[v] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    result.push(comp);
                }
            }
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::label::TraceEvent;
    use crate::csp::term::{Action, ChannelOp, EventLabel, MessagePattern, MessageValue};

    fn cfg() -> ExploreConfig {
        ExploreConfig::default()
    }

    fn tev(name: &str) -> TraceEvent {
        TraceEvent::Event(EventLabel::new(name))
    }

    #[test]
    fn choice_traces_are_the_union_of_branch_traces() {
        let t = ProcessTerm::ext_choice(
            ProcessTerm::event_prefix("a", ProcessTerm::Skip),
            ProcessTerm::event_prefix("b", ProcessTerm::Skip),
        );
        let ts = traces(&t, &Definitions::new(), 4, &cfg()).unwrap();
        let expect: BTreeSet<Trace> =
            [vec![], vec![tev("a")], vec![tev("b")]].into_iter().collect();
        assert_eq!(ts, expect);
    }

    #[test]
    fn internal_choice_has_the_same_trace_set_as_external() {
        let ext = ProcessTerm::ext_choice(
            ProcessTerm::event_prefix("a", ProcessTerm::Skip),
            ProcessTerm::event_prefix("b", ProcessTerm::Skip),
        );
        let int = ProcessTerm::int_choice(
            ProcessTerm::event_prefix("a", ProcessTerm::Skip),
            ProcessTerm::event_prefix("b", ProcessTerm::Skip),
        );
        let env = Definitions::new();
        assert_eq!(
            traces(&ext, &env, 4, &cfg()).unwrap(),
            traces(&int, &env, 4, &cfg()).unwrap()
        );
    }

    #[test]
    fn admits_trace_agrees_with_enumeration() {
        let t = ProcessTerm::event_prefix(
            "a",
            ProcessTerm::int_choice(
                ProcessTerm::event_prefix("b", ProcessTerm::Skip),
                ProcessTerm::event_prefix("c", ProcessTerm::Skip),
            ),
        );
        let env = Definitions::new();
        assert!(admits_trace(&t, &env, &[tev("a"), tev("b")], &cfg()).unwrap());
        assert!(admits_trace(&t, &env, &[tev("a"), tev("c")], &cfg()).unwrap());
        assert!(!admits_trace(&t, &env, &[tev("b")], &cfg()).unwrap());
        assert!(!admits_trace(&t, &env, &[tev("a"), tev("a")], &cfg()).unwrap());
    }

    #[test]
    fn successful_termination_is_not_a_deadlock() {
        let t = ProcessTerm::event_prefix("a", ProcessTerm::Skip);
        let report = find_locks(&t, &Definitions::new(), 8, &cfg()).unwrap();
        assert!(report.deadlocks.is_empty());
        assert!(report.livelocks.is_empty());
    }

    #[test]
    fn stop_after_an_event_is_a_deadlock_with_shortest_witness() {
        let t = ProcessTerm::event_prefix("a", ProcessTerm::Stop);
        let report = find_locks(&t, &Definitions::new(), 8, &cfg()).unwrap();
        assert_eq!(report.deadlocks.len(), 1);
        assert_eq!(report.deadlocks[0].trace, vec![tev("a")]);
    }

    #[test]
    fn unanswered_offers_deadlock() {
        let w = ProcessTerm::prefix(Action::Channel(ChannelOp::write("c", "p")), ProcessTerm::Skip);
        let r = ProcessTerm::prefix(
            Action::Channel(ChannelOp::read("c", MessagePattern::Value(MessageValue::new("q")))),
            ProcessTerm::Skip,
        );
        let t = ProcessTerm::interleave(w, r);
        let report = find_locks(&t, &Definitions::new(), 8, &cfg()).unwrap();
        assert_eq!(report.deadlocks.len(), 1, "mismatched payloads can never pair");
        assert_eq!(report.deadlocks[0].trace, Vec::<TraceEvent>::new());
    }

    #[test]
    fn internal_self_loop_is_a_livelock() {
        let mut env = Definitions::new();
        env.define(
            "L",
            ProcessTerm::int_choice(ProcessTerm::named("L"), ProcessTerm::named("L")),
        );
        let report = find_locks(&ProcessTerm::named("L"), &env, 8, &cfg()).unwrap();
        assert!(report.deadlocks.is_empty());
        assert_eq!(report.livelocks.len(), 1);
        assert_eq!(report.livelocks[0].trace, Vec::<TraceEvent>::new());
    }

    #[test]
    fn budget_exhaustion_is_flagged_not_fatal_for_lock_search() {
        let mut env = Definitions::new();
        // An infinite counter-like process: a -> (a -> ... interleaved growth).
        env.define(
            "G",
            ProcessTerm::event_prefix(
                "a",
                ProcessTerm::interleave(
                    ProcessTerm::named("G"),
                    ProcessTerm::event_prefix("b", ProcessTerm::Skip),
                ),
            ),
        );
        let tight = ExploreConfig { unfold_limit: 64, state_budget: 16 };
        let report = find_locks(&ProcessTerm::named("G"), &env, 64, &tight).unwrap();
        assert!(report.budget_hit);
        assert!(report.explored_states <= 16);
    }

    #[test]
    fn trace_enumeration_reports_budget_exhaustion() {
        let mut env = Definitions::new();
        env.define(
            "G",
            ProcessTerm::event_prefix(
                "a",
                ProcessTerm::interleave(
                    ProcessTerm::named("G"),
                    ProcessTerm::event_prefix("b", ProcessTerm::Skip),
                ),
            ),
        );
        let tight = ExploreConfig { unfold_limit: 64, state_budget: 16 };
        let err = traces(&ProcessTerm::named("G"), &env, 64, &tight).unwrap_err();
        match err {
            CspError::ExplorationBudgetExceeded { budget, partial, .. } => {
                assert_eq!(budget, 16);
                assert!(partial.contains(&vec![tev("a")]));
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
