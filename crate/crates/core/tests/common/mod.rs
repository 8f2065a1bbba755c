//! Shared support for the integration suites: a hand-built product machine
//! for the two-robot retrieval design that cross-checks the analyzer, random
//! generators for process terms, machines, and whole designs, and law suites
//! runnable both as focused property tests and from the acceptance gate.

#![allow(dead_code)]

/// An independently written model of the two-robot retrieval swarm. Each
/// robot is coded by hand as a seven-position machine — the positions a
/// robot passes through *between* its named states — and the pair is
/// explored breadth-first with the same discipline the analyzer uses:
/// every semantic step (internal resolution included) counts one level,
/// an illegal-state witness is recorded the first time each bad node is
/// created, and a deadlock witness when a popped node has no successor.
/// Nothing here calls into the process semantics, so agreement between
/// this enumeration and the analyzer checks the kernel, the composition,
/// and the joint-state tracking all at once.
pub mod retrieval_oracle {
    use std::collections::{HashMap, VecDeque};

    use swarmcheck_core::analysis::{MetaState, Witness, WitnessClass};
    use swarmcheck_core::csp::{CommEvent, EventLabel, MessageValue, TraceEvent};

    /// One robot's fine-grained position.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    enum Pos {
        /// At the scan loop: may sight an object, and keeps listening for
        /// a peer's path hand-off.
        Scan,
        /// Sighted something; the detection outcome is not resolved yet.
        Deciding,
        /// Committed to the detection branch, about to fire `d`.
        Detected,
        /// Committed to the dismissal branch, about to fire `nd`.
        Dismissed,
        /// Computing a path.
        Plan,
        /// Offering the finished path on the channel; blocked until some
        /// peer is back at the scan loop to take it.
        Handoff,
        /// Following a path.
        Follow,
    }

    /// Where each position sits in the analyzer's canonical term order:
    /// plain references first (alphabetical: follow, plan, scan), then
    /// action prefixes (`d ->`, `nd ->`, then the channel send), then the
    /// unresolved internal choice. Only this ranking ties the oracle to
    /// the analyzer's ordering conventions; no engine code is reused.
    fn rank(p: Pos) -> u8 {
        match p {
            Pos::Follow => 0,
            Pos::Plan => 1,
            Pos::Scan => 2,
            Pos::Detected => 3,
            Pos::Dismissed => 4,
            Pos::Handoff => 5,
            Pos::Deciding => 6,
        }
    }

    /// Transition labels in the analyzer's label order: events first (by
    /// name, then robot), then communications, then internal steps.
    #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
    enum Lab {
        Ev { name: &'static str, robot: u32 },
        Comm { writer: u32, reader: u32 },
        Tau,
    }

    fn local_moves(robot: u32, pos: Pos) -> Vec<(Lab, Pos)> {
        match pos {
            Pos::Scan => vec![(Lab::Ev { name: "l", robot }, Pos::Deciding)],
            Pos::Deciding => vec![(Lab::Tau, Pos::Detected), (Lab::Tau, Pos::Dismissed)],
            Pos::Detected => vec![(Lab::Ev { name: "d", robot }, Pos::Plan)],
            Pos::Dismissed => vec![(Lab::Ev { name: "nd", robot }, Pos::Scan)],
            Pos::Plan => vec![(Lab::Ev { name: "f", robot }, Pos::Handoff)],
            Pos::Handoff => Vec::new(), // a bare send cannot fire alone
            Pos::Follow => vec![(Lab::Ev { name: "t", robot }, Pos::Scan)],
        }
    }

    fn successors(state: (Pos, Pos)) -> Vec<(Lab, (Pos, Pos))> {
        let mut out: Vec<(Lab, (Pos, Pos))> = Vec::new();
        for (lab, p) in local_moves(0, state.0) {
            out.push((lab, (p, state.1)));
        }
        for (lab, p) in local_moves(1, state.1) {
            out.push((lab, (state.0, p)));
        }
        // A pending send pairs with the standing read of a scanning peer.
        if state.0 == Pos::Handoff && state.1 == Pos::Scan {
            out.push((Lab::Comm { writer: 0, reader: 1 }, (Pos::Follow, Pos::Follow)));
        }
        if state.1 == Pos::Handoff && state.0 == Pos::Scan {
            out.push((Lab::Comm { writer: 1, reader: 0 }, (Pos::Follow, Pos::Follow)));
        }
        out.sort_by(|a, b| {
            (&a.0, rank(a.1 .0), rank(a.1 .1)).cmp(&(&b.0, rank(b.1 .0), rank(b.1 .1)))
        });
        out.dedup();
        out
    }

    fn apply_row(slot: &mut String, from: &str, to: &str) {
        if slot == from {
            *slot = to.to_string();
        }
    }

    /// The machine rows of the design, applied by hand. `l` and the send
    /// itself have no row, so they leave the joint state untouched.
    fn advance(meta: &[String; 2], lab: &Lab) -> [String; 2] {
        let mut next = meta.clone();
        match lab {
            Lab::Tau => {}
            Lab::Ev { name, robot } => {
                let i = *robot as usize;
                match *name {
                    "d" => apply_row(&mut next[i], "R", "P"),
                    "nd" => apply_row(&mut next[i], "R", "R"),
                    "f" => apply_row(&mut next[i], "P", "F"),
                    "t" => apply_row(&mut next[i], "F", "R"),
                    _ => {}
                }
            }
            Lab::Comm { writer: _, reader } => {
                // Only the read has a row; the send is not in the machine.
                apply_row(&mut next[*reader as usize], "R", "F");
            }
        }
        next
    }

    fn observe(lab: &Lab) -> Option<TraceEvent> {
        match lab {
            Lab::Tau => None,
            Lab::Ev { name, robot } => {
                let mut e = EventLabel::new(*name);
                e.robot_index = Some(*robot);
                Some(TraceEvent::Event(e))
            }
            Lab::Comm { writer, reader } => Some(TraceEvent::Comm(CommEvent {
                channel: "c".to_string(),
                message: MessageValue::new("p"),
                writer: Some(*writer),
                reader: Some(*reader),
            })),
        }
    }

    fn crowded(meta: &[String; 2]) -> bool {
        meta.iter().filter(|s| *s == "P").count() >= 2
    }

    pub struct OracleReport {
        pub witnesses: Vec<Witness>,
        pub explored: usize,
    }

    pub fn enumerate(depth: usize) -> OracleReport {
        type Key = ((Pos, Pos), [String; 2]);
        let root: Key = ((Pos::Scan, Pos::Scan), ["R".to_string(), "R".to_string()]);

        let mut witnesses: Vec<Witness> = Vec::new();
        let mut index: HashMap<Key, usize> = HashMap::new();
        let mut nodes: Vec<Key> = Vec::new();
        let mut traces: Vec<Vec<TraceEvent>> = Vec::new();
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();

        if crowded(&root.1) {
            witnesses.push(Witness {
                trace: Vec::new(),
                final_meta: MetaState(root.1.to_vec()),
                classification: WitnessClass::IllegalMeta,
            });
        }
        index.insert(root.clone(), 0);
        nodes.push(root);
        traces.push(Vec::new());
        queue.push_back((0, 0));

        while let Some((idx, d)) = queue.pop_front() {
            let (pos, meta) = nodes[idx].clone();
            let succs = successors(pos);
            if succs.is_empty() {
                witnesses.push(Witness {
                    trace: traces[idx].clone(),
                    final_meta: MetaState(meta.to_vec()),
                    classification: WitnessClass::Deadlock,
                });
                continue;
            }
            for (lab, next_pos) in succs {
                let next_meta = advance(&meta, &lab);
                let key: Key = (next_pos, next_meta);
                if index.contains_key(&key) || d >= depth {
                    continue;
                }
                let t = nodes.len();
                index.insert(key.clone(), t);
                let mut tr = traces[idx].clone();
                if let Some(ev) = observe(&lab) {
                    tr.push(ev);
                }
                if crowded(&key.1) {
                    witnesses.push(Witness {
                        trace: tr.clone(),
                        final_meta: MetaState(key.1.to_vec()),
                        classification: WitnessClass::IllegalMeta,
                    });
                }
                nodes.push(key);
                traces.push(tr);
                queue.push_back((t, d + 1));
            }
        }

        OracleReport { witnesses, explored: nodes.len() }
    }

    /// Canonical sort key so two witness lists can be compared as sets.
    pub fn witness_key(w: &Witness) -> (u8, String, String) {
        let class = match w.classification {
            WitnessClass::IllegalMeta => 0,
            WitnessClass::Deadlock => 1,
            WitnessClass::Livelock => 2,
        };
        (class, swarmcheck_core::csp::format_trace(&w.trace), w.final_meta.0.join(","))
    }
}

/// Trace-model laws of the process kernel, checked against brute-force
/// oracles on randomly generated terms.
pub mod laws {
    use std::collections::BTreeSet;

    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};
    use swarmcheck_core::csp::{
        step, traces, Definitions, ExploreConfig, ProcessTerm, SemanticState, Trace, TraceEvent,
        TransitionLabel,
    };

    const MAX_TRACE: usize = 4;

    fn cfg() -> ExploreConfig {
        ExploreConfig::default()
    }

    fn no_env() -> Definitions {
        Definitions::new()
    }

    fn fail(msg: impl std::fmt::Display) -> TestCaseError {
        TestCaseError::fail(msg.to_string())
    }

    fn event_name() -> impl Strategy<Value = &'static str> {
        prop::sample::select(&["a", "b", "c", "d"][..])
    }

    /// Random finite terms over a four-event alphabet: prefixes, both
    /// choices, sequencing, and interleaving over Skip/Stop/event leaves.
    pub fn term_strategy() -> impl Strategy<Value = ProcessTerm> {
        let leaf = prop_oneof![
            2 => Just(ProcessTerm::Skip),
            1 => Just(ProcessTerm::Stop),
            4 => event_name().prop_map(|e| ProcessTerm::event_prefix(e, ProcessTerm::Skip)),
        ];
        leaf.prop_recursive(3, 24, 2, |inner| {
            prop_oneof![
                3 => (event_name(), inner.clone())
                    .prop_map(|(e, t)| ProcessTerm::event_prefix(e, t)),
                2 => (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ProcessTerm::ext_choice(a, b)),
                2 => (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ProcessTerm::int_choice(a, b)),
                1 => (inner.clone(), inner.clone()).prop_map(|(a, b)| ProcessTerm::seq(a, b)),
                2 => (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ProcessTerm::interleave(a, b)),
            ]
        })
    }

    fn trace_set(t: &ProcessTerm) -> Result<BTreeSet<Trace>, TestCaseError> {
        traces(t, &no_env(), MAX_TRACE, &cfg()).map_err(fail)
    }

    pub fn check_prefix_closure(t: &ProcessTerm) -> Result<(), TestCaseError> {
        let ts = trace_set(t)?;
        prop_assert!(ts.contains(&Vec::new()), "the empty trace is missing");
        for tr in &ts {
            for cut in 0..tr.len() {
                prop_assert!(
                    ts.contains(&tr[..cut].to_vec()),
                    "a prefix of {:?} is missing",
                    tr
                );
            }
        }
        Ok(())
    }

    pub fn check_choice_union(p: &ProcessTerm, q: &ProcessTerm) -> Result<(), TestCaseError> {
        let tp = trace_set(p)?;
        let tq = trace_set(q)?;
        let want: BTreeSet<Trace> = tp.union(&tq).cloned().collect();
        let ext = trace_set(&ProcessTerm::ext_choice(p.clone(), q.clone()))?;
        prop_assert_eq!(&ext, &want, "resolvable choice is not the union of trace sets");
        let int = trace_set(&ProcessTerm::int_choice(p.clone(), q.clone()))?;
        prop_assert_eq!(&int, &want, "internal choice is not the union of trace sets");
        Ok(())
    }

    fn weave(a: &[TraceEvent], b: &[TraceEvent], out: &mut Trace, acc: &mut BTreeSet<Trace>) {
        if a.is_empty() && b.is_empty() {
            acc.insert(out.clone());
            return;
        }
        if let Some((head, rest)) = a.split_first() {
            out.push(head.clone());
            weave(rest, b, out, acc);
            out.pop();
        }
        if let Some((head, rest)) = b.split_first() {
            out.push(head.clone());
            weave(a, rest, out, acc);
            out.pop();
        }
    }

    /// Every merge of a trace from each operand, capped at `cap` events.
    pub fn shuffle_product(
        tp: &BTreeSet<Trace>,
        tq: &BTreeSet<Trace>,
        cap: usize,
    ) -> BTreeSet<Trace> {
        let mut acc = BTreeSet::new();
        for a in tp {
            for b in tq {
                if a.len() + b.len() > cap {
                    continue;
                }
                weave(a, b, &mut Vec::new(), &mut acc);
            }
        }
        acc
    }

    pub fn check_shuffle(p: &ProcessTerm, q: &ProcessTerm) -> Result<(), TestCaseError> {
        let tp = trace_set(p)?;
        let tq = trace_set(q)?;
        let want = shuffle_product(&tp, &tq, MAX_TRACE);
        let got = trace_set(&ProcessTerm::interleave(p.clone(), q.clone()))?;
        prop_assert_eq!(got, want, "interleaving differs from the brute-force shuffle");
        Ok(())
    }

    pub fn check_step_determinism(t: &ProcessTerm) -> Result<(), TestCaseError> {
        let env = no_env();
        let c = cfg();
        let state = SemanticState::analyze(t, &env, &c).map_err(fail)?;
        let strip = |succs: Vec<(TransitionLabel, SemanticState)>| -> Vec<(TransitionLabel, ProcessTerm)> {
            succs.into_iter().map(|(lab, s)| (lab, s.term)).collect()
        };
        let first = strip(step(&state, &env, &c).map_err(fail)?);
        let second = strip(step(&state, &env, &c).map_err(fail)?);
        prop_assert_eq!(&first, &second, "two successor computations disagree");
        for pair in first.windows(2) {
            prop_assert!(
                pair[0] < pair[1],
                "successors are not strictly ordered: {:?} then {:?}",
                pair[0],
                pair[1]
            );
        }
        Ok(())
    }

    /// Two chains of fresh events side by side admit exactly
    /// `C(n + m, n)` complete interleavings.
    pub fn check_counts() -> Result<(), String> {
        for (n, m, expected) in [(2usize, 2usize, 6usize), (2, 3, 10), (3, 3, 20)] {
            let chain = |prefix: &str, len: usize| -> ProcessTerm {
                (0..len).rev().fold(ProcessTerm::Skip, |acc, i| {
                    ProcessTerm::event_prefix(&format!("{prefix}{i}"), acc)
                })
            };
            let term = ProcessTerm::interleave(chain("x", n), chain("y", m));
            let ts = traces(&term, &no_env(), n + m, &cfg()).map_err(|e| e.to_string())?;
            let full = ts.iter().filter(|t| t.len() == n + m).count();
            if full != expected {
                return Err(format!(
                    "chains of {n} and {m} events give {full} complete interleavings, expected {expected}"
                ));
            }
        }
        Ok(())
    }

    fn run<S, F>(name: &str, cases: u32, strategy: S, check: F) -> Result<(), String>
    where
        S: Strategy,
        F: Fn(&S::Value) -> Result<(), TestCaseError>,
    {
        let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
        runner
            .run(&strategy, |v| check(&v))
            .map_err(|e| format!("{name}: {e}"))
    }

    pub fn run_prefix_closure(cases: u32) -> Result<(), String> {
        run("prefix closure", cases, term_strategy(), |t| check_prefix_closure(t))
    }

    pub fn run_choice_union(cases: u32) -> Result<(), String> {
        run(
            "choice union",
            cases,
            (term_strategy(), term_strategy()),
            |(p, q)| check_choice_union(p, q),
        )
    }

    pub fn run_shuffle(cases: u32) -> Result<(), String> {
        run(
            "shuffle product",
            cases,
            (term_strategy(), term_strategy()),
            |(p, q)| check_shuffle(p, q),
        )
    }

    pub fn run_step_determinism(cases: u32) -> Result<(), String> {
        run("step determinism", cases, term_strategy(), |t| check_step_determinism(t))
    }

    /// The full law suite at `cases` generated cases per law.
    pub fn kernel_suite(cases: u32) -> Result<(), String> {
        run_prefix_closure(cases)?;
        run_choice_union(cases)?;
        run_shuffle(cases)?;
        run_step_determinism(cases)?;
        check_counts()
    }
}

/// Round-trip generators and checks: random machines, random whole designs,
/// and the path-language/trace-language agreement between the two views of
/// a robot.
pub mod rt {
    use std::collections::{BTreeSet, VecDeque};

    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};
    use swarmcheck_core::csp::{traces, ExploreConfig, ProcessTerm, TraceEvent};
    use swarmcheck_core::speclang::{
        csp_to_fsm, fsm_to_csp, parse_swarm, print_swarm, ActionSym, ChannelDecl, DetectRule,
        FsmSpec, FsmTransition, MetaStatePredicate, ScenarioSpec, StatePattern, SubstrateProfile,
        SwarmSpec, TimingMatrix, TimingParams, TimingRow,
    };

    const STATE_POOL: [&str; 6] = ["SA", "SB", "SC", "SD", "SE", "SF"];
    const EVENT_POOL: [&str; 4] = ["go", "halt", "ping", "tock"];

    fn fail(msg: impl std::fmt::Display) -> TestCaseError {
        TestCaseError::fail(msg.to_string())
    }

    fn sym_strategy() -> impl Strategy<Value = ActionSym> {
        prop_oneof![
            4 => prop::sample::select(&EVENT_POOL[..])
                .prop_map(|e| ActionSym::Event(e.to_string())),
            1 => prop::sample::select(&["ok", "req"][..]).prop_map(|m| ActionSym::Write {
                channel: "link".to_string(),
                message: m.to_string(),
            }),
            1 => prop::sample::select(&["ok", "req"][..]).prop_map(|m| ActionSym::Read {
                channel: "link".to_string(),
                message: m.to_string(),
            }),
        ]
    }

    /// Random deterministic machines over up to six states, mixing plain
    /// events with channel operations.
    pub fn fsm_strategy() -> impl Strategy<Value = FsmSpec> {
        (1..=6usize).prop_flat_map(|n| {
            prop::collection::btree_map((0..n, sym_strategy()), 0..n, 0..=2 * n).prop_map(
                move |rows| {
                    let mut fsm = FsmSpec {
                        states: STATE_POOL[..n].iter().map(|s| s.to_string()).collect(),
                        initial: STATE_POOL[0].to_string(),
                        transitions: rows
                            .into_iter()
                            .map(|((from, sym), to)| FsmTransition {
                                from: STATE_POOL[from].to_string(),
                                sym,
                                to: STATE_POOL[to].to_string(),
                            })
                            .collect(),
                    };
                    fsm.sort();
                    fsm
                },
            )
        })
    }

    fn timing_strategy() -> impl Strategy<Value = TimingParams> {
        (1..=200_000u32, 0..=50_000u32).prop_map(|(m, d)| TimingParams {
            mean_ms: f64::from(m) / 100.0,
            dev_ms: f64::from(d) / 100.0,
        })
    }

    fn profile_strategy(
        name: &'static str,
        states: Vec<String>,
    ) -> impl Strategy<Value = SubstrateProfile> {
        let n = states.len();
        let latency = prop_oneof![
            2 => Just(TimingParams::ZERO),
            1 => (0..=5_000u32, 0..=1_000u32).prop_map(|(m, d)| TimingParams {
                mean_ms: f64::from(m) / 100.0,
                dev_ms: f64::from(d) / 100.0,
            }),
        ];
        (
            prop::collection::btree_map((0..n, 0..n), timing_strategy(), 0..=6),
            latency,
        )
            .prop_map(move |(rows, comm_latency)| SubstrateProfile {
                name: name.to_string(),
                timing: TimingMatrix {
                    rows: rows
                        .into_iter()
                        .map(|((from, to), timing)| TimingRow {
                            from: states[from].clone(),
                            to: states[to].clone(),
                            timing,
                        })
                        .collect(),
                },
                comm_latency,
            })
    }

    fn profiles_strategy(states: Vec<String>) -> impl Strategy<Value = Vec<SubstrateProfile>> {
        prop_oneof![
            1 => Just(Vec::new()),
            2 => profile_strategy("lab", states.clone()).prop_map(|p| vec![p]),
            2 => (
                profile_strategy("lab", states.clone()),
                profile_strategy("phys", states),
            )
                .prop_map(|(a, b)| vec![a, b]),
        ]
    }

    fn predicate_strategy(
        states: Vec<String>,
        k: u32,
    ) -> impl Strategy<Value = MetaStatePredicate> {
        let slot = prop_oneof![
            1 => Just(StatePattern::Any),
            2 => prop::sample::select(states.clone()).prop_map(StatePattern::Is),
        ];
        prop_oneof![
            2 => (prop::sample::select(states), 0..=3u32)
                .prop_map(|(state, n)| MetaStatePredicate::AtMostNInState { state, n }),
            1 => prop::collection::vec(slot, k as usize..=k as usize)
                .prop_map(|pattern| MetaStatePredicate::ForbiddenPattern { pattern }),
        ]
    }

    fn illegal_strategy(
        states: Vec<String>,
        k: u32,
    ) -> impl Strategy<Value = Vec<MetaStatePredicate>> {
        prop::collection::vec(predicate_strategy(states, k), 0..=2).prop_map(|mut v| {
            v.sort();
            v.dedup();
            v
        })
    }

    fn scenario_strategy(events: Vec<String>) -> BoxedStrategy<Option<ScenarioSpec>> {
        let encounter = prop_oneof![
            1 => Just(None),
            2 => timing_strategy().prop_map(Some),
        ];
        let detect: BoxedStrategy<Vec<DetectRule>> = if events.is_empty() {
            Just(Vec::new()).boxed()
        } else {
            prop_oneof![
                1 => Just(Vec::new()),
                2 => (
                    prop::sample::select(events.clone()),
                    0..=1_000u32,
                    prop::sample::select(events),
                )
                    .prop_map(|(positive, p, negative)| vec![DetectRule {
                        positive,
                        probability: f64::from(p) / 1000.0,
                        negative,
                    }]),
            ]
            .boxed()
        };
        prop_oneof![
            1 => Just(None),
            3 => (encounter, detect)
                .prop_map(|(encounter, detect)| Some(ScenarioSpec { encounter, detect })),
        ]
        .boxed()
    }

    /// Random complete designs, canonical by construction: the process
    /// block is derived from the machine, every block is pre-sorted, and
    /// all referenced names are declared.
    pub fn swarm_strategy() -> impl Strategy<Value = SwarmSpec> {
        (fsm_strategy(), 1..=4u32).prop_flat_map(|(fsm, k)| {
            let channels = vec![ChannelDecl {
                name: "link".to_string(),
                messages: ["ok", "req"].iter().map(|m| m.to_string()).collect(),
            }];
            let defs = fsm_to_csp(&fsm, &channels);
            let states: Vec<String> = fsm.states.iter().cloned().collect();
            let events: Vec<String> = fsm
                .transitions
                .iter()
                .filter_map(|t| match &t.sym {
                    ActionSym::Event(e) => Some(e.clone()),
                    _ => None,
                })
                .collect::<BTreeSet<String>>()
                .into_iter()
                .collect();
            let root = fsm.initial.clone();
            (
                Just((k, fsm, defs, root, channels)),
                profiles_strategy(states.clone()),
                illegal_strategy(states, k),
                scenario_strategy(events),
            )
                .prop_map(|((k, fsm, defs, root, channels), profiles, illegal, scenario)| {
                    SwarmSpec { k, fsm, defs, root, channels, profiles, illegal, scenario }
                })
        })
    }

    pub fn check_swarm_roundtrip(spec: &SwarmSpec) -> Result<(), TestCaseError> {
        let text = print_swarm(spec);
        match parse_swarm(&text) {
            Ok(back) => {
                prop_assert_eq!(&back, spec, "reparsed design differs; rendering:\n{}", text);
                Ok(())
            }
            Err(e) => Err(fail(format!("printed design no longer parses: {e}\n{text}"))),
        }
    }

    pub fn check_fsm_roundtrip(fsm: &FsmSpec) -> Result<(), TestCaseError> {
        let defs = fsm_to_csp(fsm, &[]);
        let back = csp_to_fsm(&defs, &fsm.initial).map_err(fail)?;
        prop_assert_eq!(&back, fsm, "machine changed across the process view and back");
        Ok(())
    }

    /// Event-only machines kept small enough to enumerate exhaustively:
    /// at most five states and three outgoing rows per state.
    pub fn event_fsm_strategy() -> impl Strategy<Value = FsmSpec> {
        (1..=5usize).prop_flat_map(|n| {
            let event = prop::sample::select(&EVENT_POOL[..]);
            prop::collection::btree_map((0..n, event), 0..n, 0..=3 * n).prop_map(move |rows| {
                let mut fsm = FsmSpec {
                    states: STATE_POOL[..n].iter().map(|s| s.to_string()).collect(),
                    initial: STATE_POOL[0].to_string(),
                    transitions: rows
                        .into_iter()
                        .map(|((from, ev), to)| FsmTransition {
                            from: STATE_POOL[from].to_string(),
                            sym: ActionSym::Event(ev.to_string()),
                            to: STATE_POOL[to].to_string(),
                        })
                        .collect(),
                };
                fsm.sort();
                // Keep each state's fan-out enumerable.
                let mut kept: Vec<FsmTransition> = Vec::new();
                for t in fsm.transitions {
                    if kept.iter().filter(|x| x.from == t.from).count() < 3 {
                        kept.push(t);
                    }
                }
                fsm.transitions = kept;
                fsm
            })
        })
    }

    /// Every symbol path of length at most `max_len` the machine can walk
    /// from its initial state.
    pub fn fsm_path_language(fsm: &FsmSpec, max_len: usize) -> BTreeSet<Vec<String>> {
        let mut out: BTreeSet<Vec<String>> = BTreeSet::new();
        let mut queue: VecDeque<(String, Vec<String>)> = VecDeque::new();
        out.insert(Vec::new());
        queue.push_back((fsm.initial.clone(), Vec::new()));
        while let Some((state, path)) = queue.pop_front() {
            if path.len() == max_len {
                continue;
            }
            for row in fsm.rows_from(&state) {
                let mut next = path.clone();
                next.push(row.sym.to_string());
                if out.insert(next.clone()) {
                    queue.push_back((row.to.clone(), next));
                }
            }
        }
        out
    }

    pub fn check_language_agreement(fsm: &FsmSpec) -> Result<(), TestCaseError> {
        const LEN: usize = 8;
        let defs = fsm_to_csp(fsm, &[]);
        let want = fsm_path_language(fsm, LEN);
        let ts = traces(
            &ProcessTerm::named(fsm.initial.clone()),
            &defs,
            LEN,
            &ExploreConfig::default(),
        )
        .map_err(fail)?;
        let mut got: BTreeSet<Vec<String>> = BTreeSet::new();
        for tr in &ts {
            let mut names = Vec::with_capacity(tr.len());
            for ev in tr {
                match ev {
                    TraceEvent::Event(e) => names.push(e.name.clone()),
                    TraceEvent::Comm(c) => {
                        return Err(fail(format!(
                            "event-only machine produced a communication `{c:?}`"
                        )))
                    }
                }
            }
            got.insert(names);
        }
        prop_assert_eq!(got, want, "machine paths and process traces disagree");
        Ok(())
    }

    fn run<S, F>(name: &str, cases: u32, strategy: S, check: F) -> Result<(), String>
    where
        S: Strategy,
        F: Fn(&S::Value) -> Result<(), TestCaseError>,
    {
        let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
        runner
            .run(&strategy, |v| check(&v))
            .map_err(|e| format!("{name}: {e}"))
    }

    pub fn run_swarm_roundtrip(cases: u32) -> Result<(), String> {
        run("design print/parse", cases, swarm_strategy(), |s| check_swarm_roundtrip(s))
    }

    pub fn run_fsm_roundtrip(cases: u32) -> Result<(), String> {
        run("machine/process view", cases, fsm_strategy(), |f| check_fsm_roundtrip(f))
    }

    pub fn run_language_agreement(cases: u32) -> Result<(), String> {
        run("path/trace language", cases, event_fsm_strategy(), |f| {
            check_language_agreement(f)
        })
    }

    /// The full round-trip suite: both identities at `cases` generated
    /// designs each, language agreement at `language_cases`.
    pub fn roundtrip_suite(cases: u32, language_cases: u32) -> Result<(), String> {
        run_swarm_roundtrip(cases)?;
        run_fsm_roundtrip(cases)?;
        run_language_agreement(language_cases)
    }
}
