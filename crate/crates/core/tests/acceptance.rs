//! End-to-end acceptance gate for the toolkit. Each test covers one
//! criterion, prints exactly one `criterion N (...): pass|fail` line, and
//! fails loudly if its criterion does not hold. Run with `--nocapture` to
//! see the lines for passing criteria too.

mod common;

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use swarmcheck_core::analysis::{
    design_meta_state_count, locked, meta_state_count, replay_witness,
};
use swarmcheck_core::csp::{format_trace, ExploreConfig};
use swarmcheck_core::refactor::refactor_design;
use swarmcheck_core::sim::{run_campaign, sample_ms, CampaignConfig, CampaignReport};
use swarmcheck_core::speclang::{parse_swarm, SwarmSpec, TimingParams};

const FAULTY_K2: &str = include_str!("../../../corpus/faulty_k2.swarm");
const FAULTY_K3: &str = include_str!("../../../corpus/faulty_k3.swarm");
const CORRECTED_K3: &str = include_str!("../../../corpus/corrected_k3.swarm");

/// Runs one criterion body and prints its verdict line.
fn gate(number: u32, label: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {number} ({label}): pass"),
        Err(why) => {
            println!("criterion {number} ({label}): fail — {why}");
            panic!("criterion {number} ({label}): {why}");
        }
    }
}

macro_rules! expect {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn parsed(text: &str) -> Result<SwarmSpec, String> {
    parse_swarm(text).map_err(|e| format!("shipped design failed to parse: {e}"))
}

/// The analyzer finds the overcrowding fault in both shipped faulty designs,
/// every reported trace replays against the composed processes, and for two
/// robots the full witness set matches an independently coded brute-force
/// enumeration of the product machine.
#[test]
fn criterion_1_fault_detection() {
    gate(1, "fault detection", || {
        let t0 = Instant::now();
        let cfg = ExploreConfig::default();

        for text in [FAULTY_K2, FAULTY_K3] {
            let spec = parsed(text)?;
            let report = locked(&spec, 12, &cfg)
                .map_err(|e| format!("analysis failed (k={}): {e}", spec.k))?;
            expect!(
                !report.witnesses.is_empty(),
                "no witnesses found for k={} at depth 12",
                spec.k
            );
            let crowded = report
                .witnesses
                .iter()
                .filter(|w| w.final_meta.count_in("P") >= 2)
                .count();
            expect!(
                crowded >= 1,
                "no witness ends with two or more robots planning at once (k={})",
                spec.k
            );
            for w in &report.witnesses {
                let ok = replay_witness(&spec, w, &cfg)
                    .map_err(|e| format!("replay failed (k={}): {e}", spec.k))?;
                expect!(
                    ok,
                    "witness trace is not admitted by the composition (k={}): {}",
                    spec.k,
                    format_trace(&w.trace)
                );
            }
        }

        // Independent cross-check: the hand-coded two-robot product machine
        // must reproduce the analyzer's witness set and state count exactly.
        let spec = parsed(FAULTY_K2)?;
        let report = locked(&spec, 12, &cfg).map_err(|e| e.to_string())?;
        let oracle = common::retrieval_oracle::enumerate(12);
        let mut got = report.witnesses.clone();
        let mut want = oracle.witnesses;
        got.sort_by_key(common::retrieval_oracle::witness_key);
        want.sort_by_key(common::retrieval_oracle::witness_key);
        expect!(
            got == want,
            "witness sets diverge: analyzer {:?} vs product machine {:?}",
            got.iter().map(common::retrieval_oracle::witness_key).collect::<Vec<_>>(),
            want.iter().map(common::retrieval_oracle::witness_key).collect::<Vec<_>>()
        );
        expect!(
            report.explored_states == oracle.explored,
            "analyzer explored {} states, product machine {}",
            report.explored_states,
            oracle.explored
        );

        expect!(
            t0.elapsed() < Duration::from_secs(10),
            "detection took {:?}, over the 10 s budget",
            t0.elapsed()
        );
        Ok(())
    });
}

/// Refactoring each faulty design yields one that analyzes clean to depth
/// 20, and for three robots the output is structurally the shipped
/// corrected design.
#[test]
fn criterion_2_correction_soundness() {
    gate(2, "correction soundness", || {
        let t0 = Instant::now();
        let cfg = ExploreConfig::default();
        let shipped = parsed(CORRECTED_K3)?;

        for text in [FAULTY_K2, FAULTY_K3] {
            let spec = parsed(text)?;
            let findings = locked(&spec, 12, &cfg)
                .map_err(|e| format!("analysis failed (k={}): {e}", spec.k))?;
            let outcome = refactor_design(&spec, &findings)
                .map_err(|e| format!("refactor failed (k={}): {e}", spec.k))?;
            let audit = locked(&outcome.corrected, 20, &cfg)
                .map_err(|e| format!("audit failed (k={}): {e}", spec.k))?;
            expect!(
                audit.is_clean(),
                "corrected design still has {} finding(s) at depth 20 (k={}); first: {} ending in [{}]",
                audit.witnesses.len(),
                spec.k,
                audit.witnesses[0].classification,
                audit.witnesses[0].final_meta
            );
            expect!(
                !audit.budget_hit,
                "audit of the corrected design hit the state budget (k={}), so cleanliness is unproven",
                spec.k
            );
            if spec.k == 3 {
                expect!(
                    outcome.corrected.structure() == shipped.structure(),
                    "the three-robot correction differs structurally from the shipped corrected design"
                );
            }
        }

        expect!(
            t0.elapsed() < Duration::from_secs(60),
            "correction and audit took {:?}, over the 60 s budget",
            t0.elapsed()
        );
        Ok(())
    });
}

/// A thousand seeded runs per design and substrate: the faulty design
/// produces incidents on the physical substrate and at a rate no lower
/// than on the simulation substrate, while the corrected design produces
/// none anywhere and never deadlocks — and stays incident-free under
/// freshly drawn seed bases.
#[test]
fn criterion_3_simulation_reproduction() {
    gate(3, "simulation reproduction", || {
        let t0 = Instant::now();
        let faulty = parsed(FAULTY_K3)?;
        let corrected = parsed(CORRECTED_K3)?;

        let campaign = |spec: &SwarmSpec,
                        profile: &str,
                        seed0: u64,
                        runs: u32|
         -> Result<CampaignReport, String> {
            run_campaign(
                spec,
                &CampaignConfig {
                    profile: profile.to_string(),
                    horizon_ms: 60_000.0,
                    seed0,
                    runs,
                },
            )
            .map_err(|e| format!("campaign failed on `{profile}`: {e}"))
        };

        let fp = campaign(&faulty, "physical", 1, 1000)?;
        let fs = campaign(&faulty, "simulation", 1, 1000)?;
        let cp = campaign(&corrected, "physical", 1, 1000)?;
        let cs = campaign(&corrected, "simulation", 1, 1000)?;

        expect!(
            fp.incident_runs > 0,
            "the faulty design produced no incidents on the physical substrate in {} runs",
            fp.runs
        );
        expect!(
            fp.incident_rate >= fs.incident_rate,
            "physical incident rate {} is below the simulation substrate's {}",
            fp.incident_rate,
            fs.incident_rate
        );
        expect!(
            cp.incident_runs == 0,
            "corrected design had {} incident run(s) on the physical substrate (first seed {:?})",
            cp.incident_runs,
            cp.first_incident_seed
        );
        expect!(
            cs.incident_runs == 0,
            "corrected design had {} incident run(s) on the simulation substrate (first seed {:?})",
            cs.incident_runs,
            cs.first_incident_seed
        );
        expect!(
            cp.deadlocked_runs == 0 && cs.deadlocked_runs == 0,
            "corrected design deadlocked in {} physical / {} simulation run(s)",
            cp.deadlocked_runs,
            cs.deadlocked_runs
        );

        // Property over seed bases: the correction holds however the
        // campaign is seeded, on both substrates.
        let mut runner = TestRunner::new(Config { cases: 12, failure_persistence: None, ..Config::default() });
        runner
            .run(&any::<u32>(), |base| {
                for profile in ["physical", "simulation"] {
                    let rep = campaign(&corrected, profile, u64::from(base), 64)
                        .map_err(TestCaseError::fail)?;
                    prop_assert!(
                        rep.incident_runs == 0 && rep.deadlocked_runs == 0,
                        "seed base {}: {} incident / {} deadlocked run(s) on `{}`",
                        base,
                        rep.incident_runs,
                        rep.deadlocked_runs,
                        profile
                    );
                }
                Ok(())
            })
            .map_err(|e| format!("seeded-correction property: {e}"))?;

        expect!(
            t0.elapsed() < Duration::from_secs(300),
            "simulation campaigns took {:?}, over the 5 min budget",
            t0.elapsed()
        );
        Ok(())
    });
}

/// Sampled durations always stay inside the declared band, both for the
/// sampler in isolation under arbitrary parameters and for every
/// transition the simulator actually timed; the claim-to-collection row of
/// the corrected design's simulation substrate also reproduces its
/// declared mean to within 0.15 ms over ten thousand draws.
#[test]
fn criterion_4_timing_fidelity() {
    gate(4, "timing fidelity", || {
        // The sampler alone, under arbitrary parameters and seeds.
        let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
        runner
            .run(
                &(1..=200_000u32, 0..=50_000u32, any::<u64>()),
                |(m, d, seed)| {
                    let p = TimingParams {
                        mean_ms: f64::from(m) / 100.0,
                        dev_ms: f64::from(d) / 100.0,
                    };
                    let (lo, hi) = (p.mean_ms - p.dev_ms, p.mean_ms + p.dev_ms);
                    let mut rng = ChaCha12Rng::seed_from_u64(seed);
                    for _ in 0..64 {
                        let x = sample_ms(&mut rng, p);
                        prop_assert!(
                            (lo..=hi).contains(&x),
                            "draw {} escapes [{}, {}]",
                            x,
                            lo,
                            hi
                        );
                    }
                    Ok(())
                },
            )
            .map_err(|e| format!("band property: {e}"))?;

        // Every duration the simulator observed lies inside its row's band.
        let corrected = parsed(CORRECTED_K3)?;
        let rep = run_campaign(
            &corrected,
            &CampaignConfig {
                profile: "simulation".to_string(),
                horizon_ms: 60_000.0,
                seed0: 99,
                runs: 50,
            },
        )
        .map_err(|e| format!("observation campaign failed: {e}"))?;
        expect!(!rep.observed.is_empty(), "the observation campaign timed no transitions");
        let profile = corrected.profile("simulation").ok_or("no simulation substrate")?;
        for row in &rep.observed {
            let p = profile
                .timing
                .get(&row.from, &row.to)
                .ok_or_else(|| format!("no declared timing for {} -> {}", row.from, row.to))?;
            let (lo, hi) = (p.mean_ms - p.dev_ms, p.mean_ms + p.dev_ms);
            expect!(
                row.min_ms >= lo && row.max_ms <= hi,
                "{} -> {} observed [{}, {}] outside declared [{}, {}]",
                row.from,
                row.to,
                row.min_ms,
                row.max_ms,
                lo,
                hi
            );
        }

        // The claim-to-collection row reproduces its declared mean.
        let p = profile
            .timing
            .get("C_m", "A")
            .ok_or("no C_m -> A timing row on the simulation substrate")?;
        expect!(
            p.mean_ms == 160.19 && p.dev_ms == 4.5,
            "unexpected C_m -> A parameters: mean={} dev={}",
            p.mean_ms,
            p.dev_ms
        );
        let (lo, hi) = (p.mean_ms - p.dev_ms, p.mean_ms + p.dev_ms);
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let mut acc = 0.0;
        for _ in 0..10_000 {
            let x = sample_ms(&mut rng, p);
            expect!((lo..=hi).contains(&x), "draw {x} escapes [{lo}, {hi}]");
            acc += x;
        }
        let mean = acc / 10_000.0;
        expect!(
            (mean - p.mean_ms).abs() <= 0.15,
            "empirical mean {mean} strays more than 0.15 ms from {}",
            p.mean_ms
        );
        Ok(())
    });
}

/// The process kernel's trace model obeys its laws on freshly generated
/// terms: prefix closure, both choice operators as trace-set union,
/// interleaving as the brute-force shuffle product, deterministic sorted
/// successor computation, and binomial interleaving counts.
#[test]
fn criterion_5_kernel_laws() {
    gate(5, "kernel laws", || common::laws::kernel_suite(128));
}

/// Printing then parsing is the identity on generated designs, the machine
/// and process views convert back and forth losslessly, and a machine's
/// path language equals its process trace language.
#[test]
fn criterion_6_round_trips() {
    gate(6, "representation round-trips", || common::rt::roundtrip_suite(128, 100))
}

/// The joint-state count is exactly |states|^k for the shipped designs,
/// including the corrected design's coarse five-state view (its
/// acknowledgement-collection state is a sub-phase of the claim it
/// follows), and the counter saturates honestly instead of wrapping.
#[test]
fn criterion_7_meta_state_count() {
    gate(7, "joint-state count", || {
        let k2 = parsed(FAULTY_K2)?;
        let k3 = parsed(FAULTY_K3)?;
        let c3 = parsed(CORRECTED_K3)?;

        let n2 = design_meta_state_count(&k2);
        expect!(
            n2.value == 9 && !n2.saturated,
            "two robots over three states: got {}",
            n2.value
        );
        let n3 = design_meta_state_count(&k3);
        expect!(
            n3.value == 27 && !n3.saturated,
            "three robots over three states: got {}",
            n3.value
        );

        expect!(
            c3.fsm.states.len() == 6,
            "corrected machine has {} states, expected 6",
            c3.fsm.states.len()
        );
        let full = design_meta_state_count(&c3);
        expect!(
            full.value == 216 && !full.saturated,
            "three robots over six states: got {}",
            full.value
        );
        let coarse = meta_state_count(c3.fsm.states.len() - 1, c3.k);
        expect!(
            coarse.value == 125 && !coarse.saturated,
            "coarse five-state view for three robots: got {}",
            coarse.value
        );

        let sat = meta_state_count(1_000, 1_000);
        expect!(
            sat.saturated && sat.value == u128::MAX,
            "astronomic joint spaces must saturate, got {:?}",
            sat
        );
        Ok(())
    });
}
