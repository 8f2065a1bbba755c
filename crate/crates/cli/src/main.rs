//! Command-line front end for the swarm verification toolkit: parse a
//! design file, search its joint state space for faults, synthesize a
//! corrected design, or run seeded timing simulations — with reproducible
//! JSON artifacts alongside the human-readable reports.
//!
//! Exit codes are a stable contract: 0 when the requested check came back
//! clean, 1 on any error (bad usage, unreadable or invalid input, exhausted
//! search budget), 2 when a fault was found (analysis witnesses or
//! simulation incidents), and 3 when there was nothing to do (refactoring
//! an already-clean design).
//!
//! Every flag can also be supplied through an environment variable with the
//! `SWARMCHECK_` prefix, e.g. `SWARMCHECK_INPUT`, `SWARMCHECK_DEPTH`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use swarmcheck_core::analysis::{locked, AnalysisReport};
use swarmcheck_core::csp::{format_trace, ExploreConfig};
use swarmcheck_core::refactor::{refactor_design, RefactorError};
use swarmcheck_core::sim::{run_campaign, CampaignConfig, CampaignReport, ObservedRow};
use swarmcheck_core::speclang::{parse_swarm, print_swarm, SwarmSpec};

const EXIT_CLEAN: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_FAULT: u8 = 2;
const EXIT_NOTHING: u8 = 3;

#[derive(Parser)]
#[command(
    name = "swarmcheck",
    version,
    about = "Verify, correct, and simulate distributed robot-swarm designs",
    long_about = "Verify, correct, and simulate distributed robot-swarm designs.\n\n\
        Exit codes: 0 clean, 1 error, 2 fault found, 3 nothing to do."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search the composed joint state space for illegal joint states,
    /// deadlocks, and livelocks
    Analyze(AnalyzeArgs),
    /// Rewrite a faulty design so its triggering events pass through a
    /// consensus round backed by a shared priority queue
    Refactor(AnalyzeArgs),
    /// Run seeded discrete-event simulations against a substrate timing
    /// profile
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Prose and tables for people
    Human,
    /// The JSON artifact itself
    Structured,
}

#[derive(Args)]
struct CommonArgs {
    /// Design file to load
    #[arg(long, env = "SWARMCHECK_INPUT")]
    input: PathBuf,

    /// Directory to persist JSON artifacts into (created if missing)
    #[arg(long, env = "SWARMCHECK_OUT")]
    out: Option<PathBuf>,

    /// What to print on stdout
    #[arg(long, value_enum, default_value_t = Format::Human, env = "SWARMCHECK_FORMAT")]
    format: Format,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Search depth, in semantic steps from the initial joint state
    #[arg(long, default_value_t = 12, env = "SWARMCHECK_DEPTH")]
    depth: usize,

    /// Cap on stored joint states before the search gives up
    #[arg(long, default_value_t = 250_000, env = "SWARMCHECK_BUDGET")]
    budget: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Substrate profile to draw timings from
    #[arg(long, env = "SWARMCHECK_PROFILE")]
    profile: String,

    /// Simulated horizon per run, in milliseconds
    #[arg(long, default_value_t = 60_000.0, env = "SWARMCHECK_HORIZON_MS")]
    horizon_ms: f64,

    /// Comma-separated list of exact seeds to run, e.g. `--seeds 7,8,9`
    #[arg(long, env = "SWARMCHECK_SEEDS", conflicts_with_all = ["seed0", "runs"])]
    seeds: Option<String>,

    /// First seed of a consecutive campaign (seeds seed0, seed0+1, ...)
    #[arg(long, default_value_t = 1, env = "SWARMCHECK_SEED0")]
    seed0: u64,

    /// Number of seeded runs in the campaign
    #[arg(long, default_value_t = 1, env = "SWARMCHECK_RUNS")]
    runs: u32,
}

fn main() -> ExitCode {
    ExitCode::from(run())
}

fn run() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version surface as "errors" in clap; everything else
            // is real misuse and lands on the error exit code.
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Refactor(args) => cmd_refactor(args),
        Cmd::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_ERROR
        }
    }
}

fn load(input: &Path) -> Result<SwarmSpec, String> {
    let text = fs::read_to_string(input)
        .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
    parse_swarm(&text).map_err(|e| format!("{}: {e}", input.display()))
}

fn explore_config(args: &AnalyzeArgs) -> Result<ExploreConfig, String> {
    if args.depth == 0 {
        return Err("--depth must be at least 1".into());
    }
    if args.budget == 0 {
        return Err("--budget must be at least 1".into());
    }
    Ok(ExploreConfig { state_budget: args.budget, ..ExploreConfig::default() })
}

/// Wraps a report into the persisted artifact shape. The content key is the
/// SHA-256 of the canonical report serialization, so identical inputs and
/// parameters always yield byte-identical artifacts.
fn artifact(kind: &str, report: &serde_json::Value) -> Result<serde_json::Value, String> {
    let canonical = serde_json::to_string(report).map_err(|e| e.to_string())?;
    let digest = Sha256::digest(canonical.as_bytes());
    let key: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(serde_json::json!({ "kind": kind, "content_key": key, "report": report }))
}

/// Writes to stdout without dying noisily when the reader (a pager, `head`)
/// hangs up early.
fn emit(text: &str) -> Result<(), String> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(format!("cannot write to stdout: {e}")),
    }
}

/// Persists the artifact (when an output directory was given) and prints
/// either the human report or the artifact itself.
fn deliver(
    common: &CommonArgs,
    kind: &str,
    file_name: &str,
    report: serde_json::Value,
    human: &str,
) -> Result<(), String> {
    let art = artifact(kind, &report)?;
    let rendered = serde_json::to_string_pretty(&art).map_err(|e| e.to_string())?;
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let path = dir.join(file_name);
        fs::write(&path, format!("{rendered}\n"))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    match common.format {
        Format::Human => emit(human),
        Format::Structured => emit(&format!("{rendered}\n")),
    }
}

fn render_analysis(spec: &SwarmSpec, report: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} robot(s) over {} machine state(s); explored {} joint state(s) to depth {}",
        spec.k,
        spec.fsm.states.len(),
        report.explored_states,
        report.depth
    );
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    if report.witnesses.is_empty() {
        let _ = writeln!(
            out,
            "clean: no illegal joint states, deadlocks, or livelocks within this depth"
        );
    } else {
        let _ = writeln!(out, "fault detected: {} witness(es)", report.witnesses.len());
        for (i, w) in report.witnesses.iter().enumerate() {
            let _ = writeln!(
                out,
                "  [{}] {} — trace {} ends in {}",
                i + 1,
                w.classification,
                format_trace(&w.trace),
                w.final_meta
            );
        }
        let names: Vec<&str> = report
            .triggering_events
            .iter()
            .map(|e| e.name.as_str())
            .collect();
        let _ = writeln!(out, "triggering event(s): {}", names.join(", "));
    }
    if report.budget_hit {
        let _ = writeln!(out, "warning: state budget exhausted; the search is incomplete");
    }
    out
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8, String> {
    let cfg = explore_config(&args)?;
    let spec = load(&args.common.input)?;
    let report = locked(&spec, args.depth, &cfg).map_err(|e| e.to_string())?;
    let human = render_analysis(&spec, &report);
    let value = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    deliver(&args.common, "analysis", "analysis.json", value, &human)?;
    if !report.witnesses.is_empty() {
        return Ok(EXIT_FAULT);
    }
    if report.budget_hit {
        return Err(format!(
            "state budget of {} exhausted before depth {} was covered; cleanliness unproven (raise --budget)",
            args.budget, args.depth
        ));
    }
    Ok(EXIT_CLEAN)
}

fn cmd_refactor(args: AnalyzeArgs) -> Result<u8, String> {
    let cfg = explore_config(&args)?;
    let spec = load(&args.common.input)?;
    let report = locked(&spec, args.depth, &cfg).map_err(|e| e.to_string())?;
    let outcome = match refactor_design(&spec, &report) {
        Ok(outcome) => outcome,
        Err(RefactorError::NothingToRefactor) => {
            let note = format!(
                "analysis to depth {} found nothing to correct; the design is left untouched",
                args.depth
            );
            let value = serde_json::json!({ "corrected": null, "notes": [note] });
            deliver(&args.common, "refactor", "refactor.json", value, &format!("{note}\n"))?;
            return Ok(EXIT_NOTHING);
        }
        Err(e) => return Err(e.to_string()),
    };

    let corrected_text = print_swarm(&outcome.corrected);
    if let Some(dir) = &args.common.out {
        fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let path = dir.join("corrected.swarm");
        fs::write(&path, &corrected_text)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }

    let queue = serde_json::to_value(&outcome.queue).map_err(|e| e.to_string())?;
    let value = serde_json::json!({
        "trigger": outcome.consensus.trigger.name,
        "sync_channel": outcome.consensus.sync_channel,
        "consensus_states": {
            "claim": outcome.consensus.master_state,
            "collect": outcome.consensus.ack_wait_state,
            "standby": outcome.consensus.slave_state,
        },
        "queue": queue,
        "notes": outcome.notes,
        "corrected": corrected_text,
    });

    let mut human = String::new();
    let _ = writeln!(
        human,
        "serialized trigger `{}` through a consensus round on channel `{}`",
        outcome.consensus.trigger.name, outcome.consensus.sync_channel
    );
    let order: Vec<String> = outcome.queue.order.iter().map(|r| r.to_string()).collect();
    let _ = writeln!(human, "priority queue order: [{}]", order.join(", "));
    for note in &outcome.notes {
        let _ = writeln!(human, "note: {note}");
    }
    if let Some(dir) = &args.common.out {
        let _ = writeln!(
            human,
            "corrected design written to {}",
            dir.join("corrected.swarm").display()
        );
    } else {
        let _ = writeln!(human, "corrected design follows:\n");
        human.push_str(&corrected_text);
    }
    deliver(&args.common, "refactor", "refactor.json", value, &human)?;
    Ok(EXIT_CLEAN)
}

fn render_timing_table(observed: &[ObservedRow]) -> String {
    let mut out = String::new();
    if observed.is_empty() {
        return out;
    }
    let _ = writeln!(out, "transition timing (ms):");
    let _ = writeln!(
        out,
        "  {:<16} {:>8} {:>10} {:>10} {:>10}",
        "transition", "samples", "mean", "min", "max"
    );
    for row in observed {
        let _ = writeln!(
            out,
            "  {:<16} {:>8} {:>10.2} {:>10.2} {:>10.2}",
            format!("{} -> {}", row.from, row.to),
            row.samples,
            row.mean_ms,
            row.min_ms,
            row.max_ms
        );
    }
    out
}

fn render_campaign(report: &CampaignReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "profile `{}`, horizon {} ms, {} run(s) from seed {}",
        report.profile, report.horizon_ms, report.runs, report.seed0
    );
    let _ = writeln!(
        out,
        "incidents in {} run(s) (rate {:.4}), {} incident(s) total",
        report.incident_runs, report.incident_rate, report.total_incidents
    );
    if let Some(seed) = report.first_incident_seed {
        let _ = writeln!(out, "first incident at seed {seed}");
    }
    let _ = writeln!(
        out,
        "terminations: {} completed, {} deadlocked, {} reached the horizon",
        report.completed_runs, report.deadlocked_runs, report.horizon_runs
    );
    out.push_str(&render_timing_table(&report.observed));
    out
}

fn parse_seed_list(text: &str) -> Result<Vec<u64>, String> {
    let seeds: Vec<u64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(|e| format!("bad seed `{s}`: {e}")))
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err("the seed list is empty; give at least one seed".into());
    }
    Ok(seeds)
}

/// Merges per-seed timing tables the same way the campaign aggregator does:
/// sample-weighted means, extreme min/max.
fn merge_observed(tables: &[Vec<ObservedRow>]) -> Vec<ObservedRow> {
    let mut merged: Vec<ObservedRow> = Vec::new();
    for row in tables.iter().flatten() {
        match merged
            .iter_mut()
            .find(|m| m.from == row.from && m.to == row.to)
        {
            Some(m) => {
                let total = m.samples + row.samples;
                if total > 0 {
                    m.mean_ms = (m.mean_ms * m.samples as f64
                        + row.mean_ms * row.samples as f64)
                        / total as f64;
                }
                m.samples = total;
                m.min_ms = m.min_ms.min(row.min_ms);
                m.max_ms = m.max_ms.max(row.max_ms);
            }
            None => merged.push(row.clone()),
        }
    }
    merged.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    merged
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, String> {
    let spec = load(&args.common.input)?;

    // An explicit list runs one single-seed campaign per entry; the
    // consecutive case is one aggregated campaign.
    if let Some(list) = &args.seeds {
        let seeds = parse_seed_list(list)?;
        let mut per_seed = Vec::new();
        let mut tables = Vec::new();
        let mut incident_runs = 0u32;
        let mut total_incidents = 0u64;
        let mut deadlocked = 0u32;
        let mut first_incident_seed: Option<u64> = None;
        for &seed in &seeds {
            let rep = run_campaign(
                &spec,
                &CampaignConfig {
                    profile: args.profile.clone(),
                    horizon_ms: args.horizon_ms,
                    seed0: seed,
                    runs: 1,
                },
            )
            .map_err(|e| e.to_string())?;
            incident_runs += rep.incident_runs;
            total_incidents += rep.total_incidents;
            deadlocked += rep.deadlocked_runs;
            if first_incident_seed.is_none() {
                first_incident_seed = rep.first_incident_seed;
            }
            per_seed.push(serde_json::json!({
                "seed": seed,
                "incidents": rep.total_incidents,
                "deadlocked": rep.deadlocked_runs == 1,
            }));
            tables.push(rep.observed);
        }
        let observed = merge_observed(&tables);
        let value = serde_json::json!({
            "profile": args.profile,
            "horizon_ms": args.horizon_ms,
            "seeds": seeds,
            "incident_runs": incident_runs,
            "total_incidents": total_incidents,
            "deadlocked_runs": deadlocked,
            "first_incident_seed": first_incident_seed,
            "per_seed": per_seed,
            "observed": serde_json::to_value(&observed).map_err(|e| e.to_string())?,
        });
        let mut human = String::new();
        let _ = writeln!(
            human,
            "profile `{}`, horizon {} ms, {} listed seed(s)",
            args.profile,
            args.horizon_ms,
            seeds.len()
        );
        let _ = writeln!(
            human,
            "incidents in {incident_runs} run(s), {total_incidents} incident(s) total, {deadlocked} deadlocked run(s)"
        );
        if let Some(seed) = first_incident_seed {
            let _ = writeln!(human, "first incident at seed {seed}");
        }
        human.push_str(&render_timing_table(&observed));
        deliver(&args.common, "campaign", "campaign.json", value, &human)?;
        return Ok(if incident_runs > 0 { EXIT_FAULT } else { EXIT_CLEAN });
    }

    if args.runs == 0 {
        return Err("--runs must be at least 1".into());
    }
    let report = run_campaign(
        &spec,
        &CampaignConfig {
            profile: args.profile.clone(),
            horizon_ms: args.horizon_ms,
            seed0: args.seed0,
            runs: args.runs,
        },
    )
    .map_err(|e| e.to_string())?;
    let human = render_campaign(&report);
    let value = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    deliver(&args.common, "campaign", "campaign.json", value, &human)?;
    Ok(if report.incident_runs > 0 { EXIT_FAULT } else { EXIT_CLEAN })
}
