//! Canonical rendering of a design. Printing sorts every block, so
//! parse-then-print is a fixed point after one pass and equal designs render
//! byte-identically.

use std::fmt::Write as _;

use super::ast::{MetaStatePredicate, SwarmSpec, TimingParams};

fn push_timing(out: &mut String, t: &TimingParams) {
    let _ = write!(out, "mean={} dev={}", t.mean_ms, t.dev_ms);
}

pub fn print_swarm(spec: &SwarmSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "swarm k={}", spec.k);
    out.push('\n');

    out.push_str("fsm {\n");
    let _ = writeln!(out, "  initial {}", spec.fsm.initial);
    for state in &spec.fsm.states {
        let _ = writeln!(out, "  state {state}");
    }
    let mut rows = spec.fsm.transitions.clone();
    rows.sort();
    for row in &rows {
        let _ = writeln!(out, "  on {} {} -> {}", row.sym, row.from, row.to);
    }
    out.push_str("}\n");

    let mut channels = spec.channels.clone();
    channels.sort();
    if !channels.is_empty() {
        out.push('\n');
        for c in &channels {
            if c.messages.is_empty() {
                let _ = writeln!(out, "channel {}", c.name);
            } else {
                let msgs: Vec<&str> = c.messages.iter().map(String::as_str).collect();
                let _ = writeln!(out, "channel {} msgs: {}", c.name, msgs.join(", "));
            }
        }
    }

    if !spec.defs.is_empty() {
        out.push('\n');
        for (name, body) in spec.defs.iter() {
            let _ = writeln!(out, "process {name} = {body}");
        }
    }

    let mut profiles = spec.profiles.clone();
    profiles.sort_by(|a, b| a.name.cmp(&b.name));
    for p in &profiles {
        out.push('\n');
        let _ = writeln!(out, "profile {} {{", p.name);
        if p.comm_latency != TimingParams::ZERO {
            out.push_str("  comm_latency ");
            push_timing(&mut out, &p.comm_latency);
            out.push('\n');
        }
        let mut rows = p.timing.rows.clone();
        rows.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        for row in &rows {
            let _ = write!(out, "  {} -> {} : ", row.from, row.to);
            push_timing(&mut out, &row.timing);
            out.push('\n');
        }
        out.push_str("}\n");
    }

    if !spec.illegal.is_empty() {
        out.push('\n');
        out.push_str("illegal {\n");
        let mut preds = spec.illegal.clone();
        preds.sort();
        for pred in &preds {
            match pred {
                MetaStatePredicate::AtMostNInState { state, n } => {
                    let _ = writeln!(out, "  at_most {n} in {state}");
                }
                MetaStatePredicate::ForbiddenPattern { pattern } => {
                    let slots: Vec<String> = pattern.iter().map(|p| p.to_string()).collect();
                    let _ = writeln!(out, "  never [{}]", slots.join(", "));
                }
            }
        }
        out.push_str("}\n");
    }

    if let Some(sc) = &spec.scenario {
        out.push('\n');
        out.push_str("scenario {\n");
        if let Some(enc) = &sc.encounter {
            out.push_str("  encounter ");
            push_timing(&mut out, enc);
            out.push('\n');
        }
        let mut rules = sc.detect.clone();
        rules.sort_by(|a, b| a.positive.cmp(&b.positive));
        for rule in &rules {
            let _ = writeln!(
                out,
                "  detect {} prob={} else {}",
                rule.positive, rule.probability, rule.negative
            );
        }
        out.push_str("}\n");
    }

    out
}
