//! Operational semantics: canonical form, single-step derivation, and the
//! rendezvous pairing rule that turns matching channel offers into
//! communication transitions.

use std::collections::BTreeSet;

use thiserror::Error;

use super::label::{CommEvent, Trace, TransitionLabel};
use super::term::{Action, ChannelDir, ChannelOp, Definitions, MessagePattern, ProcessTerm};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CspError {
    #[error("undefined process reference `{name}`")]
    UnresolvedReference { name: String },
    #[error("recursion through `{name}` reaches no action within {limit} unfoldings")]
    UnguardedRecursion { name: String, limit: usize },
    #[error("exploration budget exceeded: visited {visited} states with a budget of {budget}")]
    ExplorationBudgetExceeded {
        visited: usize,
        budget: usize,
        /// Whatever the exploration had produced before the cap was hit.
        partial: std::collections::BTreeSet<Trace>,
    },
}

/// Bounds for symbolic exploration. `unfold_limit` caps how many named
/// references a single derivation may pass through without reaching an
/// action; exceeding it means the recursion is unguarded. `state_budget`
/// caps the number of distinct states any explorer may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    pub unfold_limit: usize,
    pub state_budget: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { unfold_limit: 64, state_budget: 250_000 }
    }
}

/// Rewrites a term to canonical form. Unit laws are applied structurally so
/// that termination plumbing never shows up as extra internal steps:
/// `SKIP ; Q` collapses to `Q`, `STOP ; Q` to `STOP`, a finished operand
/// drops out of an interleaving, and a fully finished synchronized pair
/// becomes `SKIP`.
pub fn normalize(term: &ProcessTerm) -> ProcessTerm {
    match term {
        ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => term.clone(),
        ProcessTerm::Prefix(a, p) => ProcessTerm::prefix(a.clone(), normalize(p)),
        ProcessTerm::Seq(a, b) => {
            let a = normalize(a);
            let b = normalize(b);
            match a {
                ProcessTerm::Skip => b,
                ProcessTerm::Stop => ProcessTerm::Stop,
                other => ProcessTerm::seq(other, b),
            }
        }
        ProcessTerm::ExtChoice(a, b) => ProcessTerm::ext_choice(normalize(a), normalize(b)),
        ProcessTerm::IntChoice(a, b) => ProcessTerm::int_choice(normalize(a), normalize(b)),
        ProcessTerm::Interleave(a, b) => {
            let a = normalize(a);
            let b = normalize(b);
            match (a, b) {
                (ProcessTerm::Skip, rest) => rest,
                (rest, ProcessTerm::Skip) => rest,
                (a, b) => ProcessTerm::interleave(a, b),
            }
        }
        ProcessTerm::SyncParallel(a, b, sync) => {
            let a = normalize(a);
            let b = normalize(b);
            match (&a, &b) {
                (ProcessTerm::Skip, ProcessTerm::Skip) => ProcessTerm::Skip,
                _ => ProcessTerm::sync_parallel(a, b, sync.clone()),
            }
        }
    }
}

/// Everything a term can do in one step: completed transitions plus the
/// channel offers still waiting for a partner. Offers that pair inside a
/// parallel operator become `Comm` transitions there, but they also keep
/// propagating upward so an enclosing operator can pair them with a
/// different partner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Derivations {
    pub transitions: Vec<(TransitionLabel, ProcessTerm)>,
    pub offers: Vec<(ChannelOp, ProcessTerm)>,
}

impl Derivations {
    fn push_transition(&mut self, label: TransitionLabel, term: ProcessTerm) {
        self.transitions.push((label, term));
    }
}

fn offers_match(write: &ChannelOp, read: &ChannelOp) -> Option<CommEvent> {
    if write.channel != read.channel {
        return None;
    }
    let value = match &write.message {
        MessagePattern::Value(v) => v.clone(),
        // A write is only well-formed with a concrete payload; a binder on
        // the writing side offers nothing a reader could accept.
        MessagePattern::Binder(_) => return None,
    };
    let accepted = match &read.message {
        MessagePattern::Value(v) => *v == value,
        MessagePattern::Binder(_) => true,
    };
    if !accepted {
        return None;
    }
    Some(CommEvent {
        channel: write.channel.clone(),
        message: value,
        writer: write.robot_index,
        reader: read.robot_index,
    })
}

/// Pairs write offers against read offers across a parallel boundary and
/// appends the resulting communication transitions.
fn pair_offers<F>(out: &mut Derivations, left: &[(ChannelOp, ProcessTerm)], right: &[(ChannelOp, ProcessTerm)], rebuild: F)
where
    F: Fn(&ProcessTerm, &ProcessTerm) -> ProcessTerm,
{
    for (lop, lterm) in left {
        for (rop, rterm) in right {
            let comm = match (lop.direction, rop.direction) {
                (ChannelDir::Write, ChannelDir::Read) => offers_match(lop, rop),
                (ChannelDir::Read, ChannelDir::Write) => offers_match(rop, lop),
                _ => None,
            };
            if let Some(c) = comm {
                out.push_transition(TransitionLabel::Comm(c), rebuild(lterm, rterm));
            }
        }
    }
}

/// Computes the one-step behaviour of a canonical term. `fuel` bounds the
/// number of reference unfoldings along any single derivation path.
pub fn derive(term: &ProcessTerm, env: &Definitions, fuel: usize) -> Result<Derivations, CspError> {
    let mut out = Derivations::default();
    match term {
        ProcessTerm::Skip | ProcessTerm::Stop => {}
        ProcessTerm::NamedRef(name) => {
            if fuel == 0 {
                return Err(CspError::UnguardedRecursion { name: name.clone(), limit: 0 });
            }
            let body = env
                .get(name)
                .ok_or_else(|| CspError::UnresolvedReference { name: name.clone() })?;
            out = derive(&normalize(body), env, fuel - 1).map_err(|e| match e {
                CspError::UnguardedRecursion { name: n, .. } => {
                    CspError::UnguardedRecursion { name: n, limit: fuel }
                }
                other => other,
            })?;
        }
        ProcessTerm::Prefix(Action::Event(e), p) => {
            out.push_transition(TransitionLabel::Event(e.clone()), (**p).clone());
        }
        ProcessTerm::Prefix(Action::Channel(op), p) => {
            out.offers.push((op.clone(), (**p).clone()));
        }
        ProcessTerm::Seq(a, b) => {
            let da = derive(a, env, fuel)?;
            for (lab, a2) in da.transitions {
                out.push_transition(lab, ProcessTerm::seq(a2, (**b).clone()));
            }
            for (op, a2) in da.offers {
                out.offers.push((op, ProcessTerm::seq(a2, (**b).clone())));
            }
        }
        ProcessTerm::ExtChoice(a, b) => {
            let da = derive(a, env, fuel)?;
            let db = derive(b, env, fuel)?;
            for (lab, a2) in da.transitions {
                match lab {
                    // An internal step inside one branch must not resolve
                    // the choice.
                    TransitionLabel::Tau => {
                        out.push_transition(TransitionLabel::Tau, ProcessTerm::ext_choice(a2, (**b).clone()))
                    }
                    other => out.push_transition(other, a2),
                }
            }
            for (lab, b2) in db.transitions {
                match lab {
                    TransitionLabel::Tau => {
                        out.push_transition(TransitionLabel::Tau, ProcessTerm::ext_choice((**a).clone(), b2))
                    }
                    other => out.push_transition(other, b2),
                }
            }
            // Firing an offer resolves the choice in favour of its branch.
            for (op, a2) in da.offers {
                out.offers.push((op, a2));
            }
            for (op, b2) in db.offers {
                out.offers.push((op, b2));
            }
        }
        ProcessTerm::IntChoice(a, b) => {
            out.push_transition(TransitionLabel::Tau, (**a).clone());
            out.push_transition(TransitionLabel::Tau, (**b).clone());
        }
        ProcessTerm::Interleave(a, b) => {
            let da = derive(a, env, fuel)?;
            let db = derive(b, env, fuel)?;
            for (lab, a2) in &da.transitions {
                out.push_transition(lab.clone(), ProcessTerm::interleave(a2.clone(), (**b).clone()));
            }
            for (lab, b2) in &db.transitions {
                out.push_transition(lab.clone(), ProcessTerm::interleave((**a).clone(), b2.clone()));
            }
            pair_offers(&mut out, &da.offers, &db.offers, |l, r| {
                ProcessTerm::interleave(l.clone(), r.clone())
            });
            for (op, a2) in da.offers {
                out.offers.push((op, ProcessTerm::interleave(a2, (**b).clone())));
            }
            for (op, b2) in db.offers {
                out.offers.push((op, ProcessTerm::interleave((**a).clone(), b2)));
            }
        }
        ProcessTerm::SyncParallel(a, b, sync) => {
            let da = derive(a, env, fuel)?;
            let db = derive(b, env, fuel)?;
            let mut sync_a = Vec::new();
            let mut sync_b = Vec::new();
            for (lab, a2) in &da.transitions {
                match lab {
                    TransitionLabel::Event(e) if sync.contains(&e.name) => sync_a.push((e.clone(), a2.clone())),
                    other => out.push_transition(
                        other.clone(),
                        ProcessTerm::sync_parallel(a2.clone(), (**b).clone(), sync.clone()),
                    ),
                }
            }
            for (lab, b2) in &db.transitions {
                match lab {
                    TransitionLabel::Event(e) if sync.contains(&e.name) => sync_b.push((e.clone(), b2.clone())),
                    other => out.push_transition(
                        other.clone(),
                        ProcessTerm::sync_parallel((**a).clone(), b2.clone(), sync.clone()),
                    ),
                }
            }
            // Synchronized events need both operands to agree on the full label.
            for (ea, a2) in &sync_a {
                for (eb, b2) in &sync_b {
                    if ea == eb {
                        out.push_transition(
                            TransitionLabel::Event(ea.clone()),
                            ProcessTerm::sync_parallel(a2.clone(), b2.clone(), sync.clone()),
                        );
                    }
                }
            }
            pair_offers(&mut out, &da.offers, &db.offers, |l, r| {
                ProcessTerm::sync_parallel(l.clone(), r.clone(), sync.clone())
            });
            for (op, a2) in da.offers {
                out.offers.push((op, ProcessTerm::sync_parallel(a2, (**b).clone(), sync.clone())));
            }
            for (op, b2) in db.offers {
                out.offers.push((op, ProcessTerm::sync_parallel((**a).clone(), b2, sync.clone())));
            }
        }
    }
    Ok(out)
}

/// A state of the transition system: a canonical term plus the channel
/// offers that found no partner (they block until the environment supplies
/// one, which at the top level it never does).
#[derive(Debug, Clone)]
pub struct SemanticState {
    pub term: ProcessTerm,
    pub pending_rendezvous: BTreeSet<ChannelOp>,
}

impl PartialEq for SemanticState {
    fn eq(&self, other: &Self) -> bool {
        self.term == other.term
    }
}

impl Eq for SemanticState {}

impl std::hash::Hash for SemanticState {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.term.hash(state);
    }
}

impl SemanticState {
    /// Canonicalizes `term` and records its unpaired offers.
    pub fn analyze(term: &ProcessTerm, env: &Definitions, cfg: &ExploreConfig) -> Result<Self, CspError> {
        let term = normalize(term);
        let d = derive(&term, env, cfg.unfold_limit)?;
        let pending = d.offers.into_iter().map(|(op, _)| op).collect();
        Ok(SemanticState { term, pending_rendezvous: pending })
    }
}

/// All single-step successors of `state`, deterministically ordered by
/// (label, successor term) with internal steps sorted last. Successor terms
/// are canonical. Unpaired channel offers yield no successors; they are
/// visible in each state's `pending_rendezvous`.
pub fn step(
    state: &SemanticState,
    env: &Definitions,
    cfg: &ExploreConfig,
) -> Result<Vec<(TransitionLabel, SemanticState)>, CspError> {
    let d = derive(&state.term, env, cfg.unfold_limit)?;
    let mut seen = BTreeSet::new();
    for (lab, term) in d.transitions {
        seen.insert((lab, normalize(&term)));
    }
    let mut out = Vec::with_capacity(seen.len());
    for (lab, term) in seen {
        let next = SemanticState::analyze(&term, env, cfg)?;
        out.push((lab, next));
    }
    Ok(out)
}
