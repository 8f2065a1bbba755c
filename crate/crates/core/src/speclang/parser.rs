//! Parser for design files. `parse_swarm` is the single entry point; it
//! tokenizes, builds the syntax tree, and validates the result so a
//! successfully parsed design is always well-formed.

use std::collections::BTreeSet;

use crate::csp::{
    Action, ChannelOp, Definitions, EventLabel, MessagePattern, MessageValue, ProcessTerm,
};

use super::ast::{
    ActionSym, ChannelDecl, DetectRule, FsmSpec, FsmTransition, MetaStatePredicate, ScenarioSpec,
    StatePattern, SubstrateProfile, SwarmSpec, TimingMatrix, TimingParams, TimingRow,
};
use super::lexer::{lex, SpecError, Tok, TokKind};
use super::validate::validate;

pub fn parse_swarm(src: &str) -> Result<SwarmSpec, SpecError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let spec = p.parse_file()?;
    validate(&spec)?;
    Ok(spec)
}

fn is_process_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.line)
            .unwrap_or(1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SpecError> {
        Err(SpecError::Parse { line: self.line(), message: message.into() })
    }

    fn peek(&self) -> Option<&TokKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn peek2(&self) -> Option<&TokKind> {
        self.toks.get(self.pos + 1).map(|t| &t.kind)
    }

    fn advance(&mut self) -> Option<TokKind> {
        let t = self.toks.get(self.pos).map(|t| t.kind.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: &TokKind) -> Result<(), SpecError> {
        if self.eat(kind) {
            Ok(())
        } else {
            match self.peek() {
                Some(got) => self.err(format!("expected {kind}, found {got}")),
                None => self.err(format!("expected {kind}, found end of file")),
            }
        }
    }

    fn expect_ident(&mut self) -> Result<String, SpecError> {
        match self.peek() {
            Some(TokKind::Ident(_)) => match self.advance() {
                Some(TokKind::Ident(i)) => Ok(i),
                _ => unreachable!(),
            },
            Some(got) => self.err(format!("expected an identifier, found {got}")),
            None => self.err("expected an identifier, found end of file"),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SpecError> {
        let line = self.line();
        let got = self.expect_ident()?;
        if got == kw {
            Ok(())
        } else {
            Err(SpecError::Parse { line, message: format!("expected `{kw}`, found `{got}`") })
        }
    }

    fn expect_number(&mut self) -> Result<f64, SpecError> {
        match self.peek() {
            Some(TokKind::Number(_)) => match self.advance() {
                Some(TokKind::Number(n)) => n
                    .parse::<f64>()
                    .map_err(|_| SpecError::Parse { line: self.line(), message: format!("bad number `{n}`") }),
                _ => unreachable!(),
            },
            Some(got) => self.err(format!("expected a number, found {got}")),
            None => self.err("expected a number, found end of file"),
        }
    }

    fn expect_integer(&mut self) -> Result<u32, SpecError> {
        let line = self.line();
        match self.peek() {
            Some(TokKind::Number(n)) if !n.contains('.') => {
                let v = n
                    .parse::<u32>()
                    .map_err(|_| SpecError::Parse { line, message: format!("bad integer `{n}`") })?;
                self.pos += 1;
                Ok(v)
            }
            Some(got) => self.err(format!("expected an integer, found {got}")),
            None => self.err("expected an integer, found end of file"),
        }
    }

    fn skip_newlines(&mut self) {
        while self.eat(&TokKind::Newline) {}
    }

    fn end_statement(&mut self) -> Result<(), SpecError> {
        match self.peek() {
            Some(TokKind::Newline) => {
                self.skip_newlines();
                Ok(())
            }
            Some(TokKind::RBrace) | None => Ok(()),
            Some(got) => self.err(format!("expected end of line, found {got}")),
        }
    }

    fn parse_file(&mut self) -> Result<SwarmSpec, SpecError> {
        let mut k: Option<u32> = None;
        let mut fsm: Option<FsmSpec> = None;
        let mut defs = Definitions::new();
        let mut channels: Vec<ChannelDecl> = Vec::new();
        let mut profiles: Vec<SubstrateProfile> = Vec::new();
        let mut illegal: Vec<MetaStatePredicate> = Vec::new();
        let mut scenario: Option<ScenarioSpec> = None;

        loop {
            self.skip_newlines();
            if self.peek().is_none() {
                break;
            }
            let line = self.line();
            let kw = self.expect_ident()?;
            match kw.as_str() {
                "swarm" => {
                    if k.is_some() {
                        return Err(SpecError::Parse { line, message: "duplicate `swarm` line".into() });
                    }
                    self.expect_keyword("k")?;
                    self.expect(&TokKind::Equals)?;
                    k = Some(self.expect_integer()?);
                    self.end_statement()?;
                }
                "fsm" => {
                    if fsm.is_some() {
                        return Err(SpecError::Parse { line, message: "duplicate `fsm` block".into() });
                    }
                    fsm = Some(self.parse_fsm_block()?);
                }
                "process" => {
                    let name = self.expect_ident()?;
                    if !is_process_name(&name) {
                        return Err(SpecError::Parse {
                            line,
                            message: format!("process name `{name}` must start with an uppercase letter"),
                        });
                    }
                    if defs.contains(&name) {
                        return Err(SpecError::Parse {
                            line,
                            message: format!("duplicate definition of process `{name}`"),
                        });
                    }
                    self.expect(&TokKind::Equals)?;
                    let body = self.parse_expr()?;
                    self.end_statement()?;
                    defs.define(name, body);
                }
                "channel" => {
                    let name = self.expect_ident()?;
                    let mut messages = BTreeSet::new();
                    if matches!(self.peek(), Some(TokKind::Ident(i)) if i == "msgs") {
                        self.advance();
                        self.expect(&TokKind::Colon)?;
                        loop {
                            messages.insert(self.expect_ident()?);
                            if !self.eat(&TokKind::Comma) {
                                break;
                            }
                        }
                    }
                    self.end_statement()?;
                    channels.push(ChannelDecl { name, messages });
                }
                "profile" => {
                    let name = self.expect_ident()?;
                    profiles.push(self.parse_profile_block(name)?);
                }
                "illegal" => {
                    illegal.extend(self.parse_illegal_block()?);
                }
                "scenario" => {
                    if scenario.is_some() {
                        return Err(SpecError::Parse { line, message: "duplicate `scenario` block".into() });
                    }
                    scenario = Some(self.parse_scenario_block()?);
                }
                other => {
                    return Err(SpecError::Parse {
                        line,
                        message: format!("unknown declaration `{other}`"),
                    });
                }
            }
        }

        let k = match k {
            Some(k) => k,
            None => return self.err("missing `swarm k=<count>` line"),
        };
        let fsm = match fsm {
            Some(f) => f,
            None => return self.err("missing `fsm { .. }` block"),
        };
        let root = fsm.initial.clone();
        let defs = resolve_read_patterns(&defs, &channels);
        Ok(SwarmSpec { k, fsm, defs, root, channels, profiles, illegal, scenario })
    }

    fn parse_fsm_block(&mut self) -> Result<FsmSpec, SpecError> {
        self.expect(&TokKind::LBrace)?;
        let mut fsm = FsmSpec::default();
        loop {
            self.skip_newlines();
            if self.eat(&TokKind::RBrace) {
                break;
            }
            let line = self.line();
            let kw = self.expect_ident()?;
            match kw.as_str() {
                "initial" => {
                    if !fsm.initial.is_empty() {
                        return Err(SpecError::Parse { line, message: "duplicate `initial` line".into() });
                    }
                    fsm.initial = self.expect_ident()?;
                }
                "state" => {
                    let name = self.expect_ident()?;
                    if !fsm.states.insert(name.clone()) {
                        return Err(SpecError::Parse {
                            line,
                            message: format!("duplicate state `{name}`"),
                        });
                    }
                }
                "on" => {
                    let sym = self.parse_action_sym()?;
                    let from = self.expect_ident()?;
                    self.expect(&TokKind::Arrow)?;
                    let to = self.expect_ident()?;
                    fsm.transitions.push(FsmTransition { from, sym, to });
                }
                other => {
                    return Err(SpecError::Parse {
                        line,
                        message: format!("unknown machine declaration `{other}`"),
                    });
                }
            }
            self.end_statement()?;
        }
        self.end_statement()?;
        fsm.sort();
        if fsm.initial.is_empty() {
            return self.err("machine block lacks an `initial` line");
        }
        Ok(fsm)
    }

    fn parse_action_sym(&mut self) -> Result<ActionSym, SpecError> {
        let name = self.expect_ident()?;
        if self.eat(&TokKind::Bang) {
            let message = self.expect_ident()?;
            Ok(ActionSym::Write { channel: name, message })
        } else if self.eat(&TokKind::Question) {
            let message = self.expect_ident()?;
            Ok(ActionSym::Read { channel: name, message })
        } else {
            Ok(ActionSym::Event(name))
        }
    }

    fn parse_timing_params(&mut self) -> Result<TimingParams, SpecError> {
        self.expect_keyword("mean")?;
        self.expect(&TokKind::Equals)?;
        let mean_ms = self.expect_number()?;
        self.expect_keyword("dev")?;
        self.expect(&TokKind::Equals)?;
        let dev_ms = self.expect_number()?;
        Ok(TimingParams { mean_ms, dev_ms })
    }

    fn parse_profile_block(&mut self, name: String) -> Result<SubstrateProfile, SpecError> {
        self.expect(&TokKind::LBrace)?;
        let mut timing = TimingMatrix::default();
        let mut comm_latency = TimingParams::ZERO;
        loop {
            self.skip_newlines();
            if self.eat(&TokKind::RBrace) {
                break;
            }
            if matches!(self.peek(), Some(TokKind::Ident(i)) if i == "comm_latency") {
                self.advance();
                comm_latency = self.parse_timing_params()?;
            } else {
                let from = self.expect_ident()?;
                self.expect(&TokKind::Arrow)?;
                let to = self.expect_ident()?;
                self.expect(&TokKind::Colon)?;
                let params = self.parse_timing_params()?;
                timing.rows.push(TimingRow { from, to, timing: params });
            }
            self.end_statement()?;
        }
        self.end_statement()?;
        timing.sort();
        Ok(SubstrateProfile { name, timing, comm_latency })
    }

    fn parse_illegal_block(&mut self) -> Result<Vec<MetaStatePredicate>, SpecError> {
        self.expect(&TokKind::LBrace)?;
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if self.eat(&TokKind::RBrace) {
                break;
            }
            let line = self.line();
            let kw = self.expect_ident()?;
            match kw.as_str() {
                "at_most" => {
                    let n = self.expect_integer()?;
                    self.expect_keyword("in")?;
                    let state = self.expect_ident()?;
                    out.push(MetaStatePredicate::AtMostNInState { state, n });
                }
                "never" => {
                    self.expect(&TokKind::LBracket)?;
                    let mut pattern = Vec::new();
                    loop {
                        let slot = self.expect_ident()?;
                        pattern.push(if slot == "_" {
                            StatePattern::Any
                        } else {
                            StatePattern::Is(slot)
                        });
                        if !self.eat(&TokKind::Comma) {
                            break;
                        }
                    }
                    self.expect(&TokKind::RBracket)?;
                    out.push(MetaStatePredicate::ForbiddenPattern { pattern });
                }
                other => {
                    return Err(SpecError::Parse {
                        line,
                        message: format!("unknown predicate form `{other}`"),
                    });
                }
            }
            self.end_statement()?;
        }
        self.end_statement()?;
        Ok(out)
    }

    fn parse_scenario_block(&mut self) -> Result<ScenarioSpec, SpecError> {
        self.expect(&TokKind::LBrace)?;
        let mut scenario = ScenarioSpec::default();
        loop {
            self.skip_newlines();
            if self.eat(&TokKind::RBrace) {
                break;
            }
            let line = self.line();
            let kw = self.expect_ident()?;
            match kw.as_str() {
                "encounter" => {
                    if scenario.encounter.is_some() {
                        return Err(SpecError::Parse { line, message: "duplicate `encounter` line".into() });
                    }
                    scenario.encounter = Some(self.parse_timing_params()?);
                }
                "detect" => {
                    let positive = self.expect_ident()?;
                    self.expect_keyword("prob")?;
                    self.expect(&TokKind::Equals)?;
                    let probability = self.expect_number()?;
                    self.expect_keyword("else")?;
                    let negative = self.expect_ident()?;
                    scenario.detect.push(DetectRule { positive, probability, negative });
                }
                other => {
                    return Err(SpecError::Parse {
                        line,
                        message: format!("unknown scenario declaration `{other}`"),
                    });
                }
            }
            self.end_statement()?;
        }
        self.end_statement()?;
        Ok(scenario)
    }

    // ---- process expressions ----------------------------------------

    fn parse_expr(&mut self) -> Result<ProcessTerm, SpecError> {
        self.parse_parallel()
    }

    fn parse_parallel(&mut self) -> Result<ProcessTerm, SpecError> {
        let mut acc = self.parse_choice()?;
        loop {
            if self.eat(&TokKind::InterleaveOp) {
                let rhs = self.parse_choice()?;
                acc = ProcessTerm::interleave(acc, rhs);
            } else if self.eat(&TokKind::SyncOpen) {
                let mut sync = BTreeSet::new();
                if self.peek() != Some(&TokKind::SyncClose) {
                    loop {
                        sync.insert(self.expect_ident()?);
                        if !self.eat(&TokKind::Comma) {
                            break;
                        }
                    }
                }
                self.expect(&TokKind::SyncClose)?;
                let rhs = self.parse_choice()?;
                acc = ProcessTerm::sync_parallel(acc, rhs, sync);
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_choice(&mut self) -> Result<ProcessTerm, SpecError> {
        let mut acc = self.parse_seq()?;
        loop {
            if self.eat(&TokKind::ExtChoiceOp) {
                let rhs = self.parse_seq()?;
                acc = ProcessTerm::ext_choice(acc, rhs);
            } else if self.eat(&TokKind::IntChoiceOp) {
                let rhs = self.parse_seq()?;
                acc = ProcessTerm::int_choice(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_seq(&mut self) -> Result<ProcessTerm, SpecError> {
        let mut acc = self.parse_prefix()?;
        while self.eat(&TokKind::Semi) {
            let rhs = self.parse_prefix()?;
            acc = ProcessTerm::seq(acc, rhs);
        }
        Ok(acc)
    }

    fn parse_prefix(&mut self) -> Result<ProcessTerm, SpecError> {
        let line = self.line();
        match self.peek() {
            Some(TokKind::Ident(name)) => {
                let name = name.clone();
                match self.peek2() {
                    Some(TokKind::Bang) | Some(TokKind::Question) => {
                        self.advance();
                        let write = self.advance() == Some(TokKind::Bang);
                        let msg = self.expect_ident()?;
                        self.expect(&TokKind::Arrow)?;
                        let cont = self.parse_prefix()?;
                        let op = if write {
                            ChannelOp::write(name, msg)
                        } else {
                            // Whether the payload is a concrete match or a
                            // binder is resolved against channel
                            // declarations in a later pass.
                            ChannelOp::read(name, MessagePattern::Value(MessageValue::new(msg)))
                        };
                        Ok(ProcessTerm::prefix(Action::Channel(op), cont))
                    }
                    Some(TokKind::Arrow) => {
                        if is_process_name(&name) {
                            return Err(SpecError::Parse {
                                line,
                                message: format!(
                                    "`{name}` names a process; only lowercase events can guard a prefix"
                                ),
                            });
                        }
                        self.advance();
                        self.advance();
                        let cont = self.parse_prefix()?;
                        Ok(ProcessTerm::prefix(Action::Event(EventLabel::new(name)), cont))
                    }
                    _ => {
                        self.advance();
                        match name.as_str() {
                            "SKIP" => Ok(ProcessTerm::Skip),
                            "STOP" => Ok(ProcessTerm::Stop),
                            _ if is_process_name(&name) => Ok(ProcessTerm::named(name)),
                            _ => Err(SpecError::Parse {
                                line,
                                message: format!(
                                    "`{name}` is not a process reference (process names start uppercase)"
                                ),
                            }),
                        }
                    }
                }
            }
            Some(TokKind::LParen) => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect(&TokKind::RParen)?;
                Ok(inner)
            }
            Some(got) => self.err(format!("expected a process expression, found {got}")),
            None => self.err("expected a process expression, found end of file"),
        }
    }
}

/// Rewrites reads in every definition body: a read whose payload is declared
/// for that channel matches exactly that message; an undeclared payload name
/// is a binder accepting anything.
pub fn resolve_read_patterns(defs: &Definitions, channels: &[ChannelDecl]) -> Definitions {
    let mut out = Definitions::new();
    for (name, body) in defs.iter() {
        out.define(name.clone(), resolve_term(body, channels));
    }
    out
}

fn resolve_term(term: &ProcessTerm, channels: &[ChannelDecl]) -> ProcessTerm {
    match term {
        ProcessTerm::Skip | ProcessTerm::Stop | ProcessTerm::NamedRef(_) => term.clone(),
        ProcessTerm::Prefix(Action::Channel(op), p) => {
            let mut op = op.clone();
            if op.direction == crate::csp::ChannelDir::Read {
                if let MessagePattern::Value(v) = &op.message {
                    let declared = channels
                        .iter()
                        .any(|c| c.name == op.channel && c.messages.contains(&v.0));
                    if !declared {
                        op.message = MessagePattern::Binder(v.0.clone());
                    }
                }
            }
            ProcessTerm::prefix(Action::Channel(op), resolve_term(p, channels))
        }
        ProcessTerm::Prefix(a, p) => ProcessTerm::prefix(a.clone(), resolve_term(p, channels)),
        ProcessTerm::Seq(a, b) => ProcessTerm::seq(resolve_term(a, channels), resolve_term(b, channels)),
        ProcessTerm::ExtChoice(a, b) => {
            ProcessTerm::ext_choice(resolve_term(a, channels), resolve_term(b, channels))
        }
        ProcessTerm::IntChoice(a, b) => {
            ProcessTerm::int_choice(resolve_term(a, channels), resolve_term(b, channels))
        }
        ProcessTerm::Interleave(a, b) => {
            ProcessTerm::interleave(resolve_term(a, channels), resolve_term(b, channels))
        }
        ProcessTerm::SyncParallel(a, b, s) => {
            ProcessTerm::sync_parallel(resolve_term(a, channels), resolve_term(b, channels), s.clone())
        }
    }
}
