//! Tokenizer for design files. Line breaks are significant separators
//! except inside parentheses, so a process body continues across lines only
//! when parenthesized. `#` starts a comment running to the end of the line.

use thiserror::Error;

use super::validate::ValidationError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokKind {
    Ident(String),
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Arrow,
    Equals,
    Colon,
    Comma,
    Semi,
    Bang,
    Question,
    ExtChoiceOp,
    IntChoiceOp,
    InterleaveOp,
    SyncOpen,
    SyncClose,
    Newline,
}

impl std::fmt::Display for TokKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TokKind::Ident(i) => return write!(f, "`{i}`"),
            TokKind::Number(n) => return write!(f, "`{n}`"),
            TokKind::LBrace => "`{`",
            TokKind::RBrace => "`}`",
            TokKind::LParen => "`(`",
            TokKind::RParen => "`)`",
            TokKind::LBracket => "`[`",
            TokKind::RBracket => "`]`",
            TokKind::Arrow => "`->`",
            TokKind::Equals => "`=`",
            TokKind::Colon => "`:`",
            TokKind::Comma => "`,`",
            TokKind::Semi => "`;`",
            TokKind::Bang => "`!`",
            TokKind::Question => "`?`",
            TokKind::ExtChoiceOp => "`[]`",
            TokKind::IntChoiceOp => "`|~|`",
            TokKind::InterleaveOp => "`|||`",
            TokKind::SyncOpen => "`[|`",
            TokKind::SyncClose => "`|]`",
            TokKind::Newline => "end of line",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tok {
    pub kind: TokKind,
    pub line: usize,
}

pub fn lex(src: &str) -> Result<Vec<Tok>, SpecError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut paren_depth = 0usize;
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;

    let is_ident_start = |c: char| c.is_ascii_alphabetic() || c == '_';
    let is_ident_char = |c: char| c.is_ascii_alphanumeric() || c == '_';

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '#' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '\n' => {
                if paren_depth == 0 {
                    toks.push(Tok { kind: TokKind::Newline, line });
                }
                line += 1;
                i += 1;
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    toks.push(Tok { kind: TokKind::Arrow, line });
                    i += 2;
                } else {
                    return Err(SpecError::Parse { line, message: "stray `-` (did you mean `->`?)".into() });
                }
            }
            '|' => {
                if bytes[i..].starts_with(&['|', '|', '|']) {
                    toks.push(Tok { kind: TokKind::InterleaveOp, line });
                    i += 3;
                } else if bytes[i..].starts_with(&['|', '~', '|']) {
                    toks.push(Tok { kind: TokKind::IntChoiceOp, line });
                    i += 3;
                } else if bytes[i..].starts_with(&['|', ']']) {
                    toks.push(Tok { kind: TokKind::SyncClose, line });
                    i += 2;
                } else {
                    return Err(SpecError::Parse { line, message: "stray `|`".into() });
                }
            }
            '[' => {
                if bytes[i..].starts_with(&['[', '|']) {
                    toks.push(Tok { kind: TokKind::SyncOpen, line });
                    i += 2;
                } else if bytes[i..].starts_with(&['[', ']']) {
                    toks.push(Tok { kind: TokKind::ExtChoiceOp, line });
                    i += 2;
                } else {
                    toks.push(Tok { kind: TokKind::LBracket, line });
                    i += 1;
                }
            }
            ']' => {
                toks.push(Tok { kind: TokKind::RBracket, line });
                i += 1;
            }
            '{' => {
                toks.push(Tok { kind: TokKind::LBrace, line });
                i += 1;
            }
            '}' => {
                toks.push(Tok { kind: TokKind::RBrace, line });
                i += 1;
            }
            '(' => {
                paren_depth += 1;
                toks.push(Tok { kind: TokKind::LParen, line });
                i += 1;
            }
            ')' => {
                if paren_depth == 0 {
                    return Err(SpecError::Parse { line, message: "unmatched `)`".into() });
                }
                paren_depth -= 1;
                toks.push(Tok { kind: TokKind::RParen, line });
                i += 1;
            }
            '=' => {
                toks.push(Tok { kind: TokKind::Equals, line });
                i += 1;
            }
            ':' => {
                toks.push(Tok { kind: TokKind::Colon, line });
                i += 1;
            }
            ',' => {
                toks.push(Tok { kind: TokKind::Comma, line });
                i += 1;
            }
            ';' => {
                toks.push(Tok { kind: TokKind::Semi, line });
                i += 1;
            }
            '!' => {
                toks.push(Tok { kind: TokKind::Bang, line });
                i += 1;
            }
            '?' => {
                toks.push(Tok { kind: TokKind::Question, line });
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                toks.push(Tok { kind: TokKind::Number(text), line });
            }
            c if is_ident_start(c) => {
                let start = i;
                while i < bytes.len() && is_ident_char(bytes[i]) {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                toks.push(Tok { kind: TokKind::Ident(text), line });
            }
            other => {
                return Err(SpecError::Parse { line, message: format!("unexpected character `{other}`") });
            }
        }
    }
    if paren_depth > 0 {
        return Err(SpecError::Parse { line, message: "unclosed `(`".into() });
    }
    toks.push(Tok { kind: TokKind::Newline, line });
    Ok(toks)
}
