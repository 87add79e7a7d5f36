//! Machine-checkable reviewer annotations embedded in analysis text.
//!
//! ```text
//! ACTION[key|criticality]{e1,e2,?e7} => FACTOR[key|outcome] ~> CONFLICTS[maker_factor_key|path_kind]
//! ```
//!
//! `|criticality` is optional (defaults to supporting) and so is the
//! `~> CONFLICTS[...]` tail. An evidence reference prefixed with `?` was
//! obtained through a channel absent from the case file, such as an internal
//! tool lookup. Text outside annotations is ignored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Criticality, Outcome, PathKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub withheld: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRef {
    pub maker_factor_key: String,
    pub path_kind: PathKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedStatement {
    pub action_key: String,
    pub criticality: Option<Criticality>,
    pub evidence: Vec<EvidenceRef>,
    pub factor_key: String,
    pub factor_outcome: Outcome,
    pub conflict: Option<ConflictRef>,
}

impl AnnotatedStatement {
    pub fn criticality_or_default(&self) -> Criticality {
        self.criticality.unwrap_or_default()
    }

    pub fn evidence_ids(&self) -> impl Iterator<Item = &str> {
        self.evidence.iter().map(|r| r.id.as_str())
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AnnotatedStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ACTION[{}", self.action_key)?;
        match self.criticality {
            Some(Criticality::Critical) => write!(f, "|critical")?,
            Some(Criticality::Supporting) => write!(f, "|supporting")?,
            None => {}
        }
        write!(f, "]{{")?;
        for (i, r) in self.evidence.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if r.withheld {
                write!(f, "?")?;
            }
            write!(f, "{}", r.id)?;
        }
        write!(f, "}} => FACTOR[{}|{}]", self.factor_key, self.factor_outcome.as_str())?;
        if let Some(c) = &self.conflict {
            write!(f, " ~> CONFLICTS[{}|{}]", c.maker_factor_key, c.path_kind.as_str())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("annotation syntax error at line {line}, column {column}: {message}")]
pub struct AnnotationError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn starts_with(&self, lit: &str) -> bool {
        lit.chars().enumerate().all(|(i, c)| self.chars.get(self.pos + i) == Some(&c))
    }

    fn error(&self, message: impl Into<String>) -> AnnotationError {
        let (mut line, mut column) = (1, 1);
        for c in self.chars.iter().take(self.pos) {
            if *c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        let _ = self.src;
        AnnotationError { line, column, message: message.into() }
    }

    fn expect(&mut self, lit: &str) -> Result<(), AnnotationError> {
        if self.starts_with(lit) {
            self.pos += lit.chars().count();
            Ok(())
        } else {
            Err(self.error(format!("expected `{lit}`")))
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    /// Read up to (not including) one of `stops`; fails at end of input or on
    /// a structural character that would indicate an unterminated bracket.
    fn field(&mut self, stops: &[char], what: &str) -> Result<String, AnnotationError> {
        let start = self.pos;
        loop {
            match self.peek() {
                None => return Err(self.error(format!("unterminated {what}"))),
                Some(c) if stops.contains(&c) => break,
                Some(c) if "[]{}\n".contains(c) => return Err(self.error(format!("unterminated {what}"))),
                Some(_) => self.pos += 1,
            }
        }
        let value: String = self.chars[start..self.pos].iter().collect::<String>().trim().to_string();
        if value.is_empty() {
            self.pos = start;
            return Err(self.error(format!("empty {what}")));
        }
        Ok(value)
    }
}

fn parse_statement(cur: &mut Cursor<'_>) -> Result<AnnotatedStatement, AnnotationError> {
    cur.expect("ACTION[")?;
    let action_key = cur.field(&['|', ']'], "action key")?;
    let criticality = if cur.peek() == Some('|') {
        cur.pos += 1;
        let word_at = cur.pos;
        let word = cur.field(&[']'], "criticality")?;
        Some(match word.as_str() {
            "critical" => Criticality::Critical,
            "supporting" => Criticality::Supporting,
            _ => {
                cur.pos = word_at;
                return Err(cur.error(format!("unknown criticality `{word}`")));
            }
        })
    } else {
        None
    };
    cur.expect("]")?;
    cur.skip_ws();
    cur.expect("{")?;
    let mut evidence = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some('}') {
        cur.pos += 1;
    } else {
        loop {
            cur.skip_ws();
            let withheld = cur.peek() == Some('?');
            if withheld {
                cur.pos += 1;
            }
            let id = cur.field(&[',', '}'], "evidence id")?;
            evidence.push(EvidenceRef { id, withheld });
            match cur.peek() {
                Some(',') => cur.pos += 1,
                Some('}') => {
                    cur.pos += 1;
                    break;
                }
                _ => return Err(cur.error("unterminated evidence list")),
            }
        }
    }
    cur.skip_ws();
    cur.expect("=>")?;
    cur.skip_ws();
    cur.expect("FACTOR[")?;
    let factor_key = cur.field(&['|'], "factor key")?;
    cur.expect("|")?;
    let word_at = cur.pos;
    let word = cur.field(&[']'], "factor outcome")?;
    let factor_outcome = match word.as_str() {
        "support" => Outcome::Support,
        "contradict" => Outcome::Contradict,
        _ => {
            cur.pos = word_at;
            return Err(cur.error(format!("unknown outcome `{word}`")));
        }
    };
    cur.expect("]")?;

    let save = cur.pos;
    cur.skip_ws();
    let conflict = if cur.starts_with("~>") {
        cur.pos += 2;
        cur.skip_ws();
        cur.expect("CONFLICTS[")?;
        let maker_factor_key = cur.field(&['|'], "conflict target")?;
        cur.expect("|")?;
        let word_at = cur.pos;
        let word = cur.field(&[']'], "path kind")?;
        let path_kind = match word.as_str() {
            "verifies" => PathKind::Verifies,
            "extends" => PathKind::Extends,
            _ => {
                cur.pos = word_at;
                return Err(cur.error(format!("unknown path kind `{word}`")));
            }
        };
        cur.expect("]")?;
        Some(ConflictRef { maker_factor_key, path_kind })
    } else {
        cur.pos = save;
        None
    };

    Ok(AnnotatedStatement { action_key, criticality, evidence, factor_key, factor_outcome, conflict })
}

/// Extract every annotated statement from `analysis`, in order.
pub fn parse_annotations(analysis: &str) -> Result<Vec<AnnotatedStatement>, AnnotationError> {
    let mut cur = Cursor::new(analysis);
    let mut out = Vec::new();
    while cur.pos < cur.chars.len() {
        if cur.starts_with("ACTION[") {
            out.push(parse_statement(&mut cur)?);
        } else {
            cur.pos += 1;
        }
    }
    Ok(out)
}

/// Analysis text with annotations removed and whitespace collapsed.
pub fn strip_annotations(analysis: &str) -> String {
    let mut cur = Cursor::new(analysis);
    let mut prose = String::new();
    while cur.pos < cur.chars.len() {
        if cur.starts_with("ACTION[") {
            let start = cur.pos;
            if parse_statement(&mut cur).is_err() {
                cur.pos = start + 1;
                prose.push('A');
            }
            prose.push(' ');
        } else {
            prose.push(cur.chars[cur.pos]);
            cur.pos += 1;
        }
    }
    prose.split_whitespace().collect::<Vec<_>>().join(" ")
}
