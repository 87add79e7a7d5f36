//! Per-case adjudication sessions backed by append-only event logs.
//!
//! Each session lives in `<kb>/sessions/<case>.jsonl`, one event per line.
//! A line is committed once it is written and synced; a torn final line is
//! dropped on load. Replaying the log rebuilds the session without running
//! the pipeline again, because every adjudication event stores its graph
//! and outcome.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{from_canonical_text, to_canonical_text};
use crate::graph::{CaseGraph, CaseId, Verdict};
use crate::ingest::{CaseRecord, EvidenceItem};
use crate::reasoner::{AdjudicationOutcome, Recommendation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Pending,
    Adjudicated,
    AwaitingInfo,
    Closed,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Pending => "pending",
            SessionState::Adjudicated => "adjudicated",
            SessionState::AwaitingInfo => "awaiting_info",
            SessionState::Closed => "closed",
        }
    }

    fn after(verdict: Verdict) -> SessionState {
        if verdict == Verdict::Rmi {
            SessionState::AwaitingInfo
        } else {
            SessionState::Adjudicated
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedOutcome {
    pub at: u64,
    pub outcome: AdjudicationOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Submitted { at: u64, record: Box<CaseRecord> },
    Adjudicated { at: u64, graph: String, outcome: Box<AdjudicationOutcome> },
    Evidence { at: u64, items: Vec<EvidenceItem> },
    Closed {
        at: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        final_verdict: Option<Verdict>,
    },
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("illegal transition: {event} in state {state}")]
    IllegalTransition { state: &'static str, event: &'static str },
    #[error("corrupt session log {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub case_id: CaseId,
    pub record: CaseRecord,
    pub state: SessionState,
    pub current_graph: Option<CaseGraph>,
    pub outcome_history: Vec<TimedOutcome>,
    /// Evidence supplied through the RMI loop, in arrival order.
    pub responses: Vec<Vec<EvidenceItem>>,
    /// Final human verdict, kept as an evaluation label only.
    pub final_verdict: Option<Verdict>,
}

impl Session {
    pub fn latest(&self) -> Option<&AdjudicationOutcome> {
        self.outcome_history.last().map(|t| &t.outcome)
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.latest().map(|o| o.verdict)
    }

    pub fn recommendations(&self) -> &[Recommendation] {
        self.latest().map(|o| o.recommendations.as_slice()).unwrap_or(&[])
    }

    fn event_name(e: &SessionEvent) -> &'static str {
        match e {
            SessionEvent::Submitted { .. } => "submitted",
            SessionEvent::Adjudicated { .. } => "adjudicated",
            SessionEvent::Evidence { .. } => "evidence",
            SessionEvent::Closed { .. } => "closed",
        }
    }

    /// Apply one event, enforcing the state machine:
    /// pending to adjudicated or awaiting_info by adjudication;
    /// awaiting_info takes evidence, then a re-adjudication;
    /// adjudicated and awaiting_info may be closed.
    pub fn apply(session: Option<Session>, event: SessionEvent) -> Result<Session, SessionError> {
        let illegal = |s: &Option<Session>, e: &SessionEvent| SessionError::IllegalTransition {
            state: s.as_ref().map(|s| s.state.as_str()).unwrap_or("none"),
            event: Self::event_name(e),
        };
        match (session, event) {
            (None, SessionEvent::Submitted { record, .. }) => Ok(Session {
                case_id: record.case_id.clone(),
                record: *record,
                state: SessionState::Pending,
                current_graph: None,
                outcome_history: Vec::new(),
                responses: Vec::new(),
                final_verdict: None,
            }),
            (Some(mut s), SessionEvent::Adjudicated { at, graph, outcome }) => {
                let awaiting_response = s.state == SessionState::AwaitingInfo && s.responses.len() == s.outcome_history.len();
                if s.state != SessionState::Pending && !awaiting_response {
                    return Err(illegal(&Some(s), &SessionEvent::Adjudicated { at, graph, outcome }));
                }
                let g = from_canonical_text(&graph)
                    .map_err(|e| SessionError::Corrupt { path: PathBuf::new(), message: e.to_string() })?;
                s.state = SessionState::after(outcome.verdict);
                s.current_graph = Some(g);
                s.outcome_history.push(TimedOutcome { at, outcome: *outcome });
                Ok(s)
            }
            (Some(mut s), SessionEvent::Evidence { at, items }) => {
                if s.state != SessionState::AwaitingInfo || s.responses.len() != s.outcome_history.len() - 1 {
                    return Err(illegal(&Some(s), &SessionEvent::Evidence { at, items }));
                }
                s.responses.push(items);
                Ok(s)
            }
            (Some(mut s), SessionEvent::Closed { at, final_verdict }) => {
                if !matches!(s.state, SessionState::Adjudicated | SessionState::AwaitingInfo)
                    || s.responses.len() >= s.outcome_history.len()
                {
                    return Err(illegal(&Some(s), &SessionEvent::Closed { at, final_verdict }));
                }
                s.state = SessionState::Closed;
                s.final_verdict = final_verdict;
                Ok(s)
            }
            (s, e) => Err(illegal(&s, &e)),
        }
    }
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Filesystem-safe name for a case id.
fn file_name(case_id: &CaseId) -> String {
    let mut out = String::new();
    for b in case_id.as_str().bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.' && !out.is_empty() {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out.push_str(".jsonl");
    out
}

/// A session plus its open log.
pub struct SessionSlot {
    pub session: Session,
    log: Option<File>,
}

impl SessionSlot {
    /// Apply and persist events as one write. They are committed to disk
    /// before the in-memory session changes.
    pub fn commit(&mut self, events: Vec<SessionEvent>) -> Result<(), SessionError> {
        let mut next = self.session.clone();
        for e in &events {
            next = Session::apply(Some(next), e.clone())?;
        }
        if let Some(f) = &mut self.log {
            append_lines(f, &events)?;
        }
        self.session = next;
        Ok(())
    }
}

fn append_lines(f: &mut File, events: &[SessionEvent]) -> Result<(), SessionError> {
    let mut buf = String::new();
    for e in events {
        buf.push_str(&crate::json::to_canonical(e).map_err(io::Error::other)?);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

/// All sessions, each behind its own lock.
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<CaseId, Arc<Mutex<SessionSlot>>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore { dir: None, sessions: RwLock::new(BTreeMap::new()) }
    }

    /// Open `dir`, replaying every committed session.
    pub fn open(dir: &Path) -> Result<Self, SessionError> {
        fs::create_dir_all(dir)?;
        let mut sessions = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let session = replay(&path)?;
            let log = OpenOptions::new().append(true).open(&path)?;
            sessions.insert(session.case_id.clone(), Arc::new(Mutex::new(SessionSlot { session, log: Some(log) })));
        }
        Ok(SessionStore { dir: Some(dir.to_path_buf()), sessions: RwLock::new(sessions) })
    }

    pub fn get(&self, case_id: &CaseId) -> Option<Arc<Mutex<SessionSlot>>> {
        self.sessions.read().get(case_id).cloned()
    }

    pub fn contains(&self, case_id: &CaseId) -> bool {
        self.sessions.read().contains_key(case_id)
    }

    pub fn ids(&self) -> Vec<CaseId> {
        self.sessions.read().keys().cloned().collect()
    }

    /// Create a session from its first events. Returns `None` when the case
    /// id is already taken.
    pub fn create(&self, events: Vec<SessionEvent>) -> Result<Option<Arc<Mutex<SessionSlot>>>, SessionError> {
        let mut session = None;
        for e in &events {
            session = Some(Session::apply(session, e.clone())?);
        }
        let Some(session) = session else { return Ok(None) };
        let mut map = self.sessions.write();
        if map.contains_key(&session.case_id) {
            return Ok(None);
        }
        let log = match &self.dir {
            Some(dir) => {
                let path = dir.join(file_name(&session.case_id));
                let mut f = OpenOptions::new().create_new(true).append(true).open(&path)?;
                append_lines(&mut f, &events)?;
                Some(f)
            }
            None => None,
        };
        let slot = Arc::new(Mutex::new(SessionSlot { session, log }));
        map.insert(slot.lock().session.case_id.clone(), slot.clone());
        Ok(Some(slot))
    }
}

/// Rebuild a session from its log. A torn final line, and evidence whose
/// re-adjudication never reached the log, are truncated away.
pub fn replay(path: &Path) -> Result<Session, SessionError> {
    let corrupt = |message: String| SessionError::Corrupt { path: path.to_path_buf(), message };
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut session: Option<Session> = None;
    let mut before_evidence: Option<(u64, Session)> = None;
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        let event: SessionEvent = serde_json::from_str(line.trim_end()).map_err(|e| corrupt(e.to_string()))?;
        if matches!(event, SessionEvent::Evidence { .. }) {
            before_evidence = session.clone().map(|s| (good_len, s));
        } else {
            before_evidence = None;
        }
        session = Some(Session::apply(session, event).map_err(|e| corrupt(e.to_string()))?);
        good_len += n as u64;
    }
    if let Some((len, s)) = before_evidence {
        good_len = len;
        session = Some(s);
    }
    if fs::metadata(path)?.len() != good_len {
        OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
    }
    session.ok_or_else(|| corrupt("empty session log".into()))
}

/// Serialize a graph for an adjudication event.
pub fn graph_text(graph: &CaseGraph) -> String {
    to_canonical_text(graph)
}
