//! The adjudication service: sessions, the RMI response loop, historical
//! ingestion and the `api-v1` HTTP surface.

pub mod api;
pub mod session;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{metrics_from_labels, MetricsReport};
use crate::graph::to_canonical_text;
use crate::graph::{CaseId, Verdict};
use crate::ingest::{parse_case_record, CaseRecord, EvidenceItem, RecordError};
use crate::kb::{KbError, KbStats, KnowledgeBase};
use crate::reasoner::{Adjudication, Pipeline, PipelineError, ReasonError, Recommendation, Stage, Trace};

pub use session::{Session, SessionError, SessionEvent, SessionState, SessionStore, TimedOutcome};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    MalformedRecord(#[from] RecordError),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("case `{0}` already exists")]
    DuplicateCase(CaseId),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("case `{case_id}` is {state}; {action} is not allowed")]
    WrongState { case_id: CaseId, state: &'static str, action: &'static str },
    #[error("evidence id `{0}` already exists")]
    DuplicateEvidenceId(String),
    #[error("pipeline failure at {}: {}", .0.stage, .0.cause)]
    Pipeline(PipelineError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl ServiceError {
    /// HTTP status for the error.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::MalformedRecord(_) | ServiceError::BadRequest(_) => 400,
            ServiceError::UnknownCase(_) => 404,
            ServiceError::DuplicateCase(_) | ServiceError::WrongState { .. } | ServiceError::DuplicateEvidenceId(_) => 409,
            ServiceError::Kb(KbError::DuplicateCaseId(_)) => 409,
            ServiceError::Kb(
                KbError::ValidationFailed { .. }
                | KbError::UnresolvedMakerFactor { .. }
                | KbError::MissingCheckerLane(_)
                | KbError::Extract(_),
            ) => 400,
            _ => 500,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            ServiceError::Pipeline(e) => Some(e.stage),
            _ => None,
        }
    }

    fn from_pipeline(e: PipelineError) -> Self {
        use crate::reasoner::PipelineCause::Reason;
        match &e.cause {
            Reason(ReasonError::DuplicateEvidenceId(id)) => ServiceError::DuplicateEvidenceId(id.to_string()),
            Reason(ReasonError::NotAQuery(_)) => ServiceError::BadRequest(e.cause.to_string()),
            Reason(ReasonError::Extraction(_)) if e.stage == Stage::BuildMakerGraph => {
                ServiceError::BadRequest(e.cause.to_string())
            }
            _ => ServiceError::Pipeline(e),
        }
    }
}

/// Summary row for the session queue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub case_id: CaseId,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub outcomes: usize,
    pub updated_at: u64,
}

/// One entry of a session's outcome history, without the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub at: u64,
    pub verdict: Verdict,
    pub rule: String,
    pub recommendations: Vec<Recommendation>,
    pub no_applicable_precedent: bool,
}

/// Full session payload: state, latest verdict, history, graph and trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub format: String,
    pub case_id: CaseId,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub recommendations: Vec<Recommendation>,
    pub outcome_history: Vec<HistoryEntry>,
    /// `eafd-graph-v1` text of the current graph.
    pub graph: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
    pub record: CaseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_verdict: Option<Verdict>,
}

pub const API_FORMAT: &str = "api-v1";

impl SessionView {
    pub fn of(s: &Session) -> Self {
        SessionView {
            format: API_FORMAT.into(),
            case_id: s.case_id.clone(),
            state: s.state,
            verdict: s.verdict(),
            recommendations: s.recommendations().to_vec(),
            outcome_history: s
                .outcome_history
                .iter()
                .map(|t| HistoryEntry {
                    at: t.at,
                    verdict: t.outcome.verdict,
                    rule: t.outcome.rule.as_str().into(),
                    recommendations: t.outcome.recommendations.clone(),
                    no_applicable_precedent: t.outcome.no_applicable_precedent,
                })
                .collect(),
            graph: s.current_graph.as_ref().map(to_canonical_text).unwrap_or_default(),
            trace: s.latest().map(|o| o.trace.clone()),
            record: s.record.clone(),
            final_verdict: s.final_verdict,
        }
    }
}

/// Pipeline plus session store.
pub struct Service {
    pub pipeline: Pipeline,
    pub sessions: SessionStore,
    pub console_dir: Option<PathBuf>,
}

fn adjudicated_event(adj: &Adjudication) -> SessionEvent {
    SessionEvent::Adjudicated {
        at: session::now_millis(),
        graph: to_canonical_text(&adj.graph),
        outcome: Box::new(adj.outcome.clone()),
    }
}

impl Service {
    pub fn new(pipeline: Pipeline, sessions: SessionStore) -> Self {
        Service { pipeline, sessions, console_dir: None }
    }

    /// Service over a persistent knowledge base at `dir`, with sessions in
    /// `dir/sessions`.
    pub fn open(dir: &Path, dimension: Option<usize>) -> Result<Self, ServiceError> {
        let kb = KnowledgeBase::open(dir, dimension)?;
        let sessions = SessionStore::open(&dir.join("sessions"))?;
        Ok(Service::new(Pipeline::new(Arc::new(kb)), sessions))
    }

    pub fn in_memory(kb: Arc<KnowledgeBase>) -> Self {
        Service::new(Pipeline::new(kb), SessionStore::in_memory())
    }

    pub fn with_console_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.console_dir = dir;
        self
    }

    /// Run the pipeline on a new query record and open its session.
    pub fn submit_case(&self, bytes: &[u8]) -> Result<SessionView, ServiceError> {
        let record = parse_case_record(bytes)?;
        if !record.is_query() {
            return Err(ServiceError::BadRequest("submitted cases must not carry a checker record".into()));
        }
        if self.sessions.contains(&record.case_id) {
            return Err(ServiceError::DuplicateCase(record.case_id));
        }
        let adj = self.pipeline.adjudicate(&record).map_err(ServiceError::from_pipeline)?;
        let events = vec![
            SessionEvent::Submitted { at: session::now_millis(), record: Box::new(record.clone()) },
            adjudicated_event(&adj),
        ];
        let slot = self.sessions.create(events)?.ok_or(ServiceError::DuplicateCase(record.case_id))?;
        let view = SessionView::of(&slot.lock().session);
        Ok(view)
    }

    fn slot(&self, case_id: &str) -> Result<Arc<parking_lot::Mutex<session::SessionSlot>>, ServiceError> {
        let id = CaseId::new(case_id).map_err(|_| ServiceError::UnknownCase(case_id.into()))?;
        self.sessions.get(&id).ok_or_else(|| ServiceError::UnknownCase(case_id.into()))
    }

    /// Attach evidence to a session awaiting information and re-adjudicate.
    /// Calls on one case are serialized by its lock.
    pub fn respond_rmi(&self, case_id: &str, items: Vec<EvidenceItem>) -> Result<SessionView, ServiceError> {
        if items.is_empty() {
            return Err(ServiceError::BadRequest("no evidence items supplied".into()));
        }
        let slot = self.slot(case_id)?;
        let mut guard = slot.lock();
        let s = &guard.session;
        if s.state != SessionState::AwaitingInfo {
            return Err(ServiceError::WrongState { case_id: s.case_id.clone(), state: s.state.as_str(), action: "responding" });
        }
        let nodes = items
            .iter()
            .map(|i| i.to_node().map_err(|e| ServiceError::BadRequest(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, n) in items.iter().zip(&nodes) {
            if n.content.trim().is_empty() || n.source_ref.trim().is_empty() {
                return Err(ServiceError::BadRequest(format!("evidence `{}` needs content and a source_ref", i.id)));
            }
        }
        let previous = Adjudication {
            graph: s.current_graph.clone().expect("adjudicated sessions hold a graph"),
            outcome: s.latest().expect("adjudicated sessions hold an outcome").clone(),
        };
        let adj = self.pipeline.respond(&previous, nodes).map_err(ServiceError::from_pipeline)?;
        let events = vec![SessionEvent::Evidence { at: session::now_millis(), items }, adjudicated_event(&adj)];
        guard.commit(events)?;
        Ok(SessionView::of(&guard.session))
    }

    pub fn get_session(&self, case_id: &str) -> Result<SessionView, ServiceError> {
        Ok(SessionView::of(&self.slot(case_id)?.lock().session))
    }

    pub fn list_sessions(&self) -> Vec<SessionSummary> {
        self.sessions
            .ids()
            .into_iter()
            .filter_map(|id| self.sessions.get(&id))
            .map(|slot| {
                let s = &slot.lock().session;
                SessionSummary {
                    case_id: s.case_id.clone(),
                    state: s.state,
                    verdict: s.verdict(),
                    outcomes: s.outcome_history.len(),
                    updated_at: s.outcome_history.last().map(|t| t.at).unwrap_or(0),
                }
            })
            .collect()
    }

    /// Close a session, optionally recording the final human verdict as an
    /// evaluation label.
    pub fn close(&self, case_id: &str, final_verdict: Option<Verdict>) -> Result<SessionView, ServiceError> {
        let slot = self.slot(case_id)?;
        let mut guard = slot.lock();
        let state = guard.session.state;
        if !matches!(state, SessionState::Adjudicated | SessionState::AwaitingInfo) {
            return Err(ServiceError::WrongState {
                case_id: guard.session.case_id.clone(),
                state: state.as_str(),
                action: "closing",
            });
        }
        guard.commit(vec![SessionEvent::Closed { at: session::now_millis(), final_verdict }])?;
        Ok(SessionView::of(&guard.session))
    }

    /// Index a historical record into the knowledge base.
    pub fn ingest_historical(&self, bytes: &[u8]) -> Result<(CaseId, usize), ServiceError> {
        let record = parse_case_record(bytes)?;
        if record.is_query() {
            return Err(ServiceError::BadRequest("historical cases need a checker record".into()));
        }
        self.pipeline.ingest(&record).map_err(|e| match e.cause {
            crate::reasoner::PipelineCause::Kb(k) => ServiceError::Kb(k),
            other => ServiceError::Pipeline(PipelineError { stage: e.stage, cause: other }),
        })?;
        Ok((record.case_id, self.pipeline.kb.len()))
    }

    pub fn kb_stats(&self) -> KbStats {
        self.pipeline.kb.stats()
    }

    /// Metrics of the latest system verdict against recorded final
    /// verdicts, over closed sessions that carry one.
    pub fn metrics(&self) -> MetricsReport {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        let mut stream = Vec::new();
        for id in self.sessions.ids() {
            let Some(slot) = self.sessions.get(&id) else { continue };
            let s = &slot.lock().session;
            if let (Some(label), Some(v)) = (s.final_verdict, s.verdict()) {
                truth.push(label);
                pred.push(v);
                stream.push((s.record.timestamp, label == v));
            }
        }
        let mut report = metrics_from_labels(&truth, &pred).expect("equal lengths");
        report.cumulative_alignment = crate::eval::cumulative_alignment(&stream);
        report
    }
}
