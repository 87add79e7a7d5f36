//! Online adjudication: Maker graph construction, factor alignment against
//! precedents, Factor-Action-Evidence deduction and the structural RMI gate.

pub mod adjudicate;
pub mod align;
pub mod catalog;
pub mod fae;
pub mod pipeline;
pub mod trace;

use thiserror::Error;

use crate::graph::{CaseId, GraphError, NodeId};
use crate::ingest::ExtractError;
use crate::validate::ValidationReport;

pub use adjudicate::{
    action_status, adjudicate, attach_evidence, render_requests, AdjudicationOutcome, Adjudicator, Assessor,
    AssessorError, ContradictDominates, DecisionRule, Recommendation, StatusValue, PARTIAL_PREFIX,
};
pub use align::{align_factors, harvest_paths, AlignedAnchor, FactorMatcher, HarvestedAction, HarvestedFactor, HarvestedPath, KeyMatcher};
pub use catalog::{ActionCatalog, ActionTemplate, ENTITY_KINDS};
pub use fae::{
    factor_resolution, fae_deduce, AdaptedAction, Adapter, AdapterError, Deduction, Grounder, GroundingResult,
    LexicalGrounder, MatchLevel, SlotAdapter,
};
pub use pipeline::{build_maker_graph, Adjudication, Pipeline, PipelineCause, PipelineError, Stage};
pub use trace::{Trace, TraceStep, TracedCandidate, TracedFactor, TRACE_FORMAT};

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("case `{0}` carries a checker record and is not a query")]
    NotAQuery(CaseId),
    #[error(transparent)]
    Extraction(#[from] ExtractError),
    #[error(transparent)]
    Adapter(AdapterError),
    #[error("case `{0}` has no checker-lane action to adjudicate")]
    EmptyCheckerLane(CaseId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node `{0}` is not a checker-lane action")]
    WrongLane(NodeId),
    #[error("evidence id `{0}` already exists")]
    DuplicateEvidenceId(NodeId),
    #[error("deduced graph is invalid: {}", .0.to_text())]
    InvalidGraph(Box<ValidationReport>),
    #[error(transparent)]
    Graph(GraphError),
    #[error(transparent)]
    Assessor(#[from] AssessorError),
}
