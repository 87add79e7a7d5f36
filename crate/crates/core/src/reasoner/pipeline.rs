//! The end-to-end online pipeline over a knowledge base.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CaseGraph, EvidenceNode, Lane, Verdict};
use crate::ingest::{extract_graph, AnnotationExtractor, CaseRecord, Extractor};
use crate::kb::{
    embed, entry_from_record, refine_candidates, summarize, CategoryRefiner, Embedder, HashEmbedder, KbError,
    KnowledgeBase, Refiner, Summarizer, TemplateSummarizer, DEFAULT_K, DEFAULT_K_PRIME,
};
use crate::reasoner::adjudicate::{attach_evidence, AdjudicationOutcome, Adjudicator, DecisionRule};
use crate::reasoner::align::{align_factors, FactorMatcher, KeyMatcher};
use crate::reasoner::catalog::ActionCatalog;
use crate::reasoner::fae::{fae_deduce, Adapter, Grounder, LexicalGrounder, SlotAdapter};
use crate::reasoner::trace::{Trace, TraceStep, TracedCandidate, TracedFactor};
use crate::reasoner::ReasonError;

/// Extract the Maker lane of a query record.
pub fn build_maker_graph<X: Extractor + ?Sized>(record: &CaseRecord, extractor: &X) -> Result<CaseGraph, ReasonError> {
    if !record.is_query() {
        return Err(ReasonError::NotAQuery(record.case_id.clone()));
    }
    Ok(extract_graph(record, extractor)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    BuildMakerGraph,
    Summarize,
    Retrieve,
    Refine,
    Deduce,
    Adjudicate,
    AttachEvidence,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::BuildMakerGraph => "build_maker_graph",
            Stage::Summarize => "summarize",
            Stage::Retrieve => "retrieve",
            Stage::Refine => "refine",
            Stage::Deduce => "deduce",
            Stage::Adjudicate => "adjudicate",
            Stage::AttachEvidence => "attach_evidence",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineCause {
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Error)]
#[error("{stage}: {cause}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub cause: PipelineCause,
}

impl PipelineError {
    fn at(stage: Stage) -> impl FnOnce(PipelineCause) -> PipelineError {
        move |cause| PipelineError { stage, cause }
    }
}

fn reason(stage: Stage) -> impl FnOnce(ReasonError) -> PipelineError {
    move |e| PipelineError { stage, cause: e.into() }
}

fn kb(stage: Stage) -> impl FnOnce(KbError) -> PipelineError {
    move |e| PipelineError { stage, cause: e.into() }
}

/// A case graph together with its current adjudication.
#[derive(Clone, Debug)]
pub struct Adjudication {
    pub graph: CaseGraph,
    pub outcome: AdjudicationOutcome,
}

impl Adjudication {
    pub fn verdict(&self) -> Verdict {
        self.outcome.verdict
    }
}

/// Retrieval, alignment, deduction and adjudication over a shared
/// knowledge base. Components are swappable; defaults are the deterministic
/// reference implementations.
#[derive(Clone)]
pub struct Pipeline {
    pub kb: Arc<KnowledgeBase>,
    pub extractor: Arc<dyn Extractor + Send + Sync>,
    pub summarizer: Arc<dyn Summarizer>,
    pub embedder: Arc<dyn Embedder>,
    pub refiner: Arc<dyn Refiner>,
    pub matcher: Arc<dyn FactorMatcher>,
    pub adapter: Arc<dyn Adapter>,
    pub grounder: Arc<dyn Grounder>,
    pub adjudicator: Adjudicator,
    pub k: usize,
    pub k_prime: usize,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline").field("kb_len", &self.kb.len()).field("k", &self.k).field("k_prime", &self.k_prime).finish()
    }
}

impl Pipeline {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        let catalog = Arc::new(ActionCatalog::default());
        let dimension = kb.dimension();
        Pipeline {
            kb,
            extractor: Arc::new(AnnotationExtractor),
            summarizer: Arc::new(TemplateSummarizer),
            embedder: Arc::new(HashEmbedder::new(dimension)),
            refiner: Arc::new(CategoryRefiner),
            matcher: Arc::new(KeyMatcher),
            adapter: Arc::new(SlotAdapter::new(catalog.clone())),
            grounder: Arc::new(LexicalGrounder),
            adjudicator: Adjudicator { catalog, ..Adjudicator::default() },
            k: DEFAULT_K,
            k_prime: DEFAULT_K_PRIME,
        }
    }

    pub fn with_k(mut self, k: usize, k_prime: usize) -> Self {
        self.k = k;
        self.k_prime = k_prime;
        self
    }

    /// Extract, summarize, embed and index a historical record.
    pub fn ingest(&self, record: &CaseRecord) -> Result<usize, PipelineError> {
        let entry = entry_from_record(record, self.extractor.as_ref(), self.summarizer.as_ref(), self.embedder.as_ref())
            .map_err(kb(Stage::Ingest))?;
        self.kb.index_case(entry).map_err(kb(Stage::Ingest))
    }

    fn no_precedent(graph: CaseGraph, mut trace: Trace, reason: &str) -> Adjudication {
        trace.push(TraceStep::NoApplicablePrecedent { reason: reason.into() });
        trace.push(TraceStep::Verdict {
            verdict: Verdict::Rmi,
            rule: DecisionRule::NoApplicablePrecedent.as_str().into(),
            recommendations: Vec::new(),
        });
        Adjudication {
            graph,
            outcome: AdjudicationOutcome {
                verdict: Verdict::Rmi,
                rule: DecisionRule::NoApplicablePrecedent,
                recommendations: Vec::new(),
                no_applicable_precedent: true,
                trace,
            },
        }
    }

    /// Adjudicate a query record from scratch.
    pub fn adjudicate(&self, record: &CaseRecord) -> Result<Adjudication, PipelineError> {
        let maker = build_maker_graph(record, self.extractor.as_ref()).map_err(reason(Stage::BuildMakerGraph))?;
        let mut trace = Trace::new(record.case_id.clone());
        trace.push(TraceStep::MakerFactors {
            factors: maker
                .factors()
                .filter(|f| f.origin == Lane::Maker)
                .map(|f| TracedFactor { id: f.id.clone(), key: f.key.clone(), outcome: f.outcome })
                .collect(),
        });

        let summary = summarize(record, self.summarizer.as_ref())
            .map_err(|e| PipelineError::at(Stage::Summarize)(KbError::from(e).into()))?;
        let vector = embed(&summary, self.embedder.as_ref()).map_err(|e| kb(Stage::Summarize)(e.into()))?;
        let candidates = match self.kb.retrieve(&vector, self.k) {
            Ok(c) => c,
            Err(KbError::EmptyKnowledgeBase) => return Ok(Self::no_precedent(maker, trace, "knowledge base is empty")),
            Err(e) => return Err(kb(Stage::Retrieve)(e)),
        };
        let traced = |s: &crate::kb::Scored| TracedCandidate { case_id: s.case_id().clone(), similarity: s.similarity };
        trace.push(TraceStep::Retrieval { candidates: candidates.iter().map(traced).collect() });
        let refined =
            refine_candidates(&candidates, &summary, self.refiner.as_ref(), self.k_prime).map_err(kb(Stage::Refine))?;
        trace.push(TraceStep::Refinement { precedents: refined.iter().map(traced).collect() });
        if refined.is_empty() {
            return Ok(Self::no_precedent(maker, trace, "refinement kept no precedent"));
        }

        let graphs: Vec<&CaseGraph> = refined.iter().map(|s| &s.entry.graph).collect();
        let anchors = align_factors(&maker, &graphs, self.matcher.as_ref());
        for (index, a) in anchors.iter().enumerate() {
            trace.push(TraceStep::Anchor {
                index,
                query_factor: a.query_factor.clone(),
                precedent_case: a.precedent_case.clone(),
                precedent_factor: a.precedent_factor.clone(),
                path_kind: a.path.kind,
                checker_factor_key: a.path.checker_factor.as_ref().map(|f| f.key.clone()),
                checker_actions: a.path.checker_actions.iter().map(|h| h.canonical_key.clone()).collect(),
            });
        }
        if anchors.is_empty() {
            return Ok(Self::no_precedent(maker, trace, "no precedent factor aligns with the maker factors"));
        }

        let deduction = fae_deduce(&maker, &anchors, record, self.adapter.as_ref(), self.grounder.as_ref())
            .map_err(reason(Stage::Deduce))?;
        for s in deduction.steps {
            trace.push(s);
        }
        self.finish(deduction.graph, trace)
    }

    fn finish(&self, graph: CaseGraph, mut trace: Trace) -> Result<Adjudication, PipelineError> {
        let mut outcome = self.adjudicator.adjudicate(&graph).map_err(reason(Stage::Adjudicate))?;
        trace.steps.append(&mut outcome.trace.steps);
        outcome.trace = trace;
        Ok(Adjudication { graph, outcome })
    }

    /// Respond to an information request: attach the new evidence,
    /// re-ground and re-adjudicate. The trace is extended, not replaced.
    pub fn respond(&self, previous: &Adjudication, evidence: Vec<EvidenceNode>) -> Result<Adjudication, PipelineError> {
        let ids = evidence.iter().map(|e| e.id.clone()).collect();
        let (graph, groundings) =
            attach_evidence(&previous.graph, evidence, self.grounder.as_ref()).map_err(reason(Stage::AttachEvidence))?;
        let mut trace = previous.outcome.trace.clone();
        trace.push(TraceStep::EvidenceAttached { evidence_ids: ids });
        for g in groundings {
            trace.push(TraceStep::Grounding { action: g.action, match_level: g.match_level, evidence_ids: g.evidence_ids });
        }
        if previous.outcome.no_applicable_precedent {
            return Ok(Self::no_precedent(graph, trace, "no applicable precedent"));
        }
        self.finish(graph, trace)
    }
}
