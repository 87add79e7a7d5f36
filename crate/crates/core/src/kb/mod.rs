//! The knowledge base `K = {(G_i, z_i)}` of validated historical cases.
//!
//! Entries are indexed by an embedding of their structured summary and
//! retrieved by exact cosine top-K with a second-stage refinement. Many
//! readers may retrieve concurrently; writes are serialized and become
//! visible only after they are committed to disk.

pub mod embed;
pub mod store;
pub mod summary;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use thiserror::Error;

pub use embed::{embed, Embedder, EmbedderError, EmbeddingVector, HashEmbedder, DEFAULT_DIMENSION};
pub use summary::{summarize, CaseSummary, Summarizer, SummarizerError, TemplateSummarizer};

use crate::graph::{CaseGraph, CaseId, EdgeKind, Lane, NodeId, Verdict};
use crate::ingest::{extract_graph, CaseRecord, ExtractError, Extractor};
use crate::validate::{validate, ValidationReport};
use store::Store;

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_K_PRIME: usize = 5;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("case `{0}` is already indexed")]
    DuplicateCaseId(CaseId),
    #[error("case `{case_id}` failed validation: {reason}")]
    ValidationFailed { case_id: CaseId, reason: String, report: Option<ValidationReport> },
    #[error("case `{case_id}`: maker factor `{factor}` is not addressed by any checker structure")]
    UnresolvedMakerFactor { case_id: CaseId, factor: NodeId },
    #[error("case `{0}` has no checker lane")]
    MissingCheckerLane(CaseId),
    #[error("knowledge base is empty")]
    EmptyKnowledgeBase,
    #[error("K must be at least 1")]
    InvalidK,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Summarizer(#[from] SummarizerError),
    #[error(transparent)]
    Embedder(#[from] EmbedderError),
    #[error("refiner failed: {0}")]
    RefinerFailure(String),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("corrupt knowledge base: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KbEntry {
    pub graph: CaseGraph,
    pub summary: CaseSummary,
    pub vector: EmbeddingVector,
    pub timestamp: u64,
}

impl KbEntry {
    pub fn case_id(&self) -> &CaseId {
        self.graph.case_id()
    }

    /// The recorded Checker verdict.
    pub fn verdict(&self) -> Option<Verdict> {
        self.graph.decision(Lane::Checker).map(|d| d.verdict)
    }

    pub fn category(&self) -> &str {
        &self.summary.violation_category
    }
}

/// Verify that an overturned case explains every Maker factor it overturns:
/// each one must carry a conflict edge or be the target of a Checker action.
/// Cases the Checker upheld are returned unchanged.
pub fn build_conflict_edges(graph: &CaseGraph) -> Result<CaseGraph, KbError> {
    if !graph.has_lane(Lane::Checker) {
        return Err(KbError::MissingCheckerLane(graph.case_id().clone()));
    }
    if !graph.is_overturned() {
        return Ok(graph.clone());
    }
    for f in graph.factors().filter(|f| f.origin == Lane::Maker) {
        let extended = graph.out_edges(&f.id, EdgeKind::FactorFactor).next().is_some();
        let verified = graph
            .in_edges(&f.id, EdgeKind::ActionFactor)
            .any(|e| graph.action(&e.from).is_some_and(|a| a.origin.lane() == Lane::Checker));
        if !extended && !verified {
            return Err(KbError::UnresolvedMakerFactor { case_id: graph.case_id().clone(), factor: f.id.clone() });
        }
    }
    Ok(graph.clone())
}

/// Extract, gate, summarize and embed one historical record.
pub fn entry_from_record<X: Extractor + ?Sized>(
    record: &CaseRecord,
    extractor: &X,
    summarizer: &dyn Summarizer,
    embedder: &dyn Embedder,
) -> Result<KbEntry, KbError> {
    let graph = extract_graph(record, extractor)?;
    let graph = build_conflict_edges(&graph)?;
    let summary = summarize(record, summarizer)?;
    let vector = embed(&summary, embedder)?;
    Ok(KbEntry { graph, summary, vector, timestamp: record.timestamp })
}

/// A retrieved entry and its cosine similarity to the query.
#[derive(Clone, Debug)]
pub struct Scored {
    pub entry: Arc<KbEntry>,
    pub similarity: f64,
}

impl Scored {
    pub fn case_id(&self) -> &CaseId {
        self.entry.case_id()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct KbStats {
    pub format: &'static str,
    pub count: usize,
    pub dimension: usize,
    pub overturned: usize,
    pub categories: BTreeMap<String, usize>,
    pub verdicts: BTreeMap<String, usize>,
}

pub struct KnowledgeBase {
    dimension: usize,
    dir: Option<PathBuf>,
    writer: Mutex<Option<Store>>,
    entries: RwLock<Vec<Arc<KbEntry>>>,
    ids: RwLock<BTreeMap<CaseId, usize>>,
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("dimension", &self.dimension)
            .field("dir", &self.dir)
            .field("len", &self.len())
            .finish()
    }
}

impl KnowledgeBase {
    pub fn in_memory(dimension: usize) -> Self {
        KnowledgeBase {
            dimension,
            dir: None,
            writer: Mutex::new(None),
            entries: RwLock::new(Vec::new()),
            ids: RwLock::new(BTreeMap::new()),
        }
    }

    /// Open a `kb-v1` directory, creating it when absent. `dimension` is
    /// required for a new directory and must match an existing manifest.
    pub fn open(dir: &Path, dimension: Option<usize>) -> Result<Self, KbError> {
        let (store, loaded) = Store::open(dir, dimension)?;
        let dimension = store.dimension();
        let mut ids = BTreeMap::new();
        let mut entries = Vec::with_capacity(loaded.len());
        for (i, e) in loaded.into_iter().enumerate() {
            if ids.insert(e.case_id().clone(), i).is_some() {
                return Err(KbError::Corrupt(format!("case `{}` stored twice", e.case_id())));
            }
            entries.push(Arc::new(e));
        }
        Ok(KnowledgeBase {
            dimension,
            dir: Some(dir.to_path_buf()),
            writer: Mutex::new(Some(store)),
            entries: RwLock::new(entries),
            ids: RwLock::new(ids),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, case_id: &CaseId) -> bool {
        self.ids.read().contains_key(case_id)
    }

    pub fn get(&self, case_id: &CaseId) -> Option<Arc<KbEntry>> {
        let idx = *self.ids.read().get(case_id)?;
        self.entries.read().get(idx).cloned()
    }

    /// Consistent snapshot of all entries in insertion order.
    pub fn snapshot(&self) -> Vec<Arc<KbEntry>> {
        self.entries.read().clone()
    }

    fn check_entry(&self, entry: &KbEntry) -> Result<(), KbError> {
        let case_id = entry.case_id().clone();
        if entry.vector.dimension() != self.dimension {
            return Err(KbError::DimensionMismatch { expected: self.dimension, actual: entry.vector.dimension() });
        }
        let report = validate(&entry.graph);
        if !report.pass {
            return Err(KbError::ValidationFailed {
                case_id,
                reason: format!("{} structural violations", report.violations.len()),
                report: Some(report),
            });
        }
        if entry.graph.is_overturned() {
            let has_conflict = entry.graph.conflict_edges().next().is_some();
            let has_verifying = entry.graph.edges().any(|e| {
                e.kind == EdgeKind::ActionFactor
                    && entry.graph.action(&e.from).is_some_and(|a| a.origin.lane() == Lane::Checker)
                    && entry.graph.factor(&e.to).is_some_and(|f| f.origin == Lane::Maker)
            });
            if !has_conflict && !has_verifying {
                return Err(KbError::ValidationFailed {
                    case_id,
                    reason: "overturned case has no conflict edge or verifying action".into(),
                    report: None,
                });
            }
        }
        Ok(())
    }

    /// Append an entry. It is persisted before it becomes retrievable.
    pub fn index_case(&self, entry: KbEntry) -> Result<usize, KbError> {
        let mut writer = self.writer.lock();
        if self.contains(entry.case_id()) {
            return Err(KbError::DuplicateCaseId(entry.case_id().clone()));
        }
        self.check_entry(&entry)?;
        if let Some(store) = writer.as_mut() {
            store.append(&entry)?;
        }
        let id = entry.case_id().clone();
        let mut entries = self.entries.write();
        let mut ids = self.ids.write();
        ids.insert(id, entries.len());
        entries.push(Arc::new(entry));
        Ok(entries.len())
    }

    /// Exact cosine top-K; ties by case id ascending.
    pub fn retrieve(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Scored>, KbError> {
        if k == 0 {
            return Err(KbError::InvalidK);
        }
        if query.dimension() != self.dimension {
            return Err(KbError::DimensionMismatch { expected: self.dimension, actual: query.dimension() });
        }
        let entries = self.entries.read();
        if entries.is_empty() {
            return Err(KbError::EmptyKnowledgeBase);
        }
        let mut scored: Vec<Scored> = entries
            .iter()
            .map(|e| Scored { similarity: query.cosine(&e.vector), entry: Arc::clone(e) })
            .collect();
        drop(entries);
        scored.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.entry.case_id().cmp(b.entry.case_id()))
        });
        scored.truncate(k);
        Ok(scored)
    }

    pub fn stats(&self) -> KbStats {
        let entries = self.entries.read();
        let mut stats = KbStats { format: "kb-stats-v1", count: entries.len(), dimension: self.dimension, ..Default::default() };
        for e in entries.iter() {
            *stats.categories.entry(e.category().to_string()).or_default() += 1;
            let v = e.verdict().map(|v| v.as_str()).unwrap_or("none");
            *stats.verdicts.entry(v.to_string()).or_default() += 1;
            if e.graph.is_overturned() {
                stats.overturned += 1;
            }
        }
        stats
    }
}

/// Second-stage filter over retrieved candidates.
pub trait Refiner: Send + Sync {
    fn refine(&self, candidates: &[Scored], query: &CaseSummary, k_prime: usize) -> Result<Vec<Scored>, KbError>;
}

/// Same category first, then similarity, then case id.
#[derive(Clone, Copy, Debug, Default)]
pub struct CategoryRefiner;

impl Refiner for CategoryRefiner {
    fn refine(&self, candidates: &[Scored], query: &CaseSummary, k_prime: usize) -> Result<Vec<Scored>, KbError> {
        let mut out = candidates.to_vec();
        let same = |s: &Scored| s.entry.category() == query.violation_category;
        out.sort_by(|a, b| {
            same(b)
                .cmp(&same(a))
                .then_with(|| b.similarity.total_cmp(&a.similarity))
                .then_with(|| a.case_id().cmp(b.case_id()))
        });
        out.truncate(k_prime);
        Ok(out)
    }
}

/// Run a refiner and hold it to its contract: at most `k_prime` entries,
/// all drawn from `candidates`.
pub fn refine_candidates(
    candidates: &[Scored],
    query: &CaseSummary,
    refiner: &dyn Refiner,
    k_prime: usize,
) -> Result<Vec<Scored>, KbError> {
    if k_prime == 0 {
        return Err(KbError::InvalidK);
    }
    let out = refiner.refine(candidates, query, k_prime)?;
    if out.len() > k_prime {
        return Err(KbError::RefinerFailure(format!("returned {} entries, limit {k_prime}", out.len())));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &out {
        if !candidates.iter().any(|c| Arc::ptr_eq(&c.entry, &s.entry)) || !seen.insert(s.case_id().clone()) {
            return Err(KbError::RefinerFailure(format!("`{}` is not a distinct candidate", s.case_id())));
        }
    }
    Ok(out)
}
