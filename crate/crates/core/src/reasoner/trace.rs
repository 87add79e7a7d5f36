//! `trace-v1`: the ordered, replayable record of one adjudication.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{CaseId, Criticality, NodeId, Outcome, PathKind, Resolution, Verdict};
use crate::reasoner::MatchLevel;

pub const TRACE_FORMAT: &str = "trace-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracedFactor {
    pub id: NodeId,
    pub key: String,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracedCandidate {
    pub case_id: CaseId,
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TraceStep {
    MakerFactors {
        factors: Vec<TracedFactor>,
    },
    Retrieval {
        candidates: Vec<TracedCandidate>,
    },
    Refinement {
        precedents: Vec<TracedCandidate>,
    },
    NoApplicablePrecedent {
        reason: String,
    },
    Anchor {
        index: usize,
        query_factor: NodeId,
        precedent_case: CaseId,
        precedent_factor: NodeId,
        path_kind: PathKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checker_factor_key: Option<String>,
        checker_actions: Vec<String>,
    },
    Hypothesis {
        query_factor: NodeId,
        path_kind: PathKind,
        factor_key: String,
        outcome: Outcome,
        anchors: Vec<usize>,
        actions: Vec<String>,
        /// (critical verified, verified, partial, anchors); highest wins.
        score: [usize; 4],
        selected: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        factor_node: Option<NodeId>,
    },
    Plan {
        action: NodeId,
        target_factor: NodeId,
        canonical_key: String,
        goal: String,
        criticality: Criticality,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        slots: BTreeMap<String, String>,
        anchors: Vec<usize>,
    },
    Grounding {
        action: NodeId,
        match_level: MatchLevel,
        evidence_ids: Vec<NodeId>,
    },
    EvidenceAttached {
        evidence_ids: Vec<NodeId>,
    },
    FactorResolution {
        factor: NodeId,
        key: String,
        outcome: Outcome,
        resolution: Resolution,
    },
    Verdict {
        verdict: Verdict,
        rule: String,
        recommendations: Vec<NodeId>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub format: String,
    pub case_id: CaseId,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn new(case_id: CaseId) -> Self {
        Trace { format: TRACE_FORMAT.into(), case_id, steps: Vec::new() }
    }

    pub fn push(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    pub fn to_json(&self) -> String {
        crate::json::to_canonical(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Trace> {
        serde_json::from_str(text)
    }

    /// Anchor steps by index.
    pub fn anchors(&self) -> BTreeMap<usize, &TraceStep> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                TraceStep::Anchor { index, .. } => Some((*index, s)),
                _ => None,
            })
            .collect()
    }
}
