//! Factor-level alignment of a query's Maker factors with precedent Maker
//! factors, harvesting the Checker structures that resolved them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{
    ActionNode, CaseGraph, CaseId, Criticality, EdgeKind, FactorNode, Lane, NodeId, Outcome, PathKind, SourceType,
};
use crate::text::normalize_key;

pub trait FactorMatcher: Send + Sync {
    fn matches(&self, query: &FactorNode, precedent: &FactorNode) -> bool;
}

/// Equality of normalized factor keys.
#[derive(Clone, Copy, Debug, Default)]
pub struct KeyMatcher;

impl FactorMatcher for KeyMatcher {
    fn matches(&self, query: &FactorNode, precedent: &FactorNode) -> bool {
        normalize_key(&query.key) == normalize_key(&precedent.key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestedAction {
    pub node: NodeId,
    pub canonical_key: String,
    pub goal: String,
    pub criticality: Criticality,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
}

impl HarvestedAction {
    fn from_node(a: &ActionNode) -> Self {
        HarvestedAction {
            node: a.id.clone(),
            canonical_key: a.canonical_key.clone(),
            goal: a.goal.clone(),
            criticality: a.criticality,
            slots: a.slots.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestedFactor {
    pub node: NodeId,
    pub key: String,
    pub statement: String,
    pub outcome: Outcome,
}

/// A precedent resolution path: Checker actions verifying the Maker factor
/// directly, or a Checker factor (with its actions) overriding it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestedPath {
    pub kind: PathKind,
    pub checker_factor: Option<HarvestedFactor>,
    pub checker_actions: Vec<HarvestedAction>,
    /// Source types of the evidence that grounded the precedent actions.
    pub evidence_templates: Vec<SourceType>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedAnchor {
    pub query_factor: NodeId,
    pub precedent_case: CaseId,
    pub precedent_factor: NodeId,
    pub path: HarvestedPath,
}

fn harvest(graph: &CaseGraph, actions: Vec<&ActionNode>) -> (Vec<HarvestedAction>, Vec<SourceType>) {
    let mut types = BTreeSet::new();
    for a in &actions {
        types.extend(graph.evidence_of(&a.id).iter().map(|e| e.source_type));
    }
    (actions.into_iter().map(HarvestedAction::from_node).collect(), types.into_iter().collect())
}

/// Resolution paths hanging off one precedent Maker factor.
pub fn harvest_paths(graph: &CaseGraph, maker_factor: &NodeId) -> Vec<HarvestedPath> {
    let mut paths = Vec::new();
    let verifying: Vec<&ActionNode> = graph
        .actions_of(maker_factor)
        .into_iter()
        .filter(|a| a.origin.lane() == Lane::Checker)
        .collect();
    if !verifying.is_empty() {
        let (checker_actions, evidence_templates) = harvest(graph, verifying);
        paths.push(HarvestedPath { kind: PathKind::Verifies, checker_factor: None, checker_actions, evidence_templates });
    }
    for edge in graph.out_edges(maker_factor, EdgeKind::FactorFactor) {
        let Some(cf) = graph.factor(&edge.to) else { continue };
        let (checker_actions, evidence_templates) = harvest(graph, graph.actions_of(&cf.id));
        if checker_actions.is_empty() {
            continue;
        }
        paths.push(HarvestedPath {
            kind: PathKind::Extends,
            checker_factor: Some(HarvestedFactor {
                node: cf.id.clone(),
                key: cf.key.clone(),
                statement: cf.statement.clone(),
                outcome: cf.outcome,
            }),
            checker_actions,
            evidence_templates,
        });
    }
    paths
}

/// Anchors for every query Maker factor, in (query factor, precedent order,
/// precedent factor, path) order. Precedent factors with no harvestable
/// Checker structure yield nothing.
pub fn align_factors(maker_graph: &CaseGraph, precedents: &[&CaseGraph], matcher: &dyn FactorMatcher) -> Vec<AlignedAnchor> {
    let mut anchors = Vec::new();
    for qf in maker_graph.factors().filter(|f| f.origin == Lane::Maker) {
        for p in precedents {
            for pf in p.factors().filter(|f| f.origin == Lane::Maker) {
                if !matcher.matches(qf, pf) {
                    continue;
                }
                for path in harvest_paths(p, &pf.id) {
                    anchors.push(AlignedAnchor {
                        query_factor: qf.id.clone(),
                        precedent_case: p.case_id().clone(),
                        precedent_factor: pf.id.clone(),
                        path,
                    });
                }
            }
        }
    }
    anchors
}
