//! Factor-Action-Evidence deduction: hypothesize Checker factors from
//! precedent paths, plan adapted actions, ground them in query evidence.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    ActionNode, ActionOrigin, ActionStatus, CaseGraph, Criticality, Edge, EvidenceNode, FactorNode, GraphBuilder, Lane,
    Node, NodeId, Outcome, PathKind, Resolution,
};
use crate::ingest::CaseRecord;
use crate::reasoner::align::{AlignedAnchor, HarvestedAction};
use crate::reasoner::catalog::ActionCatalog;
use crate::reasoner::trace::TraceStep;
use crate::reasoner::ReasonError;
use crate::text::{humanize_key, key_tokens, token_set, tokens};
use crate::validate::validate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchLevel {
    Complete,
    Partial,
    Missing,
}

impl MatchLevel {
    pub fn status(self) -> ActionStatus {
        match self {
            MatchLevel::Complete => ActionStatus::Verified,
            MatchLevel::Partial => ActionStatus::Partial,
            MatchLevel::Missing => ActionStatus::Missing,
        }
    }

    fn rank(self) -> u8 {
        match self {
            MatchLevel::Missing => 0,
            MatchLevel::Partial => 1,
            MatchLevel::Complete => 2,
        }
    }

    pub fn max(self, other: MatchLevel) -> MatchLevel {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub action: NodeId,
    pub match_level: MatchLevel,
    pub evidence_ids: Vec<NodeId>,
}

pub trait Grounder: Send + Sync {
    /// Match level of `action` against `evidence`, with the ids that matched.
    fn ground(&self, action: &ActionNode, evidence: &[&EvidenceNode]) -> (MatchLevel, Vec<NodeId>);
}

/// Lexical grounding: the required tokens are the action key's content
/// tokens plus the tokens of its bound entities. One evidence item holding
/// all of them is a complete match; items holding some are partial.
#[derive(Clone, Copy, Debug, Default)]
pub struct LexicalGrounder;

impl LexicalGrounder {
    pub fn required_tokens(action: &ActionNode) -> BTreeSet<String> {
        let mut required = key_tokens(&action.canonical_key);
        for v in action.slots.values() {
            required.extend(tokens(v));
        }
        required
    }
}

impl Grounder for LexicalGrounder {
    fn ground(&self, action: &ActionNode, evidence: &[&EvidenceNode]) -> (MatchLevel, Vec<NodeId>) {
        let required = Self::required_tokens(action);
        if required.is_empty() {
            return (MatchLevel::Missing, Vec::new());
        }
        let mut complete = Vec::new();
        let mut partial = Vec::new();
        for e in evidence {
            let have = token_set(&e.content);
            let hits = required.iter().filter(|t| have.contains(*t)).count();
            if hits == required.len() {
                complete.push(e.id.clone());
            } else if hits > 0 {
                partial.push(e.id.clone());
            }
        }
        if !complete.is_empty() {
            complete.sort();
            (MatchLevel::Complete, complete)
        } else if !partial.is_empty() {
            partial.sort();
            (MatchLevel::Partial, partial)
        } else {
            (MatchLevel::Missing, Vec::new())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("adapter failed: {0}")]
pub struct AdapterError(pub String);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptedAction {
    pub canonical_key: String,
    pub goal: String,
    pub criticality: Criticality,
    pub slots: BTreeMap<String, String>,
}

/// Rewrites a precedent action for the query case.
pub trait Adapter: Send + Sync {
    fn adapt(&self, action: &HarvestedAction, criticality: Criticality, record: &CaseRecord) -> Result<AdaptedAction, AdapterError>;
}

/// Replaces precedent entity bindings with the query's entities.
#[derive(Clone, Debug, Default)]
pub struct SlotAdapter {
    pub catalog: Arc<ActionCatalog>,
}

impl SlotAdapter {
    pub fn new(catalog: Arc<ActionCatalog>) -> Self {
        SlotAdapter { catalog }
    }
}

impl Adapter for SlotAdapter {
    fn adapt(&self, action: &HarvestedAction, criticality: Criticality, record: &CaseRecord) -> Result<AdaptedAction, AdapterError> {
        if action.canonical_key.trim().is_empty() {
            return Err(AdapterError(format!("precedent action `{}` has no key", action.node)));
        }
        let slots = self.catalog.bind_slots(&action.canonical_key, &record.entities);
        let mut goal = humanize_key(&action.canonical_key);
        if !slots.is_empty() {
            let bound: Vec<String> = slots.iter().map(|(k, v)| format!("{k} {v}")).collect();
            goal.push_str(&format!(" ({})", bound.join(", ")));
        }
        Ok(AdaptedAction { canonical_key: action.canonical_key.clone(), goal, criticality, slots })
    }
}

/// Resolution of a factor from the statuses of its Checker-lane actions:
/// actionable when no critical action is unverified and at least one action
/// is verified.
pub fn factor_resolution<'a>(actions: impl IntoIterator<Item = &'a ActionNode>) -> Resolution {
    let mut any_verified = false;
    for a in actions {
        let verified = a.status == ActionStatus::Verified;
        if a.criticality == Criticality::Critical && !verified {
            return Resolution::Unresolved;
        }
        any_verified |= verified;
    }
    if any_verified {
        Resolution::Actionable
    } else {
        Resolution::Unresolved
    }
}

struct PlannedAction {
    adapted: AdaptedAction,
    anchors: Vec<usize>,
    level: MatchLevel,
    evidence_ids: Vec<NodeId>,
}

struct Candidate {
    path_kind: PathKind,
    factor_key: String,
    statement: String,
    outcome: Outcome,
    anchors: Vec<usize>,
    actions: Vec<PlannedAction>,
}

impl Candidate {
    fn score(&self) -> [usize; 4] {
        let verified = |p: &&PlannedAction| p.level == MatchLevel::Complete;
        [
            self.actions.iter().filter(verified).filter(|p| p.adapted.criticality == Criticality::Critical).count(),
            self.actions.iter().filter(verified).count(),
            self.actions.iter().filter(|p| p.level == MatchLevel::Partial).count(),
            self.anchors.len(),
        ]
    }
}

/// Output of deduction: the query graph with its Checker lane populated and
/// the trace steps that produced it.
#[derive(Clone, Debug)]
pub struct Deduction {
    pub graph: CaseGraph,
    pub steps: Vec<TraceStep>,
}

fn nid(s: String) -> NodeId {
    NodeId::new(s).expect("generated ids are non-empty")
}

/// Instantiate Checker reasoning for `maker_graph` from `anchors`.
///
/// For each query Maker factor, anchors are grouped by resolution (the
/// Checker factor they introduce, or direct verification). Each group is a
/// candidate whose actions are the union of the precedent actions, deduped
/// by key, with criticality taken by majority over the anchors documenting
/// the action (ties count as critical). Every candidate is adapted and
/// grounded; the best-grounded candidate per Maker factor is instantiated
/// and the rest are kept in the trace.
pub fn fae_deduce(
    maker_graph: &CaseGraph,
    anchors: &[AlignedAnchor],
    record: &CaseRecord,
    adapter: &dyn Adapter,
    grounder: &dyn Grounder,
) -> Result<Deduction, ReasonError> {
    let evidence: Vec<&EvidenceNode> = maker_graph.evidence().collect();
    let mut builder: GraphBuilder = maker_graph.to_builder();
    let mut steps = Vec::new();
    let (mut next_factor, mut next_action) = (1usize, 1usize);

    let maker_factors: Vec<&FactorNode> = maker_graph.factors().filter(|f| f.origin == Lane::Maker).collect();
    for qf in maker_factors {
        let mut groups: BTreeMap<(PathKind, String, Outcome), (String, Vec<usize>)> = BTreeMap::new();
        for (i, a) in anchors.iter().enumerate().filter(|(_, a)| a.query_factor == qf.id) {
            let (key, statement, outcome) = match &a.path.checker_factor {
                Some(cf) if a.path.kind == PathKind::Extends => (cf.key.clone(), cf.statement.clone(), cf.outcome),
                _ => (qf.key.clone(), qf.statement.clone(), qf.outcome),
            };
            groups.entry((a.path.kind, key, outcome)).or_insert_with(|| (statement, Vec::new())).1.push(i);
        }
        if groups.is_empty() {
            continue;
        }

        let mut candidates = Vec::new();
        for ((path_kind, factor_key, outcome), (statement, members)) in groups {
            // key -> (first seen action, anchors, critical votes, supporting votes)
            let mut union: BTreeMap<String, (&HarvestedAction, Vec<usize>, usize, usize)> = BTreeMap::new();
            for &i in &members {
                for h in &anchors[i].path.checker_actions {
                    let slot = union.entry(h.canonical_key.clone()).or_insert((h, Vec::new(), 0, 0));
                    if !slot.1.contains(&i) {
                        slot.1.push(i);
                        match h.criticality {
                            Criticality::Critical => slot.2 += 1,
                            Criticality::Supporting => slot.3 += 1,
                        }
                    }
                }
            }
            let mut actions = Vec::new();
            for (_, (h, action_anchors, critical, supporting)) in union {
                let criticality = if critical >= supporting { Criticality::Critical } else { Criticality::Supporting };
                let adapted = adapter.adapt(h, criticality, record).map_err(ReasonError::Adapter)?;
                let probe = ActionNode {
                    id: nid("probe".into()),
                    goal: adapted.goal.clone(),
                    canonical_key: adapted.canonical_key.clone(),
                    origin: ActionOrigin::Hypothesized,
                    criticality,
                    status: ActionStatus::Unevaluated,
                    slots: adapted.slots.clone(),
                };
                let (level, evidence_ids) = grounder.ground(&probe, &evidence);
                actions.push(PlannedAction { adapted, anchors: action_anchors, level, evidence_ids });
            }
            candidates.push(Candidate { path_kind, factor_key, statement, outcome, anchors: members, actions });
        }

        let best = candidates
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.score().cmp(&b.score()).then_with(|| ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("at least one candidate");

        for (ci, cand) in candidates.iter().enumerate() {
            let selected = ci == best;
            let mut factor_node = None;
            if selected {
                let target = match cand.path_kind {
                    PathKind::Extends => {
                        let id = nid(format!("q-c-f{next_factor}"));
                        next_factor += 1;
                        builder
                            .add_node(Node::Factor(FactorNode {
                                id: id.clone(),
                                key: cand.factor_key.clone(),
                                statement: cand.statement.clone(),
                                outcome: cand.outcome,
                                origin: Lane::Checker,
                                resolution: Resolution::Unresolved,
                            }))
                            .map_err(ReasonError::Graph)?;
                        builder.link(Edge::conflict(&qf.id, &id, PathKind::Extends)).map_err(ReasonError::Graph)?;
                        id
                    }
                    PathKind::Verifies => qf.id.clone(),
                };
                factor_node = Some(target);
            }
            steps.push(TraceStep::Hypothesis {
                query_factor: qf.id.clone(),
                path_kind: cand.path_kind,
                factor_key: cand.factor_key.clone(),
                outcome: cand.outcome,
                anchors: cand.anchors.clone(),
                actions: cand.actions.iter().map(|p| p.adapted.canonical_key.clone()).collect(),
                score: cand.score(),
                selected,
                factor_node: factor_node.clone(),
            });
            let Some(target) = factor_node else { continue };

            let mut placed = Vec::new();
            for p in &cand.actions {
                let id = nid(format!("q-c-a{next_action}"));
                next_action += 1;
                let node = ActionNode {
                    id: id.clone(),
                    goal: p.adapted.goal.clone(),
                    canonical_key: p.adapted.canonical_key.clone(),
                    origin: ActionOrigin::Hypothesized,
                    criticality: p.adapted.criticality,
                    status: p.level.status(),
                    slots: p.adapted.slots.clone(),
                };
                builder.add_node(Node::Action(node.clone())).map_err(ReasonError::Graph)?;
                builder.link(Edge::action_factor(&id, &target)).map_err(ReasonError::Graph)?;
                if p.level == MatchLevel::Complete {
                    for e in &p.evidence_ids {
                        builder.link(Edge::evidence_action(e, &id)).map_err(ReasonError::Graph)?;
                    }
                }
                steps.push(TraceStep::Plan {
                    action: id.clone(),
                    target_factor: target.clone(),
                    canonical_key: node.canonical_key.clone(),
                    goal: node.goal.clone(),
                    criticality: node.criticality,
                    slots: node.slots.clone(),
                    anchors: p.anchors.clone(),
                });
                steps.push(TraceStep::Grounding {
                    action: id,
                    match_level: p.level,
                    evidence_ids: p.evidence_ids.clone(),
                });
                placed.push(node);
            }
            builder
                .set_factor_resolution(&target, factor_resolution(&placed))
                .map_err(ReasonError::Graph)?;
        }
    }

    let graph = builder.freeze();
    let report = validate(&graph);
    if !report.pass {
        return Err(ReasonError::InvalidGraph(Box::new(report)));
    }
    Ok(Deduction { graph, steps })
}
