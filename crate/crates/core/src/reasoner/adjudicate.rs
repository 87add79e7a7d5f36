//! Action status, factor resolution and the decision table with its
//! structural RMI gate.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    ActionNode, ActionOrigin, ActionStatus, CaseGraph, Criticality, Edge, EdgeKind, EvidenceNode, FactorNode, Lane,
    Node, NodeId, Outcome, Resolution, Verdict,
};
use crate::reasoner::catalog::ActionCatalog;
use crate::reasoner::fae::{factor_resolution, Grounder, GroundingResult, MatchLevel};
use crate::reasoner::trace::{Trace, TraceStep};
use crate::reasoner::ReasonError;

/// Prefix of a request for an action whose evidence matched only partially.
pub const PARTIAL_PREFIX: &str = "Inconclusive evidence, please supplement: ";

/// The binary status function used for decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusValue {
    Verified,
    Missing,
}

fn binary_status(graph: &CaseGraph, a: &ActionNode) -> StatusValue {
    let grounded = graph.in_edges(&a.id, EdgeKind::EvidenceAction).next().is_some();
    match a.status {
        ActionStatus::Verified if grounded => StatusValue::Verified,
        // Historical Checker actions carry their documented evidence edges.
        ActionStatus::Unevaluated if grounded => StatusValue::Verified,
        _ => StatusValue::Missing,
    }
}

/// Verified iff the action's grounding was complete (it holds an evidence
/// edge and was not downgraded); partial and missing both read as missing.
pub fn action_status(graph: &CaseGraph, action: &NodeId) -> Result<StatusValue, ReasonError> {
    let node = graph.node(action).ok_or_else(|| ReasonError::UnknownNode(action.clone()))?;
    match node {
        Node::Action(a) if a.origin.lane() == Lane::Checker => Ok(binary_status(graph, a)),
        _ => Err(ReasonError::WrongLane(action.clone())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// A critical action is missing.
    MissingCritical,
    /// An actionable factor contradicts the approval.
    ActionableContradict,
    /// Actionable factors support approval.
    ActionableSupport,
    /// No factor is actionable.
    NoActionableFactor,
    /// The holistic assessor decided among actionable factors.
    Assessor,
    /// Retrieval or alignment produced nothing to reason from.
    NoApplicablePrecedent,
}

impl DecisionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionRule::MissingCritical => "missing_critical",
            DecisionRule::ActionableContradict => "actionable_contradict",
            DecisionRule::ActionableSupport => "actionable_support",
            DecisionRule::NoActionableFactor => "no_actionable_factor",
            DecisionRule::Assessor => "assessor",
            DecisionRule::NoApplicablePrecedent => "no_applicable_precedent",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub action: NodeId,
    pub canonical_key: String,
    pub goal: String,
    pub criticality: Criticality,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
    pub match_level: MatchLevel,
    pub request_text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationOutcome {
    pub verdict: Verdict,
    pub rule: DecisionRule,
    pub recommendations: Vec<Recommendation>,
    #[serde(default)]
    pub no_applicable_precedent: bool,
    pub trace: Trace,
}

impl AdjudicationOutcome {
    pub fn recommended_ids(&self) -> BTreeSet<NodeId> {
        self.recommendations.iter().map(|r| r.action.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("assessor failed: {0}")]
pub struct AssessorError(pub String);

/// Holistic assessment over actionable factors. It decides between approve
/// and reject only; the RMI gate runs before it and cannot be overridden.
pub trait Assessor: Send + Sync {
    fn assess(&self, graph: &CaseGraph, actionable: &[&FactorNode]) -> Result<(Verdict, DecisionRule), AssessorError>;
}

/// Any actionable contradicting factor forces reject.
#[derive(Clone, Copy, Debug, Default)]
pub struct ContradictDominates;

impl Assessor for ContradictDominates {
    fn assess(&self, _graph: &CaseGraph, actionable: &[&FactorNode]) -> Result<(Verdict, DecisionRule), AssessorError> {
        if actionable.iter().any(|f| f.outcome == Outcome::Contradict) {
            Ok((Verdict::Reject, DecisionRule::ActionableContradict))
        } else {
            Ok((Verdict::Approve, DecisionRule::ActionableSupport))
        }
    }
}

/// Factors the Checker lane speaks to, each with its Checker-lane actions.
fn evaluated_factors(graph: &CaseGraph) -> Vec<(&FactorNode, Vec<&ActionNode>)> {
    graph
        .factors()
        .filter_map(|f| {
            let actions: Vec<&ActionNode> =
                graph.actions_of(&f.id).into_iter().filter(|a| a.origin.lane() == Lane::Checker).collect();
            (f.origin == Lane::Checker || !actions.is_empty()).then_some((f, actions))
        })
        .collect()
}

/// Decision table plus the catalog used to phrase information requests.
#[derive(Clone)]
pub struct Adjudicator {
    pub catalog: Arc<ActionCatalog>,
    pub assessor: Arc<dyn Assessor>,
}

impl Default for Adjudicator {
    fn default() -> Self {
        Adjudicator { catalog: Arc::new(ActionCatalog::default()), assessor: Arc::new(ContradictDominates) }
    }
}

impl std::fmt::Debug for Adjudicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Adjudicator").field("catalog", &self.catalog).finish_non_exhaustive()
    }
}

impl Adjudicator {
    fn recommend(&self, a: &ActionNode) -> Recommendation {
        let match_level = if a.status == ActionStatus::Partial { MatchLevel::Partial } else { MatchLevel::Missing };
        let mut rec = Recommendation {
            action: a.id.clone(),
            canonical_key: a.canonical_key.clone(),
            goal: a.goal.clone(),
            criticality: a.criticality,
            slots: a.slots.clone(),
            match_level,
            request_text: String::new(),
        };
        rec.request_text = render_requests(std::slice::from_ref(&rec), &self.catalog).remove(0);
        rec
    }

    /// Rules, in order:
    /// 1. a missing critical action yields rmi recommending exactly the
    ///    missing critical actions;
    /// 2. and 3. otherwise the assessor decides over actionable factors
    ///    (reference: any contradict rejects, else approve);
    /// 4. with no actionable factor, rmi recommending the missing actions.
    pub fn adjudicate(&self, graph: &CaseGraph) -> Result<AdjudicationOutcome, ReasonError> {
        let factors = evaluated_factors(graph);
        if factors.iter().all(|(_, acts)| acts.is_empty()) {
            return Err(ReasonError::EmptyCheckerLane(graph.case_id().clone()));
        }
        let mut trace = Trace::new(graph.case_id().clone());
        let mut actionable = Vec::new();
        let mut missing: BTreeMap<NodeId, &ActionNode> = BTreeMap::new();
        for (f, acts) in &factors {
            let statuses: Vec<ActionNode> = acts
                .iter()
                .map(|a| {
                    let mut probe = (*a).clone();
                    probe.status = match binary_status(graph, a) {
                        StatusValue::Verified => ActionStatus::Verified,
                        StatusValue::Missing => ActionStatus::Missing,
                    };
                    probe
                })
                .collect();
            let resolution = factor_resolution(&statuses);
            if resolution == Resolution::Actionable {
                actionable.push(*f);
            }
            for a in acts {
                if binary_status(graph, a) == StatusValue::Missing {
                    missing.insert(a.id.clone(), a);
                }
            }
            trace.push(TraceStep::FactorResolution {
                factor: f.id.clone(),
                key: f.key.clone(),
                outcome: f.outcome,
                resolution,
            });
        }

        let critical: Vec<&ActionNode> =
            missing.values().copied().filter(|a| a.criticality == Criticality::Critical).collect();
        let (verdict, rule, recs) = if !critical.is_empty() {
            (Verdict::Rmi, DecisionRule::MissingCritical, critical)
        } else if actionable.is_empty() {
            (Verdict::Rmi, DecisionRule::NoActionableFactor, missing.values().copied().collect())
        } else {
            let (verdict, rule) = self.assessor.assess(graph, &actionable)?;
            if verdict == Verdict::Rmi {
                return Err(AssessorError("assessor may not return rmi".into()).into());
            }
            (verdict, rule, Vec::new())
        };
        let recommendations: Vec<Recommendation> = recs.into_iter().map(|a| self.recommend(a)).collect();
        trace.push(TraceStep::Verdict {
            verdict,
            rule: rule.as_str().into(),
            recommendations: recommendations.iter().map(|r| r.action.clone()).collect(),
        });
        Ok(AdjudicationOutcome { verdict, rule, recommendations, no_applicable_precedent: false, trace })
    }
}

/// Adjudicate with the reference decision table and catalog.
pub fn adjudicate(graph: &CaseGraph) -> Result<AdjudicationOutcome, ReasonError> {
    Adjudicator::default().adjudicate(graph)
}

/// One information request per recommendation, in the given order.
pub fn render_requests(recommendations: &[Recommendation], catalog: &ActionCatalog) -> Vec<String> {
    recommendations
        .iter()
        .map(|r| {
            let text = catalog.request_text(&r.canonical_key, &r.slots);
            match r.match_level {
                MatchLevel::Partial => format!("{PARTIAL_PREFIX}{text}"),
                _ => text,
            }
        })
        .collect()
}

/// Add evidence to an adjudicated graph and re-ground the hypothesized
/// actions that were not yet verified. Statuses only move upward; verified
/// actions and historical actions are left alone.
pub fn attach_evidence(
    graph: &CaseGraph,
    new_evidence: Vec<EvidenceNode>,
    grounder: &dyn Grounder,
) -> Result<(CaseGraph, Vec<GroundingResult>), ReasonError> {
    let mut seen = BTreeSet::new();
    for e in &new_evidence {
        if graph.contains(&e.id) || !seen.insert(e.id.clone()) {
            return Err(ReasonError::DuplicateEvidenceId(e.id.clone()));
        }
    }
    let mut builder = graph.to_builder();
    for e in new_evidence {
        builder.add_node(Node::Evidence(e)).map_err(ReasonError::Graph)?;
    }
    let enlarged = builder.clone().freeze();
    let evidence: Vec<&EvidenceNode> = enlarged.evidence().collect();

    let mut results = Vec::new();
    let pending: Vec<&ActionNode> = enlarged
        .actions()
        .filter(|a| a.origin == ActionOrigin::Hypothesized)
        .filter(|a| matches!(a.status, ActionStatus::Missing | ActionStatus::Partial | ActionStatus::Unevaluated))
        .collect();
    for a in pending {
        let (level, ids) = grounder.ground(a, &evidence);
        let before = match a.status {
            ActionStatus::Partial => MatchLevel::Partial,
            _ => MatchLevel::Missing,
        };
        let after = before.max(level);
        builder.set_action_status(&a.id, after.status()).map_err(ReasonError::Graph)?;
        let mut linked = Vec::new();
        if after == MatchLevel::Complete {
            for e in &ids {
                builder.link(Edge::evidence_action(e, &a.id)).map_err(ReasonError::Graph)?;
                linked.push(e.clone());
            }
        } else if level == after {
            linked = ids;
        }
        results.push(GroundingResult { action: a.id.clone(), match_level: after, evidence_ids: linked });
    }

    let regrounded = builder.clone().freeze();
    for (f, acts) in evaluated_factors(&regrounded) {
        if acts.iter().any(|a| a.origin == ActionOrigin::Hypothesized) {
            builder.set_factor_resolution(&f.id, factor_resolution(acts)).map_err(ReasonError::Graph)?;
        }
    }
    Ok((builder.freeze(), results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CaseId, DecisionNode, SourceType};
    use crate::reasoner::fae::LexicalGrounder;

    fn id(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    /// Maker lane with one factor; one Path II Checker factor per entry
    /// of (criticality, status, outcome), one action each.
    fn graph(shape: &[(Criticality, ActionStatus, Outcome)]) -> CaseGraph {
        let mut b = CaseGraph::builder(CaseId::new("t").unwrap());
        b.add_node(Node::Evidence(EvidenceNode {
            id: id("e1"),
            content: "ledger".into(),
            source_ref: "s".into(),
            source_type: SourceType::Document,
        }))
        .unwrap();
        b.add_node(Node::Decision(DecisionNode { id: id("m-d"), role: Lane::Maker, verdict: Verdict::Reject })).unwrap();
        b.add_node(Node::Factor(FactorNode {
            id: id("m-f1"),
            key: "k".into(),
            statement: "k".into(),
            outcome: Outcome::Contradict,
            origin: Lane::Maker,
            resolution: Resolution::Actionable,
        }))
        .unwrap();
        b.link(Edge::factor_decision(&id("m-f1"), &id("m-d"))).unwrap();
        for (i, (crit, status, outcome)) in shape.iter().enumerate() {
            let f = id(&format!("q-c-f{i}"));
            let a = id(&format!("q-c-a{i}"));
            b.add_node(Node::Factor(FactorNode {
                id: f.clone(),
                key: format!("f{i}"),
                statement: "s".into(),
                outcome: *outcome,
                origin: Lane::Checker,
                resolution: Resolution::Unresolved,
            }))
            .unwrap();
            b.add_node(Node::Action(ActionNode {
                id: a.clone(),
                goal: "g".into(),
                canonical_key: format!("verify_thing_{i}"),
                origin: ActionOrigin::Hypothesized,
                criticality: *crit,
                status: *status,
                slots: BTreeMap::new(),
            }))
            .unwrap();
            b.link(Edge::action_factor(&a, &f)).unwrap();
            b.link(Edge::conflict(&id("m-f1"), &f, crate::graph::PathKind::Extends)).unwrap();
            if *status == ActionStatus::Verified {
                b.link(Edge::evidence_action(&id("e1"), &a)).unwrap();
            }
        }
        b.freeze()
    }

    use ActionStatus::{Missing, Partial, Verified};
    use Criticality::{Critical, Supporting};
    use Outcome::{Contradict, Support};

    #[test]
    fn critical_verified_supports_approve() {
        let out = adjudicate(&graph(&[(Critical, Verified, Support), (Critical, Verified, Support)])).unwrap();
        assert_eq!(out.verdict, Verdict::Approve);
        assert!(out.recommendations.is_empty());
    }

    #[test]
    fn missing_critical_is_rmi_with_exact_set() {
        let out = adjudicate(&graph(&[(Critical, Missing, Support), (Critical, Verified, Support)])).unwrap();
        assert_eq!(out.verdict, Verdict::Rmi);
        assert_eq!(out.recommended_ids(), BTreeSet::from([id("q-c-a0")]));
    }

    #[test]
    fn supporting_missing_still_approves() {
        let out = adjudicate(&graph(&[(Critical, Verified, Support), (Supporting, Missing, Support)])).unwrap();
        assert_eq!(out.verdict, Verdict::Approve);
    }

    #[test]
    fn actionable_contradict_rejects() {
        let out = adjudicate(&graph(&[(Critical, Verified, Support), (Supporting, Verified, Contradict)])).unwrap();
        assert_eq!(out.verdict, Verdict::Reject);
    }

    #[test]
    fn partial_reads_as_missing_and_is_flagged() {
        let g = graph(&[(Critical, Partial, Support)]);
        assert_eq!(action_status(&g, &id("q-c-a0")).unwrap(), StatusValue::Missing);
        let out = adjudicate(&g).unwrap();
        assert_eq!(out.verdict, Verdict::Rmi);
        assert!(out.recommendations[0].request_text.starts_with(PARTIAL_PREFIX));
    }

    #[test]
    fn status_errors() {
        let g = graph(&[(Critical, Verified, Support)]);
        assert!(matches!(action_status(&g, &id("nope")), Err(ReasonError::UnknownNode(_))));
        assert!(matches!(action_status(&g, &id("m-f1")), Err(ReasonError::WrongLane(_))));
        assert!(matches!(adjudicate(&graph(&[])), Err(ReasonError::EmptyCheckerLane(_))));
    }

    #[test]
    fn render_requests_is_ordered() {
        assert!(render_requests(&[], &ActionCatalog::default()).is_empty());
        let out = adjudicate(&graph(&[(Critical, Missing, Support), (Critical, Missing, Support)])).unwrap();
        let texts = render_requests(&out.recommendations, &ActionCatalog::default());
        assert_eq!(texts, vec!["Please provide evidence to verify thing 0", "Please provide evidence to verify thing 1"]);
    }

    #[test]
    fn attach_evidence_upgrades_and_rejects_duplicates() {
        let g = graph(&[(Critical, Missing, Support)]);
        let ev = |i: &str, c: &str| EvidenceNode {
            id: id(i),
            content: c.into(),
            source_ref: "r".into(),
            source_type: SourceType::Document,
        };
        let (same, _) = attach_evidence(&g, vec![ev("e2", "unrelated words")], &LexicalGrounder).unwrap();
        assert_eq!(same.action(&id("q-c-a0")).unwrap().status, Missing);
        let (up, res) = attach_evidence(&g, vec![ev("e2", "we verify the thing 0")], &LexicalGrounder).unwrap();
        assert_eq!(up.action(&id("q-c-a0")).unwrap().status, Verified);
        assert_eq!(res[0].evidence_ids, vec![id("e2")]);
        assert_eq!(adjudicate(&up).unwrap().verdict, Verdict::Approve);
        assert!(matches!(
            attach_evidence(&g, vec![ev("e1", "x")], &LexicalGrounder),
            Err(ReasonError::DuplicateEvidenceId(_))
        ));
    }
}
