//! Top-down graph extraction: decision, then factors, then actions, then the
//! evidence links that ground them.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{
    ActionNode, ActionOrigin, ActionStatus, CaseGraph, DecisionNode, Edge, FactorNode, GraphBuilder, Lane, Node,
    NodeId, Outcome, PathKind, Resolution,
};
use crate::ingest::annotation::{parse_annotations, AnnotatedStatement};
use crate::ingest::record::CaseRecord;
use crate::text::{canonical_key, humanize_key, normalize_key};
use crate::validate::{repair, validate, Patch, Regenerator, RegeneratorError, RepairError, Violation, DEFAULT_MAX_ROUNDS};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("extraction failed for {lane} lane: {message}")]
    ExtractionFailed { lane: Lane, message: String },
    #[error(transparent)]
    Repair(#[from] RepairError),
}

fn failed(lane: Lane, message: impl Into<String>) -> ExtractError {
    ExtractError::ExtractionFailed { lane, message: message.into() }
}

/// Nodes and edges one extractor call proposes for a lane. Edges may point at
/// evidence and at nodes of lanes extracted earlier.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LaneProposal {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Produces one lane of a case graph from a record.
///
/// `prior` holds the evidence pool and every lane extracted so far (the Maker
/// lane when the Checker lane is requested). Extractors must only emit
/// actions documented in the record and must not invent evidence.
pub trait Extractor {
    fn extract_lane(&self, record: &CaseRecord, lane: Lane, prior: &CaseGraph) -> Result<LaneProposal, ExtractError>;

    /// Targeted re-extraction for a violating substructure.
    fn regenerate(&self, _record: &CaseRecord, _graph: &CaseGraph, _violation: &Violation) -> Result<Patch, RegeneratorError> {
        Ok(Patch::default())
    }
}

/// Deterministic extractor reading the annotation grammar.
///
/// Node ids are positional: `m-d`, `m-f1`, `m-a1` in the Maker lane and
/// `c-d`, `c-f1`, `c-a1` in the Checker lane. Evidence keeps record ids.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnnotationExtractor;

fn nid(s: String) -> NodeId {
    NodeId::new(s).expect("generated ids are non-empty")
}

impl AnnotationExtractor {
    fn statements(record: &CaseRecord, lane: Lane) -> Result<(crate::graph::Verdict, Vec<AnnotatedStatement>), ExtractError> {
        let decision = match lane {
            Lane::Maker => &record.maker_record,
            Lane::Checker => record
                .checker_record
                .as_ref()
                .ok_or_else(|| failed(lane, "record has no checker record"))?,
        };
        if lane == Lane::Checker && decision.analysis.trim().is_empty() {
            return Err(failed(lane, "checker analysis is empty"));
        }
        let statements = parse_annotations(&decision.analysis).map_err(|e| failed(lane, e.to_string()))?;
        Ok((decision.verdict, statements))
    }
}

impl Extractor for AnnotationExtractor {
    fn extract_lane(&self, record: &CaseRecord, lane: Lane, prior: &CaseGraph) -> Result<LaneProposal, ExtractError> {
        let (verdict, statements) = Self::statements(record, lane)?;
        let (prefix, origin) = match lane {
            Lane::Maker => ("m", ActionOrigin::Maker),
            Lane::Checker => ("c", ActionOrigin::Checker),
        };
        let mut out = LaneProposal::default();

        // Stage 1: decision and factors.
        let decision_id = nid(format!("{prefix}-d"));
        out.nodes.push(Node::Decision(DecisionNode { id: decision_id.clone(), role: lane, verdict }));

        let maker_factors: BTreeMap<&str, &FactorNode> =
            prior.factors().filter(|f| f.origin == Lane::Maker).map(|f| (f.key.as_str(), f)).collect();

        let mut factor_ids: BTreeMap<String, (NodeId, Outcome)> = BTreeMap::new();
        let mut conflicts: BTreeSet<Edge> = BTreeSet::new();
        let mut targets: Vec<NodeId> = Vec::with_capacity(statements.len());
        for s in &statements {
            let key = normalize_key(&s.factor_key);
            if key.is_empty() {
                return Err(failed(lane, format!("statement for `{}` has an empty factor key", s.action_key)));
            }
            if let Some(conflict) = &s.conflict {
                if lane == Lane::Maker {
                    return Err(failed(lane, "maker statements cannot carry conflict annotations"));
                }
                let maker_key = normalize_key(&conflict.maker_factor_key);
                let maker = maker_factors
                    .get(maker_key.as_str())
                    .ok_or_else(|| failed(lane, format!("conflict target `{maker_key}` is not a maker factor")))?;
                if conflict.path_kind == PathKind::Verifies {
                    if key != maker_key || s.factor_outcome != maker.outcome {
                        return Err(failed(
                            lane,
                            format!("verifying statement must restate maker factor `{maker_key}` and its outcome"),
                        ));
                    }
                    targets.push(maker.id.clone());
                    continue;
                }
            }
            let n = factor_ids.len() + 1;
            let (id, outcome) = factor_ids
                .entry(key.clone())
                .or_insert_with(|| (nid(format!("{prefix}-f{n}")), s.factor_outcome))
                .clone();
            if outcome != s.factor_outcome {
                return Err(failed(lane, format!("factor `{key}` is annotated with both outcomes")));
            }
            if let Some(conflict) = &s.conflict {
                let maker = maker_factors[normalize_key(&conflict.maker_factor_key).as_str()];
                conflicts.insert(Edge::conflict(&maker.id, &id, PathKind::Extends));
            }
            targets.push(id);
        }
        let mut factors: Vec<(&String, &(NodeId, Outcome))> = factor_ids.iter().collect();
        factors.sort_by(|a, b| a.1 .0.cmp(&b.1 .0));
        for (key, (id, outcome)) in factors {
            out.nodes.push(Node::Factor(FactorNode {
                id: id.clone(),
                key: key.clone(),
                statement: humanize_key(key),
                outcome: *outcome,
                origin: lane,
                resolution: Resolution::Actionable,
            }));
            out.edges.push(Edge::factor_decision(id, &decision_id));
        }
        out.edges.extend(conflicts);

        // Stage 2: documented actions, one per statement.
        for (i, (s, target)) in statements.iter().zip(&targets).enumerate() {
            let id = nid(format!("{prefix}-a{}", i + 1));
            out.nodes.push(Node::Action(ActionNode {
                id: id.clone(),
                goal: humanize_key(&s.action_key),
                canonical_key: canonical_key(&s.action_key),
                origin,
                criticality: s.criticality_or_default(),
                status: ActionStatus::Unevaluated,
                slots: BTreeMap::new(),
            }));
            out.edges.push(Edge::action_factor(&id, target));

            // Stage 3: evidence links.
            for r in &s.evidence {
                if record.evidence(&r.id).is_none() {
                    return Err(failed(lane, format!("evidence `{}` is not in the record", r.id)));
                }
                let e = nid(r.id.clone());
                let edge = Edge::evidence_action(&e, &id);
                if !out.edges.contains(&edge) {
                    out.edges.push(edge);
                }
            }
        }
        Ok(out)
    }
}

struct RecordRegenerator<'a, X: Extractor + ?Sized> {
    extractor: &'a X,
    record: &'a CaseRecord,
}

impl<X: Extractor + ?Sized> Regenerator for RecordRegenerator<'_, X> {
    fn regenerate(&mut self, graph: &CaseGraph, violation: &Violation) -> Result<Patch, RegeneratorError> {
        self.extractor.regenerate(self.record, graph, violation)
    }
}

fn apply_proposal(builder: &mut GraphBuilder, lane: Lane, proposal: LaneProposal) -> Result<(), ExtractError> {
    for node in proposal.nodes {
        match &node {
            Node::Evidence(e) => return Err(failed(lane, format!("extractor proposed evidence node `{}`", e.id))),
            other if other.lane() != Some(lane) => {
                return Err(failed(lane, format!("node `{}` does not belong to the {lane} lane", other.id())))
            }
            _ => {}
        }
        builder.add_node(node).map_err(|e| failed(lane, e.to_string()))?;
    }
    for edge in proposal.edges {
        builder.propose(edge).map_err(|e| failed(lane, e.to_string()))?;
    }
    Ok(())
}

/// Extract, validate and repair the graph of one record. The Maker lane is
/// always extracted; the Checker lane only when the record carries a Checker
/// decision.
pub fn extract_graph<X: Extractor + ?Sized>(record: &CaseRecord, extractor: &X) -> Result<CaseGraph, ExtractError> {
    let mut builder = CaseGraph::builder(record.case_id.clone());
    for item in &record.evidence_items {
        let node = item.to_node().map_err(|e| failed(Lane::Maker, e.to_string()))?;
        builder.add_node(Node::Evidence(node)).map_err(|e| failed(Lane::Maker, e.to_string()))?;
    }
    let mut lanes = vec![Lane::Maker];
    if record.checker_record.is_some() {
        lanes.push(Lane::Checker);
    }
    for lane in lanes {
        let prior = builder.clone().freeze();
        let proposal = extractor.extract_lane(record, lane, &prior)?;
        apply_proposal(&mut builder, lane, proposal)?;
    }
    let graph = builder.freeze();
    let report = validate(&graph);
    if report.pass {
        return Ok(graph);
    }
    let mut regenerator = RecordRegenerator { extractor, record };
    let (graph, _) = repair(&graph, &report, &mut regenerator, DEFAULT_MAX_ROUNDS)?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeKind, Verdict};
    use crate::ingest::record::parse_case_record;

    fn record(maker: &str, checker: Option<(&str, &str)>) -> CaseRecord {
        let checker = checker
            .map(|(v, a)| format!(r#","checker_record": {{"verdict": "{v}", "analysis": {}}}"#, serde_json::to_string(a).unwrap()))
            .unwrap_or_default();
        let text = format!(
            r#"{{"case_id": "k1", "violation_category": "PQ.EXPIRED_PRODUCTS", "timestamp": 1,
                "evidence_items": [
                  {{"id": "e1", "source_type": "document", "content": "complaint photo", "source_ref": "doc:1"}},
                  {{"id": "e2", "source_type": "system_record", "content": "inventory ledger", "source_ref": "sys:2"}},
                  {{"id": "e3", "source_type": "chat_log", "content": "supplier call", "source_ref": "chat:3"}}
                ],
                "maker_record": {{"verdict": "reject", "analysis": {}}}{checker}}}"#,
            serde_json::to_string(maker).unwrap()
        );
        parse_case_record(text.as_bytes()).unwrap()
    }

    const MAKER: &str = "Complaint checked. ACTION[validate_customer_complaint]{e1} => FACTOR[expired_product_received|contradict]";

    #[test]
    fn two_statements_two_factors_two_actions() {
        let r = record(
            "ACTION[validate complaint]{e1} => FACTOR[expired|contradict] and ACTION[check_listing]{e2,e3} => FACTOR[listing_stale|contradict]",
            None,
        );
        let g = extract_graph(&r, &AnnotationExtractor).unwrap();
        assert_eq!(g.factors().count(), 2);
        assert_eq!(g.actions().count(), 2);
        let a2 = NodeId::new("m-a2").unwrap();
        let ev: Vec<&str> = g.evidence_of(&a2).iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ev, vec!["e2", "e3"]);
        assert_eq!(g.action(&a2).unwrap().canonical_key, "verify_listing");
        assert!(!g.has_lane(Lane::Checker));
    }

    #[test]
    fn empty_checker_analysis_fails() {
        let r = record(MAKER, Some(("approve", "  ")));
        match extract_graph(&r, &AnnotationExtractor) {
            Err(ExtractError::ExtractionFailed { lane: Lane::Checker, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extends_and_verifies_paths() {
        let checker = "ACTION[review_inventory_records|critical]{e2} => FACTOR[isolated_incident|support] \
                       ~> CONFLICTS[expired_product_received|extends]";
        let g = extract_graph(&record(MAKER, Some(("approve", checker))), &AnnotationExtractor).unwrap();
        let pairs = g.conflict_pairs();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0.key, "expired_product_received");
        assert_eq!(pairs[0].1.key, "isolated_incident");
        assert_eq!(pairs[0].2, PathKind::Extends);
        assert_eq!(g.decision(Lane::Checker).unwrap().verdict, Verdict::Approve);

        let checker = "ACTION[confirm_expiry_date]{e3} => FACTOR[expired_product_received|contradict] \
                       ~> CONFLICTS[expired_product_received|verifies]";
        let g = extract_graph(&record(MAKER, Some(("reject", checker))), &AnnotationExtractor).unwrap();
        assert!(g.conflict_pairs().is_empty());
        let c_a1 = NodeId::new("c-a1").unwrap();
        let target = g.out_edges(&c_a1, EdgeKind::ActionFactor).next().unwrap();
        assert_eq!(target.to.as_str(), "m-f1");
    }

    #[test]
    fn unknown_evidence_is_rejected() {
        let r = record("ACTION[a]{e9} => FACTOR[f|contradict]", None);
        assert!(matches!(extract_graph(&r, &AnnotationExtractor), Err(ExtractError::ExtractionFailed { .. })));
    }

    #[test]
    fn unannotated_maker_prose_yields_decision_only() {
        let r = record("The product was expired.", None);
        let g = extract_graph(&r, &AnnotationExtractor).unwrap();
        assert_eq!(g.decisions().count(), 1);
        assert_eq!(g.factors().count(), 0);
        assert_eq!(g.evidence().count(), 3);
    }

    #[test]
    fn missing_evidence_diverges_without_regenerator() {
        let r = record("ACTION[a]{} => FACTOR[f|contradict]", None);
        assert!(matches!(
            extract_graph(&r, &AnnotationExtractor),
            Err(ExtractError::Repair(RepairError::RepairDiverged { .. }))
        ));
    }
}
