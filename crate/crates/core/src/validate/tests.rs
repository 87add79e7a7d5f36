use super::*;
use crate::fixtures::d2_graph;
use crate::graph::{Criticality, PathKind};

fn nid(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

fn kinds_at(report: &ValidationReport, id: &str) -> Vec<ViolationKind> {
    report.violations.iter().filter(|v| v.location.nodes().iter().any(|n| n.as_str() == id)).map(|v| v.kind).collect()
}

fn with_hypothesis(status: ActionStatus) -> CaseGraph {
    let g = d2_graph();
    let mut b = g.to_builder();
    b.add_node(Node::Action(crate::graph::ActionNode {
        id: nid("h-a1"),
        goal: "Check the courier scan".into(),
        canonical_key: "check_courier_scan".into(),
        origin: ActionOrigin::Hypothesized,
        criticality: Criticality::Critical,
        status,
        slots: Default::default(),
    }))
    .unwrap();
    b.link(Edge::action_factor(&nid("h-a1"), &nid("c-f1"))).unwrap();
    b.freeze()
}

#[test]
fn d2_passes_with_one_note() {
    let r = validate(&d2_graph());
    assert!(r.pass, "{}", r.to_text());
    let notes: Vec<String> = r.notes.iter().map(|n| n.location.to_string()).collect();
    assert_eq!(notes, ["c-f2"]);
    assert!(r.to_text().ends_with("PASS\n"));
}

#[test]
fn missing_hypothesized_actions_need_no_evidence() {
    assert!(validate(&with_hypothesis(ActionStatus::Missing)).pass);
    assert!(validate(&with_hypothesis(ActionStatus::Partial)).pass);
    let r = validate(&with_hypothesis(ActionStatus::Verified));
    assert_eq!(kinds_at(&r, "h-a1"), [ViolationKind::Completeness]);
}

#[test]
fn each_family_is_reported() {
    let g = d2_graph();
    let mut b = g.to_builder();
    // Completeness: strip m-a1's evidence.
    b.remove_edge(EdgeKind::EvidenceAction, &nid("e1"), &nid("m-a1"));
    b.remove_edge(EdgeKind::EvidenceAction, &nid("e2"), &nid("m-a1"));
    // Cardinality: c-f2 gets a second conflict partner while c-f1 has one.
    b.link(Edge::conflict(&nid("m-f1"), &nid("c-f2"), PathKind::Verifies)).unwrap();
    // Type compatibility: a decision pointing back at a factor.
    b.propose(Edge::new(EdgeKind::FactorDecision, nid("m-d"), nid("m-f1"))).unwrap();
    let r = validate(&b.freeze());
    assert!(!r.pass);
    assert_eq!(kinds_at(&r, "m-a1"), [ViolationKind::Completeness]);
    assert!(kinds_at(&r, "m-f1").contains(&ViolationKind::Cardinality), "{}", r.to_text());
    assert!(r.violations.iter().any(|v| v.kind == ViolationKind::TypeCompat && v.location == Location::Edge(nid("m-d"), nid("m-f1"))));
    assert!(r.notes.is_empty(), "c-f2 now has a partner");
    let sorted = {
        let mut v = r.violations.clone();
        v.sort();
        v
    };
    assert_eq!(r.violations, sorted);
    assert!(r.to_text().ends_with("FAIL\n"));
}

#[test]
fn factor_decision_rule_only_with_a_decision() {
    let g = d2_graph();
    let mut b = CaseGraph::builder(g.case_id().clone());
    for n in g.nodes().filter(|n| n.lane() != Some(Lane::Checker) && n.kind() != NodeKind::Decision) {
        b.add_node(n.clone()).unwrap();
    }
    let kept: Vec<Edge> = g.edges().filter(|e| b.contains(&e.from) && b.contains(&e.to)).cloned().collect();
    for e in kept {
        b.link(e).unwrap();
    }
    let no_decision = b.clone().freeze();
    assert!(validate(&no_decision).pass, "{}", validate(&no_decision).to_text());
    b.add_node(g.node(&nid("m-d")).unwrap().clone()).unwrap();
    let r = validate(&b.freeze());
    assert_eq!(kinds_at(&r, "m-f1"), [ViolationKind::Completeness]);
}

#[test]
fn report_v1_document() {
    let mut b = d2_graph().to_builder();
    b.propose(Edge::conflict(&nid("c-f1"), &nid("c-f1"), PathKind::Extends)).unwrap();
    let r = validate(&b.freeze());
    let doc: serde_json::Value = serde_json::from_str(&r.to_report_v1()).unwrap();
    assert_eq!(doc["format"], REPORT_FORMAT);
    assert_eq!(doc["pass"], false);
    let v = doc["violations"].as_array().unwrap();
    assert!(v.iter().any(|v| v["kind"] == "cardinality" && v["location"] == serde_json::json!(["c-f1", "c-f1"])));
    let back: ValidationReport = serde_json::from_value(doc).unwrap();
    assert_eq!(back, r);
}

struct Fixed(Patch);

impl Regenerator for Fixed {
    fn regenerate(&mut self, _: &CaseGraph, _: &Violation) -> Result<Patch, RegeneratorError> {
        Ok(self.0.clone())
    }
}

fn broken() -> (CaseGraph, ValidationReport) {
    let mut b = d2_graph().to_builder();
    b.remove_edge(EdgeKind::ActionFactor, &nid("m-a1"), &nid("m-f1"));
    let g = b.freeze();
    let r = validate(&g);
    assert!(!r.pass);
    (g, r)
}

#[test]
fn repair_rounds_and_errors() {
    let (g, r) = broken();
    assert_eq!(repair(&g, &r, &mut NoopRegenerator, 0), Err(RepairError::InvalidRounds));
    match repair(&g, &r, &mut NoopRegenerator, DEFAULT_MAX_ROUNDS) {
        Err(RepairError::RepairDiverged { rounds, report }) => {
            assert_eq!(rounds, 3);
            assert_eq!(report, r);
        }
        other => panic!("{other:?}"),
    }
    let ok = validate(&d2_graph());
    assert_eq!(repair(&d2_graph(), &ok, &mut NoopRegenerator, 1).unwrap().0, d2_graph());

    let fix = Patch { add_edges: vec![Edge::action_factor(&nid("m-a1"), &nid("m-f1"))], ..Patch::default() };
    let (fixed, report) = repair(&g, &r, &mut Fixed(fix), 1).unwrap();
    assert!(report.pass);
    assert_eq!(fixed, d2_graph());
}

#[test]
fn repair_rejects_out_of_scope_patches() {
    let (g, r) = broken();
    let far = Patch { remove_edges: vec![Edge::evidence_action(&nid("e3"), &nid("c-a1"))], ..Patch::default() };
    assert!(matches!(repair(&g, &r, &mut Fixed(far), 3), Err(RepairError::RegeneratorFailure(_))));
    let readd = Patch { add_nodes: vec![g.node(&nid("e1")).unwrap().clone()], ..Patch::default() };
    assert!(matches!(repair(&g, &r, &mut Fixed(readd), 3), Err(RepairError::RegeneratorFailure(_))));
    let replace = Patch { replace_nodes: vec![g.node(&nid("c-d")).unwrap().clone()], ..Patch::default() };
    assert!(matches!(repair(&g, &r, &mut Fixed(replace), 3), Err(RepairError::RegeneratorFailure(_))));
}
