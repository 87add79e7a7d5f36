use super::*;
use crate::fixtures::d2_graph;

fn nid(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

fn ev(id: &str) -> Node {
    Node::Evidence(EvidenceNode {
        id: nid(id),
        content: format!("content of {id}"),
        source_ref: format!("t/{id}"),
        source_type: SourceType::Document,
    })
}

fn act(id: &str, origin: ActionOrigin) -> Node {
    Node::Action(ActionNode {
        id: nid(id),
        goal: "Check".into(),
        canonical_key: "check".into(),
        origin,
        criticality: Criticality::Supporting,
        status: ActionStatus::Unevaluated,
        slots: BTreeMap::new(),
    })
}

fn fac(id: &str, lane: Lane) -> Node {
    Node::Factor(FactorNode {
        id: nid(id),
        key: "k".into(),
        statement: "K".into(),
        outcome: Outcome::Support,
        origin: lane,
        resolution: Resolution::Actionable,
    })
}

fn dec(id: &str, role: Lane, verdict: Verdict) -> Node {
    Node::Decision(DecisionNode { id: nid(id), role, verdict })
}

fn two_lanes() -> GraphBuilder {
    let mut b = GraphBuilder::new(CaseId::new("t").unwrap());
    for n in [
        ev("e1"),
        act("m-a", ActionOrigin::Maker),
        fac("m-f", Lane::Maker),
        dec("m-d", Lane::Maker, Verdict::Reject),
        act("c-a", ActionOrigin::Checker),
        fac("c-f", Lane::Checker),
        dec("c-d", Lane::Checker, Verdict::Approve),
    ] {
        b.add_node(n).unwrap();
    }
    b
}

#[test]
fn ids_reject_blank_strings() {
    assert!(NodeId::new("").is_err());
    assert!(NodeId::new(" \t").is_err());
    assert!(serde_json::from_str::<NodeId>("\"\"").is_err());
    assert!(CaseId::new("").is_err());
}

#[test]
fn link_enforces_endpoint_kinds_and_lanes() {
    let mut b = two_lanes();
    b.link(Edge::evidence_action(&nid("e1"), &nid("m-a"))).unwrap();
    b.link(Edge::action_factor(&nid("m-a"), &nid("m-f"))).unwrap();
    // Reversed direction.
    let err = b.link(Edge::new(EdgeKind::ActionFactor, nid("m-f"), nid("m-a"))).unwrap_err();
    assert!(matches!(err, GraphError::TypeIncompatible { .. }), "{err}");
    // Maker action into the Checker lane.
    let err = b.link(Edge::action_factor(&nid("m-a"), &nid("c-f"))).unwrap_err();
    assert!(matches!(err, GraphError::CrossLaneViolation { .. }), "{err}");
    // Checker action verifying a Maker factor is allowed.
    b.link(Edge::action_factor(&nid("c-a"), &nid("m-f"))).unwrap();
    let err = b.link(Edge::factor_decision(&nid("m-f"), &nid("c-d"))).unwrap_err();
    assert!(matches!(err, GraphError::CrossLaneViolation { .. }));
    // Conflict edges run maker -> checker only.
    b.link(Edge::conflict(&nid("m-f"), &nid("c-f"), PathKind::Extends)).unwrap();
    assert!(b.link(Edge::conflict(&nid("c-f"), &nid("m-f"), PathKind::Extends)).is_err());
    assert!(b.link(Edge::conflict(&nid("m-f"), &nid("m-f"), PathKind::Verifies)).is_err());
    assert!(matches!(b.link(Edge::evidence_action(&nid("e1"), &nid("m-a"))), Err(GraphError::DuplicateEdge { .. })));
    assert!(matches!(b.link(Edge::evidence_action(&nid("e9"), &nid("m-a"))), Err(GraphError::UnknownNode(_))));
    assert_eq!(b.edges().count(), 4);
}

#[test]
fn propose_skips_type_checks_but_not_existence() {
    let mut b = two_lanes();
    b.propose(Edge::new(EdgeKind::ActionFactor, nid("m-f"), nid("m-a"))).unwrap();
    assert!(b.propose(Edge::evidence_action(&nid("zz"), &nid("m-a"))).is_err());
    assert!(b.remove_edge(EdgeKind::ActionFactor, &nid("m-f"), &nid("m-a")));
    assert!(!b.remove_edge(EdgeKind::ActionFactor, &nid("m-f"), &nid("m-a")));
}

#[test]
fn node_checks() {
    let mut b = two_lanes();
    assert!(matches!(b.add_node(ev("e1")), Err(GraphError::DuplicateNode(_))));
    assert!(b.add_node(dec("m-d2", Lane::Maker, Verdict::Reject)).is_err(), "one decision per lane");
    let mut g = GraphBuilder::new(CaseId::new("u").unwrap());
    assert!(g.add_node(dec("m-d", Lane::Maker, Verdict::Approve)).is_err());
    assert!(g.add_node(dec("c-d", Lane::Checker, Verdict::Rmi)).is_err());
    let Node::Evidence(mut e) = ev("e2") else { unreachable!() };
    e.content = " ".into();
    assert!(g.add_node(Node::Evidence(e)).is_err());
    assert!(matches!(b.replace_node(fac("e1", Lane::Maker)), Err(GraphError::WrongNodeKind { .. })));
    assert!(matches!(b.set_action_status(&nid("m-f"), ActionStatus::Verified), Err(GraphError::WrongNodeKind { .. })));
    b.set_action_status(&nid("m-a"), ActionStatus::Verified).unwrap();
    assert_eq!(b.node(&nid("m-a")).and_then(Node::as_action).unwrap().status, ActionStatus::Verified);
}

#[test]
fn queries_follow_edges() {
    let g = d2_graph();
    assert!(g.is_overturned());
    assert!(g.has_lane(Lane::Checker));
    let chain = g.grounding_chain(&nid("m-f1")).unwrap();
    assert_eq!(chain.len(), 1);
    let (a, evidence) = &chain[0];
    assert_eq!(a.id.as_str(), "m-a1");
    let ids: Vec<&str> = evidence.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["e1", "e2"]);
    assert_eq!(g.factor_of(&nid("m-a1")).unwrap().id.as_str(), "m-f1");
    assert!(matches!(g.grounding_chain(&nid("e1")), Err(GraphError::WrongNodeKind { .. })));
    assert!(matches!(g.grounding_chain(&nid("nope")), Err(GraphError::UnknownNode(_))));
    let pairs = g.conflict_pairs();
    assert_eq!(pairs.len(), 1);
    assert_eq!((pairs[0].0.id.as_str(), pairs[0].1.id.as_str()), ("m-f1", "c-f1"));
}

#[test]
fn frozen_link_leaves_original_alone() {
    let g = two_lanes().freeze();
    let g2 = g.link(Edge::evidence_action(&nid("e1"), &nid("c-a"))).unwrap();
    assert_eq!(g.edge_count(), 0);
    assert_eq!(g2.edge_count(), 1);
}

#[test]
fn text_format_rejects_bad_input() {
    let text = to_canonical_text(&d2_graph());
    assert!(text.starts_with("{\"case_id\":\"appeal-d2\",\"format\":\"eafd-graph-v1\""));
    assert!(matches!(from_canonical_text(""), Err(FormatError::MissingHeader)));
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    assert!(matches!(from_canonical_text(&body), Err(FormatError::MissingHeader)));
    let wrong = text.replacen("eafd-graph-v1", "eafd-graph-v0", 1);
    assert!(matches!(from_canonical_text(&wrong), Err(FormatError::Syntax { line: 1, .. })));
    let stance = text.replacen("\"stance\":\"contradict\"", "\"stance\":\"support\"", 1);
    assert_ne!(stance, text);
    assert!(from_canonical_text(&stance).is_err());
    let lane = text.replacen("\"lane\":\"maker\"", "\"lane\":\"checker\"", 1);
    assert!(from_canonical_text(&lane).is_err());
    let junk = format!("{text}{{\"record\":\"comment\"}}\n");
    assert!(matches!(from_canonical_text(&junk), Err(FormatError::Syntax { .. })));
    // Blank lines are tolerated.
    assert_eq!(from_canonical_text(&text.replace('\n', "\n\n")).unwrap(), d2_graph());
}
