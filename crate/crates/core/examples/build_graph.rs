//! Assemble a small dual-lane case graph by hand, query it and print its
//! canonical text.

use std::collections::BTreeMap;

use eafd::graph::{
    to_canonical_text, ActionNode, ActionOrigin, ActionStatus, CaseGraph, CaseId, Criticality, DecisionNode, Edge,
    EvidenceNode, FactorNode, Lane, Node, NodeId, Outcome, PathKind, Resolution, SourceType, Verdict,
};

fn id(s: &str) -> NodeId {
    NodeId::new(s).expect("literal ids are non-empty")
}

fn action(name: &str, key: &str, goal: &str, origin: ActionOrigin) -> Node {
    Node::Action(ActionNode {
        id: id(name),
        goal: goal.into(),
        canonical_key: key.into(),
        origin,
        criticality: Criticality::Critical,
        status: ActionStatus::Unevaluated,
        slots: BTreeMap::new(),
    })
}

fn factor(name: &str, key: &str, lane: Lane, outcome: Outcome) -> Node {
    Node::Factor(FactorNode {
        id: id(name),
        key: key.into(),
        statement: key.replace('_', " "),
        outcome,
        origin: lane,
        resolution: Resolution::Actionable,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut b = CaseGraph::builder(CaseId::new("counterfeit-1")?);
    b.add_node(Node::Evidence(EvidenceNode {
        id: id("e1"),
        content: "Buyer report: logo stitching differs from the brand original".into(),
        source_ref: "counterfeit-1/e1".into(),
        source_type: SourceType::ChatLog,
    }))?;
    b.add_node(Node::Evidence(EvidenceNode {
        id: id("e2"),
        content: "Authorized distributor invoice for the listed units".into(),
        source_ref: "counterfeit-1/e2".into(),
        source_type: SourceType::Document,
    }))?;
    b.add_node(action("m-a1", "review_buyer_report", "Review buyer report", ActionOrigin::Maker))?;
    b.add_node(factor("m-f1", "suspected_counterfeit", Lane::Maker, Outcome::Contradict))?;
    b.add_node(Node::Decision(DecisionNode { id: id("m-d"), role: Lane::Maker, verdict: Verdict::Reject }))?;
    b.add_node(action("c-a1", "verify_invoice", "Verify distributor invoice", ActionOrigin::Checker))?;
    b.add_node(factor("c-f1", "authentic_supply_chain", Lane::Checker, Outcome::Support))?;
    b.add_node(Node::Decision(DecisionNode { id: id("c-d"), role: Lane::Checker, verdict: Verdict::Approve }))?;

    for edge in [
        Edge::evidence_action(&id("e1"), &id("m-a1")),
        Edge::action_factor(&id("m-a1"), &id("m-f1")),
        Edge::factor_decision(&id("m-f1"), &id("m-d")),
        Edge::evidence_action(&id("e2"), &id("c-a1")),
        Edge::action_factor(&id("c-a1"), &id("c-f1")),
        Edge::factor_decision(&id("c-f1"), &id("c-d")),
        Edge::conflict(&id("m-f1"), &id("c-f1"), PathKind::Extends),
    ] {
        b.link(edge)?;
    }
    // The builder refuses edges that break the typing rules.
    if let Err(e) = b.link(Edge::action_factor(&id("m-a1"), &id("c-f1"))) {
        println!("rejected: {e}");
    }

    let g = b.freeze();
    println!("overturned: {}", g.is_overturned());
    for (action, evidence) in g.grounding_chain(&id("c-f1"))? {
        let ids: Vec<&str> = evidence.iter().map(|e| e.id.as_str()).collect();
        println!("c-f1 <- {} <- {ids:?}", action.id);
    }
    for (maker, checker, path) in g.conflict_pairs() {
        println!("conflict {} -> {} ({})", maker.key, checker.key, path.as_str());
    }
    print!("{}", to_canonical_text(&g));
    Ok(())
}
