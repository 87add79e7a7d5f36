//! Action refinement: actions with the same functional goal supporting the
//! same factor collapse into one canonical action.

use std::collections::BTreeMap;

use crate::graph::{ActionNode, ActionStatus, CaseGraph, CaseId, Criticality, Edge, EdgeKind, Lane, Node, NodeId};
use crate::text::title_key;

/// `(case, original action id) -> canonical action id` for every merged action.
pub type MergeMap = BTreeMap<(CaseId, NodeId), NodeId>;

fn status_rank(s: ActionStatus) -> u8 {
    match s {
        ActionStatus::Unevaluated => 0,
        ActionStatus::Missing => 1,
        ActionStatus::Partial => 2,
        ActionStatus::Verified => 3,
    }
}

fn refine_one(graph: &CaseGraph, merges: &mut MergeMap) -> CaseGraph {
    // Groups keyed by (lane, canonical key, target factor); merging never
    // crosses lanes.
    let mut groups: BTreeMap<(Lane, &str, &NodeId), Vec<&ActionNode>> = BTreeMap::new();
    for action in graph.actions() {
        let mut targets = graph.out_edges(&action.id, EdgeKind::ActionFactor);
        let (Some(target), None) = (targets.next(), targets.next()) else {
            continue;
        };
        groups
            .entry((action.origin.lane(), action.canonical_key.as_str(), &target.to))
            .or_default()
            .push(action);
    }

    let mut rename: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut merged_nodes: Vec<ActionNode> = Vec::new();
    for members in groups.values().filter(|m| m.len() > 1) {
        let canonical = members[0];
        let mut node = canonical.clone();
        node.goal = title_key(&canonical.canonical_key);
        for m in members {
            if m.criticality == Criticality::Critical {
                node.criticality = Criticality::Critical;
            }
            if status_rank(m.status) > status_rank(node.status) {
                node.status = m.status;
            }
            for (k, v) in &m.slots {
                node.slots.entry(k.clone()).or_insert_with(|| v.clone());
            }
            rename.insert(m.id.clone(), canonical.id.clone());
            merges.insert((graph.case_id().clone(), m.id.clone()), canonical.id.clone());
        }
        merged_nodes.push(node);
    }
    if rename.is_empty() {
        return graph.clone();
    }

    let mut builder = CaseGraph::builder(graph.case_id().clone());
    for node in graph.nodes() {
        match rename.get(node.id()) {
            Some(canonical) if canonical != node.id() => continue,
            Some(_) => {}
            None => {
                builder.add_node(node.clone()).expect("nodes of a valid graph re-add");
            }
        }
    }
    for node in merged_nodes {
        builder.add_node(Node::Action(node)).expect("canonical action is valid");
    }
    for edge in graph.edges() {
        let from = rename.get(&edge.from).unwrap_or(&edge.from);
        let to = rename.get(&edge.to).unwrap_or(&edge.to);
        let edge = Edge { kind: edge.kind, from: from.clone(), to: to.clone(), path: edge.path };
        if !builder.edges().any(|e| e.kind == edge.kind && e.from == edge.from && e.to == edge.to) {
            builder.propose(edge).expect("endpoints exist");
        }
    }
    builder.freeze()
}

/// Merge equivalent actions within each graph. Factor and decision layers
/// are left untouched; evidence links of merged actions are unioned.
pub fn refine_actions(graphs: &[CaseGraph]) -> (Vec<CaseGraph>, MergeMap) {
    let mut merges = MergeMap::new();
    let refined = graphs.iter().map(|g| refine_one(g, &mut merges)).collect();
    (refined, merges)
}
