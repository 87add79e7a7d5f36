//! Structural validation of case graphs and targeted repair.
//!
//! [`validate`] checks three families of invariants and reports every
//! violation in a deterministic order:
//!
//! * type compatibility: edge endpoints match the edge kind and lane rules;
//! * relational completeness: every factor has an action, every action has
//!   evidence, every factor reaches its lane's decision when one exists;
//! * cardinality: each action feeds exactly one factor, each factor reaches
//!   at most one decision, conflict edges are one-to-one and never
//!   self-referential, at most one decision per lane.
//!
//! Hypothesized actions that are not `Verified` are exempt from the evidence
//! completeness rule: they are the information gaps an adjudication reports.
//!
//! [`repair`] never deletes anything on its own. It asks a [`Regenerator`]
//! for a [`Patch`] per violation, rejects patches that touch nodes outside
//! the violating substructure, and re-validates until the graph passes or the
//! round budget runs out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    edge_rule_violation, ActionOrigin, ActionStatus, CaseGraph, Edge, EdgeKind, GraphBuilder, GraphError,
    Lane, Node, NodeId, NodeKind,
};

pub const DEFAULT_MAX_ROUNDS: usize = 3;
pub const REPORT_FORMAT: &str = "report-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    TypeCompat,
    Completeness,
    Cardinality,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::TypeCompat => "type_compat",
            ViolationKind::Completeness => "completeness",
            ViolationKind::Cardinality => "cardinality",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Location {
    Node(NodeId),
    Edge(NodeId, NodeId),
}

impl Location {
    /// Node ids the location names.
    pub fn nodes(&self) -> Vec<&NodeId> {
        match self {
            Location::Node(n) => vec![n],
            Location::Edge(a, b) if a == b => vec![a],
            Location::Edge(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Node(n) => write!(f, "{n}"),
            Location::Edge(a, b) => write!(f, "{a}->{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.kind, self.location, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub pass: bool,
    /// Informational findings that do not fail validation, such as a Checker
    /// factor without a Maker counterpart.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<Violation>,
}

impl ValidationReport {
    fn from_parts(mut violations: Vec<Violation>, mut notes: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        notes.sort();
        notes.dedup();
        ValidationReport { pass: violations.is_empty(), violations, notes }
    }

    /// Node ids named by any violation.
    pub fn implicated_nodes(&self) -> BTreeSet<NodeId> {
        self.violations
            .iter()
            .flat_map(|v| v.location.nodes().into_iter().cloned())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for n in &self.notes {
            out.push_str(&format!("note {}\n", n));
        }
        out.push_str(if self.pass { "PASS\n" } else { "FAIL\n" });
        out
    }

    /// Machine-readable `report-v1` document.
    pub fn to_report_v1(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            format: &'static str,
            #[serde(flatten)]
            report: &'a ValidationReport,
        }
        crate::json::to_canonical_pretty(&Doc { format: REPORT_FORMAT, report: self })
            .expect("report serializes")
    }
}

fn violation(kind: ViolationKind, location: Location, message: impl Into<String>) -> Violation {
    Violation { kind, location, message: message.into() }
}

/// Hypothesized actions awaiting evidence may legitimately have none.
fn needs_evidence(node: &Node) -> bool {
    match node {
        Node::Action(a) => !(a.origin == ActionOrigin::Hypothesized && a.status != ActionStatus::Verified),
        _ => false,
    }
}

pub fn validate(graph: &CaseGraph) -> ValidationReport {
    let mut violations = Vec::new();
    let mut notes = Vec::new();

    // Type compatibility, one violation per offending edge.
    for edge in graph.edges() {
        let (Some(from), Some(to)) = (graph.node(&edge.from), graph.node(&edge.to)) else {
            continue;
        };
        if let Some(err) = edge_rule_violation(edge, from, to) {
            let message = match err {
                GraphError::CrossLaneViolation { .. } => format!("{} edge crosses lanes", edge.kind),
                GraphError::TypeIncompatible { reason, .. } => format!("{} edge: {reason}", edge.kind),
                other => other.to_string(),
            };
            violations.push(violation(
                ViolationKind::TypeCompat,
                Location::Edge(edge.from.clone(), edge.to.clone()),
                message,
            ));
        }
    }

    // Degree tables restricted to well-typed endpoints so that a mistyped
    // edge is reported once, as a type violation.
    let typed = |e: &Edge| -> bool {
        let (want_from, want_to) = e.kind.endpoints();
        graph.node(&e.from).map(Node::kind) == Some(want_from) && graph.node(&e.to).map(Node::kind) == Some(want_to)
    };
    let mut out_deg: BTreeMap<(&NodeId, EdgeKind), usize> = BTreeMap::new();
    let mut in_deg: BTreeMap<(&NodeId, EdgeKind), usize> = BTreeMap::new();
    for e in graph.edges().filter(|e| typed(e)) {
        *out_deg.entry((&e.from, e.kind)).or_default() += 1;
        *in_deg.entry((&e.to, e.kind)).or_default() += 1;
    }
    let out_of = |id: &NodeId, k: EdgeKind| out_deg.get(&(id, k)).copied().unwrap_or(0);
    let in_of = |id: &NodeId, k: EdgeKind| in_deg.get(&(id, k)).copied().unwrap_or(0);

    let decision_lanes: BTreeSet<Lane> = graph.decisions().map(|d| d.role).collect();

    for node in graph.nodes() {
        let id = node.id();
        match node.kind() {
            NodeKind::Evidence => {}
            NodeKind::Action => {
                if needs_evidence(node) && in_of(id, EdgeKind::EvidenceAction) == 0 {
                    violations.push(violation(
                        ViolationKind::Completeness,
                        Location::Node(id.clone()),
                        "action has no grounding evidence",
                    ));
                }
                let targets = out_of(id, EdgeKind::ActionFactor);
                if targets != 1 {
                    violations.push(violation(
                        ViolationKind::Cardinality,
                        Location::Node(id.clone()),
                        format!("action must map to exactly one factor, found {targets}"),
                    ));
                }
            }
            NodeKind::Factor => {
                if in_of(id, EdgeKind::ActionFactor) == 0 {
                    violations.push(violation(
                        ViolationKind::Completeness,
                        Location::Node(id.clone()),
                        "factor is not grounded in any action",
                    ));
                }
                let decisions = out_of(id, EdgeKind::FactorDecision);
                let lane = node.lane().expect("factors have a lane");
                if decisions == 0 && decision_lanes.contains(&lane) {
                    violations.push(violation(
                        ViolationKind::Completeness,
                        Location::Node(id.clone()),
                        "factor is not linked to its lane's decision",
                    ));
                }
                if decisions > 1 {
                    violations.push(violation(
                        ViolationKind::Cardinality,
                        Location::Node(id.clone()),
                        format!("factor must link to one decision, found {decisions}"),
                    ));
                }
                if lane == Lane::Maker && out_of(id, EdgeKind::FactorFactor) > 1 {
                    violations.push(violation(
                        ViolationKind::Cardinality,
                        Location::Node(id.clone()),
                        "maker factor has more than one conflict partner",
                    ));
                }
                if lane == Lane::Checker {
                    let partners = in_of(id, EdgeKind::FactorFactor);
                    if partners > 1 {
                        violations.push(violation(
                            ViolationKind::Cardinality,
                            Location::Node(id.clone()),
                            "checker factor has more than one conflict partner",
                        ));
                    } else if partners == 0 {
                        notes.push(violation(
                            ViolationKind::Cardinality,
                            Location::Node(id.clone()),
                            "checker factor has no maker counterpart",
                        ));
                    }
                }
            }
            NodeKind::Decision => {}
        }
    }

    for lane in [Lane::Maker, Lane::Checker] {
        let ids: Vec<&NodeId> = graph.decisions().filter(|d| d.role == lane).map(|d| &d.id).collect();
        if ids.len() > 1 {
            for id in ids {
                violations.push(violation(
                    ViolationKind::Cardinality,
                    Location::Node(id.clone()),
                    format!("more than one {lane} decision"),
                ));
            }
        }
    }

    for edge in graph.edges().filter(|e| e.kind == EdgeKind::FactorFactor && e.from == e.to) {
        violations.push(violation(
            ViolationKind::Cardinality,
            Location::Edge(edge.from.clone(), edge.to.clone()),
            "self-referential factor_factor edge",
        ));
    }

    ValidationReport::from_parts(violations, notes)
}

/// A targeted regeneration for one violating substructure.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Patch {
    pub remove_edges: Vec<Edge>,
    pub add_nodes: Vec<Node>,
    pub replace_nodes: Vec<Node>,
    pub add_edges: Vec<Edge>,
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.remove_edges.is_empty()
            && self.add_nodes.is_empty()
            && self.replace_nodes.is_empty()
            && self.add_edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("regenerator failed: {0}")]
pub struct RegeneratorError(pub String);

/// Re-extracts the relations around a violation.
pub trait Regenerator {
    fn regenerate(&mut self, graph: &CaseGraph, violation: &Violation) -> Result<Patch, RegeneratorError>;
}

/// Leaves the graph as it is.
pub struct NoopRegenerator;

impl Regenerator for NoopRegenerator {
    fn regenerate(&mut self, _: &CaseGraph, _: &Violation) -> Result<Patch, RegeneratorError> {
        Ok(Patch::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("max_rounds must be at least 1")]
    InvalidRounds,
    #[error("repair did not converge after {rounds} rounds ({} violations remain)", report.violations.len())]
    RepairDiverged { rounds: usize, report: ValidationReport },
    #[error(transparent)]
    RegeneratorFailure(#[from] RegeneratorError),
}

fn apply_patch(
    builder: &mut GraphBuilder,
    patch: Patch,
    scope: &BTreeSet<NodeId>,
) -> Result<(), RegeneratorError> {
    let out_of_scope = |what: &str, id: &NodeId| {
        RegeneratorError(format!("patch {what} `{id}` outside the violating substructure"))
    };
    for edge in &patch.remove_edges {
        if !scope.contains(&edge.from) && !scope.contains(&edge.to) {
            return Err(out_of_scope("removes an edge at", &edge.from));
        }
    }
    for node in &patch.replace_nodes {
        if !scope.contains(node.id()) {
            return Err(out_of_scope("replaces node", node.id()));
        }
    }
    let mut added: BTreeSet<NodeId> = BTreeSet::new();
    for node in &patch.add_nodes {
        if builder.contains(node.id()) {
            return Err(RegeneratorError(format!("patch re-adds existing node `{}`", node.id())));
        }
        added.insert(node.id().clone());
    }
    for edge in &patch.add_edges {
        let touches = |id: &NodeId| scope.contains(id) || added.contains(id);
        if !touches(&edge.from) && !touches(&edge.to) {
            return Err(out_of_scope("adds an edge at", &edge.from));
        }
    }

    let err = |e: GraphError| RegeneratorError(e.to_string());
    for edge in &patch.remove_edges {
        builder.remove_edge(edge.kind, &edge.from, &edge.to);
    }
    for node in patch.replace_nodes {
        builder.replace_node(node).map_err(err)?;
    }
    for node in patch.add_nodes {
        builder.add_node(node).map_err(err)?;
    }
    for edge in patch.add_edges {
        if builder.edges().any(|e| e.kind == edge.kind && e.from == edge.from && e.to == edge.to) {
            continue;
        }
        builder.propose(edge).map_err(err)?;
    }
    Ok(())
}

/// Drive targeted regeneration until `graph` validates or `max_rounds`
/// rounds have been spent. Nodes not named by any violation are carried over
/// untouched.
pub fn repair(
    graph: &CaseGraph,
    report: &ValidationReport,
    regenerator: &mut dyn Regenerator,
    max_rounds: usize,
) -> Result<(CaseGraph, ValidationReport), RepairError> {
    if max_rounds == 0 {
        return Err(RepairError::InvalidRounds);
    }
    let mut current = graph.clone();
    let mut report = report.clone();
    if report.pass {
        return Ok((current, report));
    }
    for _ in 0..max_rounds {
        let mut builder = current.to_builder();
        for v in &report.violations {
            let scope: BTreeSet<NodeId> = v.location.nodes().into_iter().cloned().collect();
            let patch = regenerator.regenerate(&current, v)?;
            apply_patch(&mut builder, patch, &scope)?;
        }
        current = builder.freeze();
        report = validate(&current);
        if report.pass {
            return Ok((current, report));
        }
    }
    Err(RepairError::RepairDiverged { rounds: max_rounds, report })
}

#[cfg(test)]
mod tests;
