//! Typed EAFD case graphs.
//!
//! A [`CaseGraph`] holds the four node layers (evidence, action, factor,
//! decision) of one case, split into a Maker lane and a Checker lane.
//! Evidence nodes form the shared case context and belong to neither lane;
//! every action, factor and decision node belongs to exactly one lane, which
//! is derived from its origin/role.
//!
//! Graphs are immutable once frozen. All mutation goes through
//! [`GraphBuilder`], which type-checks edges on [`GraphBuilder::link`] and
//! accepts raw extractor proposals on [`GraphBuilder::propose`] so that the
//! validator can inspect malformed structure.

mod format;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{from_canonical_text, to_canonical_text, FormatError, GRAPH_FORMAT};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self, EmptyId> {
                let value = value.into();
                if value.trim().is_empty() {
                    return Err(EmptyId(stringify!($name)));
                }
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = EmptyId;
            fn try_from(value: String) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl TryFrom<&str> for $name {
            type Error = EmptyId;
            fn try_from(value: &str) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl std::str::FromStr for $name {
            type Err = EmptyId;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

/// Identifier was empty or whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0} must be non-empty")]
pub struct EmptyId(&'static str);

string_id!(
    /// Node identifier, unique within a graph.
    NodeId
);
string_id!(
    /// Case identifier, unique within a corpus.
    CaseId
);

/// Review tier. Doubles as the lane of a node and the role of a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    Maker,
    Checker,
}

impl fmt::Display for Lane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lane::Maker => "maker",
            Lane::Checker => "checker",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    SellerStatement,
    Document,
    ImageExtract,
    ChatLog,
    SystemRecord,
}

impl SourceType {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceType::SellerStatement => "seller_statement",
            SourceType::Document => "document",
            SourceType::ImageExtract => "image_extract",
            SourceType::ChatLog => "chat_log",
            SourceType::SystemRecord => "system_record",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionOrigin {
    Maker,
    Checker,
    /// Planned online from precedents; lives in the Checker lane.
    Hypothesized,
}

impl ActionOrigin {
    pub fn lane(self) -> Lane {
        match self {
            ActionOrigin::Maker => Lane::Maker,
            ActionOrigin::Checker | ActionOrigin::Hypothesized => Lane::Checker,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Critical,
    #[default]
    Supporting,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    #[default]
    Unevaluated,
    Verified,
    Partial,
    Missing,
}

/// Direction of a factor relative to the appeal: `Support` favours
/// reinstatement, `Contradict` favours upholding the rejection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Support,
    Contradict,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Support => "support",
            Outcome::Contradict => "contradict",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    #[default]
    Actionable,
    Unresolved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approve,
    Reject,
    Rmi,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Approve, Verdict::Reject, Verdict::Rmi];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Approve => "approve",
            Verdict::Reject => "reject",
            Verdict::Rmi => "rmi",
        }
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        match s.trim().to_ascii_lowercase().as_str() {
            "approve" => Some(Verdict::Approve),
            "reject" => Some(Verdict::Reject),
            "rmi" => Some(Verdict::Rmi),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceNode {
    pub id: NodeId,
    pub content: String,
    pub source_ref: String,
    pub source_type: SourceType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionNode {
    pub id: NodeId,
    pub goal: String,
    pub canonical_key: String,
    pub origin: ActionOrigin,
    pub criticality: Criticality,
    pub status: ActionStatus,
    /// Entity bindings for the action's template placeholders.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorNode {
    pub id: NodeId,
    /// Canonical factor key used for cross-case alignment.
    pub key: String,
    pub statement: String,
    pub outcome: Outcome,
    pub origin: Lane,
    pub resolution: Resolution,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionNode {
    pub id: NodeId,
    pub role: Lane,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Evidence(EvidenceNode),
    Action(ActionNode),
    Factor(FactorNode),
    Decision(DecisionNode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Evidence,
    Action,
    Factor,
    Decision,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Evidence => "evidence",
            NodeKind::Action => "action",
            NodeKind::Factor => "factor",
            NodeKind::Decision => "decision",
        })
    }
}

impl Node {
    pub fn id(&self) -> &NodeId {
        match self {
            Node::Evidence(n) => &n.id,
            Node::Action(n) => &n.id,
            Node::Factor(n) => &n.id,
            Node::Decision(n) => &n.id,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Evidence(_) => NodeKind::Evidence,
            Node::Action(_) => NodeKind::Action,
            Node::Factor(_) => NodeKind::Factor,
            Node::Decision(_) => NodeKind::Decision,
        }
    }

    /// Lane of the node; `None` for shared evidence.
    pub fn lane(&self) -> Option<Lane> {
        match self {
            Node::Evidence(_) => None,
            Node::Action(a) => Some(a.origin.lane()),
            Node::Factor(f) => Some(f.origin),
            Node::Decision(d) => Some(d.role),
        }
    }

    pub fn as_evidence(&self) -> Option<&EvidenceNode> {
        match self {
            Node::Evidence(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_action(&self) -> Option<&ActionNode> {
        match self {
            Node::Action(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_factor(&self) -> Option<&FactorNode> {
        match self {
            Node::Factor(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_decision(&self) -> Option<&DecisionNode> {
        match self {
            Node::Decision(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    EvidenceAction,
    ActionFactor,
    FactorDecision,
    FactorFactor,
}

impl EdgeKind {
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::EvidenceAction => (NodeKind::Evidence, NodeKind::Action),
            EdgeKind::ActionFactor => (NodeKind::Action, NodeKind::Factor),
            EdgeKind::FactorDecision => (NodeKind::Factor, NodeKind::Decision),
            EdgeKind::FactorFactor => (NodeKind::Factor, NodeKind::Factor),
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::EvidenceAction => "evidence_action",
            EdgeKind::ActionFactor => "action_factor",
            EdgeKind::FactorDecision => "factor_decision",
            EdgeKind::FactorFactor => "factor_factor",
        })
    }
}

/// Precedent path shape: a Checker action verifying a Maker factor directly
/// (`Verifies`), or a new Checker factor overriding it (`Extends`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Verifies,
    Extends,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Verifies => "verifies",
            PathKind::Extends => "extends",
        }
    }
}

/// A directed edge. Identity is `(kind, from, to)`; `path` is only set on
/// factor-factor conflict edges.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathKind>,
}

impl Edge {
    pub fn new(kind: EdgeKind, from: NodeId, to: NodeId) -> Self {
        Edge { kind, from, to, path: None }
    }

    pub fn evidence_action(evidence: &NodeId, action: &NodeId) -> Self {
        Edge::new(EdgeKind::EvidenceAction, evidence.clone(), action.clone())
    }

    pub fn action_factor(action: &NodeId, factor: &NodeId) -> Self {
        Edge::new(EdgeKind::ActionFactor, action.clone(), factor.clone())
    }

    pub fn factor_decision(factor: &NodeId, decision: &NodeId) -> Self {
        Edge::new(EdgeKind::FactorDecision, factor.clone(), decision.clone())
    }

    pub fn conflict(maker_factor: &NodeId, checker_factor: &NodeId, path: PathKind) -> Self {
        Edge {
            kind: EdgeKind::FactorFactor,
            from: maker_factor.clone(),
            to: checker_factor.clone(),
            path: Some(path),
        }
    }

    fn key(&self) -> (EdgeKind, &NodeId, &NodeId) {
        (self.kind, &self.from, &self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node `{id}` is a {actual}, expected {expected}")]
    WrongNodeKind { id: NodeId, expected: NodeKind, actual: NodeKind },
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate {kind} edge {from} -> {to}")]
    DuplicateEdge { kind: EdgeKind, from: NodeId, to: NodeId },
    #[error("{kind} edge {from} -> {to} is type-incompatible: {reason}")]
    TypeIncompatible { kind: EdgeKind, from: NodeId, to: NodeId, reason: String },
    #[error("{kind} edge {from} -> {to} crosses lanes")]
    CrossLaneViolation { kind: EdgeKind, from: NodeId, to: NodeId },
    #[error("invalid node `{id}`: {reason}")]
    InvalidNode { id: NodeId, reason: String },
}

/// Why an edge is not permitted between two nodes, if it is not.
///
/// Permitted pairs are E->A, A->F, F->D within a lane, F(maker)->F(checker)
/// for conflict edges, and one cross-lane exception: a Checker-lane action may
/// point at a Maker-lane factor (a verifying path).
pub fn edge_rule_violation(edge: &Edge, from: &Node, to: &Node) -> Option<GraphError> {
    let incompatible = |reason: &str| GraphError::TypeIncompatible {
        kind: edge.kind,
        from: edge.from.clone(),
        to: edge.to.clone(),
        reason: reason.to_string(),
    };
    let (want_from, want_to) = edge.kind.endpoints();
    if from.kind() != want_from || to.kind() != want_to {
        return Some(incompatible(&format!(
            "expected {want_from} -> {want_to}, found {} -> {}",
            from.kind(),
            to.kind()
        )));
    }
    if edge.kind != EdgeKind::FactorFactor && edge.path.is_some() {
        return Some(incompatible("path kind is only carried by factor_factor edges"));
    }
    match edge.kind {
        EdgeKind::EvidenceAction => None,
        EdgeKind::ActionFactor => match (from.lane(), to.lane()) {
            (Some(Lane::Maker), Some(Lane::Checker)) => Some(GraphError::CrossLaneViolation {
                kind: edge.kind,
                from: edge.from.clone(),
                to: edge.to.clone(),
            }),
            _ => None,
        },
        EdgeKind::FactorDecision => {
            if from.lane() != to.lane() {
                Some(GraphError::CrossLaneViolation {
                    kind: edge.kind,
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                })
            } else {
                None
            }
        }
        EdgeKind::FactorFactor => {
            if edge.from == edge.to {
                Some(incompatible("self-referential conflict edge"))
            } else if from.lane() != Some(Lane::Maker) || to.lane() != Some(Lane::Checker) {
                Some(incompatible("conflict edges run from a maker factor to a checker factor"))
            } else if edge.path.is_none() {
                Some(incompatible("conflict edge without path kind"))
            } else {
                None
            }
        }
    }
}

fn check_node(node: &Node) -> Result<(), GraphError> {
    let invalid = |reason: &str| GraphError::InvalidNode {
        id: node.id().clone(),
        reason: reason.to_string(),
    };
    match node {
        Node::Evidence(e) => {
            if e.content.trim().is_empty() {
                return Err(invalid("evidence content is empty"));
            }
            if e.source_ref.trim().is_empty() {
                return Err(invalid("evidence source_ref is empty"));
            }
        }
        Node::Action(a) => {
            if a.canonical_key.trim().is_empty() {
                return Err(invalid("action canonical_key is empty"));
            }
        }
        Node::Factor(f) => {
            if f.key.trim().is_empty() {
                return Err(invalid("factor key is empty"));
            }
        }
        Node::Decision(d) => {
            if d.role == Lane::Maker && d.verdict != Verdict::Reject {
                return Err(invalid("maker decisions are always reject"));
            }
            if d.role == Lane::Checker && d.verdict == Verdict::Rmi {
                return Err(invalid("recorded checker decisions are approve or reject"));
            }
        }
    }
    Ok(())
}

/// Frozen dual-lane case graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseGraph {
    case_id: CaseId,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
}

impl CaseGraph {
    pub fn builder(case_id: CaseId) -> GraphBuilder {
        GraphBuilder::new(case_id)
    }

    pub fn case_id(&self) -> &CaseId {
        &self.case_id
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// All nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// All edges in `(kind, from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn evidence(&self) -> impl Iterator<Item = &EvidenceNode> {
        self.nodes.values().filter_map(Node::as_evidence)
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionNode> {
        self.nodes.values().filter_map(Node::as_action)
    }

    pub fn factors(&self) -> impl Iterator<Item = &FactorNode> {
        self.nodes.values().filter_map(Node::as_factor)
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionNode> {
        self.nodes.values().filter_map(Node::as_decision)
    }

    pub fn action(&self, id: &NodeId) -> Option<&ActionNode> {
        self.nodes.get(id).and_then(Node::as_action)
    }

    pub fn factor(&self, id: &NodeId) -> Option<&FactorNode> {
        self.nodes.get(id).and_then(Node::as_factor)
    }

    pub fn evidence_node(&self, id: &NodeId) -> Option<&EvidenceNode> {
        self.nodes.get(id).and_then(Node::as_evidence)
    }

    pub fn decision(&self, lane: Lane) -> Option<&DecisionNode> {
        self.decisions().find(|d| d.role == lane)
    }

    pub fn has_lane(&self, lane: Lane) -> bool {
        self.nodes.values().any(|n| n.lane() == Some(lane))
    }

    /// Maker reject overturned by a Checker approve.
    pub fn is_overturned(&self) -> bool {
        matches!(
            (self.decision(Lane::Maker), self.decision(Lane::Checker)),
            (Some(m), Some(c)) if m.verdict != c.verdict
        )
    }

    pub fn has_edge(&self, kind: EdgeKind, from: &NodeId, to: &NodeId) -> bool {
        self.edges.iter().any(|e| e.key() == (kind, from, to))
    }

    pub fn out_edges<'a>(&'a self, id: &'a NodeId, kind: EdgeKind) -> impl Iterator<Item = &'a Edge> {
        self.edges.iter().filter(move |e| e.kind == kind && &e.from == id)
    }

    pub fn in_edges<'a>(&'a self, id: &'a NodeId, kind: EdgeKind) -> impl Iterator<Item = &'a Edge> {
        self.edges.iter().filter(move |e| e.kind == kind && &e.to == id)
    }

    /// Factor-factor edges.
    pub fn conflict_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::FactorFactor)
    }

    /// Actions pointing at `factor`, in id order.
    pub fn actions_of(&self, factor: &NodeId) -> Vec<&ActionNode> {
        self.in_edges(factor, EdgeKind::ActionFactor)
            .filter_map(|e| self.action(&e.from))
            .collect()
    }

    /// Evidence grounding `action`, in id order.
    pub fn evidence_of(&self, action: &NodeId) -> Vec<&EvidenceNode> {
        self.in_edges(action, EdgeKind::EvidenceAction)
            .filter_map(|e| self.evidence_node(&e.from))
            .collect()
    }

    /// The factor an action points at, if exactly one.
    pub fn factor_of(&self, action: &NodeId) -> Option<&FactorNode> {
        let mut targets = self.out_edges(action, EdgeKind::ActionFactor);
        let first = targets.next()?;
        if targets.next().is_some() {
            return None;
        }
        self.factor(&first.to)
    }

    /// Every action linked to `factor` together with the evidence grounding it.
    pub fn grounding_chain(
        &self,
        factor: &NodeId,
    ) -> Result<Vec<(&ActionNode, Vec<&EvidenceNode>)>, GraphError> {
        let node = self
            .nodes
            .get(factor)
            .ok_or_else(|| GraphError::UnknownNode(factor.clone()))?;
        if node.kind() != NodeKind::Factor {
            return Err(GraphError::WrongNodeKind {
                id: factor.clone(),
                expected: NodeKind::Factor,
                actual: node.kind(),
            });
        }
        Ok(self
            .actions_of(factor)
            .into_iter()
            .map(|a| (a, self.evidence_of(&a.id)))
            .collect())
    }

    /// `(maker factor, checker factor, path kind)` for every conflict edge.
    pub fn conflict_pairs(&self) -> Vec<(&FactorNode, &FactorNode, PathKind)> {
        self.conflict_edges()
            .filter_map(|e| {
                let maker = self.factor(&e.from)?;
                let checker = self.factor(&e.to)?;
                Some((maker, checker, e.path.unwrap_or(PathKind::Extends)))
            })
            .collect()
    }

    /// Type-checked edge insertion returning a new graph; `self` is untouched.
    pub fn link(&self, edge: Edge) -> Result<CaseGraph, GraphError> {
        let mut builder = self.to_builder();
        builder.link(edge)?;
        Ok(builder.freeze())
    }

    pub fn to_builder(&self) -> GraphBuilder {
        GraphBuilder {
            case_id: self.case_id.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
    }
}

/// Single-owner mutable graph under construction.
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    case_id: CaseId,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
}

impl GraphBuilder {
    pub fn new(case_id: CaseId) -> Self {
        GraphBuilder { case_id, nodes: BTreeMap::new(), edges: BTreeSet::new() }
    }

    pub fn case_id(&self) -> &CaseId {
        &self.case_id
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn add_node(&mut self, node: Node) -> Result<&mut Self, GraphError> {
        check_node(&node)?;
        if self.nodes.contains_key(node.id()) {
            return Err(GraphError::DuplicateNode(node.id().clone()));
        }
        if let Node::Decision(d) = &node {
            if self.nodes.values().filter_map(Node::as_decision).any(|o| o.role == d.role) {
                return Err(GraphError::InvalidNode {
                    id: d.id.clone(),
                    reason: format!("{} lane already has a decision", d.role),
                });
            }
        }
        self.nodes.insert(node.id().clone(), node);
        Ok(self)
    }

    /// Replace a node in place, keeping its id and kind.
    pub fn replace_node(&mut self, node: Node) -> Result<&mut Self, GraphError> {
        check_node(&node)?;
        let existing = self
            .nodes
            .get(node.id())
            .ok_or_else(|| GraphError::UnknownNode(node.id().clone()))?;
        if existing.kind() != node.kind() {
            return Err(GraphError::WrongNodeKind {
                id: node.id().clone(),
                expected: existing.kind(),
                actual: node.kind(),
            });
        }
        self.nodes.insert(node.id().clone(), node);
        Ok(self)
    }

    pub fn set_action_status(&mut self, id: &NodeId, status: ActionStatus) -> Result<(), GraphError> {
        match self.nodes.get_mut(id) {
            Some(Node::Action(a)) => {
                a.status = status;
                Ok(())
            }
            Some(other) => Err(GraphError::WrongNodeKind {
                id: id.clone(),
                expected: NodeKind::Action,
                actual: other.kind(),
            }),
            None => Err(GraphError::UnknownNode(id.clone())),
        }
    }

    pub fn set_factor_resolution(&mut self, id: &NodeId, resolution: Resolution) -> Result<(), GraphError> {
        match self.nodes.get_mut(id) {
            Some(Node::Factor(f)) => {
                f.resolution = resolution;
                Ok(())
            }
            Some(other) => Err(GraphError::WrongNodeKind {
                id: id.clone(),
                expected: NodeKind::Factor,
                actual: other.kind(),
            }),
            None => Err(GraphError::UnknownNode(id.clone())),
        }
    }

    fn endpoints(&self, edge: &Edge) -> Result<(&Node, &Node), GraphError> {
        let from = self
            .nodes
            .get(&edge.from)
            .ok_or_else(|| GraphError::UnknownNode(edge.from.clone()))?;
        let to = self
            .nodes
            .get(&edge.to)
            .ok_or_else(|| GraphError::UnknownNode(edge.to.clone()))?;
        Ok((from, to))
    }

    fn check_duplicate(&self, edge: &Edge) -> Result<(), GraphError> {
        if self.edges.iter().any(|e| e.key() == edge.key()) {
            return Err(GraphError::DuplicateEdge {
                kind: edge.kind,
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        }
        Ok(())
    }

    /// Add an edge after checking endpoint types and lanes. Cardinality is
    /// left to the validator. On error the builder is unchanged.
    pub fn link(&mut self, edge: Edge) -> Result<&mut Self, GraphError> {
        let (from, to) = self.endpoints(&edge)?;
        if let Some(err) = edge_rule_violation(&edge, from, to) {
            return Err(err);
        }
        self.check_duplicate(&edge)?;
        self.edges.insert(edge);
        Ok(self)
    }

    /// Add an edge proposed by an extractor without type checks. Endpoints
    /// must exist; everything else is the validator's job.
    pub fn propose(&mut self, edge: Edge) -> Result<&mut Self, GraphError> {
        self.endpoints(&edge)?;
        self.check_duplicate(&edge)?;
        self.edges.insert(edge);
        Ok(self)
    }

    pub fn remove_edge(&mut self, kind: EdgeKind, from: &NodeId, to: &NodeId) -> bool {
        let found = self.edges.iter().find(|e| e.key() == (kind, from, to)).cloned();
        match found {
            Some(edge) => self.edges.remove(&edge),
            None => false,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn freeze(self) -> CaseGraph {
        CaseGraph { case_id: self.case_id, nodes: self.nodes, edges: self.edges }
    }
}

#[cfg(test)]
mod tests;
