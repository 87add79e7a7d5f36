//! Shared helpers: random valid graphs, structural mutators, a brute-force
//! structural checker and an oracle regenerator.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use eafd::graph::{
    ActionNode, ActionOrigin, ActionStatus, CaseGraph, CaseId, Criticality, DecisionNode, Edge, EdgeKind,
    EvidenceNode, FactorNode, Lane, Node, NodeId, NodeKind, Outcome, PathKind, Resolution, SourceType, Verdict,
};
use eafd::validate::{Location, Patch, Regenerator, RegeneratorError, Violation, ViolationKind};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub fn id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

pub fn evidence(name: &str, content: &str) -> Node {
    Node::Evidence(EvidenceNode {
        id: id(name),
        content: content.into(),
        source_ref: format!("test/{name}"),
        source_type: SourceType::Document,
    })
}

pub fn action(name: &str, key: &str, origin: ActionOrigin, criticality: Criticality, status: ActionStatus) -> Node {
    Node::Action(ActionNode {
        id: id(name),
        goal: key.replace('_', " "),
        canonical_key: key.into(),
        origin,
        criticality,
        status,
        slots: BTreeMap::new(),
    })
}

pub fn factor(name: &str, key: &str, lane: Lane, outcome: Outcome) -> Node {
    Node::Factor(FactorNode {
        id: id(name),
        key: key.into(),
        statement: key.replace('_', " "),
        outcome,
        origin: lane,
        resolution: if lane == Lane::Maker { Resolution::Actionable } else { Resolution::Unresolved },
    })
}

pub fn decision(name: &str, role: Lane, verdict: Verdict) -> Node {
    Node::Decision(DecisionNode { id: id(name), role, verdict })
}

const WORDS: &[&str] = &["ledger", "invoice", "photo", "courier", "batch", "receipt", "audit", "label", "serial", "permit"];

fn words<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A random dual-lane graph that satisfies every structural rule: shared
/// evidence, a Maker lane with 2 to 4 factors, and usually a Checker lane
/// with new factors, conflict edges, verifying actions on Maker factors and
/// evidence-less hypothesized actions.
pub fn random_valid_graph<R: Rng>(rng: &mut R, case: usize) -> CaseGraph {
    let mut b = CaseGraph::builder(CaseId::new(format!("g{case}")).unwrap());
    let n_ev = rng.random_range(2..=6);
    let ev: Vec<NodeId> = (1..=n_ev).map(|i| id(&format!("e{i}"))).collect();
    for e in &ev {
        let n = rng.random_range(1..=4);
        b.add_node(evidence(e.as_str(), &words(rng, n))).unwrap();
    }
    let ground = |b: &mut eafd::graph::GraphBuilder, rng: &mut R, a: &NodeId| {
        let mut picks = ev.clone();
        picks.shuffle(rng);
        for e in picks.iter().take(rng.random_range(1..=2)) {
            b.link(Edge::evidence_action(e, a)).unwrap();
        }
    };
    let outcome = |rng: &mut R| if rng.random_bool(0.5) { Outcome::Support } else { Outcome::Contradict };
    let crit = |rng: &mut R| if rng.random_bool(0.5) { Criticality::Critical } else { Criticality::Supporting };

    b.add_node(decision("m-d", Lane::Maker, Verdict::Reject)).unwrap();
    let n_mf = rng.random_range(2..=4);
    let mut maker_factors = Vec::new();
    for i in 1..=n_mf {
        let f = id(&format!("m-f{i}"));
        let o = outcome(rng);
        b.add_node(factor(f.as_str(), &format!("maker_factor_{i}"), Lane::Maker, o)).unwrap();
        b.link(Edge::factor_decision(&f, &id("m-d"))).unwrap();
        for j in 1..=rng.random_range(1..=2) {
            let a = id(&format!("m-a{i}-{j}"));
            let c = crit(rng);
            b.add_node(action(a.as_str(), &format!("maker_check_{i}_{j}"), ActionOrigin::Maker, c, ActionStatus::Unevaluated))
                .unwrap();
            b.link(Edge::action_factor(&a, &f)).unwrap();
            ground(&mut b, rng, &a);
        }
        maker_factors.push(f);
    }

    if rng.random_bool(0.85) {
        let verdict = if rng.random_bool(0.5) { Verdict::Approve } else { Verdict::Reject };
        b.add_node(decision("c-d", Lane::Checker, verdict)).unwrap();
        let mut partners = maker_factors.clone();
        partners.shuffle(rng);
        let n_cf = rng.random_range(0..=3usize).min(n_mf);
        for i in 1..=n_cf {
            let f = id(&format!("c-f{i}"));
            let o = outcome(rng);
            b.add_node(factor(f.as_str(), &format!("checker_factor_{i}"), Lane::Checker, o)).unwrap();
            b.link(Edge::factor_decision(&f, &id("c-d"))).unwrap();
            for j in 1..=rng.random_range(1..=2) {
                let a = id(&format!("c-a{i}-{j}"));
                let c = crit(rng);
                b.add_node(action(a.as_str(), &format!("checker_check_{i}_{j}"), ActionOrigin::Checker, c, ActionStatus::Verified))
                    .unwrap();
                b.link(Edge::action_factor(&a, &f)).unwrap();
                ground(&mut b, rng, &a);
            }
            if rng.random_bool(0.3) {
                let a = id(&format!("h-a{i}"));
                let c = crit(rng);
                b.add_node(action(a.as_str(), &format!("hypothesis_{i}"), ActionOrigin::Hypothesized, c, ActionStatus::Missing))
                    .unwrap();
                b.link(Edge::action_factor(&a, &f)).unwrap();
            }
            if rng.random_bool(0.7) {
                b.link(Edge::conflict(&partners[i - 1], &f, PathKind::Extends)).unwrap();
            }
        }
        // Verifying (Path I) actions: Checker-lane actions on Maker factors.
        for (k, mf) in partners.iter().enumerate().skip(n_cf) {
            if rng.random_bool(0.5) {
                let a = id(&format!("v-a{k}"));
                let c = crit(rng);
                b.add_node(action(a.as_str(), &format!("verify_maker_{k}"), ActionOrigin::Checker, c, ActionStatus::Verified))
                    .unwrap();
                b.link(Edge::action_factor(&a, mf)).unwrap();
                ground(&mut b, rng, &a);
            }
        }
    }
    b.freeze()
}

/// Structural mutation operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    InvalidDirection,
    OrphanFactor,
    OrphanAction,
    MultiFactorAction,
    SelfReferentialConflict,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::InvalidDirection,
        Mutation::OrphanFactor,
        Mutation::OrphanAction,
        Mutation::MultiFactorAction,
        Mutation::SelfReferentialConflict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::InvalidDirection => "invalid direction",
            Mutation::OrphanFactor => "orphan factor",
            Mutation::OrphanAction => "orphan action",
            Mutation::MultiFactorAction => "multi-factor action",
            Mutation::SelfReferentialConflict => "self-referential F-F",
        }
    }
}

/// Apply one mutation; returns the mutated graph and the violation it must
/// produce.
pub fn mutate<R: Rng>(graph: &CaseGraph, op: Mutation, rng: &mut R) -> (CaseGraph, ViolationKind, Location) {
    let mut b = graph.to_builder();
    match op {
        Mutation::InvalidDirection => {
            let candidates: Vec<&Edge> = graph.edges().filter(|e| e.kind != EdgeKind::FactorFactor).collect();
            let e = (*candidates.choose(rng).unwrap()).clone();
            b.remove_edge(e.kind, &e.from, &e.to);
            b.propose(Edge::new(e.kind, e.to.clone(), e.from.clone())).unwrap();
            (b.freeze(), ViolationKind::TypeCompat, Location::Edge(e.to, e.from))
        }
        Mutation::OrphanFactor => {
            let lane = if graph.decision(Lane::Checker).is_some() && rng.random_bool(0.5) { Lane::Checker } else { Lane::Maker };
            let f = id("x-f");
            b.add_node(factor("x-f", "orphan_factor", lane, Outcome::Support)).unwrap();
            let d = graph.decision(lane).unwrap().id.clone();
            b.link(Edge::factor_decision(&f, &d)).unwrap();
            (b.freeze(), ViolationKind::Completeness, Location::Node(f))
        }
        Mutation::OrphanAction => {
            let a = id("x-a");
            b.add_node(action("x-a", "orphan_action", ActionOrigin::Maker, Criticality::Supporting, ActionStatus::Unevaluated))
                .unwrap();
            let e = graph.evidence().next().unwrap().id.clone();
            b.link(Edge::evidence_action(&e, &a)).unwrap();
            (b.freeze(), ViolationKind::Cardinality, Location::Node(a))
        }
        Mutation::MultiFactorAction => {
            let maker_actions: Vec<&ActionNode> = graph.actions().filter(|a| a.origin == ActionOrigin::Maker).collect();
            let a = *maker_actions.choose(rng).unwrap();
            let own = graph.factor_of(&a.id).unwrap().id.clone();
            let others: Vec<&FactorNode> = graph.factors().filter(|f| f.origin == Lane::Maker && f.id != own).collect();
            let other = *others.choose(rng).unwrap();
            b.link(Edge::action_factor(&a.id, &other.id)).unwrap();
            (b.freeze(), ViolationKind::Cardinality, Location::Node(a.id.clone()))
        }
        Mutation::SelfReferentialConflict => {
            let fs: Vec<&FactorNode> = graph.factors().collect();
            let f = (*fs.choose(rng).unwrap()).id.clone();
            b.propose(Edge::conflict(&f, &f, PathKind::Extends)).unwrap();
            (b.freeze(), ViolationKind::Cardinality, Location::Edge(f.clone(), f))
        }
    }
}

fn lane_of(node: &Node) -> Option<Lane> {
    match node {
        Node::Evidence(_) => None,
        Node::Action(a) => Some(if a.origin == ActionOrigin::Maker { Lane::Maker } else { Lane::Checker }),
        Node::Factor(f) => Some(f.origin),
        Node::Decision(d) => Some(d.role),
    }
}

fn kind_of(node: &Node) -> NodeKind {
    match node {
        Node::Evidence(_) => NodeKind::Evidence,
        Node::Action(_) => NodeKind::Action,
        Node::Factor(_) => NodeKind::Factor,
        Node::Decision(_) => NodeKind::Decision,
    }
}

fn wants(kind: EdgeKind) -> (NodeKind, NodeKind) {
    match kind {
        EdgeKind::EvidenceAction => (NodeKind::Evidence, NodeKind::Action),
        EdgeKind::ActionFactor => (NodeKind::Action, NodeKind::Factor),
        EdgeKind::FactorDecision => (NodeKind::Factor, NodeKind::Decision),
        EdgeKind::FactorFactor => (NodeKind::Factor, NodeKind::Factor),
    }
}

/// Every structural violation, found by scanning the whole edge list for
/// each node. Returns (kind, location) pairs.
pub fn brute_force(graph: &CaseGraph) -> BTreeSet<(ViolationKind, Location)> {
    let nodes: Vec<&Node> = graph.nodes().collect();
    let edges: Vec<&Edge> = graph.edges().collect();
    let node = |nid: &NodeId| nodes.iter().copied().find(|n| n.id() == nid).unwrap();
    let mut out = BTreeSet::new();

    let well_typed = |e: &Edge| {
        let (f, t) = wants(e.kind);
        kind_of(node(&e.from)) == f && kind_of(node(&e.to)) == t
    };
    for e in &edges {
        let (from, to) = (node(&e.from), node(&e.to));
        let bad = if !well_typed(e) {
            true
        } else if e.path.is_some() && e.kind != EdgeKind::FactorFactor {
            true
        } else {
            match e.kind {
                EdgeKind::EvidenceAction => false,
                EdgeKind::ActionFactor => lane_of(from) == Some(Lane::Maker) && lane_of(to) == Some(Lane::Checker),
                EdgeKind::FactorDecision => lane_of(from) != lane_of(to),
                EdgeKind::FactorFactor => {
                    e.from == e.to
                        || lane_of(from) != Some(Lane::Maker)
                        || lane_of(to) != Some(Lane::Checker)
                        || e.path.is_none()
                }
            }
        };
        if bad {
            out.insert((ViolationKind::TypeCompat, Location::Edge(e.from.clone(), e.to.clone())));
        }
        if e.kind == EdgeKind::FactorFactor && e.from == e.to {
            out.insert((ViolationKind::Cardinality, Location::Edge(e.from.clone(), e.to.clone())));
        }
    }

    let count = |pred: &dyn Fn(&Edge) -> bool| edges.iter().filter(|e| well_typed(e) && pred(e)).count();
    let lanes_with_decision: BTreeSet<Lane> =
        nodes.iter().filter_map(|n| if let Node::Decision(d) = n { Some(d.role) } else { None }).collect();

    for n in &nodes {
        let nid = n.id().clone();
        match n {
            Node::Action(a) => {
                let exempt = a.origin == ActionOrigin::Hypothesized && a.status != ActionStatus::Verified;
                if !exempt && count(&|e| e.kind == EdgeKind::EvidenceAction && e.to == nid) == 0 {
                    out.insert((ViolationKind::Completeness, Location::Node(nid.clone())));
                }
                if count(&|e| e.kind == EdgeKind::ActionFactor && e.from == nid) != 1 {
                    out.insert((ViolationKind::Cardinality, Location::Node(nid.clone())));
                }
            }
            Node::Factor(f) => {
                if count(&|e| e.kind == EdgeKind::ActionFactor && e.to == nid) == 0 {
                    out.insert((ViolationKind::Completeness, Location::Node(nid.clone())));
                }
                let to_decision = count(&|e| e.kind == EdgeKind::FactorDecision && e.from == nid);
                if to_decision == 0 && lanes_with_decision.contains(&f.origin) {
                    out.insert((ViolationKind::Completeness, Location::Node(nid.clone())));
                }
                let conflicts_out = count(&|e| e.kind == EdgeKind::FactorFactor && e.from == nid);
                let conflicts_in = count(&|e| e.kind == EdgeKind::FactorFactor && e.to == nid);
                if to_decision > 1
                    || (f.origin == Lane::Maker && conflicts_out > 1)
                    || (f.origin == Lane::Checker && conflicts_in > 1)
                {
                    out.insert((ViolationKind::Cardinality, Location::Node(nid.clone())));
                }
            }
            Node::Decision(d) => {
                let same = nodes.iter().filter(|m| matches!(m, Node::Decision(o) if o.role == d.role)).count();
                if same > 1 {
                    out.insert((ViolationKind::Cardinality, Location::Node(nid.clone())));
                }
            }
            Node::Evidence(_) => {}
        }
    }
    out
}

pub fn report_pairs(violations: &[Violation]) -> BTreeSet<(ViolationKind, Location)> {
    violations.iter().map(|v| (v.kind, v.location.clone())).collect()
}

/// Regenerator that knows the pre-mutation graph and re-extracts the
/// relations around each violation from it.
pub struct OracleRegenerator {
    pub original: CaseGraph,
    pub calls: usize,
}

impl OracleRegenerator {
    pub fn new(original: CaseGraph) -> Self {
        OracleRegenerator { original, calls: 0 }
    }
}

impl Regenerator for OracleRegenerator {
    fn regenerate(&mut self, graph: &CaseGraph, violation: &Violation) -> Result<Patch, RegeneratorError> {
        self.calls += 1;
        let scope: BTreeSet<&NodeId> = violation.location.nodes().into_iter().collect();
        let touches = |e: &Edge| scope.contains(&e.from) || scope.contains(&e.to);
        let key = |e: &Edge| (e.kind, e.from.clone(), e.to.clone());
        let original: BTreeSet<_> = self.original.edges().map(key).collect();
        let current: BTreeSet<_> = graph.edges().map(key).collect();
        let mut patch = Patch::default();
        // Edges among nodes the original knew about are restored exactly;
        // edges of newly introduced nodes are kept.
        let known = |e: &Edge| self.original.contains(&e.from) && self.original.contains(&e.to);
        patch.remove_edges =
            graph.edges().filter(|e| touches(e) && known(e) && !original.contains(&key(e))).cloned().collect();
        patch.add_edges = self
            .original
            .edges()
            .filter(|e| touches(e) && !current.contains(&key(e)) && graph.contains(&e.from) && graph.contains(&e.to))
            .cloned()
            .collect();
        for nid in scope.iter().filter(|n| !self.original.contains(n)) {
            match graph.node(nid) {
                Some(Node::Factor(f)) => {
                    let a = id(&format!("{nid}-regen"));
                    let origin = if f.origin == Lane::Maker { ActionOrigin::Maker } else { ActionOrigin::Checker };
                    patch.add_nodes.push(action(a.as_str(), "regenerated_check", origin, Criticality::Supporting, ActionStatus::Unevaluated));
                    let e = self.original.evidence().next().expect("graphs carry evidence").id.clone();
                    patch.add_edges.push(Edge::evidence_action(&e, &a));
                    patch.add_edges.push(Edge::action_factor(&a, nid));
                }
                Some(Node::Action(_)) => {
                    let f = self.original.factors().find(|f| f.origin == Lane::Maker).expect("maker factor").id.clone();
                    patch.add_edges.push(Edge::action_factor(nid, &f));
                }
                _ => {}
            }
        }
        Ok(patch)
    }
}
