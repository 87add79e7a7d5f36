//! Break a valid graph, list the violations, then repair it through a
//! regenerator that re-derives only the broken relations.

use eafd::fixtures::d2_graph;
use eafd::graph::{CaseGraph, Edge, EdgeKind, NodeId};
use eafd::validate::{repair, validate, Location, Patch, Regenerator, RegeneratorError, Violation, DEFAULT_MAX_ROUNDS};

/// Restores edges from a reference copy of the graph, as a re-extraction
/// of the source text would.
struct FromReference(CaseGraph);

impl Regenerator for FromReference {
    fn regenerate(&mut self, graph: &CaseGraph, v: &Violation) -> Result<Patch, RegeneratorError> {
        let Location::Node(node) = &v.location else {
            return Ok(Patch::default());
        };
        let add_edges: Vec<Edge> = self
            .0
            .edges()
            .filter(|e| (&e.from == node || &e.to == node) && !graph.has_edge(e.kind, &e.from, &e.to))
            .cloned()
            .collect();
        Ok(Patch { add_edges, ..Patch::default() })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = d2_graph();
    let id = |s: &str| NodeId::new(s).expect("literal");
    let mut b = reference.to_builder();
    b.remove_edge(EdgeKind::ActionFactor, &id("c-a1"), &id("c-f1"));
    b.remove_edge(EdgeKind::EvidenceAction, &id("e1"), &id("m-a1"));
    b.remove_edge(EdgeKind::EvidenceAction, &id("e2"), &id("m-a1"));
    let broken = b.freeze();

    let report = validate(&broken);
    print!("before repair:\n{}", report.to_text());

    let (repaired, after) = repair(&broken, &report, &mut FromReference(reference.clone()), DEFAULT_MAX_ROUNDS)?;
    print!("after repair:\n{}", after.to_text());
    println!("identical to the reference: {}", repaired == reference);
    println!("{}", after.to_report_v1());
    Ok(())
}
