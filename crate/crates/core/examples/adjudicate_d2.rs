//! The staged expired-product appeal: adjudicate the initial filing, then
//! supply evidence in three rounds until the case resolves.

use std::sync::Arc;

use eafd::fixtures::{d2_precedents, d2_query, d2_stages};
use eafd::graph::ActionOrigin;
use eafd::kb::{KnowledgeBase, DEFAULT_DIMENSION};
use eafd::reasoner::{Adjudication, Pipeline, TraceStep};

fn report(round: usize, adj: &Adjudication) {
    let o = &adj.outcome;
    println!("round {round}: {} by rule {} with {} evidence items", o.verdict, o.rule.as_str(), adj.graph.evidence().count());
    for a in adj.graph.actions().filter(|a| a.origin == ActionOrigin::Hypothesized) {
        println!("  {:<28} {:?} {:?}", a.canonical_key, a.criticality, a.status);
    }
    for r in &o.recommendations {
        println!("  request: {}", r.request_text);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pipeline = Pipeline::new(Arc::new(KnowledgeBase::in_memory(DEFAULT_DIMENSION)));
    for r in d2_precedents() {
        pipeline.ingest(&r)?;
    }
    let mut adj = pipeline.adjudicate(&d2_query())?;
    for step in &adj.outcome.trace.steps {
        if let TraceStep::Refinement { precedents } = step {
            let ids: Vec<&str> = precedents.iter().map(|p| p.case_id.as_str()).collect();
            println!("precedents: {ids:?}");
        }
    }
    report(0, &adj);
    for (round, stage) in d2_stages().into_iter().enumerate().skip(1) {
        let evidence = stage.iter().map(|i| i.to_node()).collect::<Result<Vec<_>, _>>()?;
        adj = pipeline.respond(&adj, evidence)?;
        report(round, &adj);
    }
    println!("{}", adj.outcome.trace.to_json());
    Ok(())
}
