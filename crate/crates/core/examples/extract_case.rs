//! Parse an annotated case record and extract its dual-lane graph.
//!
//! Usage: `cargo run --example extract_case [record.json]`; without a path
//! the bundled expired-product appeal is used.

use eafd::fixtures::d2_record;
use eafd::graph::to_canonical_text;
use eafd::ingest::{extract_graph, parse_annotations, parse_case_record, strip_annotations, AnnotationExtractor};
use eafd::validate::validate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let record = match std::env::args().nth(1) {
        Some(path) => parse_case_record(&std::fs::read(path)?)?,
        None => d2_record(),
    };
    println!("case {} ({}), {} evidence items", record.case_id, record.violation_category, record.evidence_items.len());
    println!("maker rationale: {}", strip_annotations(&record.maker_record.analysis));
    for s in parse_annotations(&record.maker_record.analysis)? {
        println!("  annotated: {}", s.render());
    }
    if let Some(checker) = &record.checker_record {
        println!("checker verdict {}, withheld evidence {:?}", checker.verdict, record.withheld_evidence()?);
    }

    let graph = extract_graph(&record, &AnnotationExtractor)?;
    let report = validate(&graph);
    println!("{} nodes, {} edges, valid: {}", graph.node_count(), graph.edge_count(), report.pass);
    print!("{}", to_canonical_text(&graph));
    Ok(())
}
