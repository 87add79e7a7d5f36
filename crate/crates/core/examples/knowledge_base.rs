//! Build a persistent knowledge base from a generated corpus, reopen it and
//! run top-k retrieval for a free-text query and for a stored case.
//!
//! Usage: `cargo run --example knowledge_base [kb-dir]`; a temporary
//! directory is used when none is given.

use std::sync::Arc;

use eafd::eval::{generate_corpus, CorpusSpec};
use eafd::graph::CaseId;
use eafd::kb::{embed, summarize, CaseSummary, KnowledgeBase, DEFAULT_DIMENSION};
use eafd::reasoner::Pipeline;

fn show(pipeline: &Pipeline, summary: &CaseSummary) -> Result<(), Box<dyn std::error::Error>> {
    let v = embed(summary, pipeline.embedder.as_ref())?;
    for s in pipeline.kb.retrieve(&v, 3)? {
        let verdict = s.entry.verdict().map(|v| v.as_str()).unwrap_or("-");
        println!("  {:.4} {} {verdict} [{}]", s.similarity, s.case_id(), s.entry.category());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp;
    let dir = match std::env::args().nth(1) {
        Some(d) => std::path::PathBuf::from(d),
        None => {
            tmp = std::env::temp_dir().join(format!("eafd-kb-example-{}", std::process::id()));
            tmp.clone()
        }
    };
    let corpus = generate_corpus(&CorpusSpec::new(60, 3))?;
    {
        let pipeline = Pipeline::new(Arc::new(KnowledgeBase::open(&dir, Some(DEFAULT_DIMENSION))?));
        for r in &corpus {
            if !pipeline.kb.contains(&r.case_id) {
                pipeline.ingest(r)?;
            }
        }
        println!("indexed {} cases into {}", pipeline.kb.len(), dir.display());
    }

    // Reopening replays the append-only store.
    let pipeline = Pipeline::new(Arc::new(KnowledgeBase::open(&dir, None)?));
    println!("{}", serde_json::to_string_pretty(&pipeline.kb.stats())?);

    let text = "seller disputes an expired product complaint with supplier documentation";
    println!("query: {text}");
    show(&pipeline, &CaseSummary {
        case_id: CaseId::new("query")?,
        violation_category: String::new(),
        core_rationale: text.into(),
        rendered: text.into(),
    })?;
    let stored = &corpus[7];
    println!("query: case {}", stored.case_id);
    show(&pipeline, &summarize(&stored.to_query(), pipeline.summarizer.as_ref())?)?;

    if std::env::args().nth(1).is_none() {
        std::fs::remove_dir_all(&dir)?;
    }
    Ok(())
}
