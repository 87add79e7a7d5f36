//! Generate a seeded corpus, index the older 80%, adjudicate the rest and
//! compare against the majority-vote baseline.

use std::sync::Arc;

use eafd::eval::{
    baseline_cbr_majority, chronological_split, evaluate, generate_corpus, ground_truth, index_training,
    metrics_from_labels, CorpusSpec,
};
use eafd::kb::{KnowledgeBase, DEFAULT_DIMENSION, DEFAULT_K};
use eafd::reasoner::Pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let corpus = generate_corpus(&CorpusSpec::new(200, seed))?;
    let (train, test) = chronological_split(&corpus, 0.8);

    let pipeline = Pipeline::new(Arc::new(KnowledgeBase::in_memory(DEFAULT_DIMENSION)));
    index_training(&pipeline, &train)?;
    let run = evaluate(&pipeline, &test)?;

    let mut truth = Vec::new();
    let mut cbr = Vec::new();
    for r in &test {
        truth.push(ground_truth(r)?);
        cbr.push(baseline_cbr_majority(&r.to_query(), &pipeline, DEFAULT_K)?);
    }
    let baseline = metrics_from_labels(&truth, &cbr)?;

    for p in run.predictions.iter().filter(|p| p.label != p.predicted) {
        println!("miss {} label={} predicted={}", p.case_id, p.label, p.predicted);
    }
    println!("{}", run.report.to_text());
    println!("pipeline accuracy {:.3}, majority-vote accuracy {:.3}", run.report.accuracy, baseline.accuracy);
    Ok(())
}
