//! Offline evaluation: synthetic corpora, chronological splits, metrics and
//! baselines.

pub mod baseline;
pub mod generate;
pub mod metrics;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CaseId, Verdict};
use crate::ingest::{parse_annotations, CaseRecord};
use crate::reasoner::{Pipeline, PipelineError, TraceStep};

pub use baseline::{
    baseline_cbr_majority, run_baseline, Baseline, baseline_model_direct, majority_verdict, ClientError, DirectOptions, ModelClient, Prompt,
    ScriptedClient,
};
pub use generate::{action_count, generate_corpus, topics, CorpusSpec, Topic};
pub use metrics::{
    action_hit_rate, action_hits, confusion, cumulative_alignment, metrics_from_confusion, metrics_from_label_text,
    metrics_from_labels, ClassMetrics, HitRates, MetricsReport, METRICS_FORMAT,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("split hygiene violated: {0}")]
    Hygiene(String),
    #[error("case `{case_id}` failed: {source}")]
    Pipeline {
        case_id: CaseId,
        #[source]
        source: PipelineError,
    },
    #[error("case `{0}` has no checker record to label it")]
    Unlabelled(CaseId),
    #[error("case `{case_id}` baseline failed: {message}")]
    Baseline { case_id: CaseId, message: String },
}

/// Ground-truth label of a historical record: rmi when some critical
/// Checker action rests only on evidence withheld from the case file,
/// otherwise the Checker verdict.
pub fn ground_truth(record: &CaseRecord) -> Result<Verdict, EvalError> {
    let checker = record.checker_record.as_ref().ok_or_else(|| EvalError::Unlabelled(record.case_id.clone()))?;
    let statements = parse_annotations(&checker.analysis).unwrap_or_default();
    let ungroundable = statements.iter().any(|s| {
        s.criticality_or_default() == crate::graph::Criticality::Critical
            && !s.evidence.is_empty()
            && s.evidence.iter().all(|r| r.withheld)
    });
    Ok(if ungroundable { Verdict::Rmi } else { checker.verdict })
}

/// Canonical keys of the Checker-documented actions.
pub fn checker_action_keys(record: &CaseRecord) -> Vec<String> {
    record
        .checker_record
        .as_ref()
        .and_then(|c| parse_annotations(&c.analysis).ok())
        .unwrap_or_default()
        .iter()
        .map(|s| crate::text::canonical_key(&s.action_key))
        .collect()
}

/// Sort by timestamp and cut at `floor(n * train_fraction)`.
pub fn chronological_split(records: &[CaseRecord], train_fraction: f64) -> (Vec<CaseRecord>, Vec<CaseRecord>) {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.case_id.cmp(&b.case_id)));
    let cut = ((sorted.len() as f64) * train_fraction).floor() as usize;
    let test = sorted.split_off(cut.min(sorted.len()));
    (sorted, test)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub case_id: CaseId,
    pub timestamp: u64,
    pub label: Verdict,
    pub predicted: Verdict,
    pub planned_actions: Vec<String>,
    pub checker_actions: Vec<String>,
    pub overturned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub predictions: Vec<Prediction>,
}

/// Canonical keys planned by the selected hypotheses of an adjudication.
pub fn planned_actions(steps: &[TraceStep]) -> Vec<String> {
    steps
        .iter()
        .filter_map(|s| match s {
            TraceStep::Hypothesis { selected: true, actions, .. } => Some(actions.clone()),
            _ => None,
        })
        .flatten()
        .collect()
}

/// Metrics (with alignment curve and hit rates) from finished predictions.
pub fn report_from_predictions(predictions: &[Prediction]) -> Result<MetricsReport, EvalError> {
    let truth: Vec<Verdict> = predictions.iter().map(|p| p.label).collect();
    let pred: Vec<Verdict> = predictions.iter().map(|p| p.predicted).collect();
    let mut report = metrics_from_labels(&truth, &pred)?;
    let stream: Vec<(u64, bool)> = predictions.iter().map(|p| (p.timestamp, p.label == p.predicted)).collect();
    report.cumulative_alignment = cumulative_alignment(&stream);
    let pool = |filter: &dyn Fn(&Prediction) -> bool| {
        let (mut hits, mut total) = (0u64, 0u64);
        for p in predictions.iter().filter(|p| filter(p)) {
            let (h, t) = action_hits(&p.planned_actions, &p.checker_actions);
            hits += h;
            total += t;
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    };
    report.action_hit_rate = Some(HitRates {
        overall: pool(&|_| true),
        overturn: pool(&|p| p.overturned),
        non_overturn: pool(&|p| !p.overturned),
    });
    Ok(report)
}

/// Adjudicate every held-out record as a query and score it.
///
/// Test cases must not be indexed in the pipeline's knowledge base, and no
/// indexed case may be later than any test case.
pub fn evaluate(pipeline: &Pipeline, test_records: &[CaseRecord]) -> Result<Evaluation, EvalError> {
    let indexed = pipeline.kb.snapshot();
    let latest_train = indexed.iter().map(|e| e.timestamp).max();
    let ids: BTreeSet<&CaseId> = indexed.iter().map(|e| e.case_id()).collect();
    for r in test_records {
        if ids.contains(&r.case_id) {
            return Err(EvalError::Hygiene(format!("test case `{}` is indexed", r.case_id)));
        }
        if latest_train.is_some_and(|t| r.timestamp < t) {
            return Err(EvalError::Hygiene(format!("test case `{}` precedes indexed cases", r.case_id)));
        }
    }

    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8).max(1);
    let chunk = test_records.len().div_ceil(workers).max(1);
    let results: Vec<Result<Prediction, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = test_records
            .chunks(chunk)
            .map(|slice| scope.spawn(move || slice.iter().map(|r| predict(pipeline, r)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut predictions = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    predictions.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.case_id.cmp(&b.case_id)));
    let report = report_from_predictions(&predictions)?;
    Ok(Evaluation { report, predictions })
}

fn predict(pipeline: &Pipeline, record: &CaseRecord) -> Result<Prediction, EvalError> {
    let label = ground_truth(record)?;
    let adj = pipeline
        .adjudicate(&record.to_query())
        .map_err(|source| EvalError::Pipeline { case_id: record.case_id.clone(), source })?;
    Ok(Prediction {
        case_id: record.case_id.clone(),
        timestamp: record.timestamp,
        label,
        predicted: adj.verdict(),
        planned_actions: planned_actions(&adj.outcome.trace.steps),
        checker_actions: checker_action_keys(record),
        overturned: record.is_overturned(),
    })
}

/// Build a pipeline over the training records; failures name the case.
pub fn index_training(pipeline: &Pipeline, train: &[CaseRecord]) -> Result<(), EvalError> {
    for r in train {
        pipeline
            .ingest(r)
            .map_err(|source| EvalError::Pipeline { case_id: r.case_id.clone(), source })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_chronological() {
        let corpus = generate_corpus(&CorpusSpec::new(20, 2)).unwrap();
        let (train, test) = chronological_split(&corpus, 0.8);
        assert_eq!((train.len(), test.len()), (16, 4));
        let last = train.iter().map(|r| r.timestamp).max().unwrap();
        assert!(test.iter().all(|r| r.timestamp > last));
    }
}
