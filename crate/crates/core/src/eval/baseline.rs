//! Comparison baselines: majority vote over retrieved precedents, and direct
//! verdict prediction by a model client.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CaseId, Verdict};
use crate::ingest::{strip_annotations, CaseRecord};
use crate::eval::{ground_truth, metrics_from_labels, EvalError, MetricsReport};
use crate::kb::{embed, summarize, KbError};
use crate::reasoner::Pipeline;

/// Plurality verdict; any tie for first place resolves to reject.
pub fn majority_verdict(verdicts: &[Verdict]) -> Verdict {
    let mut counts: BTreeMap<Verdict, usize> = BTreeMap::new();
    for v in verdicts {
        *counts.entry(*v).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<Verdict> = counts.into_iter().filter(|(_, c)| *c == best).map(|(v, _)| v).collect();
    match leaders.as_slice() {
        [only] => *only,
        _ => Verdict::Reject,
    }
}

/// Majority over the Checker verdicts of the top-`k` retrieved precedents.
pub fn baseline_cbr_majority(query: &CaseRecord, pipeline: &Pipeline, k: usize) -> Result<Verdict, KbError> {
    let summary = summarize(query, pipeline.summarizer.as_ref())?;
    let vector = embed(&summary, pipeline.embedder.as_ref())?;
    let hits = pipeline.kb.retrieve(&vector, k)?;
    let verdicts: Vec<Verdict> = hits.iter().filter_map(|s| s.entry.verdict()).collect();
    Ok(majority_verdict(&verdicts))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("model client failed: {0}")]
    ClientFailure(String),
    #[error("unparsable reply: {0:?}")]
    UnparsableReply(String),
    #[error("retrieval failed: {0}")]
    Retrieval(String),
}

/// Context handed to a model client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub case_id: CaseId,
    pub category: String,
    pub maker_rationale: String,
    pub evidence: Vec<String>,
    /// Retrieved precedents as `case_id: verdict | summary`.
    #[serde(default)]
    pub history: Vec<String>,
    /// Whether the model may ask for more information.
    pub allow_rmi: bool,
}

impl Prompt {
    pub fn allowed(&self) -> Vec<Verdict> {
        if self.allow_rmi {
            Verdict::ALL.to_vec()
        } else {
            vec![Verdict::Approve, Verdict::Reject]
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("Case {} ({})\nMaker rationale: {}\nEvidence:\n", self.case_id, self.category, self.maker_rationale);
        for e in &self.evidence {
            out.push_str(&format!("- {e}\n"));
        }
        if !self.history.is_empty() {
            out.push_str("Similar past cases:\n");
            for h in &self.history {
                out.push_str(&format!("- {h}\n"));
            }
        }
        let allowed: Vec<&str> = self.allowed().iter().map(|v| v.as_str()).collect();
        out.push_str(&format!("Answer with one of: {}\n", allowed.join(", ")));
        out
    }
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String, ClientError>;
}

/// Deterministic record-replay client: a reply per case id, with an
/// optional fallback.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedClient {
    pub replies: BTreeMap<String, String>,
    #[serde(default)]
    pub fallback: Option<String>,
}

impl ScriptedClient {
    pub fn echo(reply: &str) -> Self {
        ScriptedClient { replies: BTreeMap::new(), fallback: Some(reply.into()) }
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, prompt: &Prompt) -> Result<String, ClientError> {
        self.replies
            .get(prompt.case_id.as_str())
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| ClientError::ClientFailure(format!("no scripted reply for `{}`", prompt.case_id)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectOptions {
    pub with_rmi: bool,
    pub with_retrieval: bool,
    pub k: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions { with_rmi: false, with_retrieval: false, k: crate::kb::DEFAULT_K_PRIME }
    }
}

/// Direct verdict prediction. Retrieval, when enabled, adds the top-`k`
/// precedents to the prompt and needs `pipeline`.
pub fn baseline_model_direct(
    query: &CaseRecord,
    client: &dyn ModelClient,
    options: DirectOptions,
    pipeline: Option<&Pipeline>,
) -> Result<Verdict, ClientError> {
    let mut prompt = Prompt {
        case_id: query.case_id.clone(),
        category: query.violation_category.clone(),
        maker_rationale: strip_annotations(&query.maker_record.analysis),
        evidence: query.evidence_items.iter().map(|e| format!("[{}] {}", e.source_type.as_str(), e.content)).collect(),
        history: Vec::new(),
        allow_rmi: options.with_rmi,
    };
    if options.with_retrieval {
        let p = pipeline.ok_or_else(|| ClientError::Retrieval("retrieval requested without a knowledge base".into()))?;
        let fail = |e: KbError| ClientError::Retrieval(e.to_string());
        let summary = summarize(query, p.summarizer.as_ref()).map_err(|e| fail(e.into()))?;
        let vector = embed(&summary, p.embedder.as_ref()).map_err(|e| fail(e.into()))?;
        for s in p.kb.retrieve(&vector, options.k).map_err(fail)? {
            let v = s.entry.verdict().map(|v| v.as_str()).unwrap_or("none");
            prompt.history.push(format!("{}: {v} | {}", s.case_id(), s.entry.summary.rendered));
        }
    }
    let reply = client.complete(&prompt)?;
    let word = reply.split_whitespace().next().unwrap_or("").trim_matches(|c: char| !c.is_alphanumeric());
    match Verdict::parse(word) {
        Some(v) if prompt.allowed().contains(&v) => Ok(v),
        _ => Err(ClientError::UnparsableReply(reply)),
    }
}

/// Which baseline [`run_baseline`] scores.
pub enum Baseline<'a> {
    Cbr { k: usize },
    Direct { client: &'a dyn ModelClient, options: DirectOptions },
}

/// Score a baseline over labelled records, each presented as a query.
pub fn run_baseline(pipeline: &Pipeline, records: &[CaseRecord], baseline: &Baseline) -> Result<MetricsReport, EvalError> {
    let mut truth = Vec::with_capacity(records.len());
    let mut predicted = Vec::with_capacity(records.len());
    for r in records {
        truth.push(ground_truth(r)?);
        let q = r.to_query();
        let fail = |message: String| EvalError::Baseline { case_id: r.case_id.clone(), message };
        let v = match baseline {
            Baseline::Cbr { k } => baseline_cbr_majority(&q, pipeline, *k).map_err(|e| fail(e.to_string()))?,
            Baseline::Direct { client, options } => {
                baseline_model_direct(&q, *client, *options, Some(pipeline)).map_err(|e| fail(e.to_string()))?
            }
        };
        predicted.push(v);
    }
    metrics_from_labels(&truth, &predicted)
}
