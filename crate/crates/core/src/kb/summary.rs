use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::CaseId;
use crate::ingest::annotation::{parse_annotations, strip_annotations};
use crate::ingest::record::CaseRecord;
use crate::text::normalize_key;

/// Structured case summary `s_i`, the text that gets embedded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: CaseId,
    pub violation_category: String,
    pub core_rationale: String,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("summarizer failed: {0}")]
pub struct SummarizerError(pub String);

pub trait Summarizer: Send + Sync {
    fn summarize(&self, record: &CaseRecord) -> Result<CaseSummary, SummarizerError>;
}

/// Renders `category | rationale head | factors: keys` from the Maker record
/// only, so historical cases and queries are summarized alike.
#[derive(Clone, Copy, Debug, Default)]
pub struct TemplateSummarizer;

fn first_sentence(text: &str) -> String {
    let mut end = text.len();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (i, (pos, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|(_, n)| n.is_whitespace()) {
            end = pos + c.len_utf8();
            break;
        }
    }
    text[..end].trim().to_string()
}

impl Summarizer for TemplateSummarizer {
    fn summarize(&self, record: &CaseRecord) -> Result<CaseSummary, SummarizerError> {
        let analysis = &record.maker_record.analysis;
        let rationale = first_sentence(&strip_annotations(analysis));
        let mut seen = BTreeSet::new();
        let keys: Vec<String> = parse_annotations(analysis)
            .unwrap_or_default()
            .iter()
            .map(|s| normalize_key(&s.factor_key))
            .filter(|k| seen.insert(k.clone()))
            .collect();
        let category = record.violation_category.trim();
        let rendered = if rationale.is_empty() && keys.is_empty() {
            let types: BTreeSet<&str> = record.evidence_items.iter().map(|e| e.source_type.as_str()).collect();
            let types: Vec<&str> = types.into_iter().collect();
            format!("{category} | evidence: {}", types.join(", "))
        } else {
            format!("{category} | {rationale} | factors: {}", keys.join(", "))
        };
        Ok(CaseSummary {
            case_id: record.case_id.clone(),
            violation_category: category.to_string(),
            core_rationale: rationale,
            rendered,
        })
    }
}

/// Summarize with any summarizer, rejecting empty output.
pub fn summarize(record: &CaseRecord, summarizer: &dyn Summarizer) -> Result<CaseSummary, SummarizerError> {
    let summary = summarizer.summarize(record)?;
    if summary.rendered.trim().is_empty() {
        return Err(SummarizerError("rendered summary is empty".into()));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::parse_case_record;

    fn record(id: &str, analysis: &str) -> CaseRecord {
        let text = format!(
            r#"{{"case_id": "{id}", "violation_category": "PQ.EXPIRED_PRODUCTS", "timestamp": 1,
                "evidence_items": [
                  {{"id": "e1", "source_type": "document", "content": "complaint", "source_ref": "doc:1"}},
                  {{"id": "e2", "source_type": "chat_log", "content": "chat", "source_ref": "chat:1"}}
                ],
                "maker_record": {{"verdict": "reject", "analysis": {}}}}}"#,
            serde_json::to_string(analysis).unwrap()
        );
        parse_case_record(text.as_bytes()).unwrap()
    }

    #[test]
    fn category_verbatim_and_factor_keys() {
        let r = record(
            "a",
            "Customer received an expired item. More detail. ACTION[validate complaint]{e1} => FACTOR[expired_product_received|contradict]",
        );
        let s = summarize(&r, &TemplateSummarizer).unwrap();
        assert!(s.rendered.contains("PQ.EXPIRED_PRODUCTS"));
        assert_eq!(s.core_rationale, "Customer received an expired item.");
        assert!(s.rendered.ends_with("factors: expired_product_received"));
    }

    #[test]
    fn empty_analysis_uses_source_types() {
        let s = summarize(&record("a", ""), &TemplateSummarizer).unwrap();
        assert_eq!(s.rendered, "PQ.EXPIRED_PRODUCTS | evidence: chat_log, document");
    }

    #[test]
    fn independent_of_case_id() {
        let a = summarize(&record("a", "Expired."), &TemplateSummarizer).unwrap();
        let b = summarize(&record("b", "Expired."), &TemplateSummarizer).unwrap();
        assert_eq!(a.rendered, b.rendered);
    }
}
