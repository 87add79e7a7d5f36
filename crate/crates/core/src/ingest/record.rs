//! `case-record-v1`: the structured case file consumed by extraction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::graph::{CaseId, EvidenceNode, NodeId, SourceType, Verdict};
use crate::ingest::annotation::{parse_annotations, AnnotationError};

pub const RECORD_FORMAT: &str = "case-record-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: String,
    pub source_type: SourceType,
    pub content: String,
    pub source_ref: String,
}

impl EvidenceItem {
    pub fn to_node(&self) -> Result<EvidenceNode, crate::graph::EmptyId> {
        Ok(EvidenceNode {
            id: NodeId::new(self.id.clone())?,
            content: self.content.clone(),
            source_ref: self.source_ref.clone(),
            source_type: self.source_type,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub verdict: Verdict,
    pub analysis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: CaseId,
    pub violation_category: String,
    pub evidence_items: Vec<EvidenceItem>,
    pub maker_record: DecisionRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker_record: Option<DecisionRecord>,
    /// Total order used for chronological splits.
    pub timestamp: u64,
    /// Named case entities (supplier, warehouse, ...) that fill action
    /// template slots.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub entities: BTreeMap<String, String>,
    /// Unknown fields, preserved for round-trip.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed record at byte {offset}: {message}")]
    MalformedRecord { offset: usize, message: String },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid record: {0}")]
    Invalid(String),
}

const REQUIRED: &[&str] = &["case_id", "violation_category", "evidence_items", "maker_record", "timestamp"];

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut start = 0;
    for (i, b) in bytes.iter().enumerate() {
        if current == line {
            break;
        }
        if *b == b'\n' {
            current += 1;
            start = i + 1;
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}

/// Parse a `case-record-v1` document.
pub fn parse_case_record(bytes: &[u8]) -> Result<CaseRecord, RecordError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| RecordError::MalformedRecord {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or(RecordError::MalformedRecord {
        offset: 0,
        message: "record must be a JSON object".into(),
    })?;
    for field in REQUIRED {
        if !obj.contains_key(*field) {
            return Err(RecordError::MissingField((*field).to_string()));
        }
    }
    for (field, inner) in [("maker_record", &["verdict", "analysis"][..]), ("checker_record", &["verdict", "analysis"][..])] {
        if let Some(Value::Object(sub)) = obj.get(field) {
            for f in inner {
                if !sub.contains_key(*f) {
                    return Err(RecordError::MissingField(format!("{field}.{f}")));
                }
            }
        }
    }
    if let Some(format) = obj.get("format") {
        if format.as_str() != Some(RECORD_FORMAT) {
            return Err(RecordError::Invalid(format!("unsupported format {format}")));
        }
    }
    let mut value = value;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("format");
    }
    let record: CaseRecord = serde_json::from_value(value)
        .map_err(|e| RecordError::MalformedRecord { offset: 0, message: e.to_string() })?;
    record.check()?;
    Ok(record)
}

impl CaseRecord {
    fn check(&self) -> Result<(), RecordError> {
        if self.maker_record.verdict != Verdict::Reject {
            return Err(RecordError::Invalid("maker verdict must be reject".into()));
        }
        if let Some(c) = &self.checker_record {
            if c.verdict == Verdict::Rmi {
                return Err(RecordError::Invalid("checker verdict must be approve or reject".into()));
            }
        }
        let mut seen = BTreeSet::new();
        for item in &self.evidence_items {
            if item.id.trim().is_empty() || item.content.trim().is_empty() || item.source_ref.trim().is_empty() {
                return Err(RecordError::Invalid(format!("evidence item `{}` has empty fields", item.id)));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(RecordError::Invalid(format!("duplicate evidence id `{}`", item.id)));
            }
        }
        Ok(())
    }

    /// Canonical `case-record-v1` text with sorted keys.
    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("record serializes");
        value
            .as_object_mut()
            .expect("record is an object")
            .insert("format".into(), RECORD_FORMAT.into());
        crate::json::to_canonical_pretty(&value).expect("record serializes")
    }

    pub fn is_query(&self) -> bool {
        self.checker_record.is_none()
    }

    pub fn is_overturned(&self) -> bool {
        matches!(&self.checker_record, Some(c) if c.verdict == Verdict::Approve)
    }

    pub fn evidence(&self, id: &str) -> Option<&EvidenceItem> {
        self.evidence_items.iter().find(|e| e.id == id)
    }

    /// Evidence ids the Checker annotations mark as withheld (obtained through
    /// channels absent from the case file).
    pub fn withheld_evidence(&self) -> Result<BTreeSet<String>, AnnotationError> {
        let mut out = BTreeSet::new();
        if let Some(c) = &self.checker_record {
            for s in parse_annotations(&c.analysis)? {
                out.extend(s.evidence.iter().filter(|r| r.withheld).map(|r| r.id.clone()));
            }
        }
        Ok(out)
    }

    /// The record as seen at query time: no Checker record and no withheld
    /// evidence.
    pub fn to_query(&self) -> CaseRecord {
        let withheld = self.withheld_evidence().unwrap_or_default();
        let mut query = self.clone();
        query.checker_record = None;
        query.evidence_items.retain(|e| !withheld.contains(&e.id));
        query
    }
}
