//! Canonical line-oriented graph serialization (`eafd-graph-v1`).
//!
//! One JSON object per line with sorted keys: a header, then nodes in id
//! order, then edges in `(kind, from, to)` order. Equal graphs produce
//! byte-identical text. The factor-decision `stance` attribute is derived
//! from the factor's outcome on write and checked on read.

use serde_json::{Map, Value};
use thiserror::Error;

use super::{CaseGraph, CaseId, Edge, EdgeKind, GraphBuilder, GraphError, Node};
use crate::json::canonical_string;

pub const GRAPH_FORMAT: &str = "eafd-graph-v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error("missing header line")]
    MissingHeader,
}

pub fn to_canonical_text(graph: &CaseGraph) -> String {
    let mut out = String::new();
    let mut header = Map::new();
    header.insert("record".into(), "header".into());
    header.insert("format".into(), GRAPH_FORMAT.into());
    header.insert("case_id".into(), graph.case_id().as_str().into());
    out.push_str(&canonical_string(&Value::Object(header)));
    out.push('\n');

    for node in graph.nodes() {
        out.push_str(&canonical_string(&node_line(node)));
        out.push('\n');
    }
    for edge in graph.edges() {
        out.push_str(&canonical_string(&edge_line(graph, edge)));
        out.push('\n');
    }
    out
}

fn node_line(node: &Node) -> Value {
    let mut value = serde_json::to_value(node).expect("node serializes");
    let obj = value.as_object_mut().expect("node is an object");
    obj.insert("record".into(), "node".into());
    let lane = node.lane().map(|l| l.to_string()).unwrap_or_else(|| "shared".into());
    obj.insert("lane".into(), lane.into());
    value
}

fn edge_line(graph: &CaseGraph, edge: &Edge) -> Value {
    let mut value = serde_json::to_value(edge).expect("edge serializes");
    let obj = value.as_object_mut().expect("edge is an object");
    obj.insert("record".into(), "edge".into());
    if let Some(path) = obj.remove("path") {
        obj.insert("path_kind".into(), path);
    }
    if edge.kind == EdgeKind::FactorDecision {
        if let Some(f) = graph.factor(&edge.from) {
            obj.insert("stance".into(), f.outcome.as_str().into());
        }
    }
    value
}

pub fn from_canonical_text(text: &str) -> Result<CaseGraph, FormatError> {
    let mut builder: Option<GraphBuilder> = None;
    let mut pending_edges = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let syntax = |message: String| FormatError::Syntax { line, message };
        let mut value: Value = serde_json::from_str(raw).map_err(|e| syntax(e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| syntax("expected a JSON object".into()))?;
        let record = obj
            .remove("record")
            .and_then(|v| v.as_str().map(str::to_string))
            .ok_or_else(|| syntax("missing `record` field".into()))?;
        match record.as_str() {
            "header" => {
                let format = obj.get("format").and_then(Value::as_str);
                if format != Some(GRAPH_FORMAT) {
                    return Err(syntax(format!("unsupported format {format:?}")));
                }
                let case_id = obj
                    .get("case_id")
                    .and_then(Value::as_str)
                    .ok_or_else(|| syntax("header without case_id".into()))?;
                let case_id = CaseId::new(case_id).map_err(|e| syntax(e.to_string()))?;
                builder = Some(GraphBuilder::new(case_id));
            }
            "node" => {
                let b = builder.as_mut().ok_or(FormatError::MissingHeader)?;
                let lane = obj.remove("lane");
                let node: Node = serde_json::from_value(value).map_err(|e| syntax(e.to_string()))?;
                let expected = node.lane().map(|l| l.to_string()).unwrap_or_else(|| "shared".into());
                if lane.as_ref().and_then(Value::as_str) != Some(expected.as_str()) {
                    return Err(syntax(format!("node `{}` must declare lane `{expected}`", node.id())));
                }
                b.add_node(node).map_err(|source| FormatError::Graph { line, source })?;
            }
            "edge" => {
                if builder.is_none() {
                    return Err(FormatError::MissingHeader);
                }
                let stance = obj.remove("stance");
                if let Some(path) = obj.remove("path_kind") {
                    obj.insert("path".into(), path);
                }
                let edge: Edge = serde_json::from_value(value).map_err(|e| syntax(e.to_string()))?;
                pending_edges.push((line, edge, stance));
            }
            other => return Err(syntax(format!("unknown record type `{other}`"))),
        }
    }

    let mut builder = builder.ok_or(FormatError::MissingHeader)?;
    for (line, edge, stance) in pending_edges {
        if edge.kind == EdgeKind::FactorDecision {
            if let Some(Node::Factor(f)) = builder.node(&edge.from) {
                if stance.as_ref().and_then(Value::as_str) != Some(f.outcome.as_str()) {
                    return Err(FormatError::Syntax {
                        line,
                        message: format!("stance of {} -> {} disagrees with factor outcome", edge.from, edge.to),
                    });
                }
            }
        }
        builder
            .propose(edge)
            .map_err(|source| FormatError::Graph { line, source })?;
    }
    Ok(builder.freeze())
}
