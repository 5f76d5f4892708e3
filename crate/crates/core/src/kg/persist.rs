//! JSON persistence: `{"nodes": [...], "edges": [...]}`.
//!
//! Attribute values are strings, numbers, number arrays or nested number
//! arrays. Event time stamps are written as `YYYY-MMM-DD-HH-MM-SS.mmm` (UTC).

use chrono::{DateTime, NaiveDateTime};
use serde_json::{json, Map, Value};

use super::{AttrValue, Attributes, GraphEdge, GraphNode, KgError, KnowledgeGraph, Label, Relation, Timestamp, TIME_STAMP};

const TS_FORMAT: &str = "%Y-%b-%d-%H-%M-%S%.3f";

pub fn format_timestamp(ts: Timestamp) -> String {
    match DateTime::from_timestamp_millis(ts) {
        Some(dt) => dt.format(TS_FORMAT).to_string(),
        None => ts.to_string(),
    }
}

pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    NaiveDateTime::parse_from_str(text, TS_FORMAT)
        .ok()
        .map(|dt| dt.and_utc().timestamp_millis())
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn attr_to_json(v: &AttrValue) -> Value {
    match v {
        AttrValue::Str(s) => Value::String(s.clone()),
        AttrValue::Num(n) => num(*n),
        AttrValue::Time(t) => Value::String(format_timestamp(*t)),
        AttrValue::Nums(ns) => Value::Array(ns.iter().copied().map(num).collect()),
        AttrValue::Points(ps) => Value::Array(
            ps.iter()
                .map(|p| Value::Array(p.iter().copied().map(num).collect()))
                .collect(),
        ),
    }
}

fn attrs_to_json(attrs: &Attributes) -> Value {
    Value::Object(attrs.iter().map(|(k, v)| (k.clone(), attr_to_json(v))).collect())
}

fn invalid(msg: impl Into<String>) -> KgError {
    KgError::Invalid(msg.into())
}

fn numbers(items: &[Value]) -> Option<Vec<f64>> {
    items.iter().map(Value::as_f64).collect()
}

fn attr_from_json(key: &str, v: &Value) -> Result<AttrValue, KgError> {
    match v {
        Value::String(s) if key == TIME_STAMP => parse_timestamp(s)
            .map(AttrValue::Time)
            .ok_or_else(|| invalid(format!("bad time stamp `{s}`"))),
        Value::String(s) => Ok(AttrValue::Str(s.clone())),
        Value::Number(n) => n
            .as_f64()
            .map(AttrValue::Num)
            .ok_or_else(|| invalid(format!("attribute `{key}` is not a finite number"))),
        Value::Array(items) => {
            if let Some(ns) = numbers(items) {
                return Ok(AttrValue::Nums(ns));
            }
            items
                .iter()
                .map(|p| p.as_array().and_then(|a| numbers(a)))
                .collect::<Option<Vec<_>>>()
                .map(AttrValue::Points)
                .ok_or_else(|| invalid(format!("attribute `{key}` is not a number array")))
        }
        _ => Err(invalid(format!("attribute `{key}` has an unsupported type"))),
    }
}

fn attrs_from_json(v: Option<&Value>) -> Result<Attributes, KgError> {
    match v {
        None => Ok(Attributes::new()),
        Some(Value::Object(map)) => map
            .iter()
            .map(|(k, v)| Ok((k.clone(), attr_from_json(k, v)?)))
            .collect(),
        Some(_) => Err(invalid("attributes must be an object")),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, what: &str) -> Result<&'a Value, KgError> {
    obj.get(name).ok_or_else(|| invalid(format!("{what} lacks `{name}`")))
}

fn element_id(obj: &Map<String, Value>, name: &str, what: &str) -> Result<u64, KgError> {
    field(obj, name, what)?
        .as_u64()
        .ok_or_else(|| invalid(format!("{what} `{name}` must be a non-negative integer")))
}

fn enum_field<T: serde::de::DeserializeOwned>(obj: &Map<String, Value>, name: &str, what: &str) -> Result<T, KgError> {
    serde_json::from_value(field(obj, name, what)?.clone())
        .map_err(|e| invalid(format!("{what} `{name}`: {e}")))
}

impl KnowledgeGraph {
    /// Serializes the whole graph. Output is deterministic: nodes by id, edges
    /// in insertion order, attribute keys sorted.
    pub fn to_document(&self) -> String {
        let nodes: Vec<Value> = self
            .nodes
            .values()
            .map(|n| {
                json!({
                    "element_id": n.element_id,
                    "label": n.label,
                    "attributes": attrs_to_json(&n.attributes),
                })
            })
            .collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                json!({
                    "src": e.src,
                    "dst": e.dst,
                    "relation": e.relation,
                    "attributes": attrs_to_json(&e.attributes),
                })
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&json!({ "nodes": nodes, "edges": edges }))
            .expect("graph documents always serialize");
        text.push('\n');
        text
    }

    pub fn from_document(text: &str) -> Result<Self, KgError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| KgError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let obj = doc.as_object().ok_or_else(|| invalid("document must be an object"))?;
        let array = |name: &str| {
            obj.get(name)
                .and_then(Value::as_array)
                .ok_or_else(|| invalid(format!("document lacks a `{name}` array")))
        };

        let mut nodes = Vec::new();
        for (i, v) in array("nodes")?.iter().enumerate() {
            let what = format!("nodes[{i}]");
            let n = v.as_object().ok_or_else(|| invalid(format!("{what} is not an object")))?;
            nodes.push(GraphNode {
                element_id: element_id(n, "element_id", &what)?,
                label: enum_field::<Label>(n, "label", &what)?,
                attributes: attrs_from_json(n.get("attributes"))?,
            });
        }
        let mut edges = Vec::new();
        for (i, v) in array("edges")?.iter().enumerate() {
            let what = format!("edges[{i}]");
            let e = v.as_object().ok_or_else(|| invalid(format!("{what} is not an object")))?;
            edges.push(GraphEdge {
                src: element_id(e, "src", &what)?,
                dst: element_id(e, "dst", &what)?,
                relation: enum_field::<Relation>(e, "relation", &what)?,
                attributes: attrs_from_json(e.get("attributes"))?,
            });
        }
        Self::from_parts(nodes, edges)
    }
}
