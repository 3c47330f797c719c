//! Runtime values and their canonical JSON rendering.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value as Json};

use crate::types::Prim;

/// A single cell value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Unit,
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Scalar {
    pub fn prim(&self) -> Prim {
        match self {
            Scalar::Unit => Prim::Unit,
            Scalar::Bool(_) => Prim::Bool,
            Scalar::Int(_) => Prim::Int,
            Scalar::Str(_) => Prim::Str,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Scalar::Unit => Json::Null,
            Scalar::Bool(b) => json!(b),
            Scalar::Int(i) => json!(i),
            Scalar::Str(s) => json!(s),
        }
    }

    /// Text form used in CSV cells.
    pub fn to_cell(&self) -> String {
        match self {
            Scalar::Unit => "()".to_string(),
            Scalar::Bool(b) => b.to_string(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Str(s) => s.clone(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Unit => f.write_str("()"),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// A primary-key value; compound keys are tuples of scalars.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyValue {
    Single(Scalar),
    Compound(Vec<Scalar>),
}

impl KeyValue {
    pub fn to_value(&self) -> Value {
        match self {
            KeyValue::Single(s) => Value::from(s.clone()),
            KeyValue::Compound(ss) => Value::Tuple(ss.iter().cloned().map(Value::from).collect()),
        }
    }

    pub fn from_value(v: &Value) -> Option<KeyValue> {
        match v {
            Value::Tuple(cs) => cs.iter().map(Value::as_scalar).collect::<Option<Vec<_>>>().map(KeyValue::Compound),
            other => other.as_scalar().map(KeyValue::Single),
        }
    }

    /// Compound keys render as JSON arrays.
    pub fn to_json(&self) -> Json {
        match self {
            KeyValue::Single(s) => s.to_json(),
            KeyValue::Compound(ss) => Json::Array(ss.iter().map(Scalar::to_json).collect()),
        }
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Single(s) => write!(f, "{s}"),
            KeyValue::Compound(ss) => {
                f.write_str("(")?;
                for (i, s) in ss.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{s}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Location of a cell in the database.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WhereAnnotation {
    pub table: String,
    pub column: String,
    pub key: KeyValue,
}

impl WhereAnnotation {
    fn to_json(&self) -> Json {
        json!({ "table": self.table, "column": self.column, "key": self.key.to_json() })
    }
}

/// Reference to a database row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineageEntry {
    pub table: String,
    pub key: KeyValue,
}

impl LineageEntry {
    pub fn new(table: impl Into<String>, key: KeyValue) -> Self {
        LineageEntry { table: table.into(), key }
    }
}

pub type LineageSet = BTreeSet<LineageEntry>;

fn lineage_json(set: &LineageSet) -> Json {
    // BTreeSet iteration order is (table, key), which keeps output byte-stable.
    Json::Array(set.iter().map(|e| json!({ "table": e.table, "key": e.key.to_json() })).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(i64),
    Str(String),
    Tuple(Vec<Value>),
    List(Vec<Value>),
    WhereProv { data: Scalar, prov: Option<WhereAnnotation> },
    Lineage { data: Box<Value>, lineage: LineageSet },
    /// A projected where-provenance component.
    WhereAnnot(Option<WhereAnnotation>),
    /// A projected lineage component.
    LineageSet(LineageSet),
}

impl From<Scalar> for Value {
    fn from(s: Scalar) -> Self {
        match s {
            Scalar::Unit => Value::Unit,
            Scalar::Bool(b) => Value::Bool(b),
            Scalar::Int(i) => Value::Int(i),
            Scalar::Str(s) => Value::Str(s),
        }
    }
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn as_scalar(&self) -> Option<Scalar> {
        Some(match self {
            Value::Unit => Scalar::Unit,
            Value::Bool(b) => Scalar::Bool(*b),
            Value::Int(i) => Scalar::Int(*i),
            Value::Str(s) => Scalar::Str(s.clone()),
            _ => return None,
        })
    }

    /// Removes every provenance annotation, keeping data components.
    pub fn erase(&self) -> Value {
        match self {
            Value::Tuple(cs) => Value::Tuple(cs.iter().map(Value::erase).collect()),
            Value::List(es) => Value::List(es.iter().map(Value::erase).collect()),
            Value::WhereProv { data, .. } => Value::from(data.clone()),
            Value::Lineage { data, .. } => data.erase(),
            other => other.clone(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Unit => Json::Null,
            Value::Bool(b) => json!(b),
            Value::Int(i) => json!(i),
            Value::Str(s) => json!(s),
            Value::Tuple(cs) | Value::List(cs) => Json::Array(cs.iter().map(Value::to_json).collect()),
            Value::WhereProv { data, prov } => json!({
                "data": data.to_json(),
                "prov": prov.as_ref().map_or(Json::Null, WhereAnnotation::to_json),
            }),
            Value::Lineage { data, lineage } => json!({
                "data": data.to_json(),
                "lineage": lineage_json(lineage),
            }),
            Value::WhereAnnot(a) => a.as_ref().map_or(Json::Null, WhereAnnotation::to_json),
            Value::LineageSet(set) => lineage_json(set),
        }
    }

    /// Canonical result encoding: a top-level list becomes an array of
    /// `{"row": n, "value": v}` objects with 1-based `n`; anything else is
    /// encoded directly. Object keys are sorted; output is compact.
    pub fn to_canonical_json(&self) -> String {
        let json = match self {
            Value::List(es) => Json::Array(
                es.iter()
                    .enumerate()
                    .map(|(i, e)| json!({ "row": i + 1, "value": e.to_json() }))
                    .collect(),
            ),
            other => other.to_json(),
        };
        json.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_is_sorted_and_compact() {
        let v = Value::List(vec![Value::Tuple(vec![
            Value::str("EdinTours"),
            Value::WhereProv {
                data: Scalar::Str("412 1200".into()),
                prov: Some(WhereAnnotation {
                    table: "agencies".into(),
                    column: "a_phone".into(),
                    key: KeyValue::Single(Scalar::Int(1)),
                }),
            },
        ])]);
        assert_eq!(
            v.to_canonical_json(),
            r#"[{"row":1,"value":["EdinTours",{"data":"412 1200","prov":{"column":"a_phone","key":1,"table":"agencies"}}]}]"#
        );
    }

    #[test]
    fn lineage_entries_sorted_by_table_then_key() {
        let mut set = LineageSet::new();
        set.insert(LineageEntry::new("externaltours", KeyValue::Single(Scalar::Int(5))));
        set.insert(LineageEntry::new("agencies", KeyValue::Single(Scalar::Int(1))));
        let v = Value::Lineage { data: Box::new(Value::Int(0)), lineage: set };
        assert_eq!(
            v.to_json().to_string(),
            r#"{"data":0,"lineage":[{"key":1,"table":"agencies"},{"key":5,"table":"externaltours"}]}"#
        );
    }

    #[test]
    fn compound_keys_render_as_arrays() {
        let k = KeyValue::Compound(vec![Scalar::Int(1), Scalar::Str("a".into())]);
        assert_eq!(k.to_json().to_string(), r#"[1,"a"]"#);
        assert_eq!(KeyValue::from_value(&k.to_value()), Some(k));
    }

    #[test]
    fn blank_where_prov_renders_null() {
        let v = Value::WhereProv { data: Scalar::Str("x".into()), prov: None };
        assert_eq!(v.to_json().to_string(), r#"{"data":"x","prov":null}"#);
    }
}
