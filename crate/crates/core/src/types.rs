//! Type grammar of the core calculus.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MIN_TUPLE_ARITY: usize = 2;
pub const MAX_TUPLE_ARITY: usize = 16;

/// Types that can be stored in a single database cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Prim {
    Unit,
    Bool,
    Int,
    Str,
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prim::Unit => "()",
            Prim::Bool => "Bool",
            Prim::Int => "Int",
            Prim::Str => "String",
        })
    }
}

/// Type of a table's primary key: one primitive, or a tuple of primitives.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeyType {
    Single(Prim),
    Compound(Vec<Prim>),
}

impl KeyType {
    pub fn to_core(&self) -> CoreType {
        match self {
            KeyType::Single(p) => CoreType::Prim(*p),
            KeyType::Compound(ps) => CoreType::Tuple(ps.iter().map(|p| CoreType::Prim(*p)).collect()),
        }
    }

    /// Reads a key type back from a core type; `None` if it is not a legal key.
    pub fn from_core(ty: &CoreType) -> Option<KeyType> {
        match ty {
            CoreType::Prim(p) => Some(KeyType::Single(*p)),
            CoreType::Tuple(cs) if (MIN_TUPLE_ARITY..=MAX_TUPLE_ARITY).contains(&cs.len()) => cs
                .iter()
                .map(|c| match c {
                    CoreType::Prim(p) => Some(*p),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(KeyType::Compound),
            _ => None,
        }
    }
}

impl fmt::Display for KeyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_core(), f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoreType {
    Prim(Prim),
    List(Box<CoreType>),
    Tuple(Vec<CoreType>),
    Arrow(Box<CoreType>, Box<CoreType>),
    /// A primitive value carrying a where-provenance annotation.
    WhereProv(Prim, KeyType),
    /// A list element carrying a lineage annotation.
    Lineage(Box<CoreType>, KeyType),
    /// Result of projecting `.prov` out of a where-provenance value: an
    /// optional `(table, column, key)` triple.
    WhereAnnot(KeyType),
    /// Result of projecting `.prov` out of a lineage-annotated element.
    LineageSet(KeyType),
}

impl CoreType {
    pub const UNIT: CoreType = CoreType::Prim(Prim::Unit);
    pub const BOOL: CoreType = CoreType::Prim(Prim::Bool);
    pub const INT: CoreType = CoreType::Prim(Prim::Int);
    pub const STR: CoreType = CoreType::Prim(Prim::Str);

    pub fn list(elem: CoreType) -> CoreType {
        CoreType::List(Box::new(elem))
    }

    pub fn arrow(from: CoreType, to: CoreType) -> CoreType {
        CoreType::Arrow(Box::new(from), Box::new(to))
    }

    pub fn lineage(base: CoreType, key: KeyType) -> CoreType {
        CoreType::Lineage(Box::new(base), key)
    }

    pub fn as_prim(&self) -> Option<Prim> {
        match self {
            CoreType::Prim(p) => Some(*p),
            _ => None,
        }
    }

    pub fn list_elem(&self) -> Option<&CoreType> {
        match self {
            CoreType::List(e) => Some(e),
            _ => None,
        }
    }

    /// True if the type mentions any provenance-related constructor.
    pub fn mentions_provenance(&self) -> bool {
        match self {
            CoreType::Prim(_) => false,
            CoreType::List(e) => e.mentions_provenance(),
            CoreType::Tuple(cs) => cs.iter().any(CoreType::mentions_provenance),
            CoreType::Arrow(a, b) => a.mentions_provenance() || b.mentions_provenance(),
            CoreType::WhereProv(..)
            | CoreType::Lineage(..)
            | CoreType::WhereAnnot(_)
            | CoreType::LineageSet(_) => true,
        }
    }

    pub fn mentions_where_prov(&self) -> bool {
        match self {
            CoreType::Prim(_) | CoreType::LineageSet(_) => false,
            CoreType::List(e) | CoreType::Lineage(e, _) => e.mentions_where_prov(),
            CoreType::Tuple(cs) => cs.iter().any(CoreType::mentions_where_prov),
            CoreType::Arrow(a, b) => a.mentions_where_prov() || b.mentions_where_prov(),
            CoreType::WhereProv(..) | CoreType::WhereAnnot(_) => true,
        }
    }

    /// Checks the structural invariants of a *query result* type: tuple
    /// arity bounds, and lineage annotations appearing only directly under
    /// a list constructor. Where-provenance bases are primitive by
    /// construction of [`CoreType::WhereProv`].
    pub fn validate(&self) -> Result<(), String> {
        self.validate_inner(false)
    }

    /// Like [`validate`](Self::validate) but also accepts a lineage-annotated
    /// type at the top level, which is the type of a single list element
    /// (e.g. a lambda binder ranging over an annotated list).
    pub fn validate_element(&self) -> Result<(), String> {
        self.validate_inner(true)
    }

    fn validate_inner(&self, under_list: bool) -> Result<(), String> {
        match self {
            CoreType::Prim(_) | CoreType::WhereProv(..) | CoreType::WhereAnnot(_) | CoreType::LineageSet(_) => {
                Ok(())
            }
            CoreType::List(e) => e.validate_inner(true),
            CoreType::Tuple(cs) => {
                if !(MIN_TUPLE_ARITY..=MAX_TUPLE_ARITY).contains(&cs.len()) {
                    return Err(format!("tuple arity {} outside {MIN_TUPLE_ARITY}..={MAX_TUPLE_ARITY}", cs.len()));
                }
                cs.iter().try_for_each(|c| c.validate_inner(false))
            }
            CoreType::Arrow(a, b) => {
                a.validate_inner(true)?;
                b.validate_inner(false)
            }
            CoreType::Lineage(base, _) => {
                if !under_list {
                    return Err(format!("lineage annotation `{self}` outside a list"));
                }
                base.validate_inner(false)
            }
        }
    }
}

fn write_arg(f: &mut fmt::Formatter<'_>, ty: &CoreType) -> fmt::Result {
    match ty {
        CoreType::Arrow(..)
        | CoreType::WhereProv(..)
        | CoreType::Lineage(..)
        | CoreType::WhereAnnot(_)
        | CoreType::LineageSet(_) => write!(f, "({ty})"),
        _ => write!(f, "{ty}"),
    }
}

fn write_key(f: &mut fmt::Formatter<'_>, key: &KeyType) -> fmt::Result {
    write_arg(f, &key.to_core())
}

impl fmt::Display for CoreType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreType::Prim(p) => write!(f, "{p}"),
            CoreType::List(e) => write!(f, "[{e}]"),
            CoreType::Tuple(cs) => {
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            CoreType::Arrow(a, b) => {
                if matches!(**a, CoreType::Arrow(..)) {
                    write!(f, "({a}) -> {b}")
                } else {
                    write!(f, "{a} -> {b}")
                }
            }
            CoreType::WhereProv(p, k) => {
                write!(f, "WhereProv {p} ")?;
                write_key(f, k)
            }
            CoreType::Lineage(base, k) => {
                f.write_str("Lineage ")?;
                write_arg(f, base)?;
                f.write_str(" ")?;
                write_key(f, k)
            }
            CoreType::WhereAnnot(k) => {
                f.write_str("WhereAnnot ")?;
                write_key(f, k)
            }
            CoreType::LineageSet(k) => {
                f.write_str("LineageSet ")?;
                write_key(f, k)
            }
        }
    }
}

/// Ordered, labelled row type of a table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowType {
    pub fields: Vec<(String, CoreType)>,
}

impl RowType {
    /// The positional tuple a row is represented by in the core calculus.
    pub fn as_tuple(&self) -> CoreType {
        CoreType::Tuple(self.fields.iter().map(|(_, t)| t.clone()).collect())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.fields.iter().position(|(l, _)| l == label)
    }

    pub fn has_where_prov(&self) -> bool {
        self.fields.iter().any(|(_, t)| matches!(t, CoreType::WhereProv(..)))
    }

    pub fn labels(&self) -> Vec<String> {
        self.fields.iter().map(|(l, _)| l.clone()).collect()
    }
}
