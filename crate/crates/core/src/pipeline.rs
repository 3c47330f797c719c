//! parse, desugar, typecheck, rewrite, typecheck again, evaluate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::catalog::{Catalog, Database, KeyTypeMismatch, TableDecl};
use crate::eval::{eval, Env, EvalError};
use crate::ir::CoreExpr;
use crate::lineage::{lineage_transform, lineage_type_translate, LineageError};
use crate::subst::NameSupply;
use crate::surface::{desugar_with, parse, DesugarOptions, SurfaceError, SurfaceQuery};
use crate::typecheck::{typecheck, TypeEnv, TypeError};
use crate::types::{CoreType, KeyType};
use crate::value::Value;
use crate::whereprov::whereprov_transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Plain,
    WhereProv,
    Lineage,
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(ModeKind::Plain),
            "whereprov" | "where" | "where-prov" => Ok(ModeKind::WhereProv),
            "lineage" => Ok(ModeKind::Lineage),
            other => Err(format!("unknown mode `{other}` (expected plain, whereprov or lineage)")),
        }
    }
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeKind::Plain => "plain",
            ModeKind::WhereProv => "whereprov",
            ModeKind::Lineage => "lineage",
        })
    }
}

/// A mode plus an optional explicit key type. Without one, lineage mode
/// infers the key from the tables the query uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mode {
    pub kind: ModeKind,
    pub key: Option<KeyType>,
}

impl Mode {
    pub fn plain() -> Mode {
        Mode { kind: ModeKind::Plain, key: None }
    }

    pub fn where_prov() -> Mode {
        Mode { kind: ModeKind::WhereProv, key: None }
    }

    pub fn lineage(key: Option<KeyType>) -> Mode {
        Mode { kind: ModeKind::Lineage, key }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    KeyTypeMismatch(#[from] KeyTypeMismatch),
    #[error("lineage cannot be combined with other provenance: {0}")]
    CompositionUnsupported(String),
    #[error("{0}")]
    UnsupportedConstruct(String),
    #[error("lineage mode needs a key type and none can be inferred; pass --key-type")]
    MissingKeyType,
    #[error("no data for table `{0}`")]
    UnknownTable(String),
    /// A broken internal guarantee, such as a rewrite changing the type.
    #[error("internal invariant failure: {0}")]
    Invariant(String),
}

impl PipelineError {
    pub fn is_internal(&self) -> bool {
        matches!(self, PipelineError::Invariant(_))
    }
}

impl From<LineageError> for PipelineError {
    fn from(e: LineageError) -> Self {
        match e {
            LineageError::CompositionUnsupported(m) => PipelineError::CompositionUnsupported(m),
            LineageError::UnsupportedConstruct(m) => PipelineError::UnsupportedConstruct(m),
            LineageError::KeyTypeMismatch(m) => PipelineError::KeyTypeMismatch(m),
            LineageError::Type(t) => PipelineError::Invariant(format!("lineage rewrite: {t}")),
        }
    }
}

fn invariant(stage: &str, e: TypeError) -> PipelineError {
    PipelineError::Invariant(format!("{stage} output does not typecheck: {e}"))
}

/// Every stage of a compiled query.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub query: SurfaceQuery,
    pub desugared: CoreExpr,
    pub source_type: CoreType,
    pub transformed: CoreExpr,
    pub result_type: CoreType,
    pub key: Option<KeyType>,
}

fn used_tables(q: &SurfaceQuery, catalog: &Catalog) -> Vec<Arc<TableDecl>> {
    q.expr.table_names().iter().filter_map(|n| catalog.get(n).cloned()).collect()
}

/// The lineage key type: explicit keys must match every used table.
pub fn resolve_lineage_key(tables: &[Arc<TableDecl>], explicit: Option<&KeyType>) -> Result<KeyType, PipelineError> {
    let keyed = || tables.iter().map(|t| (t.name.clone(), t.key_type())).collect::<Vec<_>>();
    match explicit {
        Some(k) => {
            if tables.iter().any(|t| t.key_type() != *k) {
                return Err(KeyTypeMismatch { expected: Some(k.clone()), tables: keyed() }.into());
            }
            Ok(k.clone())
        }
        None if tables.is_empty() => Err(PipelineError::MissingKeyType),
        None => Ok(Catalog::uniform_key_type(tables.iter().map(|t| t.as_ref()))?),
    }
}

/// Key type for blank where-provenance: the flagged tables' shared key,
/// else all used tables' shared key.
pub fn where_prov_key(tables: &[Arc<TableDecl>]) -> Option<KeyType> {
    let flagged: Vec<&TableDecl> = tables.iter().filter(|t| !t.where_prov_columns.is_empty()).map(|t| t.as_ref()).collect();
    if !flagged.is_empty() {
        if let Ok(k) = Catalog::uniform_key_type(flagged) {
            return Some(k);
        }
    }
    if tables.is_empty() {
        return None;
    }
    Catalog::uniform_key_type(tables.iter().map(|t| t.as_ref())).ok()
}

pub fn compile(src: &str, catalog: &Catalog, mode: &Mode) -> Result<Compiled, PipelineError> {
    let query = parse(src, catalog)?;
    compile_query(&query, catalog, mode)
}

pub fn compile_query(query: &SurfaceQuery, catalog: &Catalog, mode: &Mode) -> Result<Compiled, PipelineError> {
    let mut supply = NameSupply::new();
    let tables = used_tables(query, catalog);
    match mode.kind {
        ModeKind::Plain => {
            let desugared = desugar_with(query, catalog, &mut supply, &DesugarOptions::default())?;
            let ty = typecheck(&desugared, &TypeEnv::new()).map_err(SurfaceError::from)?;
            Ok(Compiled {
                query: query.clone(),
                transformed: desugared.clone(),
                desugared,
                source_type: ty.clone(),
                result_type: ty,
                key: None,
            })
        }
        ModeKind::WhereProv => {
            let key = mode.key.clone().or_else(|| where_prov_key(&tables));
            let opts = DesugarOptions { where_prov: true, key: key.clone() };
            let desugared = desugar_with(query, catalog, &mut supply, &opts)?;
            let env = TypeEnv::with_key(key.clone());
            let ty = typecheck(&desugared, &env).map_err(SurfaceError::from)?;
            let transformed = whereprov_transform(&desugared, &mut supply);
            let after = typecheck(&transformed, &env).map_err(|e| invariant("where-provenance rewrite", e))?;
            if after != ty {
                return Err(PipelineError::Invariant(format!("where-provenance rewrite changed the type from {ty} to {after}")));
            }
            Ok(Compiled { query: query.clone(), desugared, source_type: ty, transformed, result_type: after, key })
        }
        ModeKind::Lineage => {
            if let Some(t) = tables.iter().find(|t| !t.where_prov_columns.is_empty()) {
                return Err(PipelineError::CompositionUnsupported(format!(
                    "table `{}` tracks where-provenance on {}",
                    t.name,
                    t.where_prov_columns.iter().cloned().collect::<Vec<_>>().join(", ")
                )));
            }
            if query.expr.uses_provenance_calls() {
                return Err(PipelineError::CompositionUnsupported(
                    "data, prov and emptyProv are not available in lineage queries".into(),
                ));
            }
            let key = resolve_lineage_key(&tables, mode.key.as_ref())?;
            let desugared = desugar_with(query, catalog, &mut supply, &DesugarOptions::default())?;
            let ty = typecheck(&desugared, &TypeEnv::new()).map_err(SurfaceError::from)?;
            let transformed = lineage_transform(&desugared, &key, &mut supply)?;
            let expected = lineage_type_translate(&ty, &key)?;
            let after = typecheck(&transformed, &TypeEnv::with_key(Some(key.clone())))
                .map_err(|e| invariant("lineage rewrite", e))?;
            if after != expected {
                return Err(PipelineError::Invariant(format!(
                    "lineage rewrite produced type {after}, expected {expected}"
                )));
            }
            after.validate().map_err(PipelineError::Invariant)?;
            Ok(Compiled { query: query.clone(), desugared, source_type: ty, transformed, result_type: after, key: Some(key) })
        }
    }
}

pub fn eval_compiled(c: &Compiled, db: &Database) -> Result<Value, PipelineError> {
    eval(&c.transformed, db, &Env::new()).map_err(|e| match e {
        EvalError::UnknownTable(t) => PipelineError::UnknownTable(t),
        other => PipelineError::Invariant(other.to_string()),
    })
}

pub fn run_pipeline(src: &str, catalog: &Catalog, db: &Database, mode: &Mode) -> Result<Value, PipelineError> {
    eval_compiled(&compile(src, catalog, mode)?, db)
}
