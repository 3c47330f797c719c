//! Language-integrated comprehension queries with where-provenance and
//! lineage tracking by query rewriting.

pub mod catalog;
pub mod eval;
pub mod fixtures;
pub mod ir;
pub mod lex;
pub mod lineage;
pub mod oracle;
pub mod pipeline;
pub mod pretty;
pub mod reader;
pub mod sqlgen;
pub mod subst;
pub mod surface;
pub mod typecheck;
pub mod types;
pub mod value;
pub mod whereprov;

pub use catalog::{Catalog, Database, TableDecl};
pub use eval::eval;
pub use ir::CoreExpr;
pub use lineage::{lineage_transform, lineage_type_translate};
pub use pipeline::{compile, run_pipeline, Mode, ModeKind, PipelineError};
pub use pretty::pretty;
pub use sqlgen::{to_sql, NotFlat};
pub use subst::alpha_eq;
pub use surface::{desugar, parse, SurfaceQuery};
pub use typecheck::typecheck;
pub use types::{CoreType, KeyType, Prim};
pub use value::Value;
pub use whereprov::whereprov_transform;
