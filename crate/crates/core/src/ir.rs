//! Expressions of the core calculus.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::catalog::TableDecl;
use crate::types::{CoreType, Prim, RowType};
use crate::value::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Literal {
    pub fn prim(&self) -> Prim {
        match self {
            Literal::Bool(_) => Prim::Bool,
            Literal::Int(_) => Prim::Int,
            Literal::Str(_) => Prim::Str,
        }
    }

    pub fn to_scalar(&self) -> Scalar {
        match self {
            Literal::Bool(b) => Scalar::Bool(*b),
            Literal::Int(i) => Scalar::Int(*i),
            Literal::Str(s) => Scalar::Str(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarOp {
    Eq,
    And,
    Or,
    Not,
}

impl ScalarOp {
    pub fn arity(self) -> usize {
        match self {
            ScalarOp::Not => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    ConcatMap,
    Map,
    Append,
    Reverse,
    Guard,
    Cons,
    Zip,
    /// 1-based tuple projection `M.n`.
    TupleProj(usize),
}

impl Builtin {
    pub fn arity(self) -> usize {
        match self {
            Builtin::Reverse | Builtin::Guard | Builtin::TupleProj(_) => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::ConcatMap => "concatMap",
            Builtin::Map => "map",
            Builtin::Append => "append",
            Builtin::Reverse => "reverse",
            Builtin::Guard => "guard",
            Builtin::Cons => "cons",
            Builtin::Zip => "zip",
            Builtin::TupleProj(_) => "proj",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "concatMap" => Builtin::ConcatMap,
            "map" => Builtin::Map,
            "append" => Builtin::Append,
            "reverse" => Builtin::Reverse,
            "guard" => Builtin::Guard,
            "cons" => Builtin::Cons,
            "zip" => Builtin::Zip,
            _ => return None,
        })
    }
}

/// Provenance annotations attached by [`CoreExpr::Annot`].
///
/// `Bottom` is the empty *lineage* annotation; blank where-provenance is
/// written with [`CoreExpr::EmptyProv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotExpr {
    /// `(t, c, k)`: the cell of column `c` in the row of table `t` keyed `k`.
    Where { table: String, column: String, key: Box<CoreExpr> },
    Bottom,
    /// `(t, k)`: a single row reference.
    LineageRow { table: String, key: Box<CoreExpr> },
    /// An expression evaluating to a lineage set, typically `z.prov`.
    LineageOf(Box<CoreExpr>),
    /// `L1 ⊕ L2`.
    LineageAppend(Box<AnnotExpr>, Box<AnnotExpr>),
}

impl AnnotExpr {
    pub fn append(left: AnnotExpr, right: AnnotExpr) -> AnnotExpr {
        AnnotExpr::LineageAppend(Box::new(left), Box::new(right))
    }

    pub fn lineage_of(e: CoreExpr) -> AnnotExpr {
        AnnotExpr::LineageOf(Box::new(e))
    }

    pub fn is_lineage(&self) -> bool {
        !matches!(self, AnnotExpr::Where { .. })
    }

    pub fn children(&self) -> Vec<&CoreExpr> {
        match self {
            AnnotExpr::Where { key, .. } | AnnotExpr::LineageRow { key, .. } => vec![key],
            AnnotExpr::LineageOf(e) => vec![e],
            AnnotExpr::Bottom => vec![],
            AnnotExpr::LineageAppend(l, r) => {
                let mut v = l.children();
                v.extend(r.children());
                v
            }
        }
    }

    pub fn map_exprs(&self, f: &mut impl FnMut(&CoreExpr) -> CoreExpr) -> AnnotExpr {
        match self {
            AnnotExpr::Where { table, column, key } => {
                AnnotExpr::Where { table: table.clone(), column: column.clone(), key: Box::new(f(key)) }
            }
            AnnotExpr::Bottom => AnnotExpr::Bottom,
            AnnotExpr::LineageRow { table, key } => AnnotExpr::LineageRow { table: table.clone(), key: Box::new(f(key)) },
            AnnotExpr::LineageOf(e) => AnnotExpr::LineageOf(Box::new(f(e))),
            AnnotExpr::LineageAppend(l, r) => AnnotExpr::append(l.map_exprs(f), r.map_exprs(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreExpr {
    Const(Literal),
    Var(String, CoreType),
    Unit,
    ListLit { elem_ty: CoreType, elems: Vec<CoreExpr> },
    TupleLit(Vec<CoreExpr>),
    Lam { var: String, var_ty: CoreType, body: Box<CoreExpr> },
    App(Builtin, Vec<CoreExpr>),
    /// A table scan. `row` is the logical row type: flagged columns carry
    /// where-provenance types until the where-provenance rewrite has run.
    TableRef { decl: Arc<TableDecl>, row: RowType },
    Annot(Box<CoreExpr>, AnnotExpr),
    DataProj(Box<CoreExpr>),
    ProvProj(Box<CoreExpr>),
    EmptyProv(Box<CoreExpr>),
    Op(ScalarOp, Vec<CoreExpr>),
}

impl CoreExpr {
    pub fn str(s: impl Into<String>) -> CoreExpr {
        CoreExpr::Const(Literal::Str(s.into()))
    }

    pub fn int(i: i64) -> CoreExpr {
        CoreExpr::Const(Literal::Int(i))
    }

    pub fn var(name: impl Into<String>, ty: CoreType) -> CoreExpr {
        CoreExpr::Var(name.into(), ty)
    }

    pub fn lam(var: impl Into<String>, var_ty: CoreType, body: CoreExpr) -> CoreExpr {
        CoreExpr::Lam { var: var.into(), var_ty, body: Box::new(body) }
    }

    pub fn app(b: Builtin, args: Vec<CoreExpr>) -> CoreExpr {
        CoreExpr::App(b, args)
    }

    pub fn concat_map(f: CoreExpr, xs: CoreExpr) -> CoreExpr {
        CoreExpr::App(Builtin::ConcatMap, vec![f, xs])
    }

    pub fn map(f: CoreExpr, xs: CoreExpr) -> CoreExpr {
        CoreExpr::App(Builtin::Map, vec![f, xs])
    }

    pub fn guard(b: CoreExpr) -> CoreExpr {
        CoreExpr::App(Builtin::Guard, vec![b])
    }

    pub fn proj(e: CoreExpr, n: usize) -> CoreExpr {
        CoreExpr::App(Builtin::TupleProj(n), vec![e])
    }

    pub fn singleton(elem_ty: CoreType, e: CoreExpr) -> CoreExpr {
        CoreExpr::ListLit { elem_ty, elems: vec![e] }
    }

    pub fn data(e: CoreExpr) -> CoreExpr {
        CoreExpr::DataProj(Box::new(e))
    }

    pub fn prov(e: CoreExpr) -> CoreExpr {
        CoreExpr::ProvProj(Box::new(e))
    }

    pub fn annot(e: CoreExpr, a: AnnotExpr) -> CoreExpr {
        CoreExpr::Annot(Box::new(e), a)
    }

    pub fn eq(a: CoreExpr, b: CoreExpr) -> CoreExpr {
        CoreExpr::Op(ScalarOp::Eq, vec![a, b])
    }

    /// A table reference at its raw (unannotated) row type.
    pub fn table(decl: Arc<TableDecl>) -> CoreExpr {
        let row = decl.raw_row_type();
        CoreExpr::TableRef { decl, row }
    }

    /// A table reference at its where-provenance row type.
    pub fn table_where_prov(decl: Arc<TableDecl>) -> CoreExpr {
        let row = decl.logical_row_type();
        CoreExpr::TableRef { decl, row }
    }

    /// Immediate subexpressions, including those inside annotations.
    pub fn children(&self) -> Vec<&CoreExpr> {
        match self {
            CoreExpr::Const(_) | CoreExpr::Var(..) | CoreExpr::Unit | CoreExpr::TableRef { .. } => vec![],
            CoreExpr::ListLit { elems, .. } | CoreExpr::TupleLit(elems) => elems.iter().collect(),
            CoreExpr::App(_, args) | CoreExpr::Op(_, args) => args.iter().collect(),
            CoreExpr::Lam { body, .. } => vec![body],
            CoreExpr::Annot(body, a) => {
                let mut v = vec![body.as_ref()];
                v.extend(a.children());
                v
            }
            CoreExpr::DataProj(e) | CoreExpr::ProvProj(e) | CoreExpr::EmptyProv(e) => vec![e],
        }
    }

    /// Rebuilds this node with `f` applied to each immediate subexpression
    /// (a lambda's body included; binder handling is the caller's concern).
    pub fn map_children(&self, f: &mut impl FnMut(&CoreExpr) -> CoreExpr) -> CoreExpr {
        match self {
            CoreExpr::Const(_) | CoreExpr::Var(..) | CoreExpr::Unit | CoreExpr::TableRef { .. } => self.clone(),
            CoreExpr::ListLit { elem_ty, elems } => {
                CoreExpr::ListLit { elem_ty: elem_ty.clone(), elems: elems.iter().map(&mut *f).collect() }
            }
            CoreExpr::TupleLit(elems) => CoreExpr::TupleLit(elems.iter().map(&mut *f).collect()),
            CoreExpr::Lam { var, var_ty, body } => CoreExpr::Lam { var: var.clone(), var_ty: var_ty.clone(), body: Box::new(f(body)) },
            CoreExpr::App(b, args) => CoreExpr::App(*b, args.iter().map(&mut *f).collect()),
            CoreExpr::Op(op, args) => CoreExpr::Op(*op, args.iter().map(&mut *f).collect()),
            CoreExpr::Annot(body, a) => {
                let body = f(body);
                CoreExpr::Annot(Box::new(body), a.map_exprs(f))
            }
            CoreExpr::DataProj(e) => CoreExpr::DataProj(Box::new(f(e))),
            CoreExpr::ProvProj(e) => CoreExpr::ProvProj(Box::new(f(e))),
            CoreExpr::EmptyProv(e) => CoreExpr::EmptyProv(Box::new(f(e))),
        }
    }

    /// True if `pred` holds for this node or any descendant.
    pub fn any(&self, pred: &mut impl FnMut(&CoreExpr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            CoreExpr::Var(name, _) => {
                if !bound.contains(name) {
                    out.insert(name.clone());
                }
            }
            CoreExpr::Lam { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            other => {
                for c in other.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    /// Every variable name occurring free or bound.
    pub fn all_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.any(&mut |e| {
            match e {
                CoreExpr::Var(n, _) => {
                    out.insert(n.clone());
                }
                CoreExpr::Lam { var, .. } => {
                    out.insert(var.clone());
                }
                _ => {}
            }
            false
        });
        out
    }

    /// Declarations of every table referenced, deduplicated by name, in
    /// first-occurrence order.
    pub fn tables(&self) -> Vec<Arc<TableDecl>> {
        let mut out: Vec<Arc<TableDecl>> = Vec::new();
        self.any(&mut |e| {
            if let CoreExpr::TableRef { decl, .. } = e {
                if !out.iter().any(|d| d.name == decl.name) {
                    out.push(decl.clone());
                }
            }
            false
        });
        out
    }

    pub fn has_annotations(&self) -> bool {
        self.any(&mut |e| matches!(e, CoreExpr::Annot(..)))
    }
}
