//! Reference semantics for provenance that does not run either rewrite.
//!
//! The oracle interprets the desugared, untransformed query. Every list
//! element carries a tag (a lineage set); table rows are born tagged with
//! their own row, and tags flow through the list operators. In
//! where-provenance mode flagged cells are born annotated with their
//! location. The module also generates random cases and runs the
//! differential check between the rewrites and this interpreter.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{Catalog, Database, TableDecl};
use crate::eval::{eval, Env};
use crate::ir::{Builtin, CoreExpr, Literal, ScalarOp};
use crate::lineage::{lineage_transform_with_faults, RewriteFaults};
use crate::pipeline::{compile_query, eval_compiled, where_prov_key, Mode, PipelineError};
use crate::subst::NameSupply;
use crate::surface::{desugar_with, parse, Call, DesugarOptions, Qual, SExpr, SurfaceError, SurfaceQuery};
use crate::typecheck::{typecheck, TypeEnv};
use crate::types::{KeyType, Prim};
use crate::value::{LineageEntry, LineageSet, Scalar, Value, WhereAnnotation};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("oracle evaluation failed: {0}")]
    Eval(String),
}

/// A value with tags on list elements.
#[derive(Debug, Clone)]
enum TVal {
    Plain(Value),
    Tuple(Vec<TVal>),
    List(Vec<(TVal, LineageSet)>),
}

impl TVal {
    fn lineage_value(&self) -> Value {
        match self {
            TVal::Plain(v) => v.clone(),
            TVal::Tuple(cs) => Value::Tuple(cs.iter().map(TVal::lineage_value).collect()),
            TVal::List(es) => Value::List(
                es.iter()
                    .map(|(v, tag)| Value::Lineage { data: Box::new(v.lineage_value()), lineage: tag.clone() })
                    .collect(),
            ),
        }
    }

    fn untagged_value(&self) -> Value {
        match self {
            TVal::Plain(v) => v.clone(),
            TVal::Tuple(cs) => Value::Tuple(cs.iter().map(TVal::untagged_value).collect()),
            TVal::List(es) => Value::List(es.iter().map(|(v, _)| v.untagged_value()).collect()),
        }
    }
}

fn oops<T>(m: impl Into<String>) -> Result<T, OracleError> {
    Err(OracleError::Eval(m.into()))
}

struct Interp<'d> {
    db: &'d Database,
    /// Birth annotated cells for flagged columns.
    where_prov: bool,
}

impl Interp<'_> {
    fn list(&self, e: &CoreExpr, env: &mut Vec<(String, TVal)>) -> Result<Vec<(TVal, LineageSet)>, OracleError> {
        match self.eval(e, env)? {
            TVal::List(es) => Ok(es),
            _ => oops("expected a list"),
        }
    }

    fn scalar(&self, e: &CoreExpr, env: &mut Vec<(String, TVal)>) -> Result<Value, OracleError> {
        match self.eval(e, env)? {
            TVal::Plain(v) => Ok(v),
            _ => oops("expected a scalar"),
        }
    }

    fn call(
        &self,
        f: &CoreExpr,
        arg: TVal,
        env: &mut Vec<(String, TVal)>,
    ) -> Result<TVal, OracleError> {
        let CoreExpr::Lam { var, body, .. } = f else { return oops("function is not a lambda") };
        env.push((var.clone(), arg));
        let r = self.eval(body, env);
        env.pop();
        r
    }

    fn row(&self, decl: &TableDecl, row: &[Scalar]) -> TVal {
        let key = decl.key_projection(row);
        TVal::Tuple(
            decl.columns
                .iter()
                .zip(row)
                .map(|((label, _), cell)| {
                    if self.where_prov && decl.where_prov_columns.contains(label) {
                        TVal::Plain(Value::WhereProv {
                            data: cell.clone(),
                            prov: Some(WhereAnnotation { table: decl.name.clone(), column: label.clone(), key: key.clone() }),
                        })
                    } else {
                        TVal::Plain(Value::from(cell.clone()))
                    }
                })
                .collect(),
        )
    }

    fn eval(&self, e: &CoreExpr, env: &mut Vec<(String, TVal)>) -> Result<TVal, OracleError> {
        Ok(match e {
            CoreExpr::Const(l) => TVal::Plain(Value::from(l.to_scalar())),
            CoreExpr::Unit => TVal::Plain(Value::Unit),
            CoreExpr::Var(n, _) => match env.iter().rev().find(|(m, _)| m == n) {
                Some((_, v)) => v.clone(),
                None => return oops(format!("unbound `{n}`")),
            },
            CoreExpr::ListLit { elems, .. } => {
                TVal::List(elems.iter().map(|x| Ok((self.eval(x, env)?, LineageSet::new()))).collect::<Result<_, OracleError>>()?)
            }
            CoreExpr::TupleLit(cs) => TVal::Tuple(cs.iter().map(|x| self.eval(x, env)).collect::<Result<_, _>>()?),
            CoreExpr::TableRef { decl, .. } => {
                let Some(rows) = self.db.rows(&decl.name) else { return oops(format!("no table `{}`", decl.name)) };
                TVal::List(
                    rows.iter()
                        .map(|r| {
                            let tag = LineageSet::from([LineageEntry::new(decl.name.clone(), decl.key_projection(r))]);
                            (self.row(decl, r), tag)
                        })
                        .collect(),
                )
            }
            CoreExpr::App(Builtin::ConcatMap, args) => {
                let mut out = Vec::new();
                for (x, tx) in self.list(&args[1], env)? {
                    let TVal::List(ys) = self.call(&args[0], x, env)? else { return oops("concatMap body is not a list") };
                    for (y, mut ty) in ys {
                        ty.extend(tx.iter().cloned());
                        out.push((y, ty));
                    }
                }
                TVal::List(out)
            }
            CoreExpr::App(Builtin::Map, args) => {
                let mut out = Vec::new();
                for (x, tx) in self.list(&args[1], env)? {
                    out.push((self.call(&args[0], x, env)?, tx));
                }
                TVal::List(out)
            }
            CoreExpr::App(Builtin::Append, args) => {
                let mut xs = self.list(&args[0], env)?;
                xs.extend(self.list(&args[1], env)?);
                TVal::List(xs)
            }
            CoreExpr::App(Builtin::Reverse, args) => {
                let mut xs = self.list(&args[0], env)?;
                xs.reverse();
                TVal::List(xs)
            }
            CoreExpr::App(Builtin::Guard, args) => match self.scalar(&args[0], env)? {
                Value::Bool(true) => TVal::List(vec![(TVal::Plain(Value::Unit), LineageSet::new())]),
                Value::Bool(false) => TVal::List(vec![]),
                _ => return oops("guard on a non-boolean"),
            },
            CoreExpr::App(Builtin::Cons, args) => {
                let x = self.eval(&args[0], env)?;
                let mut xs = self.list(&args[1], env)?;
                xs.insert(0, (x, LineageSet::new()));
                TVal::List(xs)
            }
            CoreExpr::App(Builtin::Zip, args) => {
                let xs = self.list(&args[0], env)?;
                let ys = self.list(&args[1], env)?;
                TVal::List(
                    xs.into_iter()
                        .zip(ys)
                        .map(|((x, tx), (y, ty))| (TVal::Tuple(vec![x, y]), tx.union(&ty).cloned().collect()))
                        .collect(),
                )
            }
            CoreExpr::App(Builtin::TupleProj(n), args) => match self.eval(&args[0], env)? {
                TVal::Tuple(mut cs) if *n >= 1 && *n <= cs.len() => cs.swap_remove(n - 1),
                _ => return oops("bad projection"),
            },
            CoreExpr::DataProj(x) => match self.scalar(x, env)? {
                Value::WhereProv { data, .. } => TVal::Plain(Value::from(data)),
                _ => return oops("data of an unannotated value"),
            },
            CoreExpr::ProvProj(x) => match self.scalar(x, env)? {
                Value::WhereProv { prov, .. } => TVal::Plain(Value::WhereAnnot(prov)),
                _ => return oops("prov of an unannotated value"),
            },
            CoreExpr::EmptyProv(x) => match self.scalar(x, env)?.as_scalar() {
                Some(data) => TVal::Plain(Value::WhereProv { data, prov: None }),
                None => return oops("blank provenance on a non-scalar"),
            },
            CoreExpr::Op(op, args) => {
                let vs = args.iter().map(|a| self.scalar(a, env)).collect::<Result<Vec<_>, _>>()?;
                let b = |v: &Value| match v {
                    Value::Bool(b) => Ok(*b),
                    _ => oops("boolean operator on a non-boolean"),
                };
                TVal::Plain(Value::Bool(match op {
                    ScalarOp::Eq => vs[0] == vs[1],
                    ScalarOp::And => b(&vs[0])? && b(&vs[1])?,
                    ScalarOp::Or => b(&vs[0])? || b(&vs[1])?,
                    ScalarOp::Not => !b(&vs[0])?,
                }))
            }
            CoreExpr::Lam { .. } | CoreExpr::Annot(..) => return oops("construct outside the surface language"),
        })
    }
}

/// Tag-propagating evaluation. The output has the same shape as the result
/// of the lineage pipeline. `_key` is the lineage key type; tags are built
/// from the tables' own keys.
pub fn oracle_eval_lineage(q: &SurfaceQuery, catalog: &Catalog, db: &Database, _key: &KeyType) -> Result<Value, OracleError> {
    let e = desugar_with(q, catalog, &mut NameSupply::new(), &DesugarOptions::default())?;
    Ok(Interp { db, where_prov: false }.eval(&e, &mut Vec::new())?.lineage_value())
}

/// Evaluation with flagged cells born annotated.
pub fn oracle_eval_whereprov(q: &SurfaceQuery, catalog: &Catalog, db: &Database) -> Result<Value, OracleError> {
    let tables: Vec<_> = q.expr.table_names().iter().filter_map(|n| catalog.get(n).cloned()).collect();
    let opts = DesugarOptions { where_prov: true, key: where_prov_key(&tables) };
    let e = desugar_with(q, catalog, &mut NameSupply::new(), &opts)?;
    Ok(Interp { db, where_prov: true }.eval(&e, &mut Vec::new())?.untagged_value())
}

/// Checks every annotation in `v` against the database: where-provenance
/// must name a cell holding the same data, lineage entries existing rows.
pub fn validate_annotations(v: &Value, catalog: &Catalog, db: &Database) -> Result<(), String> {
    match v {
        Value::Tuple(cs) | Value::List(cs) => cs.iter().try_for_each(|c| validate_annotations(c, catalog, db)),
        Value::WhereProv { data, prov: Some(a) } => {
            let decl = catalog.get(&a.table).ok_or_else(|| format!("annotation names unknown table `{}`", a.table))?;
            let col = decl.column_index(&a.column).ok_or_else(|| format!("annotation names unknown column `{}`", a.column))?;
            let row = db.find_row(decl, &a.key).ok_or_else(|| format!("no row {} in `{}`", a.key, a.table))?;
            if row[col] != *data {
                return Err(format!("annotation {}.{}[{}] holds {:?}, value is {:?}", a.table, a.column, a.key, row[col], data));
            }
            Ok(())
        }
        Value::WhereAnnot(Some(a)) => validate_annotations(
            &Value::WhereProv {
                data: catalog
                    .get(&a.table)
                    .and_then(|d| Some(db.find_row(d, &a.key)?[d.column_index(&a.column)?].clone()))
                    .ok_or_else(|| format!("dangling annotation {a:?}"))?,
                prov: Some(a.clone()),
            },
            catalog,
            db,
        ),
        Value::Lineage { data, lineage } => {
            lineage_entries_exist(lineage, catalog, db)?;
            validate_annotations(data, catalog, db)
        }
        Value::LineageSet(s) => lineage_entries_exist(s, catalog, db),
        _ => Ok(()),
    }
}

fn lineage_entries_exist(s: &LineageSet, catalog: &Catalog, db: &Database) -> Result<(), String> {
    for e in s {
        let decl = catalog.get(&e.table).ok_or_else(|| format!("lineage names unknown table `{}`", e.table))?;
        if db.find_row(decl, &e.key).is_none() {
            return Err(format!("lineage entry ({}, {}) names no row", e.table, e.key));
        }
    }
    Ok(())
}

/// Path to the first difference between two values, or `None`.
pub fn first_divergence(expected: &Value, actual: &Value) -> Option<String> {
    fn go(a: &Value, b: &Value, path: &mut String) -> Option<String> {
        match (a, b) {
            (Value::List(xs), Value::List(ys)) | (Value::Tuple(xs), Value::Tuple(ys)) => {
                for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                    let n = path.len();
                    path.push_str(&format!("[{i}]"));
                    if let Some(p) = go(x, y, path) {
                        return Some(p);
                    }
                    path.truncate(n);
                }
                if xs.len() != ys.len() {
                    return Some(format!("{path} (length {} vs {})", xs.len(), ys.len()));
                }
                None
            }
            (Value::Lineage { data: d1, lineage: l1 }, Value::Lineage { data: d2, lineage: l2 }) => {
                let n = path.len();
                path.push_str(".data");
                if let Some(p) = go(d1, d2, path) {
                    return Some(p);
                }
                path.truncate(n);
                (l1 != l2).then(|| format!("{path}.lineage"))
            }
            (Value::WhereProv { data: d1, prov: p1 }, Value::WhereProv { data: d2, prov: p2 }) => {
                if d1 != d2 {
                    Some(format!("{path}.data"))
                } else {
                    (p1 != p2).then(|| format!("{path}.prov"))
                }
            }
            _ => (a != b).then(|| if path.is_empty() { "(root)".to_string() } else { path.clone() }),
        }
    }
    go(expected, actual, &mut String::new())
}

// Random cases.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeBounds {
    pub max_tables: usize,
    pub max_rows: usize,
    pub max_depth: usize,
}

impl Default for SizeBounds {
    fn default() -> Self {
        SizeBounds { max_tables: 3, max_rows: 8, max_depth: 3 }
    }
}

/// The same query against a catalog with some columns flagged, adjusted so
/// that it typechecks there.
#[derive(Debug, Clone)]
pub struct WhereVariant {
    pub catalog: Catalog,
    pub query: SurfaceQuery,
}

#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub seed: Option<u64>,
    pub catalog: Catalog,
    pub db: Database,
    pub query: SurfaceQuery,
    pub where_variant: Option<WhereVariant>,
}

impl FuzzCase {
    /// A case over the bundled agencies/tours data.
    pub fn tours(query: &str, where_query: Option<&str>) -> FuzzCase {
        let catalog = crate::fixtures::tours_catalog();
        let wp = crate::fixtures::tours_catalog_where_prov();
        FuzzCase {
            seed: None,
            query: parse(query, &catalog).expect("fixture query parses"),
            where_variant: where_query.map(|w| WhereVariant { query: parse(w, &wp).expect("fixture query parses"), catalog: wp.clone() }),
            catalog,
            db: crate::fixtures::tours_db(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum G {
    /// Primitive; the flag says whether it is where-annotated in the variant.
    Prim(Prim, bool),
    Tuple(Vec<G>),
    List(Box<G>),
    Row(usize),
}

struct GTable {
    name: String,
    cols: Vec<(String, Prim, bool)>,
}

/// An expression in both renderings: for the base catalog and for the
/// flagged one.
#[derive(Clone)]
struct P {
    base: SExpr,
    wp: SExpr,
}

impl P {
    fn same(e: SExpr) -> P {
        P { base: e.clone(), wp: e }
    }

    fn lift(ps: Vec<P>, f: impl Fn(Vec<SExpr>) -> SExpr) -> P {
        let (b, w): (Vec<_>, Vec<_>) = ps.into_iter().map(|p| (p.base, p.wp)).unzip();
        P { base: f(b), wp: f(w) }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    tables: Vec<GTable>,
    next_var: usize,
}

const STRS: [&str; 4] = ["a", "b", "c", "d"];

impl Gen {
    fn prim(&mut self) -> Prim {
        *[Prim::Int, Prim::Int, Prim::Str, Prim::Str, Prim::Bool].choose(&mut self.rng).unwrap()
    }

    fn scalar(&mut self, p: Prim) -> Scalar {
        match p {
            Prim::Int => Scalar::Int(self.rng.gen_range(0..4)),
            Prim::Str => Scalar::Str(STRS.choose(&mut self.rng).unwrap().to_string()),
            Prim::Bool => Scalar::Bool(self.rng.gen()),
            Prim::Unit => Scalar::Unit,
        }
    }

    fn literal(&mut self, p: Prim) -> SExpr {
        match self.scalar(p) {
            Scalar::Int(i) => SExpr::Lit(Literal::Int(i)),
            Scalar::Str(s) => SExpr::Lit(Literal::Str(s)),
            Scalar::Bool(b) => SExpr::Lit(Literal::Bool(b)),
            Scalar::Unit => SExpr::Unit,
        }
    }

    fn fresh_var(&mut self) -> String {
        self.next_var += 1;
        format!("v{}", self.next_var - 1)
    }

    fn row_ty(&self, i: usize) -> Vec<G> {
        self.tables[i].cols.iter().map(|(_, p, f)| G::Prim(*p, *f)).collect()
    }

    /// A literal of type `g`; flagged components get `emptyProv` in the
    /// variant rendering.
    fn literal_of(&mut self, g: &G) -> Option<P> {
        match g {
            G::Prim(p, flagged) => {
                let l = self.literal(*p);
                Some(if *flagged {
                    P { base: l.clone(), wp: SExpr::Call(Call::EmptyProv, vec![l]) }
                } else {
                    P::same(l)
                })
            }
            G::Tuple(gs) => {
                let ps = gs.iter().map(|g| self.literal_of(g)).collect::<Option<Vec<_>>>()?;
                Some(P::lift(ps, SExpr::Tuple))
            }
            G::Row(i) => {
                let tys = self.row_ty(*i);
                self.literal_of(&G::Tuple(tys))
            }
            G::List(_) => None,
        }
    }

    /// Scalar-valued expressions reachable from the variables in scope.
    fn scalars(&self, scope: &[(String, G)]) -> Vec<(SExpr, Prim, bool)> {
        let mut out = Vec::new();
        for (v, g) in scope {
            self.scalars_of(SExpr::var(v.clone()), g, 0, &mut out);
        }
        out
    }

    fn scalars_of(&self, e: SExpr, g: &G, depth: usize, out: &mut Vec<(SExpr, Prim, bool)>) {
        match g {
            G::Prim(p, f) if *p != Prim::Unit => out.push((e, *p, *f)),
            G::Row(i) => {
                for (label, p, f) in &self.tables[*i].cols {
                    out.push((SExpr::field(e.clone(), label.clone()), *p, *f));
                }
            }
            G::Tuple(gs) if depth < 2 => {
                for (k, c) in gs.iter().enumerate() {
                    self.scalars_of(SExpr::Proj(Box::new(e.clone()), k + 1), c, depth + 1, out);
                }
            }
            _ => {}
        }
    }

    fn data_if(e: SExpr, flagged: bool) -> P {
        if flagged {
            P { base: e.clone(), wp: SExpr::Call(Call::Data, vec![e]) }
        } else {
            P::same(e)
        }
    }

    fn guard(&mut self, scope: &[(String, G)]) -> P {
        let cands = self.scalars(scope);
        let atom = if cands.is_empty() || self.rng.gen_bool(0.1) {
            P::same(SExpr::Lit(Literal::Bool(self.rng.gen())))
        } else {
            let (e, p, f) = cands.choose(&mut self.rng).unwrap().clone();
            let left = Self::data_if(e, f);
            let same: Vec<_> = cands.iter().filter(|(_, q, _)| *q == p).cloned().collect();
            let right = if self.rng.gen_bool(0.5) {
                let (e2, _, f2) = same.choose(&mut self.rng).unwrap().clone();
                Self::data_if(e2, f2)
            } else {
                P::same(self.literal(p))
            };
            P::lift(vec![left, right], |mut v| {
                let r = v.pop().unwrap();
                SExpr::eq(v.pop().unwrap(), r)
            })
        };
        match self.rng.gen_range(0..10) {
            0 => P::lift(vec![atom], |mut v| SExpr::Call(Call::Not, vec![v.pop().unwrap()])),
            1 => {
                let other = self.guard(scope);
                P::lift(vec![atom, other], |mut v| {
                    let r = v.pop().unwrap();
                    SExpr::And(Box::new(v.pop().unwrap()), Box::new(r))
                })
            }
            2 => {
                let other = self.guard(scope);
                P::lift(vec![atom, other], |mut v| {
                    let r = v.pop().unwrap();
                    SExpr::Or(Box::new(v.pop().unwrap()), Box::new(r))
                })
            }
            _ => atom,
        }
    }

    /// A head component: a variable, a field or projection, or a literal.
    fn atom(&mut self, scope: &[(String, G)]) -> (P, G) {
        let roll = self.rng.gen_range(0..10);
        if roll < 3 && !scope.is_empty() {
            let (v, g) = scope.choose(&mut self.rng).unwrap().clone();
            return (P::same(SExpr::var(v)), g);
        }
        let cands = self.scalars(scope);
        if roll < 9 && !cands.is_empty() {
            let (e, p, f) = cands.choose(&mut self.rng).unwrap().clone();
            return (P::same(e), G::Prim(p, f));
        }
        let p = self.prim();
        (P::same(self.literal(p)), G::Prim(p, false))
    }

    fn head(&mut self, depth: usize, scope: &[(String, G)]) -> (P, G) {
        match self.rng.gen_range(0..10) {
            0..=3 => self.atom(scope),
            4..=7 => {
                let n = self.rng.gen_range(2..=3);
                let (ps, gs): (Vec<_>, Vec<_>) = (0..n).map(|_| self.atom(scope)).unzip();
                (P::lift(ps, SExpr::Tuple), G::Tuple(gs))
            }
            _ if depth > 0 => {
                let (p, g) = self.comp(depth - 1, scope);
                (p, G::List(Box::new(g)))
            }
            _ => self.atom(scope),
        }
    }

    fn source(&mut self, depth: usize, scope: &[(String, G)]) -> (P, G) {
        let lists: Vec<_> = scope
            .iter()
            .filter_map(|(v, g)| match g {
                G::List(e) => Some((v.clone(), (**e).clone())),
                _ => None,
            })
            .collect();
        if !lists.is_empty() && self.rng.gen_bool(0.25) {
            let (v, g) = lists.choose(&mut self.rng).unwrap().clone();
            return (P::same(SExpr::var(v)), g);
        }
        self.list(depth, scope)
    }

    fn comp(&mut self, depth: usize, scope: &[(String, G)]) -> (P, G) {
        let mut scope = scope.to_vec();
        let mut quals: Vec<(Option<String>, P)> = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            let (src, elem) = self.source(depth.saturating_sub(1), &scope);
            let v = self.fresh_var();
            quals.push((Some(v.clone()), src));
            scope.push((v, elem));
            if self.rng.gen_bool(0.4) {
                let g = self.guard(&scope);
                quals.push((None, g));
            }
        }
        let (head, g) = self.head(depth, &scope);
        let build = |pick: fn(&P) -> SExpr| SExpr::Comp {
            head: Box::new(pick(&head)),
            quals: quals
                .iter()
                .map(|(v, p)| match v {
                    Some(var) => Qual::Gen { var: var.clone(), pos: Default::default(), source: pick(p) },
                    None => Qual::Guard(pick(p)),
                })
                .collect(),
        };
        (P { base: build(|p| p.base.clone()), wp: build(|p| p.wp.clone()) }, g)
    }

    /// A list-valued expression and its element type.
    fn list(&mut self, depth: usize, scope: &[(String, G)]) -> (P, G) {
        let roll = if depth == 0 { self.rng.gen_range(0..3) } else { self.rng.gen_range(0..12) };
        match roll {
            0 | 1 => {
                let i = self.rng.gen_range(0..self.tables.len());
                (P::same(SExpr::table(self.tables[i].name.clone())), G::Row(i))
            }
            2 => {
                let p = self.prim();
                let n = self.rng.gen_range(1..=3);
                let items = (0..n).map(|_| self.literal(p)).collect();
                (P::same(SExpr::List(items)), G::Prim(p, false))
            }
            3..=6 => self.comp(depth, scope),
            7 => {
                let (l, g) = self.list(depth - 1, scope);
                let second = match self.rng.gen_range(0..3) {
                    0 => l.clone(),
                    1 => P::lift(vec![l.clone()], |mut v| SExpr::Call(Call::Reverse, vec![v.pop().unwrap()])),
                    _ => {
                        let v = self.fresh_var();
                        let inner = [(v.clone(), g.clone())];
                        let guard = self.guard(&inner);
                        P::lift(vec![l.clone(), guard], |mut xs| {
                            let guard = xs.pop().unwrap();
                            SExpr::Comp {
                                head: Box::new(SExpr::var(v.clone())),
                                quals: vec![
                                    Qual::Gen { var: v.clone(), pos: Default::default(), source: xs.pop().unwrap() },
                                    Qual::Guard(guard),
                                ],
                            }
                        })
                    }
                };
                (P::lift(vec![l, second], |mut v| {
                    let r = v.pop().unwrap();
                    SExpr::Call(Call::Append, vec![v.pop().unwrap(), r])
                }), g)
            }
            8 => {
                let (l, g) = self.list(depth - 1, scope);
                (P::lift(vec![l], |mut v| SExpr::Call(Call::Reverse, vec![v.pop().unwrap()])), g)
            }
            9 => {
                let (a, ga) = self.list(depth - 1, scope);
                let (b, gb) = self.list(depth - 1, scope);
                (P::lift(vec![a, b], |mut v| {
                    let r = v.pop().unwrap();
                    SExpr::Call(Call::Zip, vec![v.pop().unwrap(), r])
                }), G::Tuple(vec![ga, gb]))
            }
            _ => {
                let (l, g) = self.list(depth - 1, scope);
                match self.literal_of(&g) {
                    Some(x) => (P::lift(vec![x, l], |mut v| {
                        let r = v.pop().unwrap();
                        SExpr::Call(Call::Cons, vec![v.pop().unwrap(), r])
                    }), g),
                    None => (l, g),
                }
            }
        }
    }
}

/// A deterministic random case: 1 to `max_tables` tables keyed by `Int`,
/// at most `max_rows` rows each, and a query of depth at most `max_depth`.
/// Non-key columns are flagged at random for the where-provenance variant,
/// which is present when the query uses a flagged table.
pub fn gen_random_case(seed: u64, bounds: SizeBounds) -> FuzzCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tables = rng.gen_range(1..=bounds.max_tables.max(1));
    let mut g = Gen { rng, tables: Vec::new(), next_var: 0 };
    for t in 0..n_tables {
        let mut cols = vec![(format!("t{t}_id"), Prim::Int, false)];
        for c in 1..g.rng.gen_range(2..=4) {
            let p = g.prim();
            let flagged = g.rng.gen_bool(0.5);
            cols.push((format!("t{t}_c{c}"), p, flagged));
        }
        g.tables.push(GTable { name: format!("t{t}"), cols });
    }
    let decls = |flags: bool, tables: &[GTable]| {
        tables
            .iter()
            .map(|t| {
                let columns = t.cols.iter().map(|(n, p, _)| (n.clone(), *p)).collect();
                let wp = t.cols.iter().filter(|(_, _, f)| flags && *f).map(|(n, _, _)| n.clone());
                TableDecl::new(t.name.clone(), columns, vec![t.cols[0].0.clone()], wp).expect("generated table is valid")
            })
            .collect::<Vec<_>>()
    };
    let catalog = Catalog::new(decls(false, &g.tables)).expect("generated catalog is valid");
    let wp_catalog = Catalog::new(decls(true, &g.tables)).expect("generated catalog is valid");

    let mut db = Database::new();
    for decl in catalog.tables() {
        let n = g.rng.gen_range(0..=bounds.max_rows);
        let mut ids: Vec<i64> = (1..=20).collect();
        ids.shuffle(&mut g.rng);
        let mut ids: Vec<i64> = ids.into_iter().take(n).collect();
        ids.sort_unstable();
        let rows = ids
            .into_iter()
            .map(|id| {
                let mut row = vec![Scalar::Int(id)];
                for (_, p) in &decl.columns[1..] {
                    row.push(g.scalar(*p));
                }
                row
            })
            .collect();
        db.insert_table(decl, rows).expect("generated rows are valid");
    }

    let (p, _) = g.list(bounds.max_depth, &[]);
    let query = parse(&p.base.to_string(), &catalog).expect("generated query parses");
    let flagged_used = p.wp.table_names().iter().any(|n| wp_catalog.get(n).is_some_and(|d| !d.where_prov_columns.is_empty()));
    let where_variant = flagged_used.then(|| WhereVariant {
        query: parse(&p.wp.to_string(), &wp_catalog).expect("generated variant parses"),
        catalog: wp_catalog,
    });
    FuzzCase { seed: Some(seed), catalog, db, query, where_variant }
}

// Differential check.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Which comparison failed.
    pub check: String,
    /// First differing position in the result, as e.g. `[2].lineage`.
    pub path: String,
    pub detail: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} diverged at {}: {}", self.check, self.path, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Agree,
    Diverge(Divergence),
}

impl Verdict {
    pub fn agrees(&self) -> bool {
        *self == Verdict::Agree
    }
}

fn diverge(check: &str, path: impl Into<String>, detail: impl Into<String>) -> Divergence {
    Divergence { check: check.into(), path: path.into(), detail: detail.into() }
}

fn compare(check: &str, expected: &Value, actual: &Value) -> Result<(), Divergence> {
    match first_divergence(expected, actual) {
        None => Ok(()),
        Some(path) => Err(diverge(check, path, format!("expected {}, got {}", expected.to_canonical_json(), actual.to_canonical_json()))),
    }
}

fn pipeline_err(check: &str) -> impl Fn(PipelineError) -> Divergence + '_ {
    move |e| diverge(check, "(root)", e.to_string())
}

/// Compiles the plain query, applies the (possibly faulty) lineage rewrite,
/// checks its type and evaluates it.
fn lineage_by_rewrite(case: &FuzzCase, key: &KeyType, faults: RewriteFaults) -> Result<Value, Divergence> {
    let plain = compile_query(&case.query, &case.catalog, &Mode::plain()).map_err(pipeline_err("compile"))?;
    let mut supply = NameSupply::new();
    supply.reserve(plain.desugared.all_names());
    let out = lineage_transform_with_faults(&plain.desugared, key, &mut supply, faults)
        .map_err(|e| diverge("lineage rewrite", "(root)", e.to_string()))?;
    let expected = crate::lineage::lineage_type_translate(&plain.source_type, key)
        .map_err(|e| diverge("type preservation", "(root)", e.to_string()))?;
    let got = typecheck(&out, &TypeEnv::with_key(Some(key.clone())))
        .map_err(|e| diverge("type preservation", "(root)", e.to_string()))?;
    if got != expected {
        return Err(diverge("type preservation", "(root)", format!("rewrite has type {got}, expected {expected}")));
    }
    eval(&out, &case.db, &Env::new()).map_err(|e| diverge("eval", "(root)", e.to_string()))
}

pub fn differential_check(case: &FuzzCase) -> Verdict {
    differential_check_with_faults(case, RewriteFaults::default())
}

#[doc(hidden)]
pub fn differential_check_with_faults(case: &FuzzCase, faults: RewriteFaults) -> Verdict {
    match check(case, faults) {
        Ok(()) => Verdict::Agree,
        Err(d) => Verdict::Diverge(d),
    }
}

fn check(case: &FuzzCase, faults: RewriteFaults) -> Result<(), Divergence> {
    let plain_c = compile_query(&case.query, &case.catalog, &Mode::plain()).map_err(pipeline_err("compile"))?;
    let plain = eval_compiled(&plain_c, &case.db).map_err(pipeline_err("plain eval"))?;

    let tables: BTreeSet<String> = case.query.expr.table_names();
    let decls: Vec<_> = tables.iter().filter_map(|n| case.catalog.get(n).cloned()).collect();
    let key = if decls.is_empty() {
        KeyType::Single(Prim::Int)
    } else {
        Catalog::uniform_key_type(decls.iter().map(|d| d.as_ref())).map_err(|e| diverge("key type", "(root)", e.to_string()))?
    };
    let by_rewrite = lineage_by_rewrite(case, &key, faults)?;
    let by_oracle =
        oracle_eval_lineage(&case.query, &case.catalog, &case.db, &key).map_err(|e| diverge("oracle", "(root)", e.to_string()))?;
    compare("lineage", &by_oracle, &by_rewrite)?;
    compare("lineage erasure", &plain, &by_rewrite.erase())?;
    compare("oracle erasure", &plain, &by_oracle.erase())?;
    validate_annotations(&by_rewrite, &case.catalog, &case.db).map_err(|e| diverge("lineage forgery", "(root)", e))?;

    if let Some(w) = &case.where_variant {
        let c = compile_query(&w.query, &w.catalog, &Mode::where_prov()).map_err(pipeline_err("where-provenance compile"))?;
        let by_rewrite = eval_compiled(&c, &case.db).map_err(pipeline_err("where-provenance eval"))?;
        let by_oracle = oracle_eval_whereprov(&w.query, &w.catalog, &case.db)
            .map_err(|e| diverge("where-provenance oracle", "(root)", e.to_string()))?;
        compare("where-provenance", &by_oracle, &by_rewrite)?;
        compare("where-provenance erasure", &plain, &by_rewrite.erase())?;
        validate_annotations(&by_rewrite, &w.catalog, &case.db).map_err(|e| diverge("where-provenance forgery", "(root)", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<(u64, Divergence)>,
}

/// Checks seeds `base .. base + n`.
pub fn run_fuzz(base: u64, n: u64, bounds: SizeBounds) -> FuzzReport {
    let mut report = FuzzReport { passed: 0, failed: 0, first_failure: None };
    for seed in base..base + n {
        match differential_check(&gen_random_case(seed, bounds)) {
            Verdict::Agree => report.passed += 1,
            Verdict::Diverge(d) => {
                report.failed += 1;
                report.first_failure.get_or_insert((seed, d));
            }
        }
    }
    report
}
