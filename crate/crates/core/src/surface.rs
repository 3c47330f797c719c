//! Surface comprehension syntax: parsing and desugaring into core terms.
//!
//! The surface language has no way to write an annotation. The tokens that
//! spell annotations in core terms (`^`, `⊥`, `⊕`, `λ`, `{`) are rejected
//! by this parser.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::catalog::{Catalog, TableDecl};
use crate::ir::{Builtin, CoreExpr, Literal, ScalarOp};
use crate::lex::{Pos, SyntaxError, Tok, Tokens};
use crate::subst::NameSupply;
use crate::typecheck::{typecheck, TypeEnv, TypeError};
use crate::types::{CoreType, KeyType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown table `{name}` at {pos}")]
    UnknownTable { name: String, pos: Pos },
    #[error("unknown field `{label}` at {pos}: {reason}")]
    UnknownField { label: String, pos: Pos, reason: String },
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Call {
    Append,
    Reverse,
    Zip,
    Cons,
    Data,
    Prov,
    EmptyProv,
    Not,
}

impl Call {
    pub fn name(self) -> &'static str {
        match self {
            Call::Append => "append",
            Call::Reverse => "reverse",
            Call::Zip => "zip",
            Call::Cons => "cons",
            Call::Data => "data",
            Call::Prov => "prov",
            Call::EmptyProv => "emptyProv",
            Call::Not => "not",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Call::Append | Call::Zip | Call::Cons => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Call> {
        Some(match name {
            "append" => Call::Append,
            "reverse" => Call::Reverse,
            "zip" => Call::Zip,
            "cons" => Call::Cons,
            "data" => Call::Data,
            "prov" => Call::Prov,
            "emptyProv" => Call::EmptyProv,
            "not" => Call::Not,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Var(String, Pos),
    Table(String, Pos),
    Lit(Literal),
    Unit,
    Tuple(Vec<SExpr>),
    /// `[e]` or `[e1, e2, …]`.
    List(Vec<SExpr>),
    Comp { head: Box<SExpr>, quals: Vec<Qual> },
    /// `label(e)` or `e.label`.
    Field { expr: Box<SExpr>, label: String, pos: Pos },
    /// `e.n`, 1-based.
    Proj(Box<SExpr>, usize),
    Call(Call, Vec<SExpr>),
    Eq(Box<SExpr>, Box<SExpr>),
    And(Box<SExpr>, Box<SExpr>),
    Or(Box<SExpr>, Box<SExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Qual {
    Gen { var: String, pos: Pos, source: SExpr },
    Guard(SExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceQuery {
    pub expr: SExpr,
}

impl SExpr {
    pub fn var(name: impl Into<String>) -> SExpr {
        SExpr::Var(name.into(), Pos::default())
    }

    pub fn table(name: impl Into<String>) -> SExpr {
        SExpr::Table(name.into(), Pos::default())
    }

    pub fn field(e: SExpr, label: impl Into<String>) -> SExpr {
        SExpr::Field { expr: Box::new(e), label: label.into(), pos: Pos::default() }
    }

    pub fn eq(a: SExpr, b: SExpr) -> SExpr {
        SExpr::Eq(Box::new(a), Box::new(b))
    }

    fn any(&self, pred: &mut impl FnMut(&SExpr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            SExpr::Var(..) | SExpr::Table(..) | SExpr::Lit(_) | SExpr::Unit => false,
            SExpr::Tuple(es) | SExpr::List(es) | SExpr::Call(_, es) => es.iter().any(|e| e.any(pred)),
            SExpr::Comp { head, quals } => {
                head.any(pred)
                    || quals.iter().any(|q| match q {
                        Qual::Gen { source, .. } => source.any(pred),
                        Qual::Guard(g) => g.any(pred),
                    })
            }
            SExpr::Field { expr, .. } | SExpr::Proj(expr, _) => expr.any(pred),
            SExpr::Eq(a, b) | SExpr::And(a, b) | SExpr::Or(a, b) => a.any(pred) || b.any(pred),
        }
    }

    /// Variable names bound or used anywhere in the query.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.any(&mut |e| {
            match e {
                SExpr::Var(n, _) => {
                    out.insert(n.clone());
                }
                SExpr::Comp { quals, .. } => {
                    for q in quals {
                        if let Qual::Gen { var, .. } = q {
                            out.insert(var.clone());
                        }
                    }
                }
                _ => {}
            }
            false
        });
        out
    }

    /// Names of the tables the query scans.
    pub fn table_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.any(&mut |e| {
            if let SExpr::Table(n, _) = e {
                out.insert(n.clone());
            }
            false
        });
        out
    }

    /// True if the query uses `data`, `prov` or `emptyProv`.
    pub fn uses_provenance_calls(&self) -> bool {
        self.any(&mut |e| matches!(e, SExpr::Call(Call::Data | Call::Prov | Call::EmptyProv, _)))
    }
}

// Rendering back to surface text; `parse(render(q))` gives `q` again.

const R_OR: u8 = 1;
const R_AND: u8 = 2;
const R_EQ: u8 = 3;
const R_POSTFIX: u8 = 4;

fn rprec(e: &SExpr) -> u8 {
    match e {
        SExpr::Or(..) => R_OR,
        SExpr::And(..) => R_AND,
        SExpr::Eq(..) => R_EQ,
        _ => R_POSTFIX,
    }
}

fn render(f: &mut fmt::Formatter<'_>, e: &SExpr, ctx: u8) -> fmt::Result {
    let paren = rprec(e) < ctx;
    if paren {
        f.write_str("(")?;
    }
    match e {
        SExpr::Var(n, _) | SExpr::Table(n, _) => f.write_str(n)?,
        SExpr::Lit(l) => {
            let mut s = String::new();
            crate::pretty::write_literal(&mut s, l);
            f.write_str(&s)?;
        }
        SExpr::Unit => f.write_str("()")?,
        SExpr::Tuple(es) => {
            f.write_str("(")?;
            render_list(f, es)?;
            f.write_str(")")?;
        }
        SExpr::List(es) => {
            f.write_str("[")?;
            render_list(f, es)?;
            f.write_str("]")?;
        }
        SExpr::Comp { head, quals } => {
            f.write_str("[ ")?;
            render(f, head, 0)?;
            f.write_str(" |")?;
            for (i, q) in quals.iter().enumerate() {
                f.write_str(if i == 0 { " " } else { ", " })?;
                match q {
                    Qual::Gen { var, source, .. } => {
                        write!(f, "{var} <- ")?;
                        render(f, source, 0)?;
                    }
                    Qual::Guard(g) => render(f, g, 0)?,
                }
            }
            f.write_str(" ]")?;
        }
        SExpr::Field { expr, label, .. } => {
            write!(f, "{label}(")?;
            render(f, expr, 0)?;
            f.write_str(")")?;
        }
        SExpr::Proj(expr, n) => {
            render(f, expr, R_POSTFIX)?;
            write!(f, ".{n}")?;
        }
        SExpr::Call(c, args) => {
            write!(f, "{}(", c.name())?;
            render_list(f, args)?;
            f.write_str(")")?;
        }
        SExpr::Eq(a, b) => {
            render(f, a, R_EQ + 1)?;
            f.write_str(" == ")?;
            render(f, b, R_EQ + 1)?;
        }
        SExpr::And(a, b) => {
            render(f, a, R_AND)?;
            f.write_str(" && ")?;
            render(f, b, R_AND + 1)?;
        }
        SExpr::Or(a, b) => {
            render(f, a, R_OR)?;
            f.write_str(" || ")?;
            render(f, b, R_OR + 1)?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

fn render_list(f: &mut fmt::Formatter<'_>, es: &[SExpr]) -> fmt::Result {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        render(f, e, 0)?;
    }
    Ok(())
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(f, self, 0)
    }
}

impl fmt::Display for SurfaceQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

// Parsing.

/// Parses a query, resolving free identifiers to catalog tables.
pub fn parse(src: &str, catalog: &Catalog) -> Result<SurfaceQuery, SurfaceError> {
    let mut p = Parser { t: Tokens::new(src)?, catalog, scope: Vec::new() };
    let expr = p.expr()?;
    p.t.expect(&Tok::Eof)?;
    Ok(SurfaceQuery { expr })
}

struct Parser<'c> {
    t: Tokens,
    catalog: &'c Catalog,
    scope: Vec<String>,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> SurfaceError {
        SurfaceError::Syntax(SyntaxError { pos: self.t.pos(), message: message.into() })
    }

    fn expr(&mut self) -> Result<SExpr, SurfaceError> {
        let mut left = self.and()?;
        while self.t.eat(&Tok::OrOr) {
            let right = self.and()?;
            left = SExpr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<SExpr, SurfaceError> {
        let mut left = self.eq()?;
        while self.t.eat(&Tok::AndAnd) {
            let right = self.eq()?;
            left = SExpr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn eq(&mut self) -> Result<SExpr, SurfaceError> {
        let left = self.postfix()?;
        if self.t.eat(&Tok::EqEq) {
            let right = self.postfix()?;
            return Ok(SExpr::eq(left, right));
        }
        Ok(left)
    }

    fn postfix(&mut self) -> Result<SExpr, SurfaceError> {
        let mut e = self.atom()?;
        while self.t.peek() == &Tok::Dot {
            self.t.next();
            let pos = self.t.pos();
            match self.t.next() {
                Tok::Int(n) if n >= 1 => e = SExpr::Proj(Box::new(e), n as usize),
                Tok::Ident(label) => e = SExpr::Field { expr: Box::new(e), label, pos },
                other => return Err(self.syntax(format!("expected field name, found {other}"))),
            }
        }
        Ok(e)
    }

    fn args(&mut self, n: usize, name: &str) -> Result<Vec<SExpr>, SurfaceError> {
        self.t.expect(&Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while self.t.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        if args.len() != n {
            return Err(self.syntax(format!("{name} takes {n} argument(s), given {}", args.len())));
        }
        self.t.expect(&Tok::RParen)?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<SExpr, SurfaceError> {
        let pos = self.t.pos();
        match self.t.next() {
            Tok::Int(i) => Ok(SExpr::Lit(Literal::Int(i))),
            Tok::Str(s) => Ok(SExpr::Lit(Literal::Str(s))),
            Tok::Ident(s) if s == "true" => Ok(SExpr::Lit(Literal::Bool(true))),
            Tok::Ident(s) if s == "false" => Ok(SExpr::Lit(Literal::Bool(false))),
            Tok::Ident(name) => {
                if self.t.peek() == &Tok::LParen {
                    if let Some(c) = Call::from_name(&name) {
                        return Ok(SExpr::Call(c, self.args(c.arity(), &name)?));
                    }
                    let mut args = self.args(1, &name)?;
                    return Ok(SExpr::Field { expr: Box::new(args.pop().unwrap()), label: name, pos });
                }
                if self.scope.contains(&name) {
                    Ok(SExpr::Var(name, pos))
                } else if self.catalog.get(&name).is_some() {
                    Ok(SExpr::Table(name, pos))
                } else {
                    Err(SurfaceError::UnknownTable { name, pos })
                }
            }
            Tok::LParen => {
                if self.t.eat(&Tok::RParen) {
                    return Ok(SExpr::Unit);
                }
                let mut items = vec![self.expr()?];
                while self.t.eat(&Tok::Comma) {
                    items.push(self.expr()?);
                }
                self.t.expect(&Tok::RParen)?;
                if items.len() == 1 {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(SExpr::Tuple(items))
                }
            }
            Tok::LBrack => self.bracket(),
            other => Err(SyntaxError { pos, message: format!("unexpected {other}") }.into()),
        }
    }

    /// After `[`: a comprehension, a singleton or a list literal.
    fn bracket(&mut self) -> Result<SExpr, SurfaceError> {
        if self.t.peek() == &Tok::RBrack {
            return Err(self.syntax("empty list literal; its element type cannot be determined"));
        }
        // The head sees the generator variables, which come after it in the
        // text, so scan ahead for `ident <-` at bracket depth zero.
        let outer = self.scope.len();
        self.scope.extend(self.lookahead_generators());
        let head = self.expr()?;
        self.scope.truncate(outer);
        if self.t.eat(&Tok::Comma) {
            let mut items = vec![head];
            loop {
                items.push(self.expr()?);
                if !self.t.eat(&Tok::Comma) {
                    break;
                }
            }
            self.t.expect(&Tok::RBrack)?;
            return Ok(SExpr::List(items));
        }
        if self.t.eat(&Tok::RBrack) {
            return Ok(SExpr::List(vec![head]));
        }
        self.t.expect(&Tok::Pipe)?;
        let mut quals = Vec::new();
        if !self.t.eat(&Tok::RBrack) {
            loop {
                if let (Tok::Ident(var), Tok::LArrow) = (self.t.peek().clone(), self.t.peek_at(1).clone()) {
                    let pos = self.t.pos();
                    self.t.next();
                    self.t.next();
                    let source = self.expr()?;
                    self.scope.push(var.clone());
                    quals.push(Qual::Gen { var, pos, source });
                } else {
                    quals.push(Qual::Guard(self.expr()?));
                }
                if self.t.eat(&Tok::RBrack) {
                    break;
                }
                self.t.expect(&Tok::Comma)?;
            }
        }
        self.scope.truncate(outer);
        Ok(SExpr::Comp { head: Box::new(head), quals })
    }

    fn lookahead_generators(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut past_pipe = false;
        let mut i = 0;
        loop {
            match self.t.peek_at(i) {
                Tok::Eof => break,
                Tok::LBrack | Tok::LParen => depth += 1,
                Tok::RBrack | Tok::RParen if depth == 0 => break,
                Tok::RBrack | Tok::RParen => depth -= 1,
                Tok::Pipe if depth == 0 => past_pipe = true,
                Tok::Ident(v) if depth == 0 && past_pipe && self.t.peek_at(i + 1) == &Tok::LArrow => out.push(v.clone()),
                _ => {}
            }
            i += 1;
        }
        out
    }
}

// Desugaring.

/// Label information tracked alongside types, so that `label(e)` can be
/// turned into a positional projection.
#[derive(Debug, Clone)]
enum Shape {
    Opaque,
    Row(Arc<TableDecl>),
    Tuple(Vec<Shape>),
    List(Box<Shape>),
}

impl Shape {
    fn elem(&self) -> Shape {
        match self {
            Shape::List(s) => (**s).clone(),
            _ => Shape::Opaque,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DesugarOptions {
    /// Type table references at their where-provenance row types, so flagged
    /// columns are annotated.
    pub where_prov: bool,
    /// Key type for typing blank annotations (`emptyProv`).
    pub key: Option<KeyType>,
}

/// Desugars with raw table row types.
pub fn desugar(q: &SurfaceQuery, catalog: &Catalog, supply: &mut NameSupply) -> Result<CoreExpr, SurfaceError> {
    desugar_with(q, catalog, supply, &DesugarOptions::default())
}

pub fn desugar_with(
    q: &SurfaceQuery,
    catalog: &Catalog,
    supply: &mut NameSupply,
    opts: &DesugarOptions,
) -> Result<CoreExpr, SurfaceError> {
    supply.reserve(q.expr.names());
    let mut d = Desugarer { catalog, supply, opts, env: TypeEnv::with_key(opts.key.clone()), shapes: Vec::new() };
    let (e, _) = d.expr(&q.expr)?;
    typecheck(&e, &TypeEnv::with_key(opts.key.clone()))?;
    Ok(e)
}

struct Desugarer<'a> {
    catalog: &'a Catalog,
    supply: &'a mut NameSupply,
    opts: &'a DesugarOptions,
    env: TypeEnv,
    shapes: Vec<(String, Shape)>,
}

impl Desugarer<'_> {
    fn type_of(&self, e: &CoreExpr) -> Result<CoreType, SurfaceError> {
        Ok(typecheck(e, &self.env)?)
    }

    fn expr(&mut self, e: &SExpr) -> Result<(CoreExpr, Shape), SurfaceError> {
        Ok(match e {
            SExpr::Var(name, pos) => {
                let Some(ty) = self.env.lookup(name).cloned() else {
                    return Err(SurfaceError::UnknownTable { name: name.clone(), pos: *pos });
                };
                let shape = self.shapes.iter().rev().find(|(n, _)| n == name).map(|(_, s)| s.clone()).unwrap_or(Shape::Opaque);
                (CoreExpr::var(name.clone(), ty), shape)
            }
            SExpr::Table(name, pos) => {
                let Some(decl) = self.catalog.get(name) else {
                    return Err(SurfaceError::UnknownTable { name: name.clone(), pos: *pos });
                };
                let e = if self.opts.where_prov {
                    CoreExpr::table_where_prov(decl.clone())
                } else {
                    CoreExpr::table(decl.clone())
                };
                (e, Shape::List(Box::new(Shape::Row(decl.clone()))))
            }
            SExpr::Lit(l) => (CoreExpr::Const(l.clone()), Shape::Opaque),
            SExpr::Unit => (CoreExpr::Unit, Shape::Opaque),
            SExpr::Tuple(items) => {
                let (es, shapes) = self.all(items)?;
                (CoreExpr::TupleLit(es), Shape::Tuple(shapes))
            }
            SExpr::List(items) => {
                let (es, shapes) = self.all(items)?;
                let elem_ty = self.type_of(&es[0])?;
                (CoreExpr::ListLit { elem_ty, elems: es }, Shape::List(Box::new(shapes[0].clone())))
            }
            SExpr::Comp { head, quals } => self.comp(head, quals)?,
            SExpr::Field { expr, label, pos } => {
                let (inner, shape) = self.expr(expr)?;
                let decl = match shape {
                    Shape::Row(d) => d,
                    _ => {
                        return Err(SurfaceError::UnknownField {
                            label: label.clone(),
                            pos: *pos,
                            reason: "the value is not a table row".into(),
                        })
                    }
                };
                let Some(i) = decl.column_index(label) else {
                    return Err(SurfaceError::UnknownField {
                        label: label.clone(),
                        pos: *pos,
                        reason: format!("table `{}` has no such column", decl.name),
                    });
                };
                (CoreExpr::proj(inner, i + 1), Shape::Opaque)
            }
            SExpr::Proj(expr, n) => {
                let (inner, shape) = self.expr(expr)?;
                let s = match shape {
                    Shape::Tuple(ss) => ss.get(n - 1).cloned().unwrap_or(Shape::Opaque),
                    _ => Shape::Opaque,
                };
                (CoreExpr::proj(inner, *n), s)
            }
            SExpr::Call(c, args) => {
                let (mut es, shapes) = self.all(args)?;
                match c {
                    Call::Append => (CoreExpr::app(Builtin::Append, es), shapes[0].clone()),
                    Call::Reverse => (CoreExpr::app(Builtin::Reverse, es), shapes[0].clone()),
                    Call::Cons => (CoreExpr::app(Builtin::Cons, es), shapes[1].clone()),
                    Call::Zip => {
                        let s = Shape::List(Box::new(Shape::Tuple(vec![shapes[0].elem(), shapes[1].elem()])));
                        (CoreExpr::app(Builtin::Zip, es), s)
                    }
                    Call::Data => (CoreExpr::data(es.pop().unwrap()), shapes[0].clone()),
                    Call::Prov => (CoreExpr::prov(es.pop().unwrap()), Shape::Opaque),
                    Call::EmptyProv => (CoreExpr::EmptyProv(Box::new(es.pop().unwrap())), Shape::Opaque),
                    Call::Not => (CoreExpr::Op(ScalarOp::Not, es), Shape::Opaque),
                }
            }
            SExpr::Eq(a, b) => self.binop(ScalarOp::Eq, a, b)?,
            SExpr::And(a, b) => self.binop(ScalarOp::And, a, b)?,
            SExpr::Or(a, b) => self.binop(ScalarOp::Or, a, b)?,
        })
    }

    fn binop(&mut self, op: ScalarOp, a: &SExpr, b: &SExpr) -> Result<(CoreExpr, Shape), SurfaceError> {
        let (a, _) = self.expr(a)?;
        let (b, _) = self.expr(b)?;
        Ok((CoreExpr::Op(op, vec![a, b]), Shape::Opaque))
    }

    fn all(&mut self, items: &[SExpr]) -> Result<(Vec<CoreExpr>, Vec<Shape>), SurfaceError> {
        let mut es = Vec::new();
        let mut ss = Vec::new();
        for i in items {
            let (e, s) = self.expr(i)?;
            es.push(e);
            ss.push(s);
        }
        Ok((es, ss))
    }

    fn comp(&mut self, head: &SExpr, quals: &[Qual]) -> Result<(CoreExpr, Shape), SurfaceError> {
        let Some((first, rest)) = quals.split_first() else {
            let (h, s) = self.expr(head)?;
            let ty = self.type_of(&h)?;
            return Ok((CoreExpr::singleton(ty, h), Shape::List(Box::new(s))));
        };
        let (var, source, source_shape) = match first {
            Qual::Gen { var, source, .. } => {
                let (src, shape) = self.expr(source)?;
                (var.clone(), src, shape)
            }
            Qual::Guard(g) => {
                let (g, _) = self.expr(g)?;
                (self.supply.fresh(), CoreExpr::guard(g), Shape::Opaque)
            }
        };
        let elem_ty = match self.type_of(&source)? {
            CoreType::List(e) => *e,
            other => {
                return Err(TypeError::TypeMismatch {
                    path: "root".into(),
                    message: format!("generator `{var}` ranges over non-list type {other}"),
                }
                .into())
            }
        };
        self.env.bind(var.clone(), elem_ty.clone());
        self.shapes.push((var.clone(), source_shape.elem()));
        let body = self.comp(head, rest);
        self.env.pop_binding();
        self.shapes.pop();
        let (body, shape) = body?;
        Ok((CoreExpr::concat_map(CoreExpr::lam(var, elem_ty, body), source), shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::subst::alpha_eq;

    fn cat() -> Catalog {
        fixtures::tours_catalog()
    }

    #[test]
    fn q1_has_two_generators_and_two_guards() {
        let q = parse(fixtures::Q1, &cat()).unwrap();
        let SExpr::Comp { quals, .. } = &q.expr else { panic!("not a comprehension") };
        assert_eq!(quals.iter().filter(|q| matches!(q, Qual::Gen { .. })).count(), 2);
        assert_eq!(quals.iter().filter(|q| matches!(q, Qual::Guard(_))).count(), 2);
    }

    #[test]
    fn identity_comprehension() {
        let c = cat();
        let q = parse("[ x | x <- agencies ]", &c).unwrap();
        let e = desugar(&q, &c, &mut NameSupply::new()).unwrap();
        let a = c.get("agencies").unwrap().clone();
        let row = a.raw_row_type().as_tuple();
        let want = CoreExpr::concat_map(
            CoreExpr::lam("x", row.clone(), CoreExpr::singleton(row.clone(), CoreExpr::var("x", row))),
            CoreExpr::table(a),
        );
        assert!(alpha_eq(&e, &want));
    }

    #[test]
    fn q0_desugars_to_projection() {
        let c = cat();
        let q = parse(fixtures::Q0, &c).unwrap();
        let e = desugar(&q, &c, &mut NameSupply::new()).unwrap();
        assert_eq!(crate::pretty::pretty(&e), "concatMap (λa. [a.2]) agencies");
    }

    #[test]
    fn dotted_field_and_positional_projection_agree() {
        let c = cat();
        let mut s = NameSupply::new();
        let a = desugar(&parse("[ a.a_name | a <- agencies ]", &c).unwrap(), &c, &mut s).unwrap();
        let b = desugar(&parse("[ a.2 | a <- agencies ]", &c).unwrap(), &c, &mut s).unwrap();
        assert!(alpha_eq(&a, &b));
    }

    #[test]
    fn prov_call_parses() {
        let c = fixtures::tours_catalog_where_prov();
        let q = parse("[ prov(a_phone(a)) | a <- agencies ]", &c).unwrap();
        assert!(q.expr.uses_provenance_calls());
    }

    #[test]
    fn unknown_table_and_field() {
        let c = cat();
        assert!(matches!(parse("[ x | x <- nope ]", &c), Err(SurfaceError::UnknownTable { .. })));
        let q = parse("[ bogus(a) | a <- agencies ]", &c).unwrap();
        assert!(matches!(desugar(&q, &c, &mut NameSupply::new()), Err(SurfaceError::UnknownField { .. })));
    }

    #[test]
    fn syntax_error_has_position() {
        match parse("[ a_name(a) | a <- agencies", &cat()) {
            Err(SurfaceError::Syntax(e)) => assert_eq!(e.pos.line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annotation_literals_are_rejected() {
        let c = cat();
        for src in [
            "[ a^⊥ | a <- agencies ]",
            r#"[ a_name(a)^("agencies", 1) | a <- agencies ]"#,
            r#"[ a_phone(a)^("agencies", "a_phone", 1) | a <- agencies ]"#,
            "[ a^{prov(a) ⊕ prov(a)} | a <- agencies ]",
            "[ (λx. x) | a <- agencies ]",
            "[ a | a <- agencies@where ]",
        ] {
            assert!(matches!(parse(src, &c), Err(SurfaceError::Syntax(_))), "{src} was accepted");
        }
    }

    #[test]
    fn render_round_trips() {
        let c = cat();
        for src in [fixtures::Q0, fixtures::Q1, "[ (x, y) | x <- reverse(agencies), y <- [1, 2], not(x.1 == 1) || true ]"] {
            let text = parse(src, &c).unwrap().to_string();
            assert_eq!(parse(&text, &c).unwrap().to_string(), text);
        }
    }

    #[test]
    fn guard_binders_are_fresh_units() {
        let c = cat();
        let q = parse("[ a | a <- agencies, true ]", &c).unwrap();
        let e = desugar(&q, &c, &mut NameSupply::new()).unwrap();
        assert_eq!(crate::pretty::pretty(&e), "concatMap (λa. concatMap (λx0. [a]) (guard true)) agencies");
    }
}
