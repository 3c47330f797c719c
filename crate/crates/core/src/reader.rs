//! Reader for pretty-printed core terms and types.
//!
//! Terms are parsed untyped and then elaborated against a catalog: binder
//! types of lambdas passed to `map`/`concatMap` are recovered from the list
//! argument, other lambdas need an explicit `λx : T.` annotation, and `⊥`
//! lineage and `emptyProv` take the key type supplied by the caller.

use thiserror::Error;

use crate::catalog::Catalog;
use crate::ir::{AnnotExpr, Builtin, CoreExpr, Literal, ScalarOp};
use crate::lex::{SyntaxError, Tok, Tokens};
use crate::typecheck::{typecheck, TypeEnv, TypeError};
use crate::types::{CoreType, KeyType, Prim};

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown identifier `{0}`")]
    Unknown(String),
    #[error("cannot infer the type of {0}")]
    Inference(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

enum Raw {
    Lit(Literal),
    Ident(String),
    Unit,
    List(Vec<Raw>),
    EmptyList(CoreType),
    Tuple(Vec<Raw>),
    Lam(String, Option<CoreType>, Box<Raw>),
    App(Builtin, Vec<Raw>),
    TableWhere(String),
    Annot(Box<Raw>, RawAnnot),
    Data(Box<Raw>),
    Prov(Box<Raw>),
    EmptyProv(Box<Raw>),
    Op(ScalarOp, Vec<Raw>),
}

enum RawAnnot {
    Bottom,
    Where(String, String, Box<Raw>),
    Row(String, Box<Raw>),
    Of(Box<Raw>),
    Append(Box<RawAnnot>, Box<RawAnnot>),
}

/// Parses a type, e.g. `[Lineage (String, String) Int]`.
pub fn parse_type(src: &str) -> Result<CoreType, SyntaxError> {
    let mut t = Tokens::new(src)?;
    let ty = ty(&mut t)?;
    t.expect(&Tok::Eof)?;
    Ok(ty)
}

/// Parses a key type, accepting lower-case aliases (`int`, `string`,
/// `(int, string)`).
pub fn parse_key_type(src: &str) -> Result<KeyType, SyntaxError> {
    let ty = parse_type(src)?;
    KeyType::from_core(&ty).ok_or_else(|| SyntaxError { pos: Default::default(), message: format!("{ty} is not a key type") })
}

fn prim_name(name: &str) -> Option<Prim> {
    Some(match name {
        "Int" | "int" | "Integer" | "integer" => Prim::Int,
        "Bool" | "bool" => Prim::Bool,
        "String" | "string" | "Str" | "str" | "Text" | "text" => Prim::Str,
        _ => return None,
    })
}

fn ty(t: &mut Tokens) -> Result<CoreType, SyntaxError> {
    let from = ty_app(t)?;
    if t.eat(&Tok::RArrow) {
        Ok(CoreType::arrow(from, ty(t)?))
    } else {
        Ok(from)
    }
}

fn key_atom(t: &mut Tokens) -> Result<KeyType, SyntaxError> {
    let k = ty_atom(t)?;
    match KeyType::from_core(&k) {
        Some(k) => Ok(k),
        None => t.error(format!("{k} is not a key type")),
    }
}

fn ty_app(t: &mut Tokens) -> Result<CoreType, SyntaxError> {
    if let Tok::Ident(name) = t.peek().clone() {
        match name.as_str() {
            "WhereProv" => {
                t.next();
                let base = ty_atom(t)?;
                let Some(p) = base.as_prim() else {
                    return t.error("where-provenance base must be primitive");
                };
                return Ok(CoreType::WhereProv(p, key_atom(t)?));
            }
            "Lineage" => {
                t.next();
                let base = ty_atom(t)?;
                return Ok(CoreType::lineage(base, key_atom(t)?));
            }
            "WhereAnnot" => {
                t.next();
                return Ok(CoreType::WhereAnnot(key_atom(t)?));
            }
            "LineageSet" => {
                t.next();
                return Ok(CoreType::LineageSet(key_atom(t)?));
            }
            _ => {}
        }
    }
    ty_atom(t)
}

fn ty_atom(t: &mut Tokens) -> Result<CoreType, SyntaxError> {
    match t.next() {
        Tok::Ident(name) => match prim_name(&name) {
            Some(p) => Ok(CoreType::Prim(p)),
            None => t.error(format!("unknown type `{name}`")),
        },
        Tok::LBrack => {
            let e = ty(t)?;
            t.expect(&Tok::RBrack)?;
            Ok(CoreType::list(e))
        }
        Tok::LParen => {
            if t.eat(&Tok::RParen) {
                return Ok(CoreType::UNIT);
            }
            let first = ty(t)?;
            let mut items = vec![first];
            while t.eat(&Tok::Comma) {
                items.push(ty(t)?);
            }
            t.expect(&Tok::RParen)?;
            if items.len() == 1 {
                Ok(items.pop().unwrap())
            } else {
                Ok(CoreType::Tuple(items))
            }
        }
        other => t.error(format!("expected a type, found {other}")),
    }
}

fn expr(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    if t.eat(&Tok::Lambda) {
        let var = t.ident()?;
        let ann = if t.eat(&Tok::Colon) { Some(ty(t)?) } else { None };
        t.expect(&Tok::Dot)?;
        let body = expr(t)?;
        return Ok(Raw::Lam(var, ann, Box::new(body)));
    }
    or_expr(t)
}

fn or_expr(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    let mut left = and_expr(t)?;
    while t.eat(&Tok::OrOr) {
        let right = and_expr(t)?;
        left = Raw::Op(ScalarOp::Or, vec![left, right]);
    }
    Ok(left)
}

fn and_expr(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    let mut left = eq_expr(t)?;
    while t.eat(&Tok::AndAnd) {
        let right = eq_expr(t)?;
        left = Raw::Op(ScalarOp::And, vec![left, right]);
    }
    Ok(left)
}

fn eq_expr(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    let left = app_expr(t)?;
    if t.eat(&Tok::EqEq) {
        let right = app_expr(t)?;
        return Ok(Raw::Op(ScalarOp::Eq, vec![left, right]));
    }
    Ok(left)
}

fn app_expr(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    if let Tok::Ident(name) = t.peek().clone() {
        if let Some(b) = Builtin::from_name(&name) {
            t.next();
            let args = (0..b.arity()).map(|_| postfix(t)).collect::<Result<Vec<_>, _>>()?;
            return Ok(Raw::App(b, args));
        }
        match name.as_str() {
            "not" => {
                t.next();
                return Ok(Raw::Op(ScalarOp::Not, vec![postfix(t)?]));
            }
            "emptyProv" => {
                t.next();
                return Ok(Raw::EmptyProv(Box::new(postfix(t)?)));
            }
            _ => {}
        }
    }
    postfix(t)
}

fn postfix(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    let mut e = atom(t)?;
    loop {
        if t.eat(&Tok::Dot) {
            match t.next() {
                Tok::Int(n) if n >= 1 => e = Raw::App(Builtin::TupleProj(n as usize), vec![e]),
                Tok::Ident(f) if f == "data" => e = Raw::Data(Box::new(e)),
                Tok::Ident(f) if f == "prov" => e = Raw::Prov(Box::new(e)),
                other => return t.error(format!("expected projection, found {other}")),
            }
        } else if t.eat(&Tok::Caret) {
            let a = annot(t)?;
            e = Raw::Annot(Box::new(e), a);
        } else {
            return Ok(e);
        }
    }
}

fn annot(t: &mut Tokens) -> Result<RawAnnot, SyntaxError> {
    match t.peek() {
        Tok::Bottom => {
            t.next();
            Ok(RawAnnot::Bottom)
        }
        Tok::LBrace => {
            t.next();
            let sum = lineage_sum(t)?;
            t.expect(&Tok::RBrace)?;
            Ok(sum)
        }
        Tok::LParen => annot_tuple(t),
        other => t.error(format!("expected annotation, found {other}")),
    }
}

/// `("t", k)` or `("t", "c", k)`.
fn annot_tuple(t: &mut Tokens) -> Result<RawAnnot, SyntaxError> {
    t.expect(&Tok::LParen)?;
    let Tok::Str(table) = t.next() else {
        return t.error("expected table name");
    };
    t.expect(&Tok::Comma)?;
    if let (Tok::Str(column), Tok::Comma) = (t.peek().clone(), t.peek_at(1).clone()) {
        t.next();
        t.next();
        let key = expr(t)?;
        t.expect(&Tok::RParen)?;
        return Ok(RawAnnot::Where(table, column, Box::new(key)));
    }
    let key = expr(t)?;
    t.expect(&Tok::RParen)?;
    Ok(RawAnnot::Row(table, Box::new(key)))
}

fn lineage_sum(t: &mut Tokens) -> Result<RawAnnot, SyntaxError> {
    let mut left = lineage_term(t)?;
    while t.eat(&Tok::Oplus) {
        let right = lineage_term(t)?;
        left = RawAnnot::Append(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn lineage_term(t: &mut Tokens) -> Result<RawAnnot, SyntaxError> {
    match (t.peek(), t.peek_at(1)) {
        (Tok::Bottom, _) => {
            t.next();
            Ok(RawAnnot::Bottom)
        }
        (Tok::LBrace, _) => {
            t.next();
            let s = lineage_sum(t)?;
            t.expect(&Tok::RBrace)?;
            Ok(s)
        }
        (Tok::LParen, Tok::Str(_)) if matches!(t.peek_at(2), Tok::Comma) => annot_tuple(t),
        _ => Ok(RawAnnot::Of(Box::new(or_expr(t)?))),
    }
}

fn atom(t: &mut Tokens) -> Result<Raw, SyntaxError> {
    match t.next() {
        Tok::Int(i) => Ok(Raw::Lit(Literal::Int(i))),
        Tok::Str(s) => Ok(Raw::Lit(Literal::Str(s))),
        Tok::Ident(s) if s == "true" => Ok(Raw::Lit(Literal::Bool(true))),
        Tok::Ident(s) if s == "false" => Ok(Raw::Lit(Literal::Bool(false))),
        Tok::Ident(s) => {
            if t.peek() == &Tok::At {
                t.next();
                let tag = t.ident()?;
                if tag != "where" {
                    return t.error(format!("unknown table tag `@{tag}`"));
                }
                return Ok(Raw::TableWhere(s));
            }
            Ok(Raw::Ident(s))
        }
        Tok::LBrack => {
            let items = comma_list(t, &Tok::RBrack)?;
            if items.is_empty() {
                return t.error("empty list needs a type ascription: ([] :: [T])");
            }
            Ok(Raw::List(items))
        }
        Tok::LParen => {
            if t.eat(&Tok::RParen) {
                return Ok(Raw::Unit);
            }
            if t.peek() == &Tok::LBrack && t.peek_at(1) == &Tok::RBrack {
                t.next();
                t.next();
                t.expect(&Tok::ColonColon)?;
                let list_ty = ty(t)?;
                t.expect(&Tok::RParen)?;
                return match list_ty {
                    CoreType::List(e) => Ok(Raw::EmptyList(*e)),
                    other => t.error(format!("empty list ascribed non-list type {other}")),
                };
            }
            let mut items = comma_list(t, &Tok::RParen)?;
            if items.len() == 1 {
                Ok(items.pop().unwrap())
            } else {
                Ok(Raw::Tuple(items))
            }
        }
        other => t.error(format!("unexpected {other}")),
    }
}

fn comma_list(t: &mut Tokens, close: &Tok) -> Result<Vec<Raw>, SyntaxError> {
    let mut items = Vec::new();
    if t.eat(close) {
        return Ok(items);
    }
    loop {
        items.push(expr(t)?);
        if t.eat(close) {
            return Ok(items);
        }
        t.expect(&Tok::Comma)?;
    }
}

/// Parses and elaborates a pretty-printed core term.
pub fn read_expr(src: &str, catalog: &Catalog, key: Option<KeyType>) -> Result<CoreExpr, ReadError> {
    let mut t = Tokens::new(src)?;
    let raw = expr(&mut t)?;
    t.expect(&Tok::Eof)?;
    let mut el = Elaborator { catalog, env: TypeEnv::with_key(key) };
    el.expr(&raw)
}

struct Elaborator<'c> {
    catalog: &'c Catalog,
    env: TypeEnv,
}

impl Elaborator<'_> {
    fn type_of(&self, e: &CoreExpr) -> Result<CoreType, ReadError> {
        Ok(typecheck(e, &self.env)?)
    }

    fn lambda(&mut self, var: &str, var_ty: CoreType, body: &Raw) -> Result<CoreExpr, ReadError> {
        self.env.bind(var, var_ty.clone());
        let body = self.expr(body);
        self.env.pop_binding();
        Ok(CoreExpr::lam(var, var_ty, body?))
    }

    fn expr(&mut self, raw: &Raw) -> Result<CoreExpr, ReadError> {
        Ok(match raw {
            Raw::Lit(l) => CoreExpr::Const(l.clone()),
            Raw::Unit => CoreExpr::Unit,
            Raw::Ident(name) => {
                if let Some(ty) = self.env.lookup(name) {
                    CoreExpr::var(name.clone(), ty.clone())
                } else if let Some(decl) = self.catalog.get(name) {
                    CoreExpr::table(decl.clone())
                } else {
                    return Err(ReadError::Unknown(name.clone()));
                }
            }
            Raw::TableWhere(name) => match self.catalog.get(name) {
                Some(decl) => CoreExpr::table_where_prov(decl.clone()),
                None => return Err(ReadError::Unknown(name.clone())),
            },
            Raw::List(items) => {
                let elems = items.iter().map(|i| self.expr(i)).collect::<Result<Vec<_>, _>>()?;
                let elem_ty = self.type_of(&elems[0])?;
                CoreExpr::ListLit { elem_ty, elems }
            }
            Raw::EmptyList(elem_ty) => CoreExpr::ListLit { elem_ty: elem_ty.clone(), elems: vec![] },
            Raw::Tuple(items) => CoreExpr::TupleLit(items.iter().map(|i| self.expr(i)).collect::<Result<_, _>>()?),
            Raw::Lam(var, Some(ty), body) => self.lambda(var, ty.clone(), body)?,
            Raw::Lam(var, None, _) => {
                return Err(ReadError::Inference(format!("the binder of λ{var} (annotate it as λ{var} : T.)")))
            }
            Raw::App(b @ (Builtin::Map | Builtin::ConcatMap), args) => {
                let xs = self.expr(&args[1])?;
                let f = match &args[0] {
                    Raw::Lam(var, ann, body) => {
                        let elem = match ann {
                            Some(t) => t.clone(),
                            None => match self.type_of(&xs)? {
                                CoreType::List(e) => *e,
                                other => return Err(ReadError::Inference(format!("λ{var} over non-list {other}"))),
                            },
                        };
                        self.lambda(var, elem, body)?
                    }
                    other => self.expr(other)?,
                };
                CoreExpr::app(*b, vec![f, xs])
            }
            Raw::App(b, args) => CoreExpr::app(*b, args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?),
            Raw::Annot(body, a) => {
                let body = self.expr(body)?;
                CoreExpr::annot(body, self.annot(a)?)
            }
            Raw::Data(e) => CoreExpr::data(self.expr(e)?),
            Raw::Prov(e) => CoreExpr::prov(self.expr(e)?),
            Raw::EmptyProv(e) => CoreExpr::EmptyProv(Box::new(self.expr(e)?)),
            Raw::Op(op, args) => CoreExpr::Op(*op, args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?),
        })
    }

    fn annot(&mut self, a: &RawAnnot) -> Result<AnnotExpr, ReadError> {
        Ok(match a {
            RawAnnot::Bottom => AnnotExpr::Bottom,
            RawAnnot::Where(table, column, key) => {
                AnnotExpr::Where { table: table.clone(), column: column.clone(), key: Box::new(self.expr(key)?) }
            }
            RawAnnot::Row(table, key) => AnnotExpr::LineageRow { table: table.clone(), key: Box::new(self.expr(key)?) },
            RawAnnot::Of(e) => AnnotExpr::LineageOf(Box::new(self.expr(e)?)),
            RawAnnot::Append(l, r) => AnnotExpr::append(self.annot(l)?, self.annot(r)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn types_parse() {
        assert_eq!(parse_type("[(String, Int)]").unwrap(), CoreType::list(CoreType::Tuple(vec![CoreType::STR, CoreType::INT])));
        assert_eq!(
            parse_type("[Lineage (String, String) Int]").unwrap().to_string(),
            "[Lineage (String, String) Int]"
        );
        assert_eq!(parse_type("Int -> [Bool]").unwrap(), CoreType::arrow(CoreType::INT, CoreType::list(CoreType::BOOL)));
        assert_eq!(parse_key_type("int").unwrap(), KeyType::Single(Prim::Int));
        assert_eq!(parse_key_type("(int, string)").unwrap(), KeyType::Compound(vec![Prim::Int, Prim::Str]));
        assert!(parse_key_type("[int]").is_err());
    }

    #[test]
    fn unannotated_standalone_lambda_is_rejected() {
        let cat = Catalog::default();
        assert!(matches!(read_expr("λx. x", &cat, None), Err(ReadError::Inference(_))));
        assert!(read_expr("λx : Int. x", &cat, None).is_ok());
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(read_expr("nope", &Catalog::default(), None), Err(ReadError::Unknown(_))));
    }
}
