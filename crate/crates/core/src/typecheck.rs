//! Type checking for core expressions.

use thiserror::Error;

use crate::ir::{AnnotExpr, Builtin, CoreExpr, ScalarOp};
use crate::types::{CoreType, KeyType, MAX_TUPLE_ARITY, MIN_TUPLE_ARITY};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("type mismatch at {path}: {message}")]
    TypeMismatch { path: String, message: String },
    #[error("unbound variable `{name}` at {path}")]
    UnboundVariable { path: String, name: String },
    #[error("annotation misuse at {path}: {message}")]
    AnnotationMisuse { path: String, message: String },
    #[error("unsupported construct at {path}: {message}")]
    Unsupported { path: String, message: String },
}

/// Variable typing context plus the key type used for blank annotations
/// (`M^⊥` and `emptyProv`), which carry no key of their own.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    vars: Vec<(String, CoreType)>,
    pub key: Option<KeyType>,
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv::default()
    }

    pub fn with_key(key: Option<KeyType>) -> TypeEnv {
        TypeEnv { vars: Vec::new(), key }
    }

    pub fn bind(&mut self, name: impl Into<String>, ty: CoreType) {
        self.vars.push((name.into(), ty));
    }

    pub fn lookup(&self, name: &str) -> Option<&CoreType> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Drops the most recent binding.
    pub fn pop_binding(&mut self) {
        self.vars.pop();
    }
}

pub fn typecheck(expr: &CoreExpr, env: &TypeEnv) -> Result<CoreType, TypeError> {
    let mut checker = Checker { env: env.clone(), path: vec!["root".to_string()] };
    checker.check(expr)
}

struct Checker {
    env: TypeEnv,
    path: Vec<String>,
}

impl Checker {
    fn path(&self) -> String {
        self.path.join("/")
    }

    fn mismatch<T>(&self, message: impl Into<String>) -> Result<T, TypeError> {
        Err(TypeError::TypeMismatch { path: self.path(), message: message.into() })
    }

    fn misuse<T>(&self, message: impl Into<String>) -> Result<T, TypeError> {
        Err(TypeError::AnnotationMisuse { path: self.path(), message: message.into() })
    }

    fn at<T>(&mut self, seg: impl Into<String>, f: impl FnOnce(&mut Self) -> Result<T, TypeError>) -> Result<T, TypeError> {
        self.path.push(seg.into());
        let r = f(self);
        self.path.pop();
        r
    }

    fn child(&mut self, seg: impl Into<String>, e: &CoreExpr) -> Result<CoreType, TypeError> {
        self.at(seg, |c| c.check(e))
    }

    fn expect_list(&self, ty: CoreType, what: &str) -> Result<CoreType, TypeError> {
        match ty {
            CoreType::List(e) => Ok(*e),
            other => self.mismatch(format!("{what} must be a list, found {other}")),
        }
    }

    fn check(&mut self, expr: &CoreExpr) -> Result<CoreType, TypeError> {
        match expr {
            CoreExpr::Const(l) => Ok(CoreType::Prim(l.prim())),
            CoreExpr::Unit => Ok(CoreType::UNIT),
            CoreExpr::Var(name, ty) => match self.env.lookup(name) {
                None => Err(TypeError::UnboundVariable { path: self.path(), name: name.clone() }),
                Some(bound) if bound != ty => {
                    self.mismatch(format!("variable `{name}` annotated {ty} but bound at {bound}"))
                }
                Some(_) => Ok(ty.clone()),
            },
            CoreExpr::ListLit { elem_ty, elems } => {
                for (i, e) in elems.iter().enumerate() {
                    let t = self.child(format!("elem{i}"), e)?;
                    if t != *elem_ty {
                        return self.mismatch(format!("list element {i} has type {t}, expected {elem_ty}"));
                    }
                }
                Ok(CoreType::list(elem_ty.clone()))
            }
            CoreExpr::TupleLit(elems) => {
                if !(MIN_TUPLE_ARITY..=MAX_TUPLE_ARITY).contains(&elems.len()) {
                    return self.mismatch(format!("tuple of arity {}", elems.len()));
                }
                let tys = elems
                    .iter()
                    .enumerate()
                    .map(|(i, e)| self.child(format!("tuple{}", i + 1), e))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(CoreType::Tuple(tys))
            }
            CoreExpr::Lam { var, var_ty, body } => {
                self.env.bind(var.clone(), var_ty.clone());
                let body_ty = self.at(format!("λ{var}"), |c| c.check(body));
                self.env.pop_binding();
                Ok(CoreType::arrow(var_ty.clone(), body_ty?))
            }
            CoreExpr::App(b, args) => self.at(b.name(), |c| c.check_app(*b, args)),
            CoreExpr::TableRef { decl, row } => {
                if row.labels() != decl.columns.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>() {
                    return self.mismatch(format!("row type of `{}` does not match its declaration", decl.name));
                }
                for ((label, ty), (_, prim)) in row.fields.iter().zip(&decl.columns) {
                    let ok = match ty {
                        CoreType::Prim(p) => p == prim,
                        CoreType::WhereProv(p, k) => {
                            p == prim && *k == decl.key_type() && decl.where_prov_columns.contains(label)
                        }
                        _ => false,
                    };
                    if !ok {
                        return self.mismatch(format!("column `{label}` of `{}` cannot have type {ty}", decl.name));
                    }
                }
                Ok(CoreType::list(row.as_tuple()))
            }
            CoreExpr::Annot(body, annot) => {
                let body_ty = self.child("annotated", body)?;
                self.at("annotation", |c| c.check_annot(body_ty, annot))
            }
            CoreExpr::DataProj(e) => match self.child("data", e)? {
                CoreType::WhereProv(p, _) => Ok(CoreType::Prim(p)),
                CoreType::Lineage(base, _) => Ok(*base),
                other => self.misuse(format!(".data applied to unannotated type {other}")),
            },
            CoreExpr::ProvProj(e) => match self.child("prov", e)? {
                CoreType::WhereProv(_, k) => Ok(CoreType::WhereAnnot(k)),
                CoreType::Lineage(_, k) => Ok(CoreType::LineageSet(k)),
                other => self.misuse(format!(".prov applied to unannotated type {other}")),
            },
            CoreExpr::EmptyProv(e) => {
                let t = self.child("emptyProv", e)?;
                let Some(p) = t.as_prim() else {
                    return self.misuse(format!("blank provenance can only be attached to primitive values, not {t}"));
                };
                match &self.env.key {
                    Some(k) => Ok(CoreType::WhereProv(p, k.clone())),
                    None => self.misuse("blank provenance needs a key type and none is known"),
                }
            }
            CoreExpr::Op(op, args) => {
                if args.len() != op.arity() {
                    return self.mismatch(format!("{op:?} takes {} arguments", op.arity()));
                }
                let tys = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| self.child(format!("{op:?}{i}"), a))
                    .collect::<Result<Vec<_>, _>>()?;
                match op {
                    ScalarOp::Eq => {
                        if tys.iter().any(|t| matches!(t, CoreType::WhereProv(..))) {
                            return self.misuse("equality on a where-provenance value; project .data first");
                        }
                        if tys[0].as_prim().is_none() {
                            return self.mismatch(format!("equality on non-primitive type {}", tys[0]));
                        }
                        if tys[0] != tys[1] {
                            return self.mismatch(format!("cannot compare {} with {}", tys[0], tys[1]));
                        }
                        Ok(CoreType::BOOL)
                    }
                    ScalarOp::And | ScalarOp::Or | ScalarOp::Not => {
                        if let Some(t) = tys.iter().find(|t| **t != CoreType::BOOL) {
                            return self.mismatch(format!("boolean operator applied to {t}"));
                        }
                        Ok(CoreType::BOOL)
                    }
                }
            }
        }
    }

    fn check_lambda_arg(&mut self, f: &CoreExpr, elem: &CoreType) -> Result<CoreType, TypeError> {
        let CoreExpr::Lam { var_ty, .. } = f else {
            return Err(TypeError::Unsupported {
                path: self.path(),
                message: "function argument must be a lambda".into(),
            });
        };
        if var_ty != elem {
            return self.mismatch(format!("lambda binds {var_ty} but the list holds {elem}"));
        }
        match self.child("fn", f)? {
            CoreType::Arrow(_, result) => Ok(*result),
            _ => unreachable!("lambda types as an arrow"),
        }
    }

    fn check_app(&mut self, b: Builtin, args: &[CoreExpr]) -> Result<CoreType, TypeError> {
        if args.len() != b.arity() {
            return self.mismatch(format!("{} takes {} arguments, given {}", b.name(), b.arity(), args.len()));
        }
        match b {
            Builtin::ConcatMap | Builtin::Map => {
                let xs = self.child("list", &args[1])?;
                let elem = self.expect_list(xs, "second argument")?;
                let result = self.check_lambda_arg(&args[0], &elem)?;
                if b == Builtin::ConcatMap {
                    let inner = self.expect_list(result, "concatMap function result")?;
                    Ok(CoreType::list(inner))
                } else {
                    Ok(CoreType::list(result))
                }
            }
            Builtin::Append => {
                let a = self.child("left", &args[0])?;
                let b = self.child("right", &args[1])?;
                self.expect_list(a.clone(), "append argument")?;
                if a != b {
                    return self.mismatch(format!("append of {a} and {b}"));
                }
                Ok(a)
            }
            Builtin::Reverse => {
                let a = self.child("list", &args[0])?;
                self.expect_list(a.clone(), "reverse argument")?;
                Ok(a)
            }
            Builtin::Guard => {
                let t = self.child("cond", &args[0])?;
                if t != CoreType::BOOL {
                    return self.mismatch(format!("guard condition has type {t}"));
                }
                Ok(CoreType::list(CoreType::UNIT))
            }
            Builtin::Cons => {
                let x = self.child("head", &args[0])?;
                let xs = self.child("tail", &args[1])?;
                let elem = self.expect_list(xs.clone(), "cons tail")?;
                if elem != x {
                    return self.mismatch(format!("cons of {x} onto {xs}"));
                }
                Ok(xs)
            }
            Builtin::Zip => {
                let a = self.child("left", &args[0])?;
                let b = self.child("right", &args[1])?;
                let ea = self.expect_list(a, "zip argument")?;
                let eb = self.expect_list(b, "zip argument")?;
                Ok(CoreType::list(CoreType::Tuple(vec![ea, eb])))
            }
            Builtin::TupleProj(n) => match self.child("tuple", &args[0])? {
                CoreType::Tuple(cs) if n >= 1 && n <= cs.len() => Ok(cs[n - 1].clone()),
                other => self.mismatch(format!("projection .{n} out of {other}")),
            },
        }
    }

    fn lineage_key(&mut self, annot: &AnnotExpr) -> Result<KeyType, TypeError> {
        match annot {
            AnnotExpr::Bottom => match &self.env.key {
                Some(k) => Ok(k.clone()),
                None => self.misuse("empty lineage needs a key type and none is known"),
            },
            AnnotExpr::LineageRow { key, .. } => {
                let t = self.child("key", key)?;
                KeyType::from_core(&t).map_or_else(|| self.misuse(format!("{t} is not a key type")), Ok)
            }
            AnnotExpr::LineageOf(e) => match self.child("lineage", e)? {
                CoreType::LineageSet(k) => Ok(k),
                other => self.misuse(format!("expected a lineage set, found {other}")),
            },
            AnnotExpr::LineageAppend(l, r) => {
                let kl = self.at("⊕left", |c| c.lineage_key(l))?;
                let kr = self.at("⊕right", |c| c.lineage_key(r))?;
                if kl != kr {
                    return self.misuse(format!("appending lineage keyed {kl} with lineage keyed {kr}"));
                }
                Ok(kl)
            }
            AnnotExpr::Where { .. } => self.misuse("where-provenance annotation inside lineage"),
        }
    }

    fn check_annot(&mut self, body_ty: CoreType, annot: &AnnotExpr) -> Result<CoreType, TypeError> {
        if matches!(body_ty, CoreType::WhereProv(..) | CoreType::Lineage(..)) {
            return self.misuse(format!("value of type {body_ty} is already annotated"));
        }
        match annot {
            AnnotExpr::Where { key, .. } => {
                let Some(p) = body_ty.as_prim() else {
                    return self.misuse(format!("where-provenance on non-primitive type {body_ty}"));
                };
                let kt = self.child("key", key)?;
                match KeyType::from_core(&kt) {
                    Some(k) => Ok(CoreType::WhereProv(p, k)),
                    None => self.misuse(format!("{kt} is not a key type")),
                }
            }
            lineage => {
                let k = self.lineage_key(lineage)?;
                Ok(CoreType::lineage(body_ty, k))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::types::Prim;

    fn agencies_elem() -> CoreType {
        CoreType::Tuple(vec![CoreType::INT, CoreType::STR, CoreType::STR, CoreType::STR])
    }

    #[test]
    fn unit_is_unit() {
        assert_eq!(typecheck(&CoreExpr::Unit, &TypeEnv::new()), Ok(CoreType::UNIT));
    }

    #[test]
    fn identity_comprehension_types_as_table_rows() {
        let cat = fixtures::tours_catalog();
        let a = cat.get("agencies").unwrap().clone();
        let e = CoreExpr::concat_map(
            CoreExpr::lam("x", agencies_elem(), CoreExpr::singleton(agencies_elem(), CoreExpr::var("x", agencies_elem()))),
            CoreExpr::table(a),
        );
        assert_eq!(typecheck(&e, &TypeEnv::new()), Ok(CoreType::list(agencies_elem())));
    }

    #[test]
    fn unbound_variable_reports_path() {
        let e = CoreExpr::guard(CoreExpr::var("b", CoreType::BOOL));
        match typecheck(&e, &TypeEnv::new()) {
            Err(TypeError::UnboundVariable { name, path }) => {
                assert_eq!(name, "b");
                assert_eq!(path, "root/guard/cond");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn data_on_plain_value_is_misuse() {
        let e = CoreExpr::data(CoreExpr::str("x"));
        assert!(matches!(typecheck(&e, &TypeEnv::new()), Err(TypeError::AnnotationMisuse { .. })));
    }

    #[test]
    fn eq_on_where_prov_without_data_is_misuse() {
        let k = KeyType::Single(Prim::Int);
        let mut env = TypeEnv::with_key(Some(k.clone()));
        env.bind("p", CoreType::WhereProv(Prim::Str, k.clone()));
        let bad = CoreExpr::eq(CoreExpr::var("p", CoreType::WhereProv(Prim::Str, k.clone())), CoreExpr::str("x"));
        assert!(matches!(typecheck(&bad, &env), Err(TypeError::AnnotationMisuse { .. })));
        let good = CoreExpr::eq(CoreExpr::data(CoreExpr::var("p", CoreType::WhereProv(Prim::Str, k))), CoreExpr::str("x"));
        assert_eq!(typecheck(&good, &env), Ok(CoreType::BOOL));
    }

    #[test]
    fn eq_requires_equal_types() {
        let e = CoreExpr::eq(CoreExpr::int(1), CoreExpr::str("1"));
        assert!(matches!(typecheck(&e, &TypeEnv::new()), Err(TypeError::TypeMismatch { .. })));
    }

    #[test]
    fn guard_yields_unit_list() {
        let e = CoreExpr::guard(CoreExpr::Const(crate::ir::Literal::Bool(true)));
        assert_eq!(typecheck(&e, &TypeEnv::new()), Ok(CoreType::list(CoreType::UNIT)));
    }

    #[test]
    fn projection_bounds_checked() {
        let t = CoreExpr::TupleLit(vec![CoreExpr::int(1), CoreExpr::str("a")]);
        assert_eq!(typecheck(&CoreExpr::proj(t.clone(), 2), &TypeEnv::new()), Ok(CoreType::STR));
        assert!(typecheck(&CoreExpr::proj(t.clone(), 0), &TypeEnv::new()).is_err());
        assert!(typecheck(&CoreExpr::proj(t, 3), &TypeEnv::new()).is_err());
    }

    #[test]
    fn bottom_needs_key() {
        let e = CoreExpr::annot(CoreExpr::int(1), AnnotExpr::Bottom);
        assert!(typecheck(&e, &TypeEnv::new()).is_err());
        let k = KeyType::Single(Prim::Int);
        assert_eq!(
            typecheck(&e, &TypeEnv::with_key(Some(k.clone()))),
            Ok(CoreType::lineage(CoreType::INT, k))
        );
    }

    #[test]
    fn map_requires_lambda_argument() {
        let mut env = TypeEnv::new();
        let fty = CoreType::arrow(CoreType::INT, CoreType::INT);
        env.bind("f", fty.clone());
        let e = CoreExpr::map(CoreExpr::var("f", fty), CoreExpr::singleton(CoreType::INT, CoreExpr::int(1)));
        assert!(matches!(typecheck(&e, &env), Err(TypeError::Unsupported { .. })));
    }
}
