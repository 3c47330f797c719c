//! Lineage rewrite and its type translation, parameterized by the key type.
//!
//! Function bodies are rewritten before the binder is replaced by `x.data`.
//! The input cannot contain `.data`, so substituting first would hand the
//! rewrite a term it has no rule for; both orders give the same result.

use thiserror::Error;

use crate::catalog::KeyTypeMismatch;
use crate::ir::{AnnotExpr, Builtin, CoreExpr};
use crate::subst::{substitute, NameSupply};
use crate::typecheck::{typecheck, TypeEnv, TypeError};
use crate::types::{CoreType, KeyType};
use crate::whereprov::key_projection_expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineageError {
    #[error("lineage cannot be combined with other provenance: {0}")]
    CompositionUnsupported(String),
    #[error("unsupported construct for lineage: {0}")]
    UnsupportedConstruct(String),
    #[error(transparent)]
    KeyTypeMismatch(#[from] KeyTypeMismatch),
    #[error(transparent)]
    Type(#[from] TypeError),
}

pub fn lineage_type_translate(ty: &CoreType, key: &KeyType) -> Result<CoreType, LineageError> {
    Ok(match ty {
        CoreType::Prim(_) => ty.clone(),
        CoreType::List(e) => CoreType::list(CoreType::lineage(lineage_type_translate(e, key)?, key.clone())),
        CoreType::Tuple(cs) => CoreType::Tuple(cs.iter().map(|c| lineage_type_translate(c, key)).collect::<Result<_, _>>()?),
        CoreType::Arrow(a, b) => CoreType::arrow(lineage_type_translate(a, key)?, lineage_type_translate(b, key)?),
        CoreType::WhereProv(..) | CoreType::Lineage(..) | CoreType::WhereAnnot(_) | CoreType::LineageSet(_) => {
            return Err(LineageError::CompositionUnsupported(format!("input type {ty} already carries provenance")))
        }
    })
}

/// Deliberate defects for checking that the differential harness notices
/// a broken rewrite. Not for use outside tests.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewriteFaults {
    /// Forget the generator's lineage (`x.prov`) in the concatMap rule.
    pub drop_generator_lineage: bool,
}

pub fn lineage_transform(expr: &CoreExpr, key: &KeyType, supply: &mut NameSupply) -> Result<CoreExpr, LineageError> {
    lineage_transform_with_faults(expr, key, supply, RewriteFaults::default())
}

#[doc(hidden)]
pub fn lineage_transform_with_faults(
    expr: &CoreExpr,
    key: &KeyType,
    supply: &mut NameSupply,
    faults: RewriteFaults,
) -> Result<CoreExpr, LineageError> {
    supply.reserve(expr.all_names());
    let mut r = Rewriter { key, supply, env: TypeEnv::new(), faults };
    r.go(expr)
}

struct Rewriter<'a> {
    key: &'a KeyType,
    supply: &'a mut NameSupply,
    /// Types of the input term's bound variables.
    env: TypeEnv,
    faults: RewriteFaults,
}

impl Rewriter<'_> {
    fn tr(&self, ty: &CoreType) -> Result<CoreType, LineageError> {
        lineage_type_translate(ty, self.key)
    }

    fn lineage_elem(&self, input_list_ty: &CoreType) -> Result<CoreType, LineageError> {
        match self.tr(input_list_ty)? {
            CoreType::List(e) => Ok(*e),
            other => Err(LineageError::UnsupportedConstruct(format!("expected a list type, found {other}"))),
        }
    }

    /// `map (λy. y^⊥) xs` where `xs` holds elements of (translated) type `elem`.
    fn blank(&mut self, elem: CoreType, xs: CoreExpr) -> CoreExpr {
        let y = self.supply.fresh();
        let body = CoreExpr::annot(CoreExpr::var(y.clone(), elem.clone()), AnnotExpr::Bottom);
        CoreExpr::map(CoreExpr::lam(y, elem, body), xs)
    }

    fn go(&mut self, expr: &CoreExpr) -> Result<CoreExpr, LineageError> {
        Ok(match expr {
            CoreExpr::Const(_) | CoreExpr::Unit => expr.clone(),
            CoreExpr::Var(name, ty) => CoreExpr::var(name.clone(), self.tr(ty)?),
            CoreExpr::TableRef { decl, row } => {
                if row.has_where_prov() {
                    return Err(LineageError::CompositionUnsupported(format!(
                        "table `{}` is referenced with where-provenance columns",
                        decl.name
                    )));
                }
                let found = decl.key_type();
                if found != *self.key {
                    return Err(KeyTypeMismatch { expected: Some(self.key.clone()), tables: vec![(decl.name.clone(), found)] }.into());
                }
                let row_ty = row.as_tuple();
                let x = CoreExpr::var(self.supply.fresh(), row_ty.clone());
                let key = key_projection_expr(decl, &x);
                let CoreExpr::Var(xn, _) = &x else { unreachable!() };
                let body = CoreExpr::annot(x.clone(), AnnotExpr::LineageRow { table: decl.name.clone(), key: Box::new(key) });
                CoreExpr::map(CoreExpr::lam(xn.clone(), row_ty, body), expr.clone())
            }
            CoreExpr::App(b @ (Builtin::ConcatMap | Builtin::Map), args) => self.bind_rule(*b, &args[0], &args[1])?,
            CoreExpr::App(Builtin::Append, args) => CoreExpr::app(Builtin::Append, vec![self.go(&args[0])?, self.go(&args[1])?]),
            CoreExpr::App(Builtin::Reverse, args) => CoreExpr::app(Builtin::Reverse, vec![self.go(&args[0])?]),
            CoreExpr::App(Builtin::Zip, args) => {
                let xs = self.go(&args[0])?;
                let ys = self.go(&args[1])?;
                let a = self.lineage_elem(&typecheck(&args[0], &self.env)?)?;
                let b = self.lineage_elem(&typecheck(&args[1], &self.env)?)?;
                let pair = CoreType::Tuple(vec![a, b]);
                let x = CoreExpr::var(self.supply.fresh(), pair.clone());
                let side = |n| CoreExpr::proj(x.clone(), n);
                let data = CoreExpr::TupleLit(vec![CoreExpr::data(side(1)), CoreExpr::data(side(2))]);
                let lin = AnnotExpr::append(
                    AnnotExpr::lineage_of(CoreExpr::prov(side(1))),
                    AnnotExpr::lineage_of(CoreExpr::prov(side(2))),
                );
                let CoreExpr::Var(xn, _) = &x else { unreachable!() };
                CoreExpr::map(CoreExpr::lam(xn.clone(), pair, CoreExpr::annot(data, lin)), CoreExpr::app(Builtin::Zip, vec![xs, ys]))
            }
            CoreExpr::App(Builtin::Cons, args) => {
                let head = self.go(&args[0])?;
                let tail = self.go(&args[1])?;
                CoreExpr::app(Builtin::Cons, vec![CoreExpr::annot(head, AnnotExpr::Bottom), tail])
            }
            CoreExpr::App(Builtin::Guard, args) => {
                let g = CoreExpr::guard(self.go(&args[0])?);
                self.blank(CoreType::UNIT, g)
            }
            CoreExpr::App(Builtin::TupleProj(n), args) => CoreExpr::proj(self.go(&args[0])?, *n),
            CoreExpr::ListLit { elem_ty, elems } => {
                let t = self.tr(elem_ty)?;
                let elems = elems.iter().map(|e| self.go(e)).collect::<Result<Vec<_>, _>>()?;
                let lit = CoreExpr::ListLit { elem_ty: t.clone(), elems };
                self.blank(t, lit)
            }
            CoreExpr::TupleLit(es) => CoreExpr::TupleLit(es.iter().map(|e| self.go(e)).collect::<Result<_, _>>()?),
            CoreExpr::Op(op, args) => CoreExpr::Op(*op, args.iter().map(|e| self.go(e)).collect::<Result<_, _>>()?),
            CoreExpr::Lam { var, .. } => {
                return Err(LineageError::UnsupportedConstruct(format!(
                    "λ{var} outside the function position of map or concatMap"
                )))
            }
            CoreExpr::Annot(..) | CoreExpr::DataProj(_) | CoreExpr::ProvProj(_) | CoreExpr::EmptyProv(_) => {
                return Err(LineageError::CompositionUnsupported("the input already manipulates provenance".into()))
            }
        })
    }

    /// The concatMap and map rules.
    fn bind_rule(&mut self, b: Builtin, f: &CoreExpr, xs: &CoreExpr) -> Result<CoreExpr, LineageError> {
        let CoreExpr::Lam { var, var_ty, body } = f else {
            return Err(LineageError::UnsupportedConstruct(format!("{} over a non-lambda function", b.name())));
        };
        let xs_t = self.go(xs)?;

        self.env.bind(var.clone(), var_ty.clone());
        let inner = if b == Builtin::Map {
            let ty = typecheck(body, &self.env);
            ty.map(|t| CoreExpr::singleton(t, (**body).clone()))
        } else {
            Ok((**body).clone())
        };
        let result = inner.map_err(LineageError::from).and_then(|inner| {
            let inner_ty = typecheck(&inner, &self.env)?;
            Ok((self.go(&inner)?, inner_ty))
        });
        self.env.pop_binding();
        let (inner_t, inner_ty) = result?;

        let x_ty = CoreType::lineage(self.tr(var_ty)?, self.key.clone());
        let z_ty = self.lineage_elem(&inner_ty)?;
        let x = self.supply.fresh();
        let z = self.supply.fresh();
        let xv = CoreExpr::var(x.clone(), x_ty.clone());
        let zv = CoreExpr::var(z.clone(), z_ty.clone());

        let inner_t = substitute(&inner_t, var, &CoreExpr::data(xv.clone()), self.supply);
        let z_prov = AnnotExpr::lineage_of(CoreExpr::prov(zv.clone()));
        let lin = if self.faults.drop_generator_lineage {
            z_prov
        } else {
            AnnotExpr::append(z_prov, AnnotExpr::lineage_of(CoreExpr::prov(xv)))
        };
        let reannot = CoreExpr::lam(z, z_ty, CoreExpr::annot(CoreExpr::data(zv), lin));
        let body = CoreExpr::map(reannot, inner_t);
        Ok(CoreExpr::concat_map(CoreExpr::lam(x, x_ty, body), xs_t))
    }
}
