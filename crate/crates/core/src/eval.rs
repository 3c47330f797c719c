//! Call-by-value list-semantics evaluator.

use thiserror::Error;

use crate::catalog::Database;
use crate::ir::{AnnotExpr, Builtin, CoreExpr, ScalarOp};
use crate::value::{KeyValue, LineageEntry, LineageSet, Value, WhereAnnotation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation type error: {0}")]
    EvalTypeError(String),
    #[error("no data loaded for table `{0}`")]
    UnknownTable(String),
}

/// Variable bindings, innermost last.
pub type Env = Vec<(String, Value)>;

pub fn eval(expr: &CoreExpr, db: &Database, env: &Env) -> Result<Value, EvalError> {
    let mut env = env.clone();
    Evaluator { db }.eval(expr, &mut env)
}

fn bad<T>(msg: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError::EvalTypeError(msg.into()))
}

fn list(v: Value) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::List(es) => Ok(es),
        other => bad(format!("expected a list, found {other:?}")),
    }
}

fn boolean(v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => bad(format!("expected a boolean, found {other:?}")),
    }
}

struct Evaluator<'d> {
    db: &'d Database,
}

impl Evaluator<'_> {
    fn apply(&self, f: &CoreExpr, arg: Value, env: &mut Env) -> Result<Value, EvalError> {
        let CoreExpr::Lam { var, body, .. } = f else {
            return bad("function argument is not a lambda");
        };
        env.push((var.clone(), arg));
        let r = self.eval(body, env);
        env.pop();
        r
    }

    fn eval(&self, expr: &CoreExpr, env: &mut Env) -> Result<Value, EvalError> {
        Ok(match expr {
            CoreExpr::Const(l) => Value::from(l.to_scalar()),
            CoreExpr::Unit => Value::Unit,
            CoreExpr::Var(name, _) => match env.iter().rev().find(|(n, _)| n == name) {
                Some((_, v)) => v.clone(),
                None => return bad(format!("unbound variable `{name}`")),
            },
            CoreExpr::ListLit { elems, .. } => Value::List(elems.iter().map(|e| self.eval(e, env)).collect::<Result<_, _>>()?),
            CoreExpr::TupleLit(elems) => Value::Tuple(elems.iter().map(|e| self.eval(e, env)).collect::<Result<_, _>>()?),
            CoreExpr::Lam { .. } => return bad("a function is not a value"),
            CoreExpr::TableRef { decl, row } => {
                if row.has_where_prov() {
                    return bad(format!("table `{}` still awaits the where-provenance rewrite", decl.name));
                }
                let rows = self.db.rows(&decl.name).ok_or_else(|| EvalError::UnknownTable(decl.name.clone()))?;
                Value::List(rows.iter().map(|r| Value::Tuple(r.iter().cloned().map(Value::from).collect())).collect())
            }
            CoreExpr::App(b, args) => self.app(*b, args, env)?,
            CoreExpr::Annot(body, a) => {
                let v = self.eval(body, env)?;
                match a {
                    AnnotExpr::Where { table, column, key } => {
                        let Some(data) = v.as_scalar() else {
                            return bad("where-provenance on a non-scalar value");
                        };
                        let key = self.key(key, env)?;
                        Value::WhereProv {
                            data,
                            prov: Some(WhereAnnotation { table: table.clone(), column: column.clone(), key }),
                        }
                    }
                    lineage => Value::Lineage { data: Box::new(v), lineage: self.lineage(lineage, env)? },
                }
            }
            CoreExpr::DataProj(e) => match self.eval(e, env)? {
                Value::WhereProv { data, .. } => Value::from(data),
                Value::Lineage { data, .. } => *data,
                other => return bad(format!(".data on {other:?}")),
            },
            CoreExpr::ProvProj(e) => match self.eval(e, env)? {
                Value::WhereProv { prov, .. } => Value::WhereAnnot(prov),
                Value::Lineage { lineage, .. } => Value::LineageSet(lineage),
                other => return bad(format!(".prov on {other:?}")),
            },
            CoreExpr::EmptyProv(e) => match self.eval(e, env)?.as_scalar() {
                Some(data) => Value::WhereProv { data, prov: None },
                None => return bad("blank provenance on a non-scalar value"),
            },
            CoreExpr::Op(op, args) => {
                let vs = args.iter().map(|a| self.eval(a, env)).collect::<Result<Vec<_>, _>>()?;
                match op {
                    ScalarOp::Eq => {
                        if vs[0].as_scalar().is_none() {
                            return bad("equality on non-scalar values");
                        }
                        Value::Bool(vs[0] == vs[1])
                    }
                    ScalarOp::And => Value::Bool(boolean(vs[0].clone())? && boolean(vs[1].clone())?),
                    ScalarOp::Or => Value::Bool(boolean(vs[0].clone())? || boolean(vs[1].clone())?),
                    ScalarOp::Not => Value::Bool(!boolean(vs[0].clone())?),
                }
            }
        })
    }

    fn key(&self, e: &CoreExpr, env: &mut Env) -> Result<KeyValue, EvalError> {
        let v = self.eval(e, env)?;
        KeyValue::from_value(&v).map_or_else(|| bad(format!("{v:?} is not a key")), Ok)
    }

    fn lineage(&self, a: &AnnotExpr, env: &mut Env) -> Result<LineageSet, EvalError> {
        Ok(match a {
            AnnotExpr::Bottom => LineageSet::new(),
            AnnotExpr::LineageRow { table, key } => LineageSet::from([LineageEntry::new(table.clone(), self.key(key, env)?)]),
            AnnotExpr::LineageOf(e) => match self.eval(e, env)? {
                Value::LineageSet(s) => s,
                other => return bad(format!("expected a lineage set, found {other:?}")),
            },
            AnnotExpr::LineageAppend(l, r) => {
                let mut s = self.lineage(l, env)?;
                s.extend(self.lineage(r, env)?);
                s
            }
            AnnotExpr::Where { .. } => return bad("where-provenance annotation used as lineage"),
        })
    }

    fn app(&self, b: Builtin, args: &[CoreExpr], env: &mut Env) -> Result<Value, EvalError> {
        Ok(match b {
            Builtin::ConcatMap => {
                let xs = list(self.eval(&args[1], env)?)?;
                let mut out = Vec::new();
                for x in xs {
                    out.extend(list(self.apply(&args[0], x, env)?)?);
                }
                Value::List(out)
            }
            Builtin::Map => {
                let xs = list(self.eval(&args[1], env)?)?;
                Value::List(xs.into_iter().map(|x| self.apply(&args[0], x, env)).collect::<Result<_, _>>()?)
            }
            Builtin::Append => {
                let mut xs = list(self.eval(&args[0], env)?)?;
                xs.extend(list(self.eval(&args[1], env)?)?);
                Value::List(xs)
            }
            Builtin::Reverse => {
                let mut xs = list(self.eval(&args[0], env)?)?;
                xs.reverse();
                Value::List(xs)
            }
            Builtin::Guard => {
                if boolean(self.eval(&args[0], env)?)? {
                    Value::List(vec![Value::Unit])
                } else {
                    Value::List(vec![])
                }
            }
            Builtin::Cons => {
                let x = self.eval(&args[0], env)?;
                let mut xs = list(self.eval(&args[1], env)?)?;
                xs.insert(0, x);
                Value::List(xs)
            }
            Builtin::Zip => {
                let xs = list(self.eval(&args[0], env)?)?;
                let ys = list(self.eval(&args[1], env)?)?;
                Value::List(xs.into_iter().zip(ys).map(|(x, y)| Value::Tuple(vec![x, y])).collect())
            }
            Builtin::TupleProj(n) => match self.eval(&args[0], env)? {
                Value::Tuple(mut cs) if n >= 1 && n <= cs.len() => cs.swap_remove(n - 1),
                other => return bad(format!("projection .{n} of {other:?}")),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ir::Literal;
    use crate::subst::NameSupply;
    use crate::surface::{desugar, parse};

    #[test]
    fn q1_plain() {
        let cat = fixtures::tours_catalog();
        let e = desugar(&parse(fixtures::Q1, &cat).unwrap(), &cat, &mut NameSupply::new()).unwrap();
        let v = eval(&e, &fixtures::tours_db(), &Env::new()).unwrap();
        let row = |a: &str, b: &str| Value::Tuple(vec![Value::str(a), Value::str(b)]);
        assert_eq!(
            v,
            Value::List(vec![row("EdinTours", "412 1200"), row("EdinTours", "412 1200"), row("Burns's", "607 3000")])
        );
    }

    #[test]
    fn guard_false_is_empty() {
        let e = CoreExpr::guard(CoreExpr::Const(Literal::Bool(false)));
        assert_eq!(eval(&e, &Database::new(), &Env::new()), Ok(Value::List(vec![])));
    }

    #[test]
    fn empty_table_gives_empty_result() {
        let cat = fixtures::tours_catalog();
        let mut db = fixtures::tours_db();
        db.insert_table(cat.get("externaltours").unwrap(), vec![]).unwrap();
        let e = desugar(&parse(fixtures::Q1, &cat).unwrap(), &cat, &mut NameSupply::new()).unwrap();
        assert_eq!(eval(&e, &db, &Env::new()), Ok(Value::List(vec![])));
    }
}
