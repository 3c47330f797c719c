//! SQL text for flat conjunctive queries: nested `concatMap`s over tables
//! and guards with a singleton head of column projections.

use thiserror::Error;

use crate::ir::{Builtin, CoreExpr, Literal, ScalarOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query is not flat at {path}: {reason}")]
pub struct NotFlat {
    pub reason: String,
    /// Where in the term the problem is, e.g. `body.body.head[2]`.
    pub path: String,
}

fn not_flat<T>(path: &str, reason: impl Into<String>) -> Result<T, NotFlat> {
    Err(NotFlat { reason: reason.into(), path: path.to_string() })
}

enum Binder {
    Table { alias: String, columns: Vec<String> },
    Unit,
}

#[derive(Default)]
struct Select {
    from: Vec<(String, String)>,
    conds: Vec<String>,
    scope: Vec<(String, Binder)>,
}

impl Select {
    fn column(&self, e: &CoreExpr, path: &str) -> Result<String, NotFlat> {
        let CoreExpr::App(Builtin::TupleProj(n), args) = e else {
            return not_flat(path, "expected a column projection");
        };
        let CoreExpr::Var(v, _) = &args[0] else {
            return not_flat(path, "projection of something other than a row variable");
        };
        match self.scope.iter().rev().find(|(name, _)| name == v) {
            Some((_, Binder::Table { alias, columns })) => match columns.get(n - 1) {
                Some(c) => Ok(format!("{alias}.{c}")),
                None => not_flat(path, format!("column {n} out of range")),
            },
            Some((_, Binder::Unit)) => not_flat(path, format!("`{v}` is a guard binder, not a row")),
            None => not_flat(path, format!("`{v}` is not bound by a generator")),
        }
    }

    fn operand(&self, e: &CoreExpr, path: &str) -> Result<String, NotFlat> {
        match e {
            CoreExpr::Const(Literal::Str(s)) => Ok(format!("'{}'", s.replace('\'', "''"))),
            CoreExpr::Const(Literal::Int(i)) => Ok(i.to_string()),
            CoreExpr::Const(Literal::Bool(b)) => Ok(if *b { "TRUE" } else { "FALSE" }.into()),
            other => self.column(other, path),
        }
    }

    fn conjuncts(&mut self, e: &CoreExpr, path: &str) -> Result<(), NotFlat> {
        match e {
            CoreExpr::Op(ScalarOp::And, args) => {
                self.conjuncts(&args[0], &format!("{path}.left"))?;
                self.conjuncts(&args[1], &format!("{path}.right"))
            }
            CoreExpr::Op(ScalarOp::Eq, args) => {
                let l = self.operand(&args[0], &format!("{path}.left"))?;
                let r = self.operand(&args[1], &format!("{path}.right"))?;
                self.conds.push(format!("({l} = {r})"));
                Ok(())
            }
            _ => not_flat(path, "guard is not a conjunction of equalities"),
        }
    }

    fn walk(&mut self, e: &CoreExpr, path: &str) -> Result<Vec<String>, NotFlat> {
        match e {
            CoreExpr::App(Builtin::ConcatMap, args) => {
                let CoreExpr::Lam { var, body, .. } = &args[0] else {
                    return not_flat(path, "concatMap without a lambda");
                };
                let src_path = format!("{path}.source");
                let binder = match &args[1] {
                    CoreExpr::TableRef { decl, row } => {
                        if row.has_where_prov() {
                            return not_flat(&src_path, format!("table `{}` carries where-provenance", decl.name));
                        }
                        let alias = format!("a{}", self.from.len());
                        self.from.push((decl.name.clone(), alias.clone()));
                        Binder::Table { alias, columns: decl.columns.iter().map(|(c, _)| c.clone()).collect() }
                    }
                    CoreExpr::App(Builtin::Guard, g) => {
                        self.conjuncts(&g[0], &format!("{src_path}.guard"))?;
                        Binder::Unit
                    }
                    _ => return not_flat(&src_path, "generator source is neither a table nor a guard"),
                };
                self.scope.push((var.clone(), binder));
                self.walk(body, &format!("{path}.body"))
            }
            CoreExpr::ListLit { elems, .. } if elems.len() == 1 => {
                let head = format!("{path}.head");
                match &elems[0] {
                    CoreExpr::TupleLit(cs) => cs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| self.column(c, &format!("{head}[{}]", i + 1)))
                        .collect(),
                    single => Ok(vec![self.column(single, &head)?]),
                }
            }
            CoreExpr::Annot(..) => not_flat(path, "provenance annotation"),
            _ => not_flat(path, "expected concatMap over a table or guard, or a singleton head"),
        }
    }
}

/// Renders `expr` as one `SELECT` statement. Tables are aliased `a0`, `a1`, …
/// in generator order and result columns named `i1`, `i2`, ….
pub fn to_sql(expr: &CoreExpr) -> Result<String, NotFlat> {
    if expr.has_annotations() {
        return not_flat("root", "provenance annotations are present");
    }
    let mut s = Select::default();
    let cols = s.walk(expr, "root")?;
    if s.from.is_empty() {
        return not_flat("root", "no table is scanned");
    }
    let cols: Vec<_> = cols.iter().enumerate().map(|(i, c)| format!("{c} AS i{}", i + 1)).collect();
    let from: Vec<_> = s.from.iter().map(|(t, a)| format!("{t} AS {a}")).collect();
    let mut sql = format!("SELECT {} FROM {}", cols.join(", "), from.join(", "));
    if !s.conds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&s.conds.join(" AND "));
    }
    Ok(sql)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::subst::NameSupply;
    use crate::surface::{desugar, parse};

    fn sql(q: &str) -> Result<String, NotFlat> {
        let cat = fixtures::tours_catalog();
        to_sql(&desugar(&parse(q, &cat).unwrap(), &cat, &mut NameSupply::new()).unwrap())
    }

    #[test]
    fn q1() {
        assert_eq!(
            sql(fixtures::Q1).unwrap(),
            "SELECT a1.et_name AS i1, a0.a_phone AS i2 FROM agencies AS a0, externaltours AS a1 \
             WHERE (a0.a_name = a1.et_name) AND (a1.et_type = 'boat')"
        );
    }

    #[test]
    fn no_guard_no_where() {
        assert_eq!(sql(fixtures::Q0).unwrap(), "SELECT a0.a_name AS i1 FROM agencies AS a0");
    }

    #[test]
    fn quotes_are_doubled() {
        let s = sql(r#"[ a_id(a) | a <- agencies, a_name(a) == "Burns's" && a_id(a) == 2 ]"#).unwrap();
        assert!(s.ends_with("WHERE (a0.a_name = 'Burns''s') AND (a0.a_id = 2)"), "{s}");
    }

    #[test]
    fn whole_row_head_is_rejected() {
        let e = sql("[ x | x <- agencies ]").unwrap_err();
        assert_eq!(e.path, "root.body.head");
    }

    #[test]
    fn disjunction_is_rejected() {
        assert!(sql(r#"[ a_id(a) | a <- agencies, a_id(a) == 1 || a_id(a) == 2 ]"#).is_err());
    }
}
