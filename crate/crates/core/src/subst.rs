//! Fresh names, capture-avoiding substitution and alpha-equivalence.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ir::{AnnotExpr, CoreExpr};

/// Deterministic supply of fresh variable names `x0`, `x1`, ….
///
/// Names marked reserved (typically every name in the query being
/// compiled) are skipped. The supply serializes, so a run can be resumed
/// with the same continuation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameSupply {
    next: u64,
    reserved: BTreeSet<String>,
}

impl NameSupply {
    pub fn new() -> NameSupply {
        NameSupply::default()
    }

    pub fn reserve<I, S>(&mut self, names: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.reserved.extend(names.into_iter().map(Into::into));
    }

    pub fn fresh(&mut self) -> String {
        self.fresh_avoiding(&BTreeSet::new())
    }

    /// A fresh name that also avoids `avoid`.
    pub fn fresh_avoiding(&mut self, avoid: &BTreeSet<String>) -> String {
        loop {
            let name = format!("x{}", self.next);
            self.next += 1;
            if !self.reserved.contains(&name) && !avoid.contains(&name) {
                self.reserved.insert(name.clone());
                return name;
            }
        }
    }
}

/// Replaces free occurrences of `var` in `expr` by `replacement`, renaming
/// binders that would capture free variables of the replacement.
pub fn substitute(expr: &CoreExpr, var: &str, replacement: &CoreExpr, supply: &mut NameSupply) -> CoreExpr {
    let repl_free = replacement.free_vars();
    subst(expr, var, replacement, &repl_free, supply)
}

fn subst(expr: &CoreExpr, var: &str, repl: &CoreExpr, repl_free: &BTreeSet<String>, supply: &mut NameSupply) -> CoreExpr {
    match expr {
        CoreExpr::Var(name, _) if name == var => repl.clone(),
        CoreExpr::Lam { var: bound, .. } if bound == var => expr.clone(),
        CoreExpr::Lam { var: bound, var_ty, body } => {
            if repl_free.contains(bound) && body.free_vars().contains(var) {
                let mut avoid = repl_free.clone();
                avoid.extend(body.all_names());
                avoid.insert(var.to_string());
                let renamed = supply.fresh_avoiding(&avoid);
                let body = subst(body, bound, &CoreExpr::var(renamed.clone(), var_ty.clone()), &BTreeSet::new(), supply);
                CoreExpr::lam(renamed, var_ty.clone(), subst(&body, var, repl, repl_free, supply))
            } else {
                CoreExpr::lam(bound.clone(), var_ty.clone(), subst(body, var, repl, repl_free, supply))
            }
        }
        other => other.map_children(&mut |c| subst(c, var, repl, repl_free, supply)),
    }
}

/// Equality up to consistent renaming of bound variables. Variable and
/// binder types must agree.
pub fn alpha_eq(a: &CoreExpr, b: &CoreExpr) -> bool {
    Alpha { left: Vec::new(), right: Vec::new() }.expr(a, b)
}

struct Alpha<'a> {
    left: Vec<&'a str>,
    right: Vec<&'a str>,
}

impl<'a> Alpha<'a> {
    fn depth(stack: &[&str], name: &str) -> Option<usize> {
        stack.iter().rev().position(|n| *n == name)
    }

    fn all(&mut self, a: &'a [CoreExpr], b: &'a [CoreExpr]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| self.expr(x, y))
    }

    fn annot(&mut self, a: &'a AnnotExpr, b: &'a AnnotExpr) -> bool {
        use AnnotExpr::*;
        match (a, b) {
            (Bottom, Bottom) => true,
            (Where { table: t1, column: c1, key: k1 }, Where { table: t2, column: c2, key: k2 }) => {
                t1 == t2 && c1 == c2 && self.expr(k1, k2)
            }
            (LineageRow { table: t1, key: k1 }, LineageRow { table: t2, key: k2 }) => t1 == t2 && self.expr(k1, k2),
            (LineageOf(x), LineageOf(y)) => self.expr(x, y),
            (LineageAppend(l1, r1), LineageAppend(l2, r2)) => self.annot(l1, l2) && self.annot(r1, r2),
            _ => false,
        }
    }

    fn expr(&mut self, a: &'a CoreExpr, b: &'a CoreExpr) -> bool {
        use CoreExpr::*;
        match (a, b) {
            (Const(x), Const(y)) => x == y,
            (Unit, Unit) => true,
            (Var(x, tx), Var(y, ty)) => {
                tx == ty
                    && match (Self::depth(&self.left, x), Self::depth(&self.right, y)) {
                        (Some(i), Some(j)) => i == j,
                        (None, None) => x == y,
                        _ => false,
                    }
            }
            (ListLit { elem_ty: t1, elems: e1 }, ListLit { elem_ty: t2, elems: e2 }) => t1 == t2 && self.all(e1, e2),
            (TupleLit(e1), TupleLit(e2)) => self.all(e1, e2),
            (Lam { var: v1, var_ty: t1, body: b1 }, Lam { var: v2, var_ty: t2, body: b2 }) => {
                if t1 != t2 {
                    return false;
                }
                self.left.push(v1);
                self.right.push(v2);
                let r = self.expr(b1, b2);
                self.left.pop();
                self.right.pop();
                r
            }
            (App(f1, a1), App(f2, a2)) => f1 == f2 && self.all(a1, a2),
            (Op(o1, a1), Op(o2, a2)) => o1 == o2 && self.all(a1, a2),
            (TableRef { decl: d1, row: r1 }, TableRef { decl: d2, row: r2 }) => d1 == d2 && r1 == r2,
            (Annot(b1, n1), Annot(b2, n2)) => self.expr(b1, b2) && self.annot(n1, n2),
            (DataProj(x), DataProj(y)) | (ProvProj(x), ProvProj(y)) | (EmptyProv(x), EmptyProv(y)) => self.expr(x, y),
            _ => false,
        }
    }
}
