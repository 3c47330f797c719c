//! Pretty-printer for core terms.
//!
//! The output is read back by [`crate::reader::read_expr`]. Notation:
//! `concatMap f xs`, `map f xs`, `guard b`, `λx. M`, `M.n`, `M.data`,
//! `M.prov`, `M^⊥`, `M^("t", k)`, `M^("t", "c", k)`, `M^{L1 ⊕ L2}`. A
//! table reference whose flagged columns still await the where-provenance
//! rewrite prints as `t@where`.

use crate::ir::{AnnotExpr, Builtin, CoreExpr, Literal, ScalarOp};

const LAMBDA: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const EQ: u8 = 3;
const APP: u8 = 4;
const POSTFIX: u8 = 5;
const ATOM: u8 = 6;

pub fn pretty(expr: &CoreExpr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr, LAMBDA, false);
    out
}

fn prec(e: &CoreExpr) -> u8 {
    match e {
        CoreExpr::Lam { .. } => LAMBDA,
        CoreExpr::Op(ScalarOp::Or, _) => OR,
        CoreExpr::Op(ScalarOp::And, _) => AND,
        CoreExpr::Op(ScalarOp::Eq, _) => EQ,
        CoreExpr::Op(ScalarOp::Not, _) | CoreExpr::EmptyProv(_) => APP,
        CoreExpr::App(Builtin::TupleProj(_), _) => POSTFIX,
        CoreExpr::App(..) => APP,
        CoreExpr::Annot(..) | CoreExpr::DataProj(_) | CoreExpr::ProvProj(_) => POSTFIX,
        _ => ATOM,
    }
}

pub(crate) fn write_literal(out: &mut String, l: &Literal) {
    match l {
        Literal::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Literal::Int(i) => out.push_str(&i.to_string()),
        Literal::Str(s) => out.push_str(&format!("{s:?}")),
    }
}

/// `infer_binder` is set for lambdas in function position of `map` and
/// `concatMap`, whose binder type the reader recovers from the list.
fn write_expr(out: &mut String, e: &CoreExpr, ctx: u8, infer_binder: bool) {
    let paren = prec(e) < ctx;
    if paren {
        out.push('(');
    }
    match e {
        CoreExpr::Const(l) => write_literal(out, l),
        CoreExpr::Var(n, _) => out.push_str(n),
        CoreExpr::Unit => out.push_str("()"),
        CoreExpr::ListLit { elem_ty, elems } if elems.is_empty() => {
            out.push_str(&format!("([] :: [{elem_ty}])"));
        }
        CoreExpr::ListLit { elems, .. } => {
            out.push('[');
            write_list(out, elems);
            out.push(']');
        }
        CoreExpr::TupleLit(elems) => {
            out.push('(');
            write_list(out, elems);
            out.push(')');
        }
        CoreExpr::Lam { var, var_ty, body } => {
            out.push('λ');
            out.push_str(var);
            if !infer_binder {
                out.push_str(&format!(" : {var_ty}"));
            }
            out.push_str(". ");
            write_expr(out, body, LAMBDA, false);
        }
        CoreExpr::App(Builtin::TupleProj(n), args) => {
            write_expr(out, &args[0], POSTFIX, false);
            out.push_str(&format!(".{n}"));
        }
        CoreExpr::App(b, args) => {
            out.push_str(b.name());
            let lambda_fn = matches!(b, Builtin::Map | Builtin::ConcatMap);
            for (i, a) in args.iter().enumerate() {
                out.push(' ');
                write_expr(out, a, POSTFIX, lambda_fn && i == 0);
            }
        }
        CoreExpr::TableRef { decl, row } => {
            out.push_str(&decl.name);
            if row.has_where_prov() {
                out.push_str("@where");
            }
        }
        CoreExpr::Annot(body, a) => {
            write_expr(out, body, POSTFIX, false);
            out.push('^');
            write_annot(out, a);
        }
        CoreExpr::DataProj(x) => {
            write_expr(out, x, POSTFIX, false);
            out.push_str(".data");
        }
        CoreExpr::ProvProj(x) => {
            write_expr(out, x, POSTFIX, false);
            out.push_str(".prov");
        }
        CoreExpr::EmptyProv(x) => {
            out.push_str("emptyProv ");
            write_expr(out, x, POSTFIX, false);
        }
        CoreExpr::Op(ScalarOp::Not, args) => {
            out.push_str("not ");
            write_expr(out, &args[0], POSTFIX, false);
        }
        CoreExpr::Op(op, args) => {
            let (sym, level) = match op {
                ScalarOp::Eq => ("==", EQ),
                ScalarOp::And => ("&&", AND),
                ScalarOp::Or => ("||", OR),
                ScalarOp::Not => unreachable!(),
            };
            // Eq is non-associative; And/Or associate to the left.
            let left = if *op == ScalarOp::Eq { level + 1 } else { level };
            write_expr(out, &args[0], left, false);
            out.push_str(&format!(" {sym} "));
            write_expr(out, &args[1], level + 1, false);
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_list(out: &mut String, elems: &[CoreExpr]) {
    for (i, e) in elems.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, e, LAMBDA, false);
    }
}

fn write_annot(out: &mut String, a: &AnnotExpr) {
    match a {
        AnnotExpr::Bottom => out.push('⊥'),
        AnnotExpr::Where { table, column, key } => {
            out.push_str(&format!("({table:?}, {column:?}, "));
            write_expr(out, key, LAMBDA, false);
            out.push(')');
        }
        AnnotExpr::LineageRow { table, key } => {
            out.push_str(&format!("({table:?}, "));
            write_expr(out, key, LAMBDA, false);
            out.push(')');
        }
        AnnotExpr::LineageOf(_) | AnnotExpr::LineageAppend(..) => {
            out.push('{');
            write_lineage_sum(out, a);
            out.push('}');
        }
    }
}

fn write_lineage_sum(out: &mut String, a: &AnnotExpr) {
    match a {
        AnnotExpr::LineageAppend(l, r) => {
            write_lineage_sum(out, l);
            out.push_str(" ⊕ ");
            if matches!(**r, AnnotExpr::LineageAppend(..)) {
                out.push('{');
                write_lineage_sum(out, r);
                out.push('}');
            } else {
                write_lineage_sum(out, r);
            }
        }
        AnnotExpr::LineageOf(e) => write_expr(out, e, OR, false),
        other => write_annot(out, other),
    }
}
