//! Where-provenance rewrite: materializes cell annotations on flagged table
//! columns. Only table references change.

use crate::catalog::TableDecl;
use crate::ir::{AnnotExpr, CoreExpr};
use crate::subst::NameSupply;

/// `φ(x)` as a term: the key column projection, or a tuple of them for
/// compound keys.
pub fn key_projection_expr(decl: &TableDecl, x: &CoreExpr) -> CoreExpr {
    let idx = decl.key_indices();
    if idx.len() == 1 {
        CoreExpr::proj(x.clone(), idx[0] + 1)
    } else {
        CoreExpr::TupleLit(idx.iter().map(|i| CoreExpr::proj(x.clone(), i + 1)).collect())
    }
}

pub fn whereprov_transform(expr: &CoreExpr, supply: &mut NameSupply) -> CoreExpr {
    match expr {
        CoreExpr::TableRef { decl, row } if row.has_where_prov() => {
            let raw = CoreExpr::table(decl.clone());
            let row_ty = decl.raw_row_type().as_tuple();
            let x = CoreExpr::var(supply.fresh(), row_ty.clone());
            let fields = row
                .fields
                .iter()
                .enumerate()
                .map(|(i, (label, ty))| {
                    let cell = CoreExpr::proj(x.clone(), i + 1);
                    if ty.mentions_where_prov() {
                        let key = key_projection_expr(decl, &x);
                        CoreExpr::annot(
                            cell,
                            AnnotExpr::Where { table: decl.name.clone(), column: label.clone(), key: Box::new(key) },
                        )
                    } else {
                        cell
                    }
                })
                .collect();
            let CoreExpr::Var(name, _) = x else { unreachable!() };
            CoreExpr::map(CoreExpr::lam(name, row_ty, CoreExpr::TupleLit(fields)), raw)
        }
        other => other.map_children(&mut |c| whereprov_transform(c, supply)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pretty::pretty;
    use crate::subst::alpha_eq;
    use crate::typecheck::{typecheck, TypeEnv};
    use crate::types::{KeyType, Prim};

    #[test]
    fn flagged_table_is_wrapped() {
        let cat = fixtures::tours_catalog_where_prov();
        let t = CoreExpr::table_where_prov(cat.get("agencies").unwrap().clone());
        let out = whereprov_transform(&t, &mut NameSupply::new());
        assert_eq!(pretty(&out), r#"map (λx0. (x0.1, x0.2, x0.3, x0.4^("agencies", "a_phone", x0.1))) agencies"#);
        let env = TypeEnv::with_key(Some(KeyType::Single(Prim::Int)));
        assert_eq!(typecheck(&out, &env), typecheck(&t, &env));
    }

    #[test]
    fn unflagged_table_is_unchanged() {
        let cat = fixtures::tours_catalog();
        let t = CoreExpr::table(cat.get("agencies").unwrap().clone());
        assert!(alpha_eq(&whereprov_transform(&t, &mut NameSupply::new()), &t));
    }
}
