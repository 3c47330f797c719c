use provlq_core::fixtures;
use provlq_core::pipeline::{compile, run_pipeline, Mode};
use provlq_core::pretty::pretty;
use provlq_core::reader::read_expr;
use provlq_core::subst::alpha_eq;
use provlq_core::types::{KeyType, Prim};
use provlq_core::Catalog;

const INT: KeyType = KeyType::Single(Prim::Int);

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn assert_term(cat: &Catalog, query: &str, mode: Mode, file: &str, desugared: bool) {
    let c = compile(query, cat, &mode).unwrap();
    let got = if desugared { &c.desugared } else { &c.transformed };
    let want = read_expr(&golden(file), cat, Some(INT)).unwrap();
    assert!(alpha_eq(got, &want), "{file}:\n  got  {}\n  want {}", pretty(got), pretty(&want));
}

#[test]
fn q0_lineage_term() {
    assert_term(&fixtures::tours_catalog(), fixtures::Q0, Mode::lineage(Some(INT)), "q0_lineage.core", false);
}

#[test]
fn q1_desugared_term() {
    assert_term(&fixtures::tours_catalog(), fixtures::Q1, Mode::plain(), "q1_desugar.core", true);
}

#[test]
fn q1_lineage_term() {
    assert_term(&fixtures::tours_catalog(), fixtures::Q1, Mode::lineage(None), "q1_lineage.core", false);
}

#[test]
fn q1_whereprov_term() {
    assert_term(&fixtures::tours_catalog_where_prov(), fixtures::Q1, Mode::where_prov(), "q1_whereprov.core", false);
}

#[test]
fn golden_terms_are_not_trivially_equal() {
    let cat = fixtures::tours_catalog();
    let a = read_expr(&golden("q1_lineage.core"), &cat, Some(INT)).unwrap();
    let b = read_expr(&golden("q1_desugar.core"), &cat, Some(INT)).unwrap();
    assert!(!alpha_eq(&a, &b));
}

#[test]
fn json_outputs() {
    let db = fixtures::tours_db();
    let cases = [
        (fixtures::tours_catalog(), Mode::plain(), "q1_plain.json"),
        (fixtures::tours_catalog_where_prov(), Mode::where_prov(), "q1_whereprov.json"),
        (fixtures::tours_catalog(), Mode::lineage(None), "q1_lineage.json"),
    ];
    for (cat, mode, file) in cases {
        let v = run_pipeline(fixtures::Q1, &cat, &db, &mode).unwrap();
        assert_eq!(v.to_canonical_json(), golden(file).trim_end(), "{file}");
    }
}

#[test]
fn data_projection_strips_annotation() {
    let db = fixtures::tours_db();
    let a = run_pipeline(fixtures::Q1_DATA, &fixtures::tours_catalog_where_prov(), &db, &Mode::where_prov()).unwrap();
    assert_eq!(a.to_canonical_json(), golden("q1_plain.json").trim_end());
}
