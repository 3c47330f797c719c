use std::path::PathBuf;
use std::process::{Command, Output};

use provlq_core::fixtures;
use provlq_core::reader::read_expr;
use provlq_core::subst::alpha_eq;
use provlq_core::types::{KeyType, Prim};

fn tours() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/tours")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name)).unwrap()
}

fn provlq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_provlq")).args(args).env_remove("PROVLQ_SEED").output().unwrap()
}

fn query_args<'a>(catalog: &'a str, query: &'a str) -> Vec<String> {
    let d = tours();
    vec![
        "--catalog".into(),
        d.join(catalog).display().to_string(),
        "--query".into(),
        d.join(query).display().to_string(),
    ]
}

fn run(cmd: &str, catalog: &str, query: &str, extra: &[&str]) -> Output {
    let mut args = vec![cmd.to_string()];
    args.extend(query_args(catalog, query));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    provlq(&refs)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_plain() {
    let data = tours().display().to_string();
    let o = run("run", "catalog.toml", "q1.q", &["--data", &data]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim_end(), golden("q1_plain.json").trim_end());
}

#[test]
fn run_lineage_with_key_type() {
    let data = tours().display().to_string();
    let o = run("run", "catalog.toml", "q1.q", &["--data", &data, "--mode", "lineage", "--key-type", "int"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim_end(), golden("q1_lineage.json").trim_end());
}

#[test]
fn run_lineage_infers_key_type() {
    let data = tours().display().to_string();
    let o = run("run", "catalog.toml", "q1.q", &["--data", &data, "--mode", "lineage"]);
    assert_eq!(stdout(&o).trim_end(), golden("q1_lineage.json").trim_end());
}

#[test]
fn run_where_prov() {
    let data = tours().display().to_string();
    let o = run("run", "catalog_whereprov.toml", "q1.q", &["--data", &data, "--mode", "whereprov"]);
    assert_eq!(stdout(&o).trim_end(), golden("q1_whereprov.json").trim_end());
}

#[test]
fn output_is_byte_identical_across_runs() {
    let data = tours().display().to_string();
    let a = run("run", "catalog.toml", "q1.q", &["--data", &data, "--mode", "lineage"]);
    let b = run("run", "catalog.toml", "q1.q", &["--data", &data, "--mode", "lineage"]);
    assert_eq!(a.stdout, b.stdout);
    let a = provlq(&["fuzz", "--seeds", "20", "--seed", "7"]);
    let b = provlq(&["fuzz", "--seeds", "20", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn transform_q0_matches_golden() {
    let o = run("transform", "catalog.toml", "q0.q", &["--mode", "lineage"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cat = fixtures::tours_catalog();
    let key = Some(KeyType::Single(Prim::Int));
    let got = read_expr(&stdout(&o), &cat, key.clone()).unwrap();
    assert!(alpha_eq(&got, &read_expr(&golden("q0_lineage.core"), &cat, key).unwrap()));
}

#[test]
fn transform_needs_a_provenance_mode() {
    let o = run("transform", "catalog.toml", "q0.q", &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn desugar_and_check() {
    let o = run("desugar", "catalog.toml", "q0.q", &[]);
    assert_eq!(stdout(&o).trim_end(), "concatMap (λa. [a.2]) agencies");
    let o = run("check", "catalog.toml", "q1.q", &["--mode", "lineage"]);
    assert_eq!(stdout(&o).trim_end(), "[Lineage (String, String) Int]");
    let o = run("check", "catalog_whereprov.toml", "q1.q", &["--mode", "whereprov"]);
    assert_eq!(stdout(&o).trim_end(), "[(String, WhereProv String Int)]");
}

#[test]
fn sql_golden_and_not_flat() {
    let o = run("sql", "catalog.toml", "q1.q", &[]);
    assert_eq!(
        stdout(&o).trim_end(),
        "SELECT a1.et_name AS i1, a0.a_phone AS i2 FROM agencies AS a0, externaltours AS a1 WHERE (a0.a_name = a1.et_name) AND (a1.et_type = 'boat')"
    );
    let o = run("sql", "catalog.toml", "q1.q", &["--mode", "lineage"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not flat"));
}

#[test]
fn key_mismatch_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("c.toml");
    std::fs::write(&cat, fixtures::mismatched_key_catalog().to_toml()).unwrap();
    let q = dir.path().join("q.q");
    std::fs::write(&q, "[ (p_name(p), c_code(c)) | p <- people, c <- codes ]").unwrap();
    let (c, q) = (cat.display().to_string(), q.display().to_string());
    let o = provlq(&["check", "--catalog", &c, "--query", &q, "--mode", "lineage"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Type of table key does not match type of lineage key"), "{}", stderr(&o));
    let o = provlq(&["check", "--catalog", &c, "--query", &q, "--mode", "lineage", "--key-type", "String"]);
    assert_eq!(o.status.code(), Some(1));
    let o = provlq(&["check", "--catalog", &c, "--query", &q]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn lineage_without_tables_needs_key_type() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.q");
    std::fs::write(&q, "[ x | x <- [1, 2] ]").unwrap();
    let c = tours().join("catalog.toml").display().to_string();
    let q = q.display().to_string();
    let o = provlq(&["check", "--catalog", &c, "--query", &q, "--mode", "lineage"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--key-type"));
    let o = provlq(&["check", "--catalog", &c, "--query", &q, "--mode", "lineage", "--key-type", "Int"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn syntax_errors_point_at_the_source() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.q");
    std::fs::write(&q, "[ a^⊥ | a <- agencies ]").unwrap();
    let c = tours().join("catalog.toml").display().to_string();
    let o = provlq(&["check", "--catalog", &c, "--query", &q.display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("1:4"), "{err}");
    assert!(err.contains("   ^"), "{err}");
}

#[test]
fn fuzz_reports_counts() {
    let o = provlq(&["fuzz", "--seeds", "25"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim_end(), "passed 25, failed 0");
}

#[test]
fn fuzz_seed_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_provlq")).args(["fuzz", "--seeds", "3"]).env("PROVLQ_SEED", "500").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn injected_fault_is_an_internal_error() {
    let o = provlq(&["fuzz", "--seeds", "10", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("first failing seed"));
}

#[test]
fn missing_data_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().display().to_string();
    let o = run("run", "catalog.toml", "q1.q", &["--data", &data]);
    assert_eq!(o.status.code(), Some(1));
}
