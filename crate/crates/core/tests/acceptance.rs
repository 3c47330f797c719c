//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use provlq_core::catalog::{Database, KEY_MISMATCH_MESSAGE};
use provlq_core::fixtures;
use provlq_core::lineage::{lineage_transform, lineage_type_translate, RewriteFaults};
use provlq_core::oracle::{
    differential_check, differential_check_with_faults, gen_random_case, oracle_eval_lineage, validate_annotations,
    FuzzCase, SizeBounds, Verdict,
};
use provlq_core::pipeline::{compile, compile_query, eval_compiled, resolve_lineage_key, run_pipeline, Mode};
use provlq_core::reader::read_expr;
use provlq_core::sqlgen::to_sql;
use provlq_core::subst::{alpha_eq, NameSupply};
use provlq_core::surface::parse;
use provlq_core::typecheck::{typecheck, TypeEnv};
use provlq_core::types::{KeyType, Prim};
use provlq_core::value::{KeyValue, LineageEntry, LineageSet, Scalar, Value};

const SEEDS: u64 = 1000;
const INT: KeyType = KeyType::Single(Prim::Int);

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    f()?;
    let took = t.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).expect("golden file")
}

fn key_for(case: &FuzzCase) -> KeyType {
    let tables: Vec<_> = case.query.expr.table_names().iter().filter_map(|n| case.catalog.get(n).cloned()).collect();
    resolve_lineage_key(&tables, None).unwrap_or(INT)
}

fn fuzz_cases() -> impl Iterator<Item = FuzzCase> {
    (0..SEEDS).map(|s| gen_random_case(s, SizeBounds::default()))
}

fn plain_q1() -> Outcome {
    within(Duration::from_secs(1), || {
        let v = run_pipeline(fixtures::Q1, &fixtures::tours_catalog(), &fixtures::tours_db(), &Mode::plain())
            .map_err(|e| e.to_string())?;
        let want = r#"[{"row":1,"value":["EdinTours","412 1200"]},{"row":2,"value":["EdinTours","412 1200"]},{"row":3,"value":["Burns's","607 3000"]}]"#;
        let got = v.to_canonical_json();
        ensure(got == want, || format!("got {got}"))
    })
}

fn where_prov_q1() -> Outcome {
    within(Duration::from_secs(1), || {
        let v = run_pipeline(fixtures::Q1, &fixtures::tours_catalog_where_prov(), &fixtures::tours_db(), &Mode::where_prov())
            .map_err(|e| e.to_string())?;
        let row = |n: u32, name: &str, phone: &str, k: u32| {
            format!(
                r#"{{"row":{n},"value":["{name}",{{"data":"{phone}","prov":{{"column":"a_phone","key":{k},"table":"agencies"}}}}]}}"#
            )
        };
        let want = format!(
            "[{},{},{}]",
            row(1, "EdinTours", "412 1200", 1),
            row(2, "EdinTours", "412 1200", 1),
            row(3, "Burns's", "607 3000", 2)
        );
        let got = v.to_canonical_json();
        ensure(got == want, || format!("got {got}"))
    })
}

fn lineage_q1() -> Outcome {
    within(Duration::from_secs(1), || {
        let v = run_pipeline(fixtures::Q1, &fixtures::tours_catalog(), &fixtures::tours_db(), &Mode::lineage(Some(INT)))
            .map_err(|e| e.to_string())?;
        let entry = |t: &str, k: i64| LineageEntry::new(t, KeyValue::Single(Scalar::Int(k)));
        let row = |name: &str, phone: &str, a: i64, et: i64| Value::Lineage {
            data: Box::new(Value::Tuple(vec![Value::str(name), Value::str(phone)])),
            lineage: LineageSet::from([entry("agencies", a), entry("externaltours", et)]),
        };
        let want = Value::List(vec![
            row("EdinTours", "412 1200", 1, 5),
            row("EdinTours", "412 1200", 1, 6),
            row("Burns's", "607 3000", 2, 7),
        ]);
        ensure(v == want, || format!("got {}", v.to_canonical_json()))
    })
}

fn term_goldens() -> Outcome {
    let cat = fixtures::tours_catalog();
    let read = |f: &str| read_expr(&golden(f), &cat, Some(INT)).map_err(|e| format!("{f}: {e}"));
    within(Duration::from_secs(1), || {
        let c = compile(fixtures::Q1, &cat, &Mode::plain()).map_err(|e| e.to_string())?;
        ensure(alpha_eq(&c.desugared, &read("q1_desugar.core")?), || "desugared q1 differs".into())
    })?;
    for (q, f) in [(fixtures::Q0, "q0_lineage.core"), (fixtures::Q1, "q1_lineage.core")] {
        within(Duration::from_secs(1), || {
            let c = compile(q, &cat, &Mode::lineage(Some(INT))).map_err(|e| e.to_string())?;
            ensure(alpha_eq(&c.transformed, &read(f)?), || format!("transformed term differs from {f}"))
        })?;
    }
    Ok(())
}

fn sql_q1() -> Outcome {
    let c = compile(fixtures::Q1, &fixtures::tours_catalog(), &Mode::plain()).map_err(|e| e.to_string())?;
    let got = to_sql(&c.desugared).map_err(|e| e.to_string())?;
    let want = "SELECT a1.et_name AS i1, a0.a_phone AS i2 FROM agencies AS a0, externaltours AS a1 WHERE (a0.a_name = a1.et_name) AND (a1.et_type = 'boat')";
    ensure(got == want, || format!("got {got}"))
}

fn type_preservation() -> Outcome {
    within(Duration::from_secs(30), || {
        let fixed = [FuzzCase::tours(fixtures::Q0, None), FuzzCase::tours(fixtures::Q1, None)];
        let mut failures = Vec::new();
        for (i, case) in fixed.into_iter().chain(fuzz_cases()).enumerate() {
            let key = key_for(&case);
            let r = (|| {
                let c = compile_query(&case.query, &case.catalog, &Mode::plain()).map_err(|e| e.to_string())?;
                let mut supply = NameSupply::new();
                supply.reserve(c.desugared.all_names());
                let out = lineage_transform(&c.desugared, &key, &mut supply).map_err(|e| e.to_string())?;
                let got = typecheck(&out, &TypeEnv::with_key(Some(key.clone()))).map_err(|e| e.to_string())?;
                let want = lineage_type_translate(&c.source_type, &key).map_err(|e| e.to_string())?;
                ensure(got == want, || format!("{got} vs {want}"))
            })();
            if let Err(e) = r {
                failures.push(format!("case {i}: {e}"));
            }
        }
        ensure(failures.is_empty(), || format!("{} failures, first {}", failures.len(), failures[0]))
    })
}

fn differential() -> Outcome {
    within(Duration::from_secs(60), || {
        let mut diverged = Vec::new();
        let mut where_checked = 0;
        for (s, case) in (0..).zip(fuzz_cases()) {
            where_checked += case.where_variant.is_some() as usize;
            if let Verdict::Diverge(d) = differential_check(&case) {
                diverged.push((s, d));
            }
        }
        ensure(diverged.is_empty(), || format!("{} divergences, first seed {}: {}", diverged.len(), diverged[0].0, diverged[0].1))?;
        ensure(where_checked > 0, || "no where-provenance variants generated".into())?;
        let q1 = FuzzCase::tours(fixtures::Q1, Some(fixtures::Q1));
        ensure(differential_check(&q1).agrees(), || "q1 diverges".into())?;
        ensure(differential_check(&FuzzCase::tours(fixtures::Q0, None)).agrees(), || "q0 diverges".into())?;
        let faulty = differential_check_with_faults(&q1, RewriteFaults { drop_generator_lineage: true });
        ensure(!faulty.agrees(), || "fault-injected rewrite was not detected".into())
    })
}

fn erasure() -> Outcome {
    let mut failures = 0;
    for case in fuzz_cases() {
        let plain = eval_compiled(&compile_query(&case.query, &case.catalog, &Mode::plain()).unwrap(), &case.db).unwrap();
        let key = key_for(&case);
        let lin = eval_compiled(&compile_query(&case.query, &case.catalog, &Mode::lineage(Some(key.clone()))).unwrap(), &case.db).unwrap();
        let oracle = oracle_eval_lineage(&case.query, &case.catalog, &case.db, &key).unwrap();
        failures += (lin.erase() != plain) as usize + (oracle.erase() != plain) as usize;
        if let Some(w) = &case.where_variant {
            let wv = eval_compiled(&compile_query(&w.query, &w.catalog, &Mode::where_prov()).unwrap(), &case.db).unwrap();
            failures += (wv.erase() != plain) as usize;
        }
    }
    ensure(failures == 0, || format!("{failures} failures"))
}

fn forgery_freedom() -> Outcome {
    let mut bad = Vec::new();
    for case in fuzz_cases() {
        let key = key_for(&case);
        let lin = eval_compiled(&compile_query(&case.query, &case.catalog, &Mode::lineage(Some(key))).unwrap(), &case.db).unwrap();
        if let Err(e) = validate_annotations(&lin, &case.catalog, &case.db) {
            bad.push(e);
        }
        if let Some(w) = &case.where_variant {
            let wv = eval_compiled(&compile_query(&w.query, &w.catalog, &Mode::where_prov()).unwrap(), &case.db).unwrap();
            if let Err(e) = validate_annotations(&wv, &w.catalog, &case.db) {
                bad.push(e);
            }
        }
    }
    ensure(bad.is_empty(), || format!("{} forged annotations, first {}", bad.len(), bad[0]))?;
    let cat = fixtures::tours_catalog_where_prov();
    let attempts = [
        r#"[ a^("agencies", "a_phone", 1) | a <- agencies ]"#,
        r#"[ a^("agencies", 1) | a <- agencies ]"#,
        "[ a^⊥ | a <- agencies ]",
        r#"[ a_phone(a)^{("agencies", 1) ⊕ ("agencies", 2)} | a <- agencies ]"#,
        "[ a | a <- agencies@where ]",
        "[ (λx. x) | a <- agencies ]",
        r#"[ ("412 1200", ("agencies", "a_phone", 1)) | a <- agencies ]"#,
    ];
    for src in attempts {
        let r = parse(src, &cat);
        // A plain tuple parses, but it is a pair, not an annotated value.
        if src.contains("(\"412 1200\"") {
            let q = r.map_err(|e| e.to_string())?;
            let v = run_pipeline(&q.to_string(), &cat, &fixtures::tours_db(), &Mode::where_prov()).map_err(|e| e.to_string())?;
            ensure(!v.to_canonical_json().contains("\"prov\""), || "tuple turned into an annotation".into())?;
            continue;
        }
        ensure(r.is_err(), || format!("parser accepted `{src}`"))?;
    }
    Ok(())
}

fn key_uniformity() -> Outcome {
    let cat = fixtures::mismatched_key_catalog();
    let q = "[ (p_name(p), c_code(c)) | p <- people, c <- codes, p_id(p) == c_owner(c) ]";
    let err = match compile(q, &cat, &Mode::lineage(None)) {
        Ok(_) => return Err("lineage mode accepted mismatched keys".into()),
        Err(e) => e.to_string(),
    };
    ensure(err.starts_with(KEY_MISMATCH_MESSAGE), || format!("diagnostic was `{err}`"))?;
    let explicit = compile(q, &cat, &Mode::lineage(Some(INT))).map(|_| ()).map_err(|e| e.to_string());
    ensure(explicit.as_ref().is_err_and(|e| e.starts_with(KEY_MISMATCH_MESSAGE)), || format!("explicit key: {explicit:?}"))?;
    let mut db = Database::new();
    let people = cat.get("people").unwrap();
    let codes = cat.get("codes").unwrap();
    db.insert_table(people, vec![vec![Scalar::Int(1), Scalar::Str("ann".into())]]).map_err(|e| e.to_string())?;
    db.insert_table(codes, vec![vec![Scalar::Str("X1".into()), Scalar::Int(1)]]).map_err(|e| e.to_string())?;
    let v = run_pipeline(q, &cat, &db, &Mode::plain()).map_err(|e| e.to_string())?;
    ensure(v.to_canonical_json() == r#"[{"row":1,"value":["ann","X1"]}]"#, || format!("plain run gave {}", v.to_canonical_json()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("plain query golden", plain_q1),
        ("where-provenance golden", where_prov_q1),
        ("lineage golden", lineage_q1),
        ("transformation trace goldens", term_goldens),
        ("SQL golden", sql_q1),
        ("type preservation", type_preservation),
        ("differential agreement", differential),
        ("erasure", erasure),
        ("forgery freedom", forgery_freedom),
        ("key uniformity", key_uniformity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let ms = t.elapsed().as_millis();
        match r {
            Ok(()) => println!("criterion {:>2} {name}: PASS ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({ms} ms): {e}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
