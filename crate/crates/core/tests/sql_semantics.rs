//! Emitted SQL, run by a naive nested-loop interpreter, returns the same
//! multiset of rows as evaluating the query.

use proptest::prelude::*;
use provlq_core::catalog::{Catalog, Database};
use provlq_core::fixtures;
use provlq_core::pipeline::{compile, eval_compiled, Mode};
use provlq_core::sqlgen::to_sql;
use provlq_core::types::Prim;
use provlq_core::value::{Scalar, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Int(i64),
    Sym(char),
}

fn lex(sql: &str) -> Vec<Tok> {
    let cs: Vec<char> = sql.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                if cs[i] == '\'' {
                    if cs.get(i + 1) == Some(&'\'') {
                        s.push('\'');
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                s.push(cs[i]);
                i += 1;
            }
            out.push(Tok::Str(s));
        } else if c.is_ascii_digit() || c == '-' {
            let start = i;
            i += 1;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Tok::Int(cs[start..i].iter().collect::<String>().parse().unwrap()));
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Word(cs[start..i].iter().collect()));
        } else {
            out.push(Tok::Sym(c));
            i += 1;
        }
    }
    out
}

#[derive(Debug)]
enum Operand {
    Col(String, String),
    Lit(Scalar),
}

struct Stmt {
    select: Vec<(String, String)>,
    from: Vec<(String, String)>,
    conds: Vec<(Operand, Operand)>,
}

struct P {
    toks: Vec<Tok>,
    i: usize,
}

impl P {
    fn next(&mut self) -> Tok {
        self.i += 1;
        self.toks[self.i - 1].clone()
    }
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i)
    }
    fn word(&mut self) -> String {
        match self.next() {
            Tok::Word(w) => w,
            t => panic!("expected a word, got {t:?}"),
        }
    }
    fn kw(&mut self, k: &str) {
        assert_eq!(self.word(), k);
    }
    fn sym(&mut self, c: char) {
        assert_eq!(self.next(), Tok::Sym(c));
    }
    fn col(&mut self) -> (String, String) {
        let a = self.word();
        self.sym('.');
        (a, self.word())
    }
    fn operand(&mut self) -> Operand {
        match self.peek() {
            Some(Tok::Str(_)) | Some(Tok::Int(_)) => match self.next() {
                Tok::Str(s) => Operand::Lit(Scalar::Str(s)),
                Tok::Int(i) => Operand::Lit(Scalar::Int(i)),
                _ => unreachable!(),
            },
            Some(Tok::Word(w)) if w == "TRUE" || w == "FALSE" => Operand::Lit(Scalar::Bool(self.word() == "TRUE")),
            _ => {
                let (a, c) = self.col();
                Operand::Col(a, c)
            }
        }
    }
    fn stmt(&mut self) -> Stmt {
        self.kw("SELECT");
        let mut select = Vec::new();
        loop {
            let c = self.col();
            self.kw("AS");
            self.word();
            select.push(c);
            if self.peek() != Some(&Tok::Sym(',')) {
                break;
            }
            self.next();
        }
        self.kw("FROM");
        let mut from = Vec::new();
        loop {
            let t = self.word();
            self.kw("AS");
            from.push((t, self.word()));
            if self.peek() != Some(&Tok::Sym(',')) {
                break;
            }
            self.next();
        }
        let mut conds = Vec::new();
        if self.peek().is_some() {
            self.kw("WHERE");
            loop {
                self.sym('(');
                let l = self.operand();
                self.sym('=');
                let r = self.operand();
                self.sym(')');
                conds.push((l, r));
                if self.peek().is_none() {
                    break;
                }
                self.kw("AND");
            }
        }
        Stmt { select, from, conds }
    }
}

/// Multiset SELECT-FROM-WHERE by nested loops over the cross product.
fn run_sql(sql: &str, cat: &Catalog, db: &Database) -> Vec<Vec<Scalar>> {
    let s = P { toks: lex(sql), i: 0 }.stmt();
    let mut out = Vec::new();
    let mut binding: Vec<(String, &[Scalar])> = Vec::new();
    fn go<'a>(
        s: &Stmt,
        cat: &Catalog,
        db: &'a Database,
        binding: &mut Vec<(String, &'a [Scalar])>,
        out: &mut Vec<Vec<Scalar>>,
    ) {
        let cell = |b: &Vec<(String, &[Scalar])>, a: &str, c: &str| {
            let (_, row) = b.iter().find(|(x, _)| x == a).unwrap();
            let t = &s.from.iter().find(|(_, x)| x == a).unwrap().0;
            row[cat.get(t).unwrap().column_index(c).unwrap()].clone()
        };
        if binding.len() == s.from.len() {
            let val = |o: &Operand| match o {
                Operand::Col(a, c) => cell(binding, a, c),
                Operand::Lit(l) => l.clone(),
            };
            if s.conds.iter().all(|(l, r)| val(l) == val(r)) {
                out.push(s.select.iter().map(|(a, c)| cell(binding, a, c)).collect());
            }
            return;
        }
        let (t, alias) = &s.from[binding.len()];
        for row in db.rows(t).unwrap() {
            binding.push((alias.clone(), row));
            go(s, cat, db, binding, out);
            binding.pop();
        }
    }
    go(&s, cat, db, &mut binding, &mut out);
    out
}

fn rows_of(v: Value) -> Vec<Vec<Scalar>> {
    let Value::List(es) = v else { panic!("not a list") };
    es.into_iter()
        .map(|e| match e {
            Value::Tuple(cs) => cs.iter().map(|c| c.as_scalar().unwrap()).collect(),
            other => vec![other.as_scalar().unwrap()],
        })
        .collect()
}

const STRS: [&str; 4] = ["EdinTours", "boat", "it's", "x"];

fn random_db(rng: &mut ChaCha8Rng, cat: &Catalog) -> Database {
    let mut db = Database::new();
    for decl in cat.tables() {
        let rows = (0..rng.gen_range(0..5))
            .map(|id| {
                decl.columns
                    .iter()
                    .enumerate()
                    .map(|(i, (_, p))| match (i, p) {
                        (0, _) => Scalar::Int(id + 1),
                        (_, Prim::Int) => Scalar::Int(rng.gen_range(0..3)),
                        _ => Scalar::Str(STRS.choose(rng).unwrap().to_string()),
                    })
                    .collect()
            })
            .collect();
        db.insert_table(decl, rows).unwrap();
    }
    db
}

fn random_flat_query(rng: &mut ChaCha8Rng, cat: &Catalog) -> String {
    let tables: Vec<_> = cat.tables().cloned().collect();
    let gens: Vec<_> = (0..rng.gen_range(1..=3)).map(|i| (format!("r{i}"), tables.choose(rng).unwrap().clone())).collect();
    let mut cols = Vec::new();
    for (v, t) in &gens {
        for (c, p) in &t.columns {
            cols.push((format!("{c}({v})"), *p));
        }
    }
    let pick = |rng: &mut ChaCha8Rng| cols.choose(rng).unwrap().clone();
    let head: Vec<_> = (0..rng.gen_range(1..=3)).map(|_| pick(rng).0).collect();
    let head = if head.len() == 1 { head[0].clone() } else { format!("({})", head.join(", ")) };
    let mut quals: Vec<_> = gens.iter().map(|(v, t)| format!("{v} <- {}", t.name)).collect();
    for _ in 0..rng.gen_range(0..=3) {
        let eq = |rng: &mut ChaCha8Rng| {
            let (l, p) = pick(rng);
            let same: Vec<_> = cols.iter().filter(|(_, q)| *q == p).collect();
            let r = if rng.gen_bool(0.5) {
                same.choose(rng).unwrap().0.clone()
            } else if p == Prim::Int {
                rng.gen_range(0..3).to_string()
            } else {
                format!("{:?}", STRS.choose(rng).unwrap())
            };
            format!("{l} == {r}")
        };
        let g = if rng.gen_bool(0.3) { format!("{} && {}", eq(rng), eq(rng)) } else { eq(rng) };
        let at = rng.gen_range(1..=quals.len());
        quals.insert(at.max(gens.len()), g);
    }
    format!("[ {head} | {} ]", quals.join(", "))
}

#[test]
fn q1_sql_runs_like_eval() {
    let cat = fixtures::tours_catalog();
    let db = fixtures::tours_db();
    let c = compile(fixtures::Q1, &cat, &Mode::plain()).unwrap();
    let mut want = rows_of(eval_compiled(&c, &db).unwrap());
    let mut got = run_sql(&to_sql(&c.desugared).unwrap(), &cat, &db);
    want.sort();
    got.sort();
    assert_eq!(got, want);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flat_queries_agree_as_multisets(seed in any::<u64>()) {
        let cat = fixtures::tours_catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_db(&mut rng, &cat);
        let q = random_flat_query(&mut rng, &cat);
        let c = compile(&q, &cat, &Mode::plain()).unwrap();
        let sql = to_sql(&c.desugared).unwrap();
        prop_assert_eq!(to_sql(&c.desugared).unwrap(), sql.clone());
        let mut want = rows_of(eval_compiled(&c, &db).unwrap());
        let mut got = run_sql(&sql, &cat, &db);
        want.sort();
        got.sort();
        prop_assert_eq!(got, want, "query {} sql {}", q, sql);
    }
}
