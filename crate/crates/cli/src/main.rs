use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use provlq_core::catalog::{Catalog, Database};
use provlq_core::lex::Pos;
use provlq_core::lineage::RewriteFaults;
use provlq_core::oracle::{differential_check_with_faults, gen_random_case, SizeBounds, Verdict};
use provlq_core::pipeline::{compile, eval_compiled, Compiled, Mode, ModeKind, PipelineError};
use provlq_core::pretty::pretty;
use provlq_core::reader::parse_key_type;
use provlq_core::sqlgen::to_sql;
use provlq_core::surface::SurfaceError;
use provlq_core::types::KeyType;

#[derive(Parser)]
#[command(name = "provlq", version, about = "Comprehension queries with where-provenance and lineage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and typecheck a query and print its type.
    Check(QueryArgs),
    /// Print the desugared core term.
    Desugar(QueryArgs),
    /// Print the rewritten core term for a provenance mode.
    Transform(QueryArgs),
    /// Evaluate a query and print canonical JSON.
    Run {
        #[command(flatten)]
        q: QueryArgs,
        /// Directory holding one `<table>.csv` per table.
        #[arg(long)]
        data: PathBuf,
    },
    /// Print the query as a SQL statement.
    Sql(QueryArgs),
    /// Check the rewrites against the reference evaluator on random cases.
    Fuzz {
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// First seed.
        #[arg(long, env = "PROVLQ_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SizeBounds::default().max_tables)]
        max_tables: usize,
        #[arg(long, default_value_t = SizeBounds::default().max_rows)]
        max_rows: usize,
        #[arg(long, default_value_t = SizeBounds::default().max_depth)]
        max_depth: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Args)]
struct QueryArgs {
    /// Catalog TOML file.
    #[arg(long)]
    catalog: PathBuf,
    /// Query file, or `-` for standard input.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value = "plain")]
    mode: ModeKind,
    /// Key type for provenance, e.g. `Int` or `(Int, String)`.
    #[arg(long, value_parser = key_type)]
    key_type: Option<KeyType>,
}

fn key_type(s: &str) -> Result<KeyType, String> {
    parse_key_type(s).map_err(|e| e.to_string())
}

enum Failure {
    User(String),
    Internal(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::User(e.to_string())
        }
    }
}

struct Loaded {
    catalog: Catalog,
    source: String,
    mode: Mode,
}

fn read_source(path: &Path) -> Result<String, Failure> {
    let r = if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    };
    r.map_err(|e| Failure::User(format!("cannot read query {}: {e}", path.display())))
}

impl QueryArgs {
    fn load(&self) -> Result<Loaded, Failure> {
        let catalog = Catalog::load(&self.catalog).map_err(|e| Failure::User(e.to_string()))?;
        Ok(Loaded { catalog, source: read_source(&self.query)?, mode: Mode { kind: self.mode, key: self.key_type.clone() } })
    }
}

fn error_pos(e: &PipelineError) -> Option<Pos> {
    match e {
        PipelineError::Surface(SurfaceError::Syntax(s)) => Some(s.pos),
        PipelineError::Surface(SurfaceError::UnknownTable { pos, .. } | SurfaceError::UnknownField { pos, .. }) => Some(*pos),
        _ => None,
    }
}

/// The message, plus the offending source line and a caret when the error
/// has a position.
fn diagnose(e: PipelineError, source: &str) -> Failure {
    let pos = error_pos(&e);
    match Failure::from(e) {
        Failure::User(mut m) => {
            if let Some(p) = pos {
                if let Some(line) = source.lines().nth(p.line.saturating_sub(1)) {
                    m.push_str(&format!("\n  | {line}\n  | {}^", " ".repeat(p.col.saturating_sub(1))));
                }
            }
            Failure::User(m)
        }
        internal => internal,
    }
}

impl Loaded {
    fn compile(&self) -> Result<Compiled, Failure> {
        compile(&self.source, &self.catalog, &self.mode).map_err(|e| diagnose(e, &self.source))
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Check(q) => Ok(q.load()?.compile()?.result_type.to_string()),
        Command::Desugar(q) => Ok(pretty(&q.load()?.compile()?.desugared)),
        Command::Transform(q) => {
            if q.mode == ModeKind::Plain {
                return Err(Failure::User("transform needs --mode whereprov or --mode lineage".into()));
            }
            Ok(pretty(&q.load()?.compile()?.transformed))
        }
        Command::Run { q, data } => {
            let l = q.load()?;
            let c = l.compile()?;
            let db = Database::load_dir(&l.catalog, &data).map_err(|e| Failure::User(e.to_string()))?;
            Ok(eval_compiled(&c, &db)?.to_canonical_json())
        }
        Command::Sql(q) => to_sql(&q.load()?.compile()?.transformed).map_err(|e| Failure::User(e.to_string())),
        Command::Fuzz { seeds, seed, max_tables, max_rows, max_depth, inject_fault } => {
            let bounds = SizeBounds { max_tables, max_rows, max_depth };
            let faults = RewriteFaults { drop_generator_lineage: inject_fault };
            let (mut passed, mut failed, mut first) = (0u64, 0u64, None);
            for s in seed..seed.saturating_add(seeds) {
                match differential_check_with_faults(&gen_random_case(s, bounds), faults) {
                    Verdict::Agree => passed += 1,
                    Verdict::Diverge(d) => {
                        failed += 1;
                        first.get_or_insert((s, d));
                    }
                }
            }
            let summary = format!("passed {passed}, failed {failed}");
            match first {
                None => Ok(summary),
                Some((s, d)) => Err(Failure::Internal(format!(
                    "{summary}\nfirst failing seed {s}: {d}\nquery: {}",
                    gen_random_case(s, bounds).query
                ))),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::User(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}
