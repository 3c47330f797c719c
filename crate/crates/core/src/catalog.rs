//! Table declarations and the CSV-backed in-memory database.
//!
//! A catalog is a TOML file with one `[[table]]` section per table:
//!
//! ```toml
//! [[table]]
//! name = "agencies"
//! key = ["a_id"]
//! where_prov = ["a_phone"]          # optional
//! columns = [
//!   { name = "a_id", type = "Int" },
//!   { name = "a_phone", type = "String" },
//! ]
//! ```
//!
//! Column types are `Int`, `Bool` or `String`. Each table's rows live in
//! `<name>.csv` inside the data directory, header first.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::types::{CoreType, KeyType, Prim, RowType, MAX_TUPLE_ARITY, MIN_TUPLE_ARITY};
use crate::value::{KeyValue, Scalar};

pub type Row = Vec<Scalar>;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("catalog parse error: {0}")]
    Parse(String),
    #[error("duplicate table `{0}`")]
    DuplicateTable(String),
    #[error("bad key specification for table `{table}`: {reason}")]
    BadKeySpec { table: String, reason: String },
    #[error("bad schema for table `{table}`: {reason}")]
    BadSchema { table: String, reason: String },
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv error in table `{table}`: {message}")]
    Csv { table: String, message: String },
    #[error("header of table `{table}` does not match declaration: expected {expected:?}, found {found:?}")]
    HeaderMismatch { table: String, expected: Vec<String>, found: Vec<String> },
    #[error("table `{table}` row {row} column `{column}`: cannot parse {text:?} as {ty}")]
    CellParseError { table: String, row: usize, column: String, ty: Prim, text: String },
    #[error("table `{table}` row {row}: expected {expected} cells, found {found}")]
    Arity { table: String, row: usize, expected: usize, found: usize },
    #[error("table `{table}`: duplicate key {key}")]
    DuplicateKey { table: String, key: KeyValue },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
}

/// Raised when the tables of a lineage query do not share one key type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct KeyTypeMismatch {
    /// Requested lineage key type, if one was given explicitly.
    pub expected: Option<KeyType>,
    pub tables: Vec<(String, KeyType)>,
}

pub const KEY_MISMATCH_MESSAGE: &str = "Type of table key does not match type of lineage key";

impl fmt::Display for KeyTypeMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(KEY_MISMATCH_MESSAGE)?;
        if let Some(k) = &self.expected {
            write!(f, " (lineage key {k})")?;
        }
        f.write_str(":")?;
        for (i, (t, k)) in self.tables.iter().enumerate() {
            write!(f, "{} {t}: {k}", if i == 0 { "" } else { "," })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableDecl {
    pub name: String,
    pub columns: Vec<(String, Prim)>,
    pub key_columns: Vec<String>,
    pub where_prov_columns: BTreeSet<String>,
}

impl TableDecl {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<(String, Prim)>,
        key_columns: Vec<String>,
        where_prov_columns: impl IntoIterator<Item = String>,
    ) -> Result<TableDecl, CatalogError> {
        let decl = TableDecl {
            name: name.into(),
            columns,
            key_columns,
            where_prov_columns: where_prov_columns.into_iter().collect(),
        };
        decl.validate()?;
        Ok(decl)
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let schema = |reason: String| CatalogError::BadSchema { table: self.name.clone(), reason };
        let keys = |reason: String| CatalogError::BadKeySpec { table: self.name.clone(), reason };
        if !(MIN_TUPLE_ARITY..=MAX_TUPLE_ARITY).contains(&self.columns.len()) {
            return Err(schema(format!(
                "{} columns; tables need between {MIN_TUPLE_ARITY} and {MAX_TUPLE_ARITY}",
                self.columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for (label, ty) in &self.columns {
            if !seen.insert(label.as_str()) {
                return Err(schema(format!("duplicate column `{label}`")));
            }
            if *ty == Prim::Unit {
                return Err(schema(format!("column `{label}` has unit type")));
            }
        }
        if self.key_columns.is_empty() {
            return Err(keys("at least one key column is required".into()));
        }
        if self.key_columns.len() > MAX_TUPLE_ARITY {
            return Err(keys("too many key columns".into()));
        }
        let mut seen_keys = HashSet::new();
        for k in &self.key_columns {
            if !seen.contains(k.as_str()) {
                return Err(keys(format!("key column `{k}` is not a column")));
            }
            if !seen_keys.insert(k.as_str()) {
                return Err(keys(format!("key column `{k}` listed twice")));
            }
            if self.where_prov_columns.contains(k) {
                return Err(keys(format!("key column `{k}` cannot be tracked for where-provenance")));
            }
        }
        for w in &self.where_prov_columns {
            if !seen.contains(w.as_str()) {
                return Err(schema(format!("where-provenance column `{w}` is not a column")));
            }
        }
        Ok(())
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|(l, _)| l == label)
    }

    pub fn key_indices(&self) -> Vec<usize> {
        self.key_columns.iter().map(|k| self.column_index(k).expect("validated key column")).collect()
    }

    pub fn key_type(&self) -> KeyType {
        let prims: Vec<Prim> = self.key_indices().into_iter().map(|i| self.columns[i].1).collect();
        match prims.as_slice() {
            [single] => KeyType::Single(*single),
            _ => KeyType::Compound(prims),
        }
    }

    /// Row type with every column at its stored type.
    pub fn raw_row_type(&self) -> RowType {
        RowType { fields: self.columns.iter().map(|(l, p)| (l.clone(), CoreType::Prim(*p))).collect() }
    }

    /// Row type as seen by a where-provenance query: flagged columns are
    /// annotated with the table's key type.
    pub fn logical_row_type(&self) -> RowType {
        let key = self.key_type();
        RowType {
            fields: self
                .columns
                .iter()
                .map(|(l, p)| {
                    let ty = if self.where_prov_columns.contains(l) {
                        CoreType::WhereProv(*p, key.clone())
                    } else {
                        CoreType::Prim(*p)
                    };
                    (l.clone(), ty)
                })
                .collect(),
        }
    }

    /// The key projection φ.
    pub fn key_projection(&self, row: &[Scalar]) -> KeyValue {
        let idx = self.key_indices();
        match idx.as_slice() {
            [i] => KeyValue::Single(row[*i].clone()),
            _ => KeyValue::Compound(idx.iter().map(|i| row[*i].clone()).collect()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    table: Vec<TableSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSection {
    name: String,
    columns: Vec<ColumnSection>,
    #[serde(default)]
    key: Vec<String>,
    #[serde(default)]
    where_prov: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnSection {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

fn parse_column_type(table: &str, column: &str, ty: &str) -> Result<Prim, CatalogError> {
    match ty {
        "Int" | "int" | "Integer" => Ok(Prim::Int),
        "Bool" | "bool" => Ok(Prim::Bool),
        "String" | "string" | "Str" | "Text" => Ok(Prim::Str),
        other => Err(CatalogError::BadSchema {
            table: table.to_string(),
            reason: format!("column `{column}` has unsupported type `{other}`"),
        }),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    tables: Vec<Arc<TableDecl>>,
}

impl Catalog {
    pub fn new(tables: Vec<TableDecl>) -> Result<Catalog, CatalogError> {
        let mut names = HashSet::new();
        for t in &tables {
            if !names.insert(t.name.clone()) {
                return Err(CatalogError::DuplicateTable(t.name.clone()));
            }
        }
        Ok(Catalog { tables: tables.into_iter().map(Arc::new).collect() })
    }

    pub fn parse(text: &str) -> Result<Catalog, CatalogError> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        let mut decls = Vec::with_capacity(file.table.len());
        for section in file.table {
            let columns = section
                .columns
                .iter()
                .map(|c| Ok((c.name.clone(), parse_column_type(&section.name, &c.name, &c.ty)?)))
                .collect::<Result<Vec<_>, CatalogError>>()?;
            decls.push(TableDecl::new(section.name, columns, section.key, section.where_prov)?);
        }
        Catalog::new(decls)
    }

    pub fn load(path: &Path) -> Result<Catalog, CatalogError> {
        let text = fs::read_to_string(path).map_err(|source| CatalogError::Io { path: path.to_path_buf(), source })?;
        Catalog::parse(&text)
    }

    /// Serializes back to the catalog file format.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let quote = |s: &str| format!("{s:?}");
        for t in &self.tables {
            out.push_str("[[table]]\n");
            out.push_str(&format!("name = {}\n", quote(&t.name)));
            let keys: Vec<String> = t.key_columns.iter().map(|k| quote(k)).collect();
            out.push_str(&format!("key = [{}]\n", keys.join(", ")));
            if !t.where_prov_columns.is_empty() {
                let wp: Vec<String> = t.where_prov_columns.iter().map(|k| quote(k)).collect();
                out.push_str(&format!("where_prov = [{}]\n", wp.join(", ")));
            }
            out.push_str("columns = [\n");
            for (l, p) in &t.columns {
                out.push_str(&format!("  {{ name = {}, type = \"{p}\" }},\n", quote(l)));
            }
            out.push_str("]\n\n");
        }
        out
    }

    pub fn tables(&self) -> impl Iterator<Item = &Arc<TableDecl>> {
        self.tables.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<TableDecl>> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// The key type shared by all the given tables.
    ///
    /// # Panics
    /// If `tables` is empty.
    pub fn uniform_key_type<'a>(
        tables: impl IntoIterator<Item = &'a TableDecl>,
    ) -> Result<KeyType, KeyTypeMismatch> {
        let keyed: Vec<(String, KeyType)> = tables.into_iter().map(|t| (t.name.clone(), t.key_type())).collect();
        assert!(!keyed.is_empty(), "uniform_key_type needs at least one table");
        let first = keyed[0].1.clone();
        if keyed.iter().all(|(_, k)| *k == first) {
            Ok(first)
        } else {
            Err(KeyTypeMismatch { expected: None, tables: keyed })
        }
    }
}

/// Rows of every table, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    tables: BTreeMap<String, Vec<Row>>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    /// Inserts the rows of one table after checking arity, cell types and
    /// key uniqueness.
    pub fn insert_table(&mut self, decl: &TableDecl, rows: Vec<Row>) -> Result<(), DataError> {
        let mut keys = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != decl.columns.len() {
                return Err(DataError::Arity {
                    table: decl.name.clone(),
                    row: i + 1,
                    expected: decl.columns.len(),
                    found: row.len(),
                });
            }
            for (cell, (label, ty)) in row.iter().zip(&decl.columns) {
                if cell.prim() != *ty {
                    return Err(DataError::CellParseError {
                        table: decl.name.clone(),
                        row: i + 1,
                        column: label.clone(),
                        ty: *ty,
                        text: cell.to_cell(),
                    });
                }
            }
            let key = decl.key_projection(row);
            if !keys.insert(key.clone()) {
                return Err(DataError::DuplicateKey { table: decl.name.clone(), key });
            }
        }
        self.tables.insert(decl.name.clone(), rows);
        Ok(())
    }

    /// Loads `<dir>/<table>.csv` for every table in the catalog.
    pub fn load_dir(catalog: &Catalog, dir: &Path) -> Result<Database, DataError> {
        let mut db = Database::new();
        for decl in catalog.tables() {
            let rows = load_csv(decl, &dir.join(format!("{}.csv", decl.name)))?;
            db.insert_table(decl, rows)?;
        }
        Ok(db)
    }

    /// Writes `<dir>/<table>.csv` for every table in the catalog.
    pub fn write_dir(&self, catalog: &Catalog, dir: &Path) -> Result<(), DataError> {
        for decl in catalog.tables() {
            let path = dir.join(format!("{}.csv", decl.name));
            let text = write_csv(decl, self.rows(&decl.name).unwrap_or(&[]))?;
            fs::write(&path, text).map_err(|source| DataError::Io { path, source })?;
        }
        Ok(())
    }

    pub fn rows(&self, table: &str) -> Option<&[Row]> {
        self.tables.get(table).map(Vec::as_slice)
    }

    pub fn find_row(&self, decl: &TableDecl, key: &KeyValue) -> Option<&Row> {
        self.rows(&decl.name)?.iter().find(|r| decl.key_projection(r) == *key)
    }
}

fn parse_cell(decl: &TableDecl, row: usize, col: usize, text: &str) -> Result<Scalar, DataError> {
    let (label, ty) = &decl.columns[col];
    let bad = || DataError::CellParseError {
        table: decl.name.clone(),
        row,
        column: label.clone(),
        ty: *ty,
        text: text.to_string(),
    };
    match ty {
        Prim::Int => text.trim().parse::<i64>().map(Scalar::Int).map_err(|_| bad()),
        Prim::Bool => match text.trim() {
            "true" => Ok(Scalar::Bool(true)),
            "false" => Ok(Scalar::Bool(false)),
            _ => Err(bad()),
        },
        Prim::Str => Ok(Scalar::Str(text.to_string())),
        Prim::Unit => Err(bad()),
    }
}

/// Parses CSV text for one table; the header must list the declared
/// columns in order.
pub fn parse_csv(decl: &TableDecl, text: &str) -> Result<Vec<Row>, DataError> {
    let csv_err = |e: csv::Error| DataError::Csv { table: decl.name.clone(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let expected: Vec<String> = decl.columns.iter().map(|(l, _)| l.clone()).collect();
    if header != expected {
        return Err(DataError::HeaderMismatch { table: decl.name.clone(), expected, found: header });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != decl.columns.len() {
            return Err(DataError::Arity {
                table: decl.name.clone(),
                row: i + 1,
                expected: decl.columns.len(),
                found: record.len(),
            });
        }
        let row = record.iter().enumerate().map(|(c, text)| parse_cell(decl, i + 1, c, text)).collect::<Result<Row, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_csv(decl: &TableDecl, path: &Path) -> Result<Vec<Row>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let rows = parse_csv(decl, &text)?;
    let mut keys = HashSet::new();
    for row in &rows {
        let key = decl.key_projection(row);
        if !keys.insert(key.clone()) {
            return Err(DataError::DuplicateKey { table: decl.name.clone(), key });
        }
    }
    Ok(rows)
}

pub fn write_csv(decl: &TableDecl, rows: &[Row]) -> Result<String, DataError> {
    let csv_err = |e: csv::Error| DataError::Csv { table: decl.name.clone(), message: e.to_string() };
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(decl.columns.iter().map(|(l, _)| l.as_str())).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row.iter().map(Scalar::to_cell)).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| DataError::Csv { table: decl.name.clone(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
