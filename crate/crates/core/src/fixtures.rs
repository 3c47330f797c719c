//! The agencies/tours example database and its standard queries, bundled
//! so tests and tools can use them without touching the filesystem.

use crate::catalog::{parse_csv, Catalog, Database};

pub const CATALOG_TOML: &str = include_str!("../data/tours/catalog.toml");
pub const CATALOG_WHERE_PROV_TOML: &str = include_str!("../data/tours/catalog_whereprov.toml");
pub const AGENCIES_CSV: &str = include_str!("../data/tours/agencies.csv");
pub const EXTERNALTOURS_CSV: &str = include_str!("../data/tours/externaltours.csv");

/// Agency names.
pub const Q0: &str = include_str!("../data/tours/q0.q");
/// Names and phone numbers of agencies offering boat tours.
pub const Q1: &str = include_str!("../data/tours/q1.q");
/// `Q1` with the phone number's data component projected out.
pub const Q1_DATA: &str = include_str!("../data/tours/q1_data.q");

pub fn tours_catalog() -> Catalog {
    Catalog::parse(CATALOG_TOML).expect("bundled catalog parses")
}

pub fn tours_catalog_where_prov() -> Catalog {
    Catalog::parse(CATALOG_WHERE_PROV_TOML).expect("bundled catalog parses")
}

pub fn tours_db() -> Database {
    let cat = tours_catalog();
    let mut db = Database::new();
    for (name, text) in [("agencies", AGENCIES_CSV), ("externaltours", EXTERNALTOURS_CSV)] {
        let decl = cat.get(name).expect("bundled table");
        let rows = parse_csv(decl, text).expect("bundled csv parses");
        db.insert_table(decl, rows).expect("bundled rows are valid");
    }
    db
}

/// Two tables keyed by different types.
pub fn mismatched_key_catalog() -> Catalog {
    Catalog::parse(
        r#"
        [[table]]
        name = "people"
        key = ["p_id"]
        columns = [{ name = "p_id", type = "Int" }, { name = "p_name", type = "String" }]

        [[table]]
        name = "codes"
        key = ["c_code"]
        columns = [{ name = "c_code", type = "String" }, { name = "c_owner", type = "Int" }]
        "#,
    )
    .expect("fixture catalog parses")
}
