//! Deterministic SQLite databases synthesized from a catalog, laid out as
//! `<root>/<db_id>/<db_id>.sqlite`. Stand-ins for the benchmark databases.

use std::path::Path;

use rusqlite::{params_from_iter, Connection};

use sqlhard::catalog::{SchemaCatalog, ValueType};
use sqlhard::eval::database_path;

fn quote(ident: &str) -> String {
    format!("\"{}\"", ident.replace('"', "\"\""))
}

fn sql_type(t: ValueType) -> &'static str {
    match t {
        ValueType::Number | ValueType::Boolean => "INTEGER",
        _ => "TEXT",
    }
}

/// Row `r` of column `j`. Numbers stay in `1..=rows` so key columns join.
fn value(t: ValueType, name: &str, r: usize, j: usize, rows: usize) -> rusqlite::types::Value {
    use rusqlite::types::Value;
    match t {
        ValueType::Number => Value::Integer(((r * (j + 1) + j) % rows + 1) as i64),
        ValueType::Boolean => Value::Integer((r % 2) as i64),
        ValueType::Time => Value::Text(format!("20{:02}-01-{:02}", r % 20, r % 28 + 1)),
        _ => Value::Text(format!("{}_{}", name.to_lowercase(), r % 4)),
    }
}

pub fn build_database(catalog: &SchemaCatalog, root: &Path, rows: usize) -> rusqlite::Result<()> {
    let path = database_path(root, &catalog.db_id);
    std::fs::create_dir_all(path.parent().unwrap()).expect("database directory");
    let _ = std::fs::remove_file(&path);
    let mut conn = Connection::open(&path)?;
    let tx = conn.transaction()?;
    for table in &catalog.tables {
        // Created by SQLite itself for AUTOINCREMENT keys.
        if table.name.eq_ignore_ascii_case("sqlite_sequence") {
            continue;
        }
        let cols: Vec<String> = table
            .columns
            .iter()
            .map(|c| format!("{} {}", quote(&c.name), sql_type(c.value_type)))
            .collect();
        tx.execute_batch(&format!(
            "CREATE TABLE {} ({});",
            quote(&table.name),
            cols.join(", ")
        ))?;
        let marks = vec!["?"; table.columns.len()].join(", ");
        let mut insert = tx.prepare(&format!(
            "INSERT INTO {} VALUES ({marks})",
            quote(&table.name)
        ))?;
        for r in 0..rows {
            let values = table
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| value(c.value_type, &c.name, r, j, rows));
            insert.execute(params_from_iter(values))?;
        }
    }
    tx.commit()
}

/// Builds one database per catalog under `root`.
pub fn build_all<'a>(
    catalogs: impl IntoIterator<Item = &'a SchemaCatalog>,
    root: &Path,
    rows: usize,
) -> rusqlite::Result<()> {
    catalogs
        .into_iter()
        .try_for_each(|c| build_database(c, root, rows))
}

/// Synthesized databases for every catalog the dev split uses, built once
/// per test binary.
pub fn dev_stand_in() -> &'static Path {
    static ROOT: std::sync::OnceLock<tempfile::TempDir> = std::sync::OnceLock::new();
    ROOT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let (catalogs, dev) = super::load_split("dev.json").unwrap();
        let used: std::collections::HashSet<&str> = dev.iter().map(|e| e.db_id.as_str()).collect();
        build_all(
            catalogs
                .as_slice()
                .iter()
                .filter(|c| used.contains(c.db_id.as_str())),
            dir.path(),
            12,
        )
        .unwrap();
        dir
    })
    .path()
}
