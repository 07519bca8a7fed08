use std::cmp::Ordering;
use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExOutcome {
    Match,
    Mismatch,
    PredError,
    GoldError,
}

#[derive(Debug, Error)]
#[error("cannot open database {path}: {source}")]
pub struct DatabaseError {
    pub path: String,
    #[source]
    pub source: rusqlite::Error,
}

/// One result value. Integers and reals share `Num`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Num(f64),
    Text(String),
    Blob(Vec<u8>),
}

const REL_TOL: f64 = 1e-6;

impl Cell {
    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Num(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }

    fn total_cmp(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    /// NULL equals NULL; numbers equal within a relative tolerance.
    pub fn equivalent(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => {
                a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
            }
            _ => self == other,
        }
    }
}

pub type Row = Vec<Cell>;

/// Opens `path` read-only.
pub fn open_database(path: &Path) -> Result<Connection, DatabaseError> {
    Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|source| DatabaseError {
        path: path.display().to_string(),
        source,
    })
}

/// Runs `sql`, interrupting it once `timeout` has elapsed.
pub fn run_query(conn: &Connection, sql: &str, timeout: Duration) -> rusqlite::Result<Vec<Row>> {
    let deadline = Instant::now() + timeout;
    conn.progress_handler(1_000, Some(move || Instant::now() >= deadline));
    let result = collect_rows(conn, sql);
    conn.progress_handler(0, None::<fn() -> bool>);
    result
}

fn collect_rows(conn: &Connection, sql: &str) -> rusqlite::Result<Vec<Row>> {
    let mut stmt = conn.prepare(sql)?;
    let width = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let mut cells = Vec::with_capacity(width);
        for i in 0..width {
            cells.push(match row.get_ref(i)? {
                ValueRef::Null => Cell::Null,
                ValueRef::Integer(v) => Cell::Num(v as f64),
                ValueRef::Real(v) => Cell::Num(v),
                ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
            });
        }
        out.push(cells);
    }
    Ok(out)
}

fn row_cmp(a: &Row, b: &Row) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Compares result tables: as sequences when `ordered`, else as multisets.
pub fn results_match(gold: &[Row], pred: &[Row], ordered: bool) -> bool {
    if gold.len() != pred.len() {
        return false;
    }
    let same = |a: &[&Row], b: &[&Row]| {
        a.iter().zip(b).all(|(x, y)| {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(c, d)| c.equivalent(d))
        })
    };
    let mut g: Vec<&Row> = gold.iter().collect();
    let mut p: Vec<&Row> = pred.iter().collect();
    if !ordered {
        g.sort_by(|a, b| row_cmp(a, b));
        p.sort_by(|a, b| row_cmp(a, b));
    }
    same(&g, &p)
}

/// Executes both queries on `conn` and compares their results.
pub fn execution_match(
    conn: &Connection,
    gold_sql: &str,
    pred_sql: &str,
    ordered: bool,
    timeout: Duration,
) -> ExOutcome {
    let gold = match run_query(conn, gold_sql, timeout) {
        Ok(rows) => rows,
        Err(e) => {
            log::warn!("gold query failed: {e}");
            return ExOutcome::GoldError;
        }
    };
    let pred = match run_query(conn, pred_sql, timeout) {
        Ok(rows) => rows,
        Err(e) => {
            log::debug!("predicted query failed: {e}");
            return ExOutcome::PredError;
        }
    };
    if results_match(&gold, &pred, ordered) {
        ExOutcome::Match
    } else {
        ExOutcome::Mismatch
    }
}
