//! Shared helpers for integration tests.
#![allow(dead_code)]

pub mod mock;
pub mod mutate;
pub mod refiner;
pub mod synth;

use std::path::PathBuf;

use sqlhard::catalog::{parse_examples, parse_schema_catalogs, CatalogSet, Example};

/// `SPIDER_DIR`, or `data/spider` at the workspace root.
pub fn spider_dir() -> PathBuf {
    std::env::var_os("SPIDER_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/spider"))
}

pub fn workspace_root() -> PathBuf {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    root.canonicalize().unwrap_or(root)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Catalogs plus the examples of `file` (e.g. `dev.json`), or the reason
/// they cannot be loaded.
pub fn load_split(file: &str) -> Result<(CatalogSet, Vec<Example>), String> {
    let dir = spider_dir();
    let tables = std::fs::read_to_string(dir.join("tables.json"))
        .map_err(|e| format!("{}: {e}", dir.join("tables.json").display()))?;
    let docs = std::fs::read_to_string(dir.join(file))
        .map_err(|e| format!("{}: {e}", dir.join(file).display()))?;
    let catalogs = parse_schema_catalogs(&tables).map_err(|e| e.to_string())?;
    let examples = parse_examples(&docs, &catalogs).map_err(|e| e.to_string())?;
    Ok((CatalogSet::new(catalogs), examples))
}

/// Loads a split for a non-acceptance test; `None` (with a note) when the
/// dataset is not installed.
pub fn split_or_skip(file: &str) -> Option<(CatalogSet, Vec<Example>)> {
    match load_split(file) {
        Ok(v) => Some(v),
        Err(e) => {
            eprintln!("skipping: dataset unavailable ({e}); run scripts/fetch-spider-dev.sh");
            None
        }
    }
}

pub fn read_jsonl(path: &std::path::Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Pairs on which the local verdict differs from the frozen reference one.
pub fn em_disagreements(catalogs: &sqlhard::catalog::CatalogSet) -> (usize, Vec<usize>) {
    use sqlhard::eval::{EmConfig, ExactMatcher};
    let pairs = read_jsonl(&fixture("em_stress_pairs.jsonl"));
    let official = read_jsonl(&fixture("em_stress_official.jsonl"));
    assert_eq!(pairs.len(), official.len());
    let mut bad = Vec::new();
    for (i, (p, o)) in pairs.iter().zip(&official).enumerate() {
        let catalog = catalogs.get(p["db_id"].as_str().unwrap()).unwrap();
        let ours = ExactMatcher::new(catalog, EmConfig::default())
            .matches_sql(p["gold"].as_str().unwrap(), p["pred"].as_str().unwrap())
            .unwrap_or(false);
        if ours != o["em"].as_bool().unwrap() {
            bad.push(i);
        }
    }
    (pairs.len(), bad)
}
