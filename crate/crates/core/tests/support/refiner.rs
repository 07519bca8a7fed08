//! Refined-schema invariants as violation lists.

use sqlhard::catalog::SchemaCatalog;
use sqlhard::refine::{GoldItemScorer, RefinedSchema};

/// Cardinality, ranking order with catalog-order ties, and the foreign-key
/// subset rule.
pub fn shape_violations(refined: &RefinedSchema, catalog: &SchemaCatalog) -> Vec<String> {
    let mut out = Vec::new();
    if refined.tables.len() != catalog.tables.len().min(4) {
        out.push(format!(
            "{} tables kept of {}",
            refined.tables.len(),
            catalog.tables.len()
        ));
    }
    let pos = |name: &str| catalog.table_index(name).unwrap();
    for w in refined.tables.windows(2) {
        if !(w[0].score > w[1].score
            || (w[0].score == w[1].score && pos(&w[0].name) < pos(&w[1].name)))
        {
            out.push(format!(
                "tables {} and {} out of order",
                w[0].name, w[1].name
            ));
        }
    }
    for t in &refined.tables {
        let def = &catalog.tables[pos(&t.name)];
        if t.columns.len() != def.columns.len().min(5) {
            out.push(format!(
                "{}: {} columns kept of {}",
                t.name,
                t.columns.len(),
                def.columns.len()
            ));
        }
        for w in t.columns.windows(2) {
            if !(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].id < w[1].id)) {
                out.push(format!(
                    "{}: columns {} and {} out of order",
                    t.name, w[0].name, w[1].name
                ));
            }
        }
    }
    for fk in &refined.foreign_keys {
        if !catalog.foreign_keys.contains(fk) {
            out.push(format!("foreign key {fk:?} not in catalog"));
        }
    }
    out
}

/// Gold tables (when at most four) and their gold columns (when at most five
/// per table) missing from `refined`.
pub fn recall_violations(refined: &RefinedSchema, oracle: &GoldItemScorer) -> Vec<String> {
    let mut out = Vec::new();
    if oracle.tables().len() > 4 {
        return out;
    }
    for t in oracle.tables() {
        let Some(kept) = refined
            .tables
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(t))
        else {
            out.push(format!("table {t} dropped"));
            continue;
        };
        let gold: Vec<_> = oracle.columns().iter().filter(|(ct, _)| ct == t).collect();
        if gold.len() > 5 {
            continue;
        }
        for (_, c) in gold {
            if !kept.columns.iter().any(|k| k.name.eq_ignore_ascii_case(c)) {
                out.push(format!("column {t}.{c} dropped"));
            }
        }
    }
    out
}
