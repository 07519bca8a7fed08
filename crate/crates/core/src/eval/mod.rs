//! Exact-set-match and execution accuracy with per-hardness breakdowns.

mod exact;
mod exec;

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{canonical, exact_set_match, EmConfig, ExactMatcher, ForeignKeyMap};
pub use exec::{
    execution_match, open_database, results_match, run_query, Cell, DatabaseError, ExOutcome, Row,
};

use crate::catalog::{CatalogSet, Example};
use crate::hardness::{classify_hardness, count_components, HardnessLevel};
use crate::sql::{parse_sql, SqlError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no database file for {db_ids:?} under {root}")]
    MissingDatabases { root: String, db_ids: Vec<String> },
    #[error("{examples} examples but {predictions} predictions")]
    CountMismatch { examples: usize, predictions: usize },
    #[error("example {index}: gold SQL does not parse: {source}")]
    GoldParse { index: usize, source: SqlError },
    #[error("example {index}: no catalog for `{db_id}`")]
    MissingCatalog { index: usize, db_id: String },
    #[error("example {index}: {source}")]
    Database { index: usize, source: DatabaseError },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Per-example verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub index: usize,
    pub em: bool,
    pub ex: ExOutcome,
    pub hardness: HardnessLevel,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub em: EmConfig,
    pub timeout: Duration,
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            em: EmConfig::default(),
            timeout: Duration::from_secs(30),
            threads: 8,
        }
    }
}

/// `<root>/<db_id>/<db_id>.sqlite`
pub fn database_path(root: &Path, db_id: &str) -> PathBuf {
    root.join(db_id).join(format!("{db_id}.sqlite"))
}

/// Scores `predictions[i]` against `examples[i]` for every `i`.
pub fn evaluate_corpus(
    examples: &[Example],
    predictions: &[String],
    catalogs: &CatalogSet,
    db_root: &Path,
    options: &EvalOptions,
) -> Result<(Vec<MatchOutcome>, EvalReport), EvalError> {
    if examples.len() != predictions.len() {
        return Err(EvalError::CountMismatch {
            examples: examples.len(),
            predictions: predictions.len(),
        });
    }
    let mut missing: Vec<String> = examples
        .iter()
        .map(|e| e.db_id.as_str())
        .filter(|id| !database_path(db_root, id).is_file())
        .map(str::to_string)
        .collect();
    missing.sort();
    missing.dedup();
    if !missing.is_empty() {
        return Err(EvalError::MissingDatabases {
            root: db_root.display().to_string(),
            db_ids: missing,
        });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.max(1))
        .build()?;
    let outcomes: Vec<MatchOutcome> = pool.install(|| {
        examples
            .par_iter()
            .zip(predictions.par_iter())
            .enumerate()
            .map(|(index, (ex, pred))| evaluate_one(index, ex, pred, catalogs, db_root, options))
            .collect::<Result<_, _>>()
    })?;
    let report = EvalReport::from_outcomes(&outcomes);
    if report.excluded > 0 {
        log::warn!(
            "{} examples excluded: gold SQL failed on its own database",
            report.excluded
        );
    }
    Ok((outcomes, report))
}

fn evaluate_one(
    index: usize,
    ex: &Example,
    pred: &str,
    catalogs: &CatalogSet,
    db_root: &Path,
    options: &EvalOptions,
) -> Result<MatchOutcome, EvalError> {
    let catalog = catalogs
        .get(&ex.db_id)
        .ok_or_else(|| EvalError::MissingCatalog {
            index,
            db_id: ex.db_id.clone(),
        })?;
    let gold = parse_sql(&ex.gold_sql, catalog)
        .map_err(|source| EvalError::GoldParse { index, source })?;
    let hardness = classify_hardness(count_components(&gold));
    let em = match parse_sql(pred, catalog) {
        Ok(p) => ExactMatcher::new(catalog, options.em).matches(&gold, &p),
        Err(_) => false,
    };
    let conn = open_database(&database_path(db_root, &ex.db_id))
        .map_err(|source| EvalError::Database { index, source })?;
    let ordered = !gold.order_by.is_empty();
    let ex_outcome = execution_match(&conn, &ex.gold_sql, pred, ordered, options.timeout);
    Ok(MatchOutcome {
        index,
        em,
        ex: ex_outcome,
        hardness,
    })
}

/// Counts and accuracies for one bucket.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub count: usize,
    pub em_matches: usize,
    pub ex_matches: usize,
    /// Percent, one decimal.
    pub em: f64,
    /// Percent, one decimal.
    pub ex: f64,
}

impl LevelStats {
    fn finish(&mut self) {
        self.em = percent(self.em_matches, self.count);
        self.ex = percent(self.ex_matches, self.count);
    }
}

/// `100 * n / d` rounded to one decimal; 0 when `d` is 0.
pub fn percent(n: usize, d: usize) -> f64 {
    if d == 0 {
        return 0.0;
    }
    (1000.0 * n as f64 / d as f64).round() / 10.0
}

/// Corpus-level report. `total` = Σ `levels[i].count` + `excluded`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub excluded: usize,
    /// Easy, medium, hard, extra-hard.
    pub levels: [LevelStats; 4],
    pub overall: LevelStats,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[MatchOutcome]) -> EvalReport {
        let mut r = EvalReport {
            total: outcomes.len(),
            ..EvalReport::default()
        };
        for o in outcomes {
            if o.ex == ExOutcome::GoldError {
                r.excluded += 1;
                continue;
            }
            for s in [&mut r.levels[o.hardness.index()], &mut r.overall] {
                s.count += 1;
                s.em_matches += o.em as usize;
                s.ex_matches += (o.ex == ExOutcome::Match) as usize;
            }
        }
        r.levels.iter_mut().for_each(LevelStats::finish);
        r.overall.finish();
        r
    }

    pub fn level(&self, level: HardnessLevel) -> &LevelStats {
        &self.levels[level.index()]
    }

    /// Levels as rows; count, EM and EX as columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12}{:>7}{:>8}{:>8}", "level", "count", "EM", "EX");
        let rows = HardnessLevel::ALL
            .iter()
            .map(|l| (l.as_str(), &self.levels[l.index()]))
            .chain(std::iter::once(("all", &self.overall)));
        for (name, s) in rows {
            let _ = writeln!(out, "{name:<12}{:>7}{:>8.1}{:>8.1}", s.count, s.em, s.ex);
        }
        let _ = writeln!(out, "total {}  excluded {}", self.total, self.excluded);
        if !self.fingerprint.is_empty() {
            let _ = writeln!(out, "config {}", self.fingerprint);
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(index: usize, em: bool, ex: ExOutcome, hardness: HardnessLevel) -> MatchOutcome {
        MatchOutcome {
            index,
            em,
            ex,
            hardness,
        }
    }

    #[test]
    fn one_wrong_in_ten_easy() {
        let outcomes: Vec<_> = (0..10)
            .map(|i| {
                let ok = i != 3;
                let ex = if ok {
                    ExOutcome::Match
                } else {
                    ExOutcome::Mismatch
                };
                outcome(i, ok, ex, HardnessLevel::Easy)
            })
            .collect();
        let r = EvalReport::from_outcomes(&outcomes);
        assert_eq!(r.level(HardnessLevel::Easy).ex, 90.0);
        assert_eq!(r.level(HardnessLevel::Easy).em, 90.0);
        assert_eq!(r.level(HardnessLevel::Hard).count, 0);
        assert_eq!(r.overall.ex, 90.0);
    }

    #[test]
    fn gold_errors_are_excluded() {
        let r = EvalReport::from_outcomes(&[
            outcome(0, true, ExOutcome::Match, HardnessLevel::Medium),
            outcome(1, false, ExOutcome::GoldError, HardnessLevel::Medium),
            outcome(2, false, ExOutcome::PredError, HardnessLevel::Hard),
        ]);
        assert_eq!(r.total, 3);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.overall.count, 2);
        assert_eq!(r.overall.ex, 50.0);
        assert_eq!(
            r.levels.iter().map(|l| l.count).sum::<usize>() + r.excluded,
            r.total
        );
    }

    #[test]
    fn percent_rounds_to_one_decimal() {
        assert_eq!(percent(2, 3), 66.7);
        assert_eq!(percent(0, 0), 0.0);
        assert_eq!(percent(1, 1), 100.0);
    }

    #[test]
    fn table_layout() {
        let r =
            EvalReport::from_outcomes(&[outcome(0, true, ExOutcome::Match, HardnessLevel::Easy)]);
        let t = r.to_table();
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(
            lines[0].split_whitespace().collect::<Vec<_>>(),
            ["level", "count", "EM", "EX"]
        );
        assert!(lines[1].starts_with("easy"));
        assert!(lines[4].starts_with("extra-hard"));
        assert_eq!(
            lines[5].split_whitespace().collect::<Vec<_>>(),
            ["all", "1", "100.0", "100.0"]
        );
    }
}
