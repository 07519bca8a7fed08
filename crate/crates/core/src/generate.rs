//! SQL generation clients and the ordered corpus fan-out.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::catalog::Example;
use crate::http::{CallError, Endpoint, EndpointConfig};
use crate::prompt::ComposedPrompt;

/// Emitted in place of a failed generation under [`FailurePolicy::Placeholder`].
pub const PLACEHOLDER_SQL: &str = "SELECT 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("generator protocol error: {0}")]
    ProtocolError(String),
    #[error("empty generation")]
    EmptyGeneration,
    #[error("no prediction for example {0}")]
    MissingPrediction(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictionFileError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: index {index} already seen")]
    DuplicateIndex { line: usize, index: usize },
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

/// Parses JSON lines, rejecting repeated indices. Blank lines are skipped.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, PredictionFileError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(line).map_err(|e| PredictionFileError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        if !seen.insert(rec.index) {
            return Err(PredictionFileError::DuplicateIndex {
                line: i + 1,
                index: rec.index,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Maps a composed prompt to SQL text. Implementations hold no per-example
/// state.
pub trait SqlGenerator: Send + Sync {
    fn generate(&self, index: usize, prompt: &ComposedPrompt) -> Result<String, GenerateError>;

    /// Whether per-call latency is worth recording.
    fn timed(&self) -> bool {
        false
    }
}

/// Returns the recorded SQL for each index.
#[derive(Debug, Clone)]
pub struct ReplayGenerator {
    by_index: HashMap<usize, String>,
}

impl ReplayGenerator {
    pub fn new(records: Vec<PredictionRecord>) -> Result<ReplayGenerator, PredictionFileError> {
        let mut by_index = HashMap::with_capacity(records.len());
        for (line, r) in records.into_iter().enumerate() {
            if by_index.insert(r.index, r.sql).is_some() {
                return Err(PredictionFileError::DuplicateIndex {
                    line: line + 1,
                    index: r.index,
                });
            }
        }
        Ok(ReplayGenerator { by_index })
    }

    pub fn from_text(text: &str) -> Result<ReplayGenerator, PredictionFileError> {
        ReplayGenerator::new(parse_predictions(text)?)
    }
}

impl SqlGenerator for ReplayGenerator {
    fn generate(&self, index: usize, _prompt: &ComposedPrompt) -> Result<String, GenerateError> {
        self.by_index
            .get(&index)
            .cloned()
            .ok_or(GenerateError::MissingPrediction(index))
    }
}

/// Returns each example's gold SQL.
#[derive(Debug, Clone)]
pub struct GoldEchoGenerator {
    gold: Vec<String>,
}

impl GoldEchoGenerator {
    pub fn new(examples: &[Example]) -> GoldEchoGenerator {
        GoldEchoGenerator {
            gold: examples.iter().map(|e| e.gold_sql.clone()).collect(),
        }
    }
}

impl SqlGenerator for GoldEchoGenerator {
    fn generate(&self, index: usize, _prompt: &ComposedPrompt) -> Result<String, GenerateError> {
        self.gold
            .get(index)
            .cloned()
            .ok_or(GenerateError::MissingPrediction(index))
    }
}

/// Delegates to `POST /generate`.
pub struct EndpointGenerator {
    endpoint: Endpoint,
}

impl EndpointGenerator {
    pub fn new(config: EndpointConfig) -> EndpointGenerator {
        EndpointGenerator {
            endpoint: Endpoint::new(config),
        }
    }
}

/// Trims and joins lines with single spaces.
fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl SqlGenerator for EndpointGenerator {
    fn generate(&self, _index: usize, prompt: &ComposedPrompt) -> Result<String, GenerateError> {
        let reply = self
            .endpoint
            .post("/generate", &json!({ "prompt": prompt.full_text }))
            .map_err(|e| match e {
                CallError::Unavailable(m) => GenerateError::GeneratorUnavailable(m),
                CallError::Protocol(m) => GenerateError::ProtocolError(m),
            })?;
        let text = reply
            .get("text")
            .and_then(|t| t.as_str())
            .ok_or_else(|| GenerateError::ProtocolError("reply lacks a string `text`".into()))?;
        let sql = one_line(text);
        if sql.is_empty() {
            return Err(GenerateError::EmptyGeneration);
        }
        Ok(sql)
    }

    fn timed(&self) -> bool {
        true
    }
}

/// What to do when one example fails to generate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Emit [`PLACEHOLDER_SQL`] and keep going.
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("example {index}: {source}")]
pub struct GenerationFailure {
    pub index: usize,
    #[source]
    pub source: GenerateError,
}

/// Records in input order plus the failures replaced by placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRun {
    pub records: Vec<PredictionRecord>,
    pub failures: Vec<GenerationFailure>,
}

/// Generates for every `(index, prompt)` with at most `threads` calls in
/// flight. Output order equals input order.
pub fn generate_all(
    generator: &dyn SqlGenerator,
    prompts: &[(usize, ComposedPrompt)],
    threads: usize,
    policy: FailurePolicy,
) -> Result<GenerationRun, GenerationFailure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| GenerationFailure {
            index: prompts.first().map_or(0, |p| p.0),
            source: GenerateError::GeneratorUnavailable(format!("cannot start workers: {e}")),
        })?;
    let timed = generator.timed();
    let results: Vec<(usize, Result<String, GenerateError>, Option<f64>)> = pool.install(|| {
        prompts
            .par_iter()
            .map(|(index, prompt)| {
                let start = Instant::now();
                let r = generator.generate(*index, prompt);
                let latency = timed.then(|| (start.elapsed().as_secs_f64() * 1e4).round() / 10.0);
                (*index, r, latency)
            })
            .collect()
    });
    let mut run = GenerationRun {
        records: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for (index, result, latency_ms) in results {
        let sql = match result {
            Ok(sql) => sql,
            Err(source) => {
                let failure = GenerationFailure { index, source };
                if policy == FailurePolicy::Abort {
                    return Err(failure);
                }
                log::warn!("{failure}; emitting placeholder");
                run.failures.push(failure);
                PLACEHOLDER_SQL.to_string()
            }
        };
        run.records.push(PredictionRecord {
            index,
            sql,
            latency_ms,
        });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardness::HardnessLevel;
    use crate::prompt::compose_input;

    fn prompt() -> ComposedPrompt {
        compose_input(HardnessLevel::Easy, "q", "")
    }

    #[test]
    fn replay_returns_recorded_sql() {
        let g = ReplayGenerator::from_text(
            "{\"index\": 0, \"sql\": \"SELECT count(*) FROM singer\"}\n",
        )
        .unwrap();
        assert_eq!(
            g.generate(0, &prompt()).unwrap(),
            "SELECT count(*) FROM singer"
        );
        assert_eq!(
            g.generate(1, &prompt()),
            Err(GenerateError::MissingPrediction(1))
        );
    }

    #[test]
    fn duplicate_index_rejected_at_load() {
        let text = "{\"index\": 3, \"sql\": \"a\"}\n{\"index\": 3, \"sql\": \"b\"}\n";
        assert_eq!(
            ReplayGenerator::from_text(text).unwrap_err(),
            PredictionFileError::DuplicateIndex { line: 2, index: 3 }
        );
    }

    #[test]
    fn malformed_line_is_located() {
        let err = parse_predictions("{\"index\": 0, \"sql\": \"a\"}\nnope\n").unwrap_err();
        assert!(matches!(
            err,
            PredictionFileError::Malformed { line: 2, .. }
        ));
    }

    #[test]
    fn latency_round_trips_and_is_optional() {
        let r = PredictionRecord {
            index: 1,
            sql: "SELECT 1".into(),
            latency_ms: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"index":1,"sql":"SELECT 1"}"#
        );
    }

    #[test]
    fn fan_out_keeps_input_order() {
        let examples: Vec<Example> = (0..50)
            .map(|i| Example {
                db_id: "d".into(),
                question: "q".into(),
                gold_sql: format!("SELECT {i}"),
            })
            .collect();
        let g = GoldEchoGenerator::new(&examples);
        let prompts: Vec<_> = (0..50).rev().map(|i| (i, prompt())).collect();
        let run = generate_all(&g, &prompts, 8, FailurePolicy::Abort).unwrap();
        let got: Vec<_> = run.records.iter().map(|r| r.index).collect();
        assert_eq!(got, (0..50).rev().collect::<Vec<_>>());
        assert!(run
            .records
            .iter()
            .all(|r| r.sql == format!("SELECT {}", r.index)));
    }

    #[test]
    fn failure_policy() {
        let g = ReplayGenerator::new(vec![PredictionRecord {
            index: 0,
            sql: "SELECT a".into(),
            latency_ms: None,
        }])
        .unwrap();
        let prompts = vec![(0, prompt()), (1, prompt())];
        let err = generate_all(&g, &prompts, 2, FailurePolicy::Abort).unwrap_err();
        assert_eq!(err.index, 1);
        let run = generate_all(&g, &prompts, 2, FailurePolicy::Placeholder).unwrap();
        assert_eq!(run.records[1].sql, PLACEHOLDER_SQL);
        assert_eq!(run.failures.len(), 1);
    }

    #[test]
    fn one_line_collapses_whitespace() {
        assert_eq!(one_line("  SELECT a\n FROM t \n"), "SELECT a FROM t");
    }
}
