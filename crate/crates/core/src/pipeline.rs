//! Configured stages over line-delimited artifacts.
//!
//! Each stage reads the artifacts of the stages before it from
//! `output_dir` and writes its own; [`run_pipeline`] runs them in order.
//! Every artifact line carries the example `index`.
//!
//! | stage      | reads                        | writes                              |
//! |------------|------------------------------|-------------------------------------|
//! | ingest     | dataset, tables              | `examples.jsonl`, `run.json`        |
//! | refine     | `examples.jsonl`             | `refined.jsonl`                     |
//! | label      | dataset, tables              | `labels.jsonl`                      |
//! | compose    | `examples`, `refined`        | `prompts.jsonl`                     |
//! | generate   | `prompts.jsonl`              | `predictions.jsonl`, `failures.jsonl` |
//! | evaluation | `examples`, predictions      | `outcomes.jsonl`, `report.{json,txt}` |
//! | ablate     | `examples`, `refined`        | `ablation.{json,txt}`               |

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{parse_examples, parse_schema_catalogs, CatalogSet, Example};
use crate::eval::{evaluate_corpus, EmConfig, EvalError, EvalOptions, EvalReport, MatchOutcome};
use crate::generate::{
    generate_all, EndpointGenerator, FailurePolicy, GenerationFailure, GoldEchoGenerator,
    PredictionRecord, ReplayGenerator, SqlGenerator,
};
use crate::hardness::{label_corpus, ComponentCounts, Distribution, HardnessLevel};
use crate::http::EndpointConfig;
use crate::prompt::{
    compose_ordered, EndpointPredictor, HardnessPredictor, HeuristicPredictor, HeuristicRules,
    OraclePredictor, PredictorError, PredictorInput, PromptOrder,
};
use crate::refine::{
    refine_with, serialize_schema, EndpointScorer, LexicalScorer, RefinedSchema, RelevanceScorer,
};

/// Environment variable naming the dataset directory.
pub const SPIDER_DIR_ENV: &str = "SPIDER_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerChoice {
    Lexical,
    Endpoint(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorChoice {
    Oracle,
    Heuristic {
        #[serde(default)]
        rules: HeuristicRules,
    },
    Endpoint(EndpointConfig),
}

impl PredictorChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorChoice::Oracle => "oracle",
            PredictorChoice::Heuristic { .. } => "heuristic",
            PredictorChoice::Endpoint(_) => "endpoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorChoice {
    GoldEcho,
    Replay { path: PathBuf },
    Endpoint(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Example document (`dev.json`, `train_spider.json`).
    pub dataset: PathBuf,
    /// Table-description document.
    pub tables: PathBuf,
    /// Holds `<db_id>/<db_id>.sqlite`.
    pub db_root: PathBuf,
    /// Not part of the fingerprint.
    pub output_dir: PathBuf,
    /// Keep only the first `limit` examples.
    pub limit: Option<usize>,
    pub k_tables: usize,
    pub k_cols: usize,
    pub include_fk: bool,
    pub prompt_order: PromptOrder,
    pub threads: usize,
    pub exec_timeout_ms: u64,
    pub on_failure: FailurePolicy,
    pub em: EmConfig,
    pub scorer: ScorerChoice,
    pub predictor: PredictorChoice,
    pub generator: GeneratorChoice,
}

/// `$SPIDER_DIR`, else `data/spider`.
pub fn default_spider_dir() -> PathBuf {
    std::env::var_os(SPIDER_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/spider"))
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let dir = default_spider_dir();
        PipelineConfig {
            dataset: dir.join("dev.json"),
            tables: dir.join("tables.json"),
            db_root: dir.join("database"),
            output_dir: PathBuf::from("runs/latest"),
            limit: None,
            k_tables: crate::refine::DEFAULT_K_TABLES,
            k_cols: crate::refine::DEFAULT_K_COLS,
            include_fk: false,
            prompt_order: PromptOrder::default(),
            threads: 8,
            exec_timeout_ms: 30_000,
            on_failure: FailurePolicy::default(),
            em: EmConfig::default(),
            scorer: ScorerChoice::Lexical,
            predictor: PredictorChoice::Oracle,
            generator: GeneratorChoice::GoldEcho,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig, PipelineError> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        PipelineConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.k_tables == 0 {
            return fail("k_tables must be at least 1");
        }
        if self.k_cols == 0 {
            return fail("k_cols must be at least 1");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        for (slot, e) in [
            (
                "scorer",
                matches!(&self.scorer, ScorerChoice::Endpoint(e) if e.url.is_empty()),
            ),
            (
                "predictor",
                matches!(&self.predictor, PredictorChoice::Endpoint(e) if e.url.is_empty()),
            ),
            (
                "generator",
                matches!(&self.generator, GeneratorChoice::Endpoint(e) if e.url.is_empty()),
            ),
        ] {
            if e {
                return Err(PipelineError::Config(format!(
                    "{slot} endpoint needs a url"
                )));
            }
        }
        Ok(())
    }

    /// Canonical JSON with sorted keys and `output_dir` blanked.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["output_dir"] = serde_json::Value::Null;
        v.to_string()
    }

    /// Hex SHA-256 of [`PipelineConfig::canonical_json`].
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Refine,
    Label,
    Compose,
    Generate,
    Evaluation,
    Ablate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Refine => "refine",
            Stage::Label => "label",
            Stage::Compose => "compose",
            Stage::Generate => "generate",
            Stage::Evaluation => "evaluation",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }

    /// Subcommand that runs this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Evaluation => "evaluate",
            s => s.name(),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn at(index: &Option<usize>) -> String {
    index.map_or(String::new(), |i| format!(" (example {i})"))
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}: {path} not found; run `{producer}` first")]
    MissingArtifact {
        stage: Stage,
        path: PathBuf,
        producer: &'static str,
    },
    #[error("{stage}{}: {message}", at(.index))]
    Validation {
        stage: Stage,
        index: Option<usize>,
        message: String,
    },
    #[error("{stage}{}: {message}", at(.index))]
    Infrastructure {
        stage: Stage,
        index: Option<usize>,
        message: String,
    },
}

impl PipelineError {
    /// 1 for configuration and data problems, 2 for infrastructure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Infrastructure { .. } => 2,
            _ => 1,
        }
    }

    fn validation(stage: Stage, index: Option<usize>, message: impl fmt::Display) -> PipelineError {
        PipelineError::Validation {
            stage,
            index,
            message: message.to_string(),
        }
    }

    fn infra(stage: Stage, index: Option<usize>, message: impl fmt::Display) -> PipelineError {
        PipelineError::Infrastructure {
            stage,
            index,
            message: message.to_string(),
        }
    }
}

pub const EXAMPLES: &str = "examples.jsonl";
pub const REFINED: &str = "refined.jsonl";
pub const LABELS: &str = "labels.jsonl";
pub const PROMPTS: &str = "prompts.jsonl";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const FAILURES: &str = "failures.jsonl";
pub const OUTCOMES: &str = "outcomes.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TXT: &str = "ablation.txt";
pub const RUN_JSON: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub index: usize,
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedRecord {
    pub index: usize,
    pub db_id: String,
    pub schema_text: String,
    pub schema: RefinedSchema,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub index: usize,
    pub db_id: String,
    pub level: HardnessLevel,
    pub counts: ComponentCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub index: usize,
    pub level: HardnessLevel,
    pub hardness_token: String,
    pub question: String,
    pub schema_text: String,
    pub full_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RunRecord {
    fingerprint: String,
    config: serde_json::Value,
}

fn io_error(stage: Stage, path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::infra(stage, None, format!("{}: {e}", path.display()))
}

fn write_text(stage: Stage, path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(stage, dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(stage, path, e))
}

fn write_jsonl<T: Serialize>(
    stage: Stage,
    path: &Path,
    records: &[T],
) -> Result<(), PipelineError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    write_text(stage, path, &text)
}

fn read_jsonl<T: DeserializeOwned>(
    stage: Stage,
    path: &Path,
    producer: Stage,
) -> Result<Vec<T>, PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact {
                stage,
                path: path.to_path_buf(),
                producer: producer.command(),
            })
        }
        Err(e) => return Err(io_error(stage, path, e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                PipelineError::validation(
                    stage,
                    None,
                    format!("{} line {}: {e}", path.display(), i + 1),
                )
            })
        })
        .collect()
}

/// Indices must be `0..n` in order.
fn check_indices(
    stage: Stage,
    path: &Path,
    indices: impl Iterator<Item = usize>,
    n: usize,
) -> Result<(), PipelineError> {
    let mut count = 0;
    for (expected, got) in indices.enumerate() {
        if expected != got {
            return Err(PipelineError::validation(
                stage,
                Some(expected),
                format!("{} has index {got} at position {expected}", path.display()),
            ));
        }
        count += 1;
    }
    if count != n {
        return Err(PipelineError::validation(
            stage,
            None,
            format!("{} has {count} records for {n} examples", path.display()),
        ));
    }
    Ok(())
}

/// Runs `f` over `items` on `threads` workers; output order is input order.
fn par_map<T: Sync, R: Send, E: Send>(
    threads: usize,
    items: &[T],
    f: impl Fn(usize, &T) -> Result<R, E> + Sync + Send,
) -> Result<Vec<R>, E> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("worker pool");
    pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
}

fn timed<T>(
    stage: Stage,
    f: impl FnOnce() -> Result<T, PipelineError>,
) -> Result<T, PipelineError> {
    let start = Instant::now();
    let out = f();
    log::info!("{stage} finished in {:.2?}", start.elapsed());
    out
}

/// Loaded configuration plus catalogs.
pub struct Context {
    pub config: PipelineConfig,
    pub catalogs: CatalogSet,
}

impl Context {
    pub fn new(config: PipelineConfig) -> Result<Context, PipelineError> {
        config.validate()?;
        let text = std::fs::read_to_string(&config.tables)
            .map_err(|e| io_error(Stage::Ingest, &config.tables, e))?;
        let catalogs = parse_schema_catalogs(&text)
            .map_err(|e| PipelineError::validation(Stage::Ingest, None, e))?;
        Ok(Context {
            config,
            catalogs: CatalogSet::new(catalogs),
        })
    }

    pub fn path(&self, artifact: &str) -> PathBuf {
        self.config.output_dir.join(artifact)
    }

    /// Examples straight from the dataset document.
    pub fn load_dataset(&self, stage: Stage) -> Result<Vec<Example>, PipelineError> {
        let path = &self.config.dataset;
        let text = std::fs::read_to_string(path).map_err(|e| io_error(stage, path, e))?;
        let mut examples = parse_examples(&text, self.catalogs.as_slice())
            .map_err(|e| PipelineError::validation(stage, None, e))?;
        if let Some(n) = self.config.limit {
            examples.truncate(n);
        }
        Ok(examples)
    }

    /// Examples from the `ingest` artifact.
    pub fn load_examples(&self, stage: Stage) -> Result<Vec<Example>, PipelineError> {
        let path = self.path(EXAMPLES);
        let records: Vec<ExampleRecord> = read_jsonl(stage, &path, Stage::Ingest)?;
        check_indices(stage, &path, records.iter().map(|r| r.index), records.len())?;
        Ok(records
            .into_iter()
            .map(|r| Example {
                db_id: r.db_id,
                question: r.question,
                gold_sql: r.gold_sql,
            })
            .collect())
    }

    fn load_refined(&self, stage: Stage, n: usize) -> Result<Vec<RefinedRecord>, PipelineError> {
        let path = self.path(REFINED);
        let records: Vec<RefinedRecord> = read_jsonl(stage, &path, Stage::Refine)?;
        check_indices(stage, &path, records.iter().map(|r| r.index), n)?;
        Ok(records)
    }

    fn scorer(&self) -> Box<dyn RelevanceScorer> {
        match &self.config.scorer {
            ScorerChoice::Lexical => Box::new(LexicalScorer),
            ScorerChoice::Endpoint(c) => Box::new(EndpointScorer::new(c.clone())),
        }
    }

    fn predictor(&self, examples: &[Example]) -> Box<dyn HardnessPredictor> {
        match &self.config.predictor {
            PredictorChoice::Oracle => Box::new(OraclePredictor::new(examples, &self.catalogs)),
            PredictorChoice::Heuristic { rules } => {
                Box::new(HeuristicPredictor::new(rules.clone()))
            }
            PredictorChoice::Endpoint(c) => Box::new(EndpointPredictor::new(c.clone())),
        }
    }

    fn generator(&self, examples: &[Example]) -> Result<Box<dyn SqlGenerator>, PipelineError> {
        Ok(match &self.config.generator {
            GeneratorChoice::GoldEcho => Box::new(GoldEchoGenerator::new(examples)),
            GeneratorChoice::Replay { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| io_error(Stage::Generate, path, e))?;
                Box::new(ReplayGenerator::from_text(&text).map_err(|e| {
                    PipelineError::validation(
                        Stage::Generate,
                        None,
                        format!("{}: {e}", path.display()),
                    )
                })?)
            }
            GeneratorChoice::Endpoint(c) => Box::new(EndpointGenerator::new(c.clone())),
        })
    }
}

fn predictor_error(stage: Stage, index: usize, e: PredictorError) -> PipelineError {
    match e {
        PredictorError::PredictorUnavailable(_) | PredictorError::ProtocolError(_) => {
            PipelineError::infra(stage, Some(index), e)
        }
        _ => PipelineError::validation(stage, Some(index), e),
    }
}

/// Writes `examples.jsonl` and `run.json`.
pub fn ingest(ctx: &Context) -> Result<Vec<Example>, PipelineError> {
    timed(Stage::Ingest, || {
        let examples = ctx.load_dataset(Stage::Ingest)?;
        let records: Vec<ExampleRecord> = examples
            .iter()
            .enumerate()
            .map(|(index, e)| ExampleRecord {
                index,
                db_id: e.db_id.clone(),
                question: e.question.clone(),
                gold_sql: e.gold_sql.clone(),
            })
            .collect();
        write_jsonl(Stage::Ingest, &ctx.path(EXAMPLES), &records)?;
        let run = RunRecord {
            fingerprint: ctx.config.fingerprint(),
            config: serde_json::from_str(&ctx.config.canonical_json()).expect("canonical json"),
        };
        let text = serde_json::to_string_pretty(&run).expect("run record serializes") + "\n";
        write_text(Stage::Ingest, &ctx.path(RUN_JSON), &text)?;
        Ok(examples)
    })
}

/// Writes `refined.jsonl`.
pub fn refine_stage(ctx: &Context) -> Result<Vec<RefinedRecord>, PipelineError> {
    timed(Stage::Refine, || {
        let examples = ctx.load_examples(Stage::Refine)?;
        let scorer = ctx.scorer();
        let c = &ctx.config;
        let records = par_map(c.threads, &examples, |index, ex| {
            let catalog = ctx.catalogs.get(&ex.db_id).ok_or_else(|| {
                PipelineError::validation(
                    Stage::Refine,
                    Some(index),
                    format!("no catalog for `{}`", ex.db_id),
                )
            })?;
            let schema = refine_with(&ex.question, catalog, scorer.as_ref(), c.k_tables, c.k_cols)
                .map_err(|e| PipelineError::infra(Stage::Refine, Some(index), e))?;
            Ok(RefinedRecord {
                index,
                db_id: ex.db_id.clone(),
                schema_text: serialize_schema(&schema, c.include_fk),
                schema,
            })
        })?;
        write_jsonl(Stage::Refine, &ctx.path(REFINED), &records)?;
        Ok(records)
    })
}

/// Labels the dataset from gold SQL and writes `labels.jsonl`.
pub fn label_stage(ctx: &Context) -> Result<Distribution, PipelineError> {
    timed(Stage::Label, || {
        let examples = ctx.load_dataset(Stage::Label)?;
        let (labels, dist) = label_corpus(&examples, &ctx.catalogs).map_err(|e| {
            let index = match &e {
                crate::hardness::LabelError::Parse { index, .. }
                | crate::hardness::LabelError::MissingCatalog { index, .. } => *index,
            };
            PipelineError::validation(Stage::Label, Some(index), e)
        })?;
        let records: Vec<LabelRecord> = labels
            .into_iter()
            .map(|l| LabelRecord {
                index: l.index,
                db_id: l.db_id,
                level: l.level,
                counts: l.counts,
            })
            .collect();
        write_jsonl(Stage::Label, &ctx.path(LABELS), &records)?;
        Ok(dist)
    })
}

/// Predicts a level per example from its refined schema and writes
/// `prompts.jsonl`.
pub fn compose_stage(ctx: &Context) -> Result<Vec<PromptRecord>, PipelineError> {
    timed(Stage::Compose, || {
        let examples = ctx.load_examples(Stage::Compose)?;
        let refined = ctx.load_refined(Stage::Compose, examples.len())?;
        let predictor = ctx.predictor(&examples);
        let records = par_map(ctx.config.threads, &examples, |index, ex| {
            let schema_text = &refined[index].schema_text;
            let input = PredictorInput {
                index,
                question: &ex.question,
                schema_text,
            };
            let level = predictor
                .predict(&input)
                .map_err(|e| predictor_error(Stage::Compose, index, e))?;
            let p = compose_ordered(level, &ex.question, schema_text, ctx.config.prompt_order);
            Ok(PromptRecord {
                index,
                level,
                hardness_token: p.hardness_token,
                question: p.question,
                schema_text: p.schema_text,
                full_text: p.full_text,
            })
        })?;
        write_jsonl(Stage::Compose, &ctx.path(PROMPTS), &records)?;
        Ok(records)
    })
}

/// Writes `predictions.jsonl`, and `failures.jsonl` listing placeholders.
pub fn generate_stage(ctx: &Context) -> Result<Vec<PredictionRecord>, PipelineError> {
    timed(Stage::Generate, || {
        let path = ctx.path(PROMPTS);
        let prompts: Vec<PromptRecord> = read_jsonl(Stage::Generate, &path, Stage::Compose)?;
        check_indices(
            Stage::Generate,
            &path,
            prompts.iter().map(|p| p.index),
            prompts.len(),
        )?;
        let examples = ctx.load_examples(Stage::Generate)?;
        if examples.len() != prompts.len() {
            return Err(PipelineError::validation(
                Stage::Generate,
                None,
                format!("{} prompts for {} examples", prompts.len(), examples.len()),
            ));
        }
        let generator = ctx.generator(&examples)?;
        let inputs: Vec<_> = prompts
            .into_iter()
            .map(|p| {
                (
                    p.index,
                    crate::prompt::ComposedPrompt {
                        hardness_token: p.hardness_token,
                        question: p.question,
                        schema_text: p.schema_text,
                        full_text: p.full_text,
                    },
                )
            })
            .collect();
        let run = generate_all(
            generator.as_ref(),
            &inputs,
            ctx.config.threads,
            ctx.config.on_failure,
        )
        .map_err(|GenerationFailure { index, source }| match source {
            crate::generate::GenerateError::MissingPrediction(_) => {
                PipelineError::validation(Stage::Generate, Some(index), source)
            }
            _ => PipelineError::infra(Stage::Generate, Some(index), source),
        })?;
        write_jsonl(Stage::Generate, &ctx.path(PREDICTIONS), &run.records)?;
        let failures: Vec<FailureRecord> = run
            .failures
            .iter()
            .map(|f| FailureRecord {
                index: f.index,
                error: f.source.to_string(),
            })
            .collect();
        write_jsonl(Stage::Generate, &ctx.path(FAILURES), &failures)?;
        Ok(run.records)
    })
}

/// Report plus the number of predictions that were placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub report: EvalReport,
    pub outcomes: Vec<MatchOutcome>,
    pub placeholders: usize,
}

/// Scores `predictions` (default: the `generate` artifact) and writes
/// `outcomes.jsonl`, `report.json` and `report.txt`.
pub fn evaluate_stage(
    ctx: &Context,
    predictions: Option<&Path>,
) -> Result<EvaluationResult, PipelineError> {
    const S: Stage = Stage::Evaluation;
    timed(S, || {
        let examples = ctx.load_examples(S)?;
        let default_path = ctx.path(PREDICTIONS);
        let path = predictions.unwrap_or(&default_path);
        let records: Vec<PredictionRecord> = read_jsonl(S, path, Stage::Generate)?;
        let mut sql: Vec<Option<String>> = vec![None; examples.len()];
        for r in records {
            match sql.get_mut(r.index) {
                Some(slot @ None) => *slot = Some(r.sql),
                Some(Some(_)) => {
                    return Err(PipelineError::validation(
                        S,
                        Some(r.index),
                        "duplicate prediction index",
                    ))
                }
                None => {
                    return Err(PipelineError::validation(
                        S,
                        Some(r.index),
                        "prediction for unknown example",
                    ))
                }
            }
        }
        let sql: Vec<String> = sql
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| PipelineError::validation(S, Some(i), "no prediction")))
            .collect::<Result<_, _>>()?;
        let placeholders = if predictions.is_none() {
            match read_jsonl::<FailureRecord>(S, &ctx.path(FAILURES), Stage::Generate) {
                Ok(f) => f.len(),
                Err(PipelineError::MissingArtifact { .. }) => 0,
                Err(e) => return Err(e),
            }
        } else {
            0
        };

        let options = EvalOptions {
            em: ctx.config.em,
            timeout: Duration::from_millis(ctx.config.exec_timeout_ms),
            threads: ctx.config.threads,
        };
        let (outcomes, mut report) = evaluate_corpus(
            &examples,
            &sql,
            &ctx.catalogs,
            &ctx.config.db_root,
            &options,
        )
        .map_err(|e| match e {
            EvalError::GoldParse { index, .. } | EvalError::MissingCatalog { index, .. } => {
                PipelineError::validation(S, Some(index), e)
            }
            EvalError::CountMismatch { .. } => PipelineError::validation(S, None, e),
            EvalError::Database { index, .. } => PipelineError::infra(S, Some(index), e),
            EvalError::MissingDatabases { .. } | EvalError::Pool(_) => {
                PipelineError::infra(S, None, e)
            }
        })?;
        report.fingerprint = ctx.config.fingerprint();
        write_jsonl(S, &ctx.path(OUTCOMES), &outcomes)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_text(S, &ctx.path(REPORT_JSON), &json)?;
        write_text(S, &ctx.path(REPORT_TXT), &report.to_table())?;
        Ok(EvaluationResult {
            report,
            outcomes,
            placeholders,
        })
    })
}

/// ingest, refine, label, compose, generate, evaluation.
pub fn run_pipeline(config: PipelineConfig) -> Result<EvaluationResult, PipelineError> {
    let ctx = Context::new(config)?;
    ingest(&ctx)?;
    refine_stage(&ctx)?;
    label_stage(&ctx)?;
    compose_stage(&ctx)?;
    generate_stage(&ctx)?;
    evaluate_stage(&ctx, None)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub count: usize,
    pub correct: usize,
    /// Percent, two decimals.
    pub accuracy: f64,
}

impl AccuracyCell {
    fn add(&mut self, correct: bool) {
        self.count += 1;
        self.correct += correct as usize;
    }

    fn finish(&mut self) {
        self.accuracy = if self.count == 0 {
            0.0
        } else {
            (10_000.0 * self.correct as f64 / self.count as f64).round() / 100.0
        };
    }
}

/// Predictor accuracy against gold-derived levels for one schema input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub condition: String,
    /// Easy, medium, hard, extra-hard, bucketed by the gold level.
    pub levels: [AccuracyCell; 4],
    pub overall: AccuracyCell,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub predictor: String,
    pub rows: Vec<AblationRow>,
    pub fingerprint: String,
}

impl AblationReport {
    /// Conditions as rows; levels then overall as columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16}{:>8}{:>8}{:>8}{:>12}{:>8}",
            "schema", "easy", "medium", "hard", "extra-hard", "all"
        );
        for row in &self.rows {
            let _ = write!(out, "{:<16}", row.condition);
            for (cell, width) in row.levels.iter().zip([8, 8, 8, 12]) {
                let _ = write!(out, "{:>width$.2}", cell.accuracy);
            }
            let _ = writeln!(out, "{:>8.2}", row.overall.accuracy);
        }
        let _ = writeln!(out, "predictor {}", self.predictor);
        if !self.fingerprint.is_empty() {
            let _ = writeln!(out, "config {}", self.fingerprint);
        }
        out
    }
}

/// Scores the configured predictor against gold levels twice: on refined
/// schema text and on full schema text. Writes `ablation.json` and
/// `ablation.txt`.
pub fn run_ablation(ctx: &Context) -> Result<AblationReport, PipelineError> {
    const S: Stage = Stage::Ablate;
    timed(S, || {
        let examples = ctx.load_examples(S)?;
        let refined = ctx.load_refined(S, examples.len())?;
        let (labels, _) = label_corpus(&examples, &ctx.catalogs)
            .map_err(|e| PipelineError::validation(S, None, e))?;
        let predictor = ctx.predictor(&examples);
        let full: Vec<String> = examples
            .iter()
            .map(|ex| {
                let catalog = ctx
                    .catalogs
                    .get(&ex.db_id)
                    .expect("labelled examples have catalogs");
                serialize_schema(&RefinedSchema::full(catalog), ctx.config.include_fk)
            })
            .collect();
        let mut rows = Vec::new();
        for (condition, texts) in [
            (
                "refined schema",
                refined
                    .iter()
                    .map(|r| r.schema_text.as_str())
                    .collect::<Vec<_>>(),
            ),
            ("full schema", full.iter().map(String::as_str).collect()),
        ] {
            let predicted = par_map(ctx.config.threads, &examples, |index, ex| {
                predictor
                    .predict(&PredictorInput {
                        index,
                        question: &ex.question,
                        schema_text: texts[index],
                    })
                    .map_err(|e| predictor_error(S, index, e))
            })?;
            let mut row = AblationRow {
                condition: condition.to_string(),
                ..AblationRow::default()
            };
            for (label, p) in labels.iter().zip(&predicted) {
                let ok = label.level == *p;
                row.levels[label.level.index()].add(ok);
                row.overall.add(ok);
            }
            row.levels.iter_mut().for_each(AccuracyCell::finish);
            row.overall.finish();
            rows.push(row);
        }
        let report = AblationReport {
            predictor: ctx.config.predictor.name().to_string(),
            rows,
            fingerprint: ctx.config.fingerprint(),
        };
        let json = serde_json::to_string_pretty(&report).expect("ablation serializes") + "\n";
        write_text(S, &ctx.path(ABLATION_JSON), &json)?;
        write_text(S, &ctx.path(ABLATION_TXT), &report.to_table())?;
        Ok(report)
    })
}

/// The saved evaluation table, followed by the ablation table when present.
pub fn report_stage(output_dir: &Path) -> Result<String, PipelineError> {
    const S: Stage = Stage::Report;
    let path = output_dir.join(REPORT_JSON);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact {
                stage: S,
                path,
                producer: Stage::Evaluation.command(),
            })
        }
        Err(e) => return Err(io_error(S, &path, e)),
    };
    let report: EvalReport =
        serde_json::from_str(&text).map_err(|e| PipelineError::validation(S, None, e))?;
    let mut out = report.to_table();
    let ablation = output_dir.join(ABLATION_JSON);
    if let Ok(text) = std::fs::read_to_string(&ablation) {
        let a: AblationReport =
            serde_json::from_str(&text).map_err(|e| PipelineError::validation(S, None, e))?;
        out.push('\n');
        out.push_str(&a.to_table());
    }
    Ok(out)
}
