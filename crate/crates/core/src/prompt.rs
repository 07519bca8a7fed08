//! Hardness prediction and generator-input composition.
//!
//! ```
//! use sqlhard::hardness::HardnessLevel;
//! use sqlhard::prompt::{compose_input, parse_leading_token};
//!
//! let p = compose_input(HardnessLevel::Easy, "How many singers do we have?", "| concert_singer | singer : name");
//! assert_eq!(p.full_text, "[/easy] How many singers do we have? | concert_singer | singer : name");
//! assert_eq!(parse_leading_token(&p.full_text), Some(HardnessLevel::Easy));
//! ```

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::catalog::{CatalogSet, Example};
use crate::hardness::{label_example, HardnessLevel, LabelError};
use crate::http::{CallError, Endpoint, EndpointConfig};
use crate::refine::tokenize;

pub fn hardness_token(level: HardnessLevel) -> &'static str {
    match level {
        HardnessLevel::Easy => "[/easy]",
        HardnessLevel::Medium => "[/medium]",
        HardnessLevel::Hard => "[/hard]",
        HardnessLevel::ExtraHard => "[/extra-hard]",
    }
}

/// Level of the token `text` starts with. The token must be followed by a
/// space or the end of the text.
pub fn parse_leading_token(text: &str) -> Option<HardnessLevel> {
    HardnessLevel::ALL.into_iter().find(|&l| {
        text.strip_prefix(hardness_token(l))
            .is_some_and(|rest| rest.is_empty() || rest.starts_with(' '))
    })
}

/// Order of the question and schema after the leading token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrder {
    #[default]
    QuestionSchema,
    SchemaQuestion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedPrompt {
    pub hardness_token: String,
    pub question: String,
    pub schema_text: String,
    pub full_text: String,
}

pub fn compose_input(level: HardnessLevel, question: &str, schema_text: &str) -> ComposedPrompt {
    compose_ordered(level, question, schema_text, PromptOrder::QuestionSchema)
}

/// Joins the non-empty parts with single spaces.
pub fn compose_ordered(
    level: HardnessLevel,
    question: &str,
    schema_text: &str,
    order: PromptOrder,
) -> ComposedPrompt {
    let token = hardness_token(level);
    let parts = match order {
        PromptOrder::QuestionSchema => [token, question, schema_text],
        PromptOrder::SchemaQuestion => [token, schema_text, question],
    };
    let full_text = parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ");
    ComposedPrompt {
        hardness_token: token.to_string(),
        question: question.to_string(),
        schema_text: schema_text.to_string(),
        full_text,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictorError {
    #[error("predictor unavailable: {0}")]
    PredictorUnavailable(String),
    #[error("predictor protocol error: {0}")]
    ProtocolError(String),
    #[error(transparent)]
    Gold(#[from] LabelError),
    #[error("no example {0}")]
    UnknownExample(usize),
}

/// What a predictor sees for one example.
#[derive(Debug, Clone, Copy)]
pub struct PredictorInput<'a> {
    pub index: usize,
    pub question: &'a str,
    pub schema_text: &'a str,
}

pub trait HardnessPredictor: Send + Sync {
    fn predict(&self, input: &PredictorInput<'_>) -> Result<HardnessLevel, PredictorError>;
}

/// Labels each example from its gold SQL.
pub struct OraclePredictor {
    levels: Vec<Result<HardnessLevel, LabelError>>,
}

impl OraclePredictor {
    pub fn new(examples: &[Example], catalogs: &CatalogSet) -> OraclePredictor {
        let levels = examples
            .iter()
            .enumerate()
            .map(|(i, ex)| label_example(i, ex, catalogs).map(|l| l.level))
            .collect();
        OraclePredictor { levels }
    }
}

impl HardnessPredictor for OraclePredictor {
    fn predict(&self, input: &PredictorInput<'_>) -> Result<HardnessLevel, PredictorError> {
        match self.levels.get(input.index) {
            Some(Ok(level)) => Ok(*level),
            Some(Err(e)) => Err(e.clone().into()),
            None => Err(PredictorError::UnknownExample(input.index)),
        }
    }
}

/// One row of the heuristic rule table: fires when every named feature is
/// present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicRule {
    pub all: Vec<String>,
    pub level: HardnessLevel,
}

/// Question-feature rules. Features are lexicon entries (phrases matched as
/// contiguous token spans) plus `multi_entity`, present when at least
/// `multi_entity_min` schema tables are named in the question. Rules are
/// tried in order; `default` applies when none fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicRules {
    pub lexicon: BTreeMap<String, Vec<String>>,
    pub multi_entity_min: usize,
    pub rules: Vec<HeuristicRule>,
    pub default: HardnessLevel,
}

impl Default for HeuristicRules {
    fn default() -> Self {
        let words = |s: &str| {
            s.split(',')
                .map(|w| w.trim().to_string())
                .collect::<Vec<_>>()
        };
        let lexicon = BTreeMap::from([
            (
                "superlative".to_string(),
                words("most, least, highest, lowest, largest, smallest, maximum, minimum, oldest, youngest, longest, shortest, best, worst, top, fewest, latest, earliest, biggest"),
            ),
            (
                "comparative".to_string(),
                words("more than, less than, greater than, fewer than, larger than, smaller than, older than, younger than, higher than, lower than, above, below, at least, at most, before, after, between"),
            ),
            ("counting".to_string(), words("how many, number of, count, total")),
            ("grouping".to_string(), words("each, per, every, for each, by each")),
            ("conjunction".to_string(), words("and, or, both, either")),
            (
                "negation".to_string(),
                words("not, never, no, without, except, neither, nor, don't, doesn't, didn't, haven't"),
            ),
            ("average".to_string(), words("average, mean, sum")),
            ("listing".to_string(), words("list, show, what are, what is, give, return, find")),
        ]);
        let rule = |all: &[&str], level| HeuristicRule {
            all: all.iter().map(|s| s.to_string()).collect(),
            level,
        };
        use HardnessLevel::*;
        HeuristicRules {
            lexicon,
            multi_entity_min: 2,
            rules: vec![
                rule(&["negation", "multi_entity"], ExtraHard),
                rule(&["superlative", "conjunction", "multi_entity"], ExtraHard),
                rule(&["negation"], Hard),
                rule(&["comparative", "average"], Hard),
                rule(&["superlative", "multi_entity"], Hard),
                rule(&["conjunction", "multi_entity"], Hard),
                rule(&["grouping", "comparative"], Hard),
                rule(&["multi_entity"], Medium),
                rule(&["grouping"], Medium),
                rule(&["superlative"], Medium),
                rule(&["comparative"], Medium),
                rule(&["conjunction"], Medium),
                rule(&["counting"], Easy),
                rule(&["average"], Easy),
                rule(&["listing"], Easy),
            ],
            default: Medium,
        }
    }
}

/// Table display names of a serialized schema, skipping the database and
/// foreign-key segments.
fn schema_tables(schema_text: &str) -> Vec<Vec<String>> {
    schema_text
        .split(" | ")
        .skip(1)
        .filter_map(|seg| seg.split_once(" :").map(|(t, _)| t))
        .filter(|t| *t != "fk")
        .map(tokenize)
        .filter(|t| !t.is_empty())
        .collect()
}

fn mentions(question: &[String], name: &[String]) -> bool {
    let plural: Vec<String> = name
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if i + 1 == name.len() {
                format!("{w}s")
            } else {
                w.clone()
            }
        })
        .collect();
    [name, plural.as_slice()]
        .iter()
        .any(|n| question.windows(n.len()).any(|w| w == *n))
}

/// Model-free predictor driven by [`HeuristicRules`].
#[derive(Debug, Clone)]
pub struct HeuristicPredictor {
    rules: HeuristicRules,
    phrases: HashMap<String, Vec<Vec<String>>>,
}

impl Default for HeuristicPredictor {
    fn default() -> Self {
        HeuristicPredictor::new(HeuristicRules::default())
    }
}

impl HeuristicPredictor {
    pub fn new(rules: HeuristicRules) -> HeuristicPredictor {
        let phrases = rules
            .lexicon
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|p| tokenize(p)).collect()))
            .collect();
        HeuristicPredictor { rules, phrases }
    }

    /// Names of the features present.
    pub fn features(&self, question: &str, schema_text: &str) -> Vec<String> {
        let q = tokenize(question);
        let mut found: Vec<String> = self
            .phrases
            .iter()
            .filter(|(_, ps)| {
                ps.iter()
                    .any(|p| !p.is_empty() && q.windows(p.len()).any(|w| w == p.as_slice()))
            })
            .map(|(k, _)| k.clone())
            .collect();
        let named = schema_tables(schema_text)
            .iter()
            .filter(|t| mentions(&q, t))
            .count();
        if named >= self.rules.multi_entity_min {
            found.push("multi_entity".to_string());
        }
        found.sort();
        found
    }

    pub fn classify(&self, question: &str, schema_text: &str) -> HardnessLevel {
        let features = self.features(question, schema_text);
        self.rules
            .rules
            .iter()
            .find(|r| r.all.iter().all(|f| features.contains(f)))
            .map_or(self.rules.default, |r| r.level)
    }
}

impl HardnessPredictor for HeuristicPredictor {
    fn predict(&self, input: &PredictorInput<'_>) -> Result<HardnessLevel, PredictorError> {
        Ok(self.classify(input.question, input.schema_text))
    }
}

/// Delegates to `POST /classify`.
pub struct EndpointPredictor {
    endpoint: Endpoint,
}

impl EndpointPredictor {
    pub fn new(config: EndpointConfig) -> EndpointPredictor {
        EndpointPredictor {
            endpoint: Endpoint::new(config),
        }
    }
}

impl HardnessPredictor for EndpointPredictor {
    fn predict(&self, input: &PredictorInput<'_>) -> Result<HardnessLevel, PredictorError> {
        let text = [input.question, input.schema_text]
            .iter()
            .filter(|p| !p.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" ");
        let reply = self
            .endpoint
            .post("/classify", &json!({ "text": text }))
            .map_err(|e| match e {
                CallError::Unavailable(m) => PredictorError::PredictorUnavailable(m),
                CallError::Protocol(m) => PredictorError::ProtocolError(m),
            })?;
        let label = reply
            .get("label")
            .and_then(|l| l.as_str())
            .ok_or_else(|| PredictorError::ProtocolError("reply lacks a string `label`".into()))?;
        label
            .parse()
            .map_err(|_| PredictorError::ProtocolError(format!("unknown label `{label}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use HardnessLevel::*;

    #[test]
    fn tokens() {
        assert_eq!(hardness_token(Easy), "[/easy]");
        assert_eq!(hardness_token(Medium), "[/medium]");
        assert_eq!(hardness_token(ExtraHard), "[/extra-hard]");
    }

    #[test]
    fn empty_schema_leaves_no_trailing_space() {
        assert_eq!(compose_input(Hard, "q?", "").full_text, "[/hard] q?");
    }

    #[test]
    fn reordering_keeps_token_first() {
        let p = compose_ordered(Medium, "q?", "| db | t : c", PromptOrder::SchemaQuestion);
        assert_eq!(p.full_text, "[/medium] | db | t : c q?");
        assert_eq!(parse_leading_token(&p.full_text), Some(Medium));
    }

    #[test]
    fn leading_token_needs_a_boundary() {
        assert_eq!(parse_leading_token("[/hard]"), Some(Hard));
        assert_eq!(parse_leading_token("[/hardest] q"), None);
        assert_eq!(parse_leading_token("q [/hard]"), None);
    }

    #[test]
    fn heuristic_rule_trace() {
        let h = HeuristicPredictor::default();
        let schema = "| concert_singer | stadium : name | singer : name , age | concert : name";
        assert_eq!(h.classify("How many singers do we have?", schema), Easy);
        assert_eq!(h.classify("Tell me something.", schema), Medium);
        let two = "Which singers performed in a concert or in a stadium?";
        assert_eq!(h.features(two, schema), ["conjunction", "multi_entity"]);
        assert_eq!(h.classify(two, schema), Hard);
        assert_eq!(
            h.classify("Which stadiums had no concert?", schema),
            ExtraHard
        );
    }

    #[test]
    fn rules_round_trip_through_toml() {
        let rules = HeuristicRules::default();
        let text = toml::to_string(&rules).unwrap();
        assert_eq!(toml::from_str::<HeuristicRules>(&text).unwrap(), rules);
    }
}
