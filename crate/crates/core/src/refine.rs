//! Question-conditioned schema pruning.
//!
//! Every table and column is scored against the question. The top
//! `k_tables` tables survive, each keeping its top `k_cols` columns; ties
//! keep catalog order. Foreign keys survive when both endpoint columns do.
//!
//! ```
//! use sqlhard::catalog::{SchemaCatalog, ValueType};
//! use sqlhard::refine::{refine, serialize_schema, LexicalScorer};
//!
//! let t = |n: &str| (n.to_string(), n.to_string(), ValueType::Text);
//! let catalog = SchemaCatalog::new(
//!     "concert_singer",
//!     vec![("singer".into(), "singer".into(), vec![t("name"), t("age")])],
//!     vec![],
//!     vec![],
//! )
//! .unwrap();
//! // Both columns score 1.0, so catalog order decides.
//! let refined = refine("List the name and age of each singer", &catalog, &LexicalScorer).unwrap();
//! assert_eq!(serialize_schema(&refined, false), "| concert_singer | singer : name , age");
//! ```

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::catalog::{ColumnDef, ColumnId, SchemaCatalog, TableDef};
use crate::http::{CallError, Endpoint, EndpointConfig};
use crate::sql::{ColumnRef, Condition, Operand, SqlComponents, TableUnit, ValUnit};

pub const DEFAULT_K_TABLES: usize = 4;
pub const DEFAULT_K_COLS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScorerError {
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scorer protocol error: {0}")]
    ProtocolError(String),
}

/// One schema item to score.
#[derive(Debug, Clone, Copy)]
pub enum SchemaItem<'a> {
    Table(&'a TableDef),
    Column(&'a TableDef, &'a ColumnDef),
}

/// Relevance of schema items to a question, each in `[0, 1]`.
pub trait RelevanceScorer: Send + Sync {
    fn score_table(&self, question: &str, table: &TableDef) -> Result<f64, ScorerError>;

    fn score_column(
        &self,
        question: &str,
        table: &TableDef,
        column: &ColumnDef,
    ) -> Result<f64, ScorerError>;

    /// Scores `items` positionally.
    fn score_items(
        &self,
        question: &str,
        items: &[SchemaItem<'_>],
    ) -> Result<Vec<f64>, ScorerError> {
        items
            .iter()
            .map(|item| match item {
                SchemaItem::Table(t) => self.score_table(question, t),
                SchemaItem::Column(t, c) => self.score_column(question, t, c),
            })
            .collect()
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn contains_span(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn token_f1(question: &[String], name: &[String]) -> f64 {
    let q: HashSet<&String> = question.iter().collect();
    let n: HashSet<&String> = name.iter().collect();
    if q.is_empty() || n.is_empty() {
        return 0.0;
    }
    let overlap = q.intersection(&n).count();
    2.0 * overlap as f64 / (q.len() + n.len()) as f64
}

fn longest_common_substring(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, &y) in b.iter().enumerate() {
            if x == y {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best
}

/// `max(phrase, f1, 0.8 * lcs)` over the name and display forms, where
/// `phrase` is 1 if the form's tokens occur contiguously in the question,
/// `f1` is token-set F1 and `lcs` is the longest common substring of the
/// token concatenations divided by the form's concatenated length.
pub fn lexical_score(question: &str, item_name: &str, item_display: &str) -> f64 {
    let q = tokenize(question);
    let q_concat: Vec<char> = q.concat().chars().collect();
    let mut best: f64 = 0.0;
    for form in [item_name, item_display] {
        let n = tokenize(form);
        if n.is_empty() {
            continue;
        }
        if contains_span(&q, &n) {
            return 1.0;
        }
        let n_concat: Vec<char> = n.concat().chars().collect();
        let lcs = longest_common_substring(&q_concat, &n_concat) as f64 / n_concat.len() as f64;
        best = best.max(token_f1(&q, &n)).max(0.8 * lcs);
    }
    best
}

/// Model-free scorer built on [`lexical_score`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl RelevanceScorer for LexicalScorer {
    fn score_table(&self, question: &str, table: &TableDef) -> Result<f64, ScorerError> {
        Ok(lexical_score(question, &table.name, &table.display_name))
    }

    fn score_column(
        &self,
        question: &str,
        _table: &TableDef,
        column: &ColumnDef,
    ) -> Result<f64, ScorerError> {
        Ok(lexical_score(question, &column.name, &column.display_name))
    }
}

/// 1.0 for tables and columns referenced by a query, 0.0 otherwise.
#[derive(Debug, Clone, Default)]
pub struct GoldItemScorer {
    tables: BTreeSet<String>,
    columns: BTreeSet<(String, String)>,
}

impl GoldItemScorer {
    pub fn new(gold: &SqlComponents) -> GoldItemScorer {
        let mut s = GoldItemScorer::default();
        s.visit(gold);
        s
    }

    pub fn tables(&self) -> &BTreeSet<String> {
        &self.tables
    }

    /// Lowercased `(table, column)` pairs.
    pub fn columns(&self) -> &BTreeSet<(String, String)> {
        &self.columns
    }

    fn visit(&mut self, q: &SqlComponents) {
        for unit in &q.from.tables {
            match unit {
                TableUnit::Table(t) => {
                    self.tables.insert(t.to_lowercase());
                }
                TableUnit::Subquery(sub) => self.visit(sub),
            }
        }
        for item in &q.select.items {
            self.val(&item.value);
        }
        for cond in [&q.from.conditions, &q.where_clause, &q.having]
            .into_iter()
            .flatten()
        {
            self.condition(cond);
        }
        for c in &q.group_by {
            self.column(&c.column);
        }
        for o in &q.order_by {
            self.val(&o.value);
        }
        if let Some(op) = &q.set_op {
            self.visit(&op.query);
        }
    }

    fn condition(&mut self, c: &Condition) {
        for p in c.predicates() {
            self.val(&p.lhs);
            for o in std::iter::once(&p.rhs).chain(p.rhs2.as_ref()) {
                match o {
                    Operand::Column(v) => self.val(v),
                    Operand::Subquery(sub) => self.visit(sub),
                    _ => {}
                }
            }
        }
    }

    fn val(&mut self, v: &ValUnit) {
        for c in v.col_units() {
            self.column(&c.column);
        }
    }

    fn column(&mut self, c: &ColumnRef) {
        if let ColumnRef::Column { table, column } = c {
            self.columns
                .insert((table.to_lowercase(), column.to_lowercase()));
        }
    }
}

impl RelevanceScorer for GoldItemScorer {
    fn score_table(&self, _question: &str, table: &TableDef) -> Result<f64, ScorerError> {
        Ok(self.tables.contains(&table.name.to_lowercase()) as u8 as f64)
    }

    fn score_column(
        &self,
        _question: &str,
        table: &TableDef,
        column: &ColumnDef,
    ) -> Result<f64, ScorerError> {
        let key = (table.name.to_lowercase(), column.name.to_lowercase());
        Ok(self.columns.contains(&key) as u8 as f64)
    }
}

/// Delegates scoring to `POST /score`, one request per question.
pub struct EndpointScorer {
    endpoint: Endpoint,
}

impl EndpointScorer {
    pub fn new(config: EndpointConfig) -> EndpointScorer {
        EndpointScorer {
            endpoint: Endpoint::new(config),
        }
    }

    fn request(&self, question: &str, items: &[SchemaItem<'_>]) -> Result<Vec<f64>, ScorerError> {
        let items: Vec<_> = items
            .iter()
            .map(|item| match item {
                SchemaItem::Table(t) => json!({"kind": "table", "table": t.name}),
                SchemaItem::Column(t, c) => {
                    json!({"kind": "column", "table": t.name, "column": c.name})
                }
            })
            .collect();
        let expected = items.len();
        let reply = self
            .endpoint
            .post("/score", &json!({"question": question, "items": items}))
            .map_err(|e| match e {
                CallError::Unavailable(m) => ScorerError::ScorerUnavailable(m),
                CallError::Protocol(m) => ScorerError::ProtocolError(m),
            })?;
        let scores = reply
            .get("scores")
            .and_then(|s| s.as_array())
            .ok_or_else(|| ScorerError::ProtocolError("reply lacks a `scores` array".into()))?;
        if scores.len() != expected {
            return Err(ScorerError::ProtocolError(format!(
                "{} scores for {expected} items",
                scores.len()
            )));
        }
        scores
            .iter()
            .map(|v| match v.as_f64() {
                Some(s) if (0.0..=1.0).contains(&s) => Ok(s),
                _ => Err(ScorerError::ProtocolError(format!(
                    "score {v} outside [0, 1]"
                ))),
            })
            .collect()
    }
}

impl RelevanceScorer for EndpointScorer {
    fn score_table(&self, question: &str, table: &TableDef) -> Result<f64, ScorerError> {
        Ok(self.request(question, &[SchemaItem::Table(table)])?[0])
    }

    fn score_column(
        &self,
        question: &str,
        table: &TableDef,
        column: &ColumnDef,
    ) -> Result<f64, ScorerError> {
        Ok(self.request(question, &[SchemaItem::Column(table, column)])?[0])
    }

    fn score_items(
        &self,
        question: &str,
        items: &[SchemaItem<'_>],
    ) -> Result<Vec<f64>, ScorerError> {
        self.request(question, items)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedColumn {
    pub id: ColumnId,
    pub name: String,
    pub display_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTable {
    pub name: String,
    pub display_name: String,
    pub score: f64,
    pub columns: Vec<RankedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedSchema {
    pub db_id: String,
    pub tables: Vec<RankedTable>,
    /// Catalog foreign keys whose two columns were both kept.
    pub foreign_keys: Vec<(ColumnId, ColumnId)>,
}

impl RefinedSchema {
    /// Every table and column in catalog order, each scored 1.0.
    pub fn full(catalog: &SchemaCatalog) -> RefinedSchema {
        let tables = catalog
            .tables
            .iter()
            .map(|t| RankedTable {
                name: t.name.clone(),
                display_name: t.display_name.clone(),
                score: 1.0,
                columns: t.columns.iter().map(|c| ranked_column(c, 1.0)).collect(),
            })
            .collect();
        RefinedSchema {
            db_id: catalog.db_id.clone(),
            tables,
            foreign_keys: catalog.foreign_keys.clone(),
        }
    }

    fn column(&self, id: ColumnId) -> Option<(&RankedTable, &RankedColumn)> {
        self.tables
            .iter()
            .find_map(|t| t.columns.iter().find(|c| c.id == id).map(|c| (t, c)))
    }
}

fn ranked_column(c: &ColumnDef, score: f64) -> RankedColumn {
    RankedColumn {
        id: c.id,
        name: c.name.clone(),
        display_name: c.display_name.clone(),
        score,
    }
}

/// Keeps the default 4 tables of 5 columns.
pub fn refine(
    question: &str,
    catalog: &SchemaCatalog,
    scorer: &dyn RelevanceScorer,
) -> Result<RefinedSchema, ScorerError> {
    refine_with(question, catalog, scorer, DEFAULT_K_TABLES, DEFAULT_K_COLS)
}

/// Indices of `scores` by descending score; equal scores keep input order.
fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

pub fn refine_with(
    question: &str,
    catalog: &SchemaCatalog,
    scorer: &dyn RelevanceScorer,
    k_tables: usize,
    k_cols: usize,
) -> Result<RefinedSchema, ScorerError> {
    let mut items = Vec::new();
    for t in &catalog.tables {
        items.push(SchemaItem::Table(t));
        items.extend(t.columns.iter().map(|c| SchemaItem::Column(t, c)));
    }
    let scores = scorer.score_items(question, &items)?;
    if scores.len() != items.len() {
        return Err(ScorerError::ProtocolError(format!(
            "{} scores for {} items",
            scores.len(),
            items.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(ScorerError::ProtocolError(format!(
            "score {bad} outside [0, 1]"
        )));
    }

    let mut table_scores = Vec::with_capacity(catalog.tables.len());
    let mut column_scores = Vec::with_capacity(catalog.tables.len());
    let mut pos = 0;
    for t in &catalog.tables {
        table_scores.push(scores[pos]);
        column_scores.push(&scores[pos + 1..pos + 1 + t.columns.len()]);
        pos += 1 + t.columns.len();
    }

    let tables: Vec<RankedTable> = rank(&table_scores)
        .into_iter()
        .take(k_tables)
        .map(|ti| {
            let t = &catalog.tables[ti];
            let columns = rank(column_scores[ti])
                .into_iter()
                .take(k_cols)
                .map(|ci| ranked_column(&t.columns[ci], column_scores[ti][ci]))
                .collect();
            RankedTable {
                name: t.name.clone(),
                display_name: t.display_name.clone(),
                score: table_scores[ti],
                columns,
            }
        })
        .collect();
    let kept: HashSet<ColumnId> = tables
        .iter()
        .flat_map(|t| t.columns.iter().map(|c| c.id))
        .collect();
    let foreign_keys = catalog
        .foreign_keys
        .iter()
        .copied()
        .filter(|(a, b)| kept.contains(a) && kept.contains(b))
        .collect();
    Ok(RefinedSchema {
        db_id: catalog.db_id.clone(),
        tables,
        foreign_keys,
    })
}

/// Backslash-escapes the serialization's delimiters.
fn escape(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if matches!(ch, '\\' | '|' | ',' | ':' | '=' | '.') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

/// `| <db_id> | <table> : <col> , <col> | ...` with display names in ranked
/// order, then one `| fk : <t>.<c> = <t>.<c>` segment per retained foreign
/// key when `include_fk` is set.
pub fn serialize_schema(refined: &RefinedSchema, include_fk: bool) -> String {
    let mut out = format!("| {}", escape(&refined.db_id));
    for t in &refined.tables {
        out.push_str(" | ");
        out.push_str(&escape(&t.display_name));
        out.push_str(" :");
        for (i, c) in t.columns.iter().enumerate() {
            out.push_str(if i == 0 { " " } else { " , " });
            out.push_str(&escape(&c.display_name));
        }
    }
    if include_fk {
        for &(a, b) in &refined.foreign_keys {
            if let (Some((ta, ca)), Some((tb, cb))) = (refined.column(a), refined.column(b)) {
                out.push_str(&format!(
                    " | fk : {}.{} = {}.{}",
                    escape(&ta.display_name),
                    escape(&ca.display_name),
                    escape(&tb.display_name),
                    escape(&cb.display_name)
                ));
            }
        }
    }
    out
}
