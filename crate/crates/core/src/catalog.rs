//! Spider-format schema catalogs and examples.
//!
//! A catalog mirrors one record of the benchmark's `tables.json`. Column
//! positions are kept exactly as the document lists them, so the foreign-key
//! and primary-key index pairs of the document resolve without translation.
//! Index 0 is the `*` pseudo-column and belongs to no table.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("malformed record {position}: {message}")]
    MalformedRecord { position: usize, message: String },
    #[error("invalid catalog `{db_id}`: {message}")]
    InvalidCatalog { db_id: String, message: String },
    #[error("examples cite unknown databases at indices {indices:?} ({db_ids:?})")]
    UnknownDatabase {
        indices: Vec<usize>,
        db_ids: Vec<String>,
    },
    #[error("example {index} has an empty gold query")]
    EmptyGold { index: usize },
}

/// Position of a column in the catalog's flat column list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnId(pub usize);

impl ColumnId {
    pub const STAR: ColumnId = ColumnId(0);

    pub fn is_star(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ValueType {
    /// Maps a benchmark type tag. Unknown tags become `Others`.
    pub fn from_tag(tag: &str) -> ValueType {
        match tag {
            "text" => ValueType::Text,
            "number" => ValueType::Number,
            "time" => ValueType::Time,
            "boolean" => ValueType::Boolean,
            "others" => ValueType::Others,
            other => {
                log::warn!("unknown column type `{other}`, treating as `others`");
                ValueType::Others
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ValueType::Text => "text",
            ValueType::Number => "number",
            ValueType::Time => "time",
            ValueType::Boolean => "boolean",
            ValueType::Others => "others",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub id: ColumnId,
    pub name: String,
    pub display_name: String,
    pub value_type: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub display_name: String,
    pub columns: Vec<ColumnDef>,
}

/// `(name, display_name, type)` of one column.
pub type ColumnSpec = (String, String, ValueType);
/// `(name, display_name, columns)` of one table.
pub type TableSpec = (String, String, Vec<ColumnSpec>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaCatalog {
    pub db_id: String,
    pub tables: Vec<TableDef>,
    pub foreign_keys: Vec<(ColumnId, ColumnId)>,
    pub primary_keys: Vec<ColumnId>,
    /// Owning table for every flat column index; `None` only for `*`.
    owners: Vec<Option<usize>>,
    star_display: String,
}

impl SchemaCatalog {
    /// Builds a catalog from tables whose column ids are assigned in order,
    /// starting at 1.
    pub fn new(
        db_id: impl Into<String>,
        tables: Vec<TableSpec>,
        foreign_keys: Vec<(ColumnId, ColumnId)>,
        primary_keys: Vec<ColumnId>,
    ) -> Result<SchemaCatalog, IngestError> {
        let db_id = db_id.into();
        let mut next = 1;
        let mut owners = vec![None];
        let mut defs = Vec::with_capacity(tables.len());
        for (t, (name, display_name, cols)) in tables.into_iter().enumerate() {
            let columns = cols
                .into_iter()
                .map(|(name, display_name, value_type)| {
                    let id = ColumnId(next);
                    next += 1;
                    owners.push(Some(t));
                    ColumnDef {
                        id,
                        name,
                        display_name,
                        value_type,
                    }
                })
                .collect();
            defs.push(TableDef {
                name,
                display_name,
                columns,
            });
        }
        let catalog = SchemaCatalog {
            db_id,
            tables: defs,
            foreign_keys,
            primary_keys,
            owners,
            star_display: "*".to_string(),
        };
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<(), IngestError> {
        let invalid = |message: String| IngestError::InvalidCatalog {
            db_id: self.db_id.clone(),
            message,
        };
        let mut names = HashSet::new();
        for table in &self.tables {
            if !names.insert(table.name.to_lowercase()) {
                return Err(invalid(format!("duplicate table `{}`", table.name)));
            }
            let mut cols = HashSet::new();
            for col in &table.columns {
                if !cols.insert(col.name.to_lowercase()) {
                    return Err(invalid(format!(
                        "duplicate column `{}` in table `{}`",
                        col.name, table.name
                    )));
                }
            }
        }
        let n = self.owners.len();
        for &(a, b) in &self.foreign_keys {
            for id in [a, b] {
                if id.0 >= n || id.is_star() {
                    return Err(invalid(format!(
                        "foreign key references column index {} of {} columns",
                        id.0, n
                    )));
                }
            }
        }
        for &id in &self.primary_keys {
            if id.0 >= n || id.is_star() {
                return Err(invalid(format!(
                    "primary key references column index {} of {} columns",
                    id.0, n
                )));
            }
        }
        Ok(())
    }

    /// Number of flat column slots, including `*`.
    pub fn column_count(&self) -> usize {
        self.owners.len()
    }

    pub fn owner(&self, id: ColumnId) -> Option<usize> {
        self.owners.get(id.0).copied().flatten()
    }

    pub fn column(&self, id: ColumnId) -> Option<&ColumnDef> {
        let t = self.owner(id)?;
        self.tables[t].columns.iter().find(|c| c.id == id)
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables
            .iter()
            .position(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Looks up a column by lowercased table and column names.
    pub fn find_column(&self, table: &str, column: &str) -> Option<ColumnId> {
        let t = self.table_index(table)?;
        self.tables[t]
            .columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(column))
            .map(|c| c.id)
    }

    /// `table.column` in lowercase, or `*`.
    pub fn qualified_name(&self, id: ColumnId) -> String {
        match (self.owner(id), self.column(id)) {
            (Some(t), Some(c)) => format!(
                "{}.{}",
                self.tables[t].name.to_lowercase(),
                c.name.to_lowercase()
            ),
            _ => "*".to_string(),
        }
    }

    /// Serializes back to the benchmark's record layout.
    pub fn to_record(&self) -> RawCatalogRecord {
        let mut column_names = vec![(-1, self.star_display.clone())];
        let mut column_names_original = vec![(-1, "*".to_string())];
        let mut column_types = vec!["text".to_string()];
        for (t, table) in self.tables.iter().enumerate() {
            for col in &table.columns {
                column_names.push((t as i64, col.display_name.clone()));
                column_names_original.push((t as i64, col.name.clone()));
                column_types.push(col.value_type.tag().to_string());
            }
        }
        RawCatalogRecord {
            db_id: self.db_id.clone(),
            table_names: self.tables.iter().map(|t| t.display_name.clone()).collect(),
            table_names_original: self.tables.iter().map(|t| t.name.clone()).collect(),
            column_names,
            column_names_original,
            column_types,
            foreign_keys: self.foreign_keys.iter().map(|&(a, b)| (a.0, b.0)).collect(),
            primary_keys: self
                .primary_keys
                .iter()
                .map(|p| PrimaryKeyEntry::Single(p.0))
                .collect(),
        }
    }

    fn from_record(position: usize, raw: RawCatalogRecord) -> Result<SchemaCatalog, IngestError> {
        let malformed = |message: String| IngestError::MalformedRecord { position, message };
        if raw.column_names_original.len() != raw.column_types.len() {
            return Err(malformed(format!(
                "{} columns but {} column types",
                raw.column_names_original.len(),
                raw.column_types.len()
            )));
        }
        if raw.column_names.len() != raw.column_names_original.len() {
            return Err(malformed(
                "column_names and column_names_original differ in length".into(),
            ));
        }
        if raw.table_names.len() != raw.table_names_original.len() {
            return Err(malformed(
                "table_names and table_names_original differ in length".into(),
            ));
        }
        let mut tables: Vec<TableDef> = raw
            .table_names_original
            .iter()
            .zip(&raw.table_names)
            .map(|(name, display)| TableDef {
                name: name.clone(),
                display_name: display.clone(),
                columns: Vec::new(),
            })
            .collect();
        let mut owners = Vec::with_capacity(raw.column_names_original.len());
        let mut star_display = "*".to_string();
        for (i, ((t, name), (_, display))) in raw
            .column_names_original
            .iter()
            .zip(&raw.column_names)
            .enumerate()
        {
            if *t < 0 {
                if i != 0 {
                    return Err(malformed(format!("column {i} has no owning table")));
                }
                star_display = display.clone();
                owners.push(None);
                continue;
            }
            let t = *t as usize;
            let table = tables
                .get_mut(t)
                .ok_or_else(|| malformed(format!("column {i} cites table index {t}")))?;
            table.columns.push(ColumnDef {
                id: ColumnId(i),
                name: name.clone(),
                display_name: display.clone(),
                value_type: ValueType::from_tag(&raw.column_types[i]),
            });
            owners.push(Some(t));
        }
        if owners.first() != Some(&None) {
            return Err(malformed("column 0 must be the `*` pseudo-column".into()));
        }
        let catalog = SchemaCatalog {
            db_id: raw.db_id,
            tables,
            foreign_keys: raw
                .foreign_keys
                .iter()
                .map(|&(a, b)| (ColumnId(a), ColumnId(b)))
                .collect(),
            primary_keys: raw
                .primary_keys
                .iter()
                .flat_map(|p| p.ids())
                .map(ColumnId)
                .collect(),
            owners,
            star_display,
        };
        catalog.validate()?;
        Ok(catalog)
    }
}

impl fmt::Display for SchemaCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} tables)", self.db_id, self.tables.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrimaryKeyEntry {
    Single(usize),
    Composite(Vec<usize>),
}

impl PrimaryKeyEntry {
    fn ids(&self) -> Vec<usize> {
        match self {
            PrimaryKeyEntry::Single(i) => vec![*i],
            PrimaryKeyEntry::Composite(v) => v.clone(),
        }
    }
}

/// One record of `tables.json`, field names as the benchmark ships them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCatalogRecord {
    pub column_names: Vec<(i64, String)>,
    pub column_names_original: Vec<(i64, String)>,
    pub column_types: Vec<String>,
    pub db_id: String,
    pub foreign_keys: Vec<(usize, usize)>,
    pub primary_keys: Vec<PrimaryKeyEntry>,
    pub table_names: Vec<String>,
    pub table_names_original: Vec<String>,
}

/// Parses a `tables.json` document into catalogs, one per record, in order.
pub fn parse_schema_catalogs(document: &str) -> Result<Vec<SchemaCatalog>, IngestError> {
    let values: Vec<serde_json::Value> = serde_json::from_str(document)?;
    values
        .into_iter()
        .enumerate()
        .map(|(position, value)| {
            let raw: RawCatalogRecord =
                serde_json::from_value(value).map_err(|e| IngestError::MalformedRecord {
                    position,
                    message: e.to_string(),
                })?;
            SchemaCatalog::from_record(position, raw)
        })
        .collect()
}

/// Serializes catalogs to a `tables.json` document.
pub fn write_schema_catalogs(catalogs: &[SchemaCatalog]) -> String {
    let records: Vec<RawCatalogRecord> = catalogs.iter().map(SchemaCatalog::to_record).collect();
    serde_json::to_string_pretty(&records).expect("catalog records serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
}

#[derive(Deserialize)]
struct RawExample {
    db_id: String,
    question: String,
    query: String,
}

/// Parses a `train_spider.json` / `dev.json` document. Every `db_id` must name
/// one of `catalogs`. The benchmark's pre-parsed `sql` trees are ignored.
pub fn parse_examples(
    document: &str,
    catalogs: &[SchemaCatalog],
) -> Result<Vec<Example>, IngestError> {
    let values: Vec<serde_json::Value> = serde_json::from_str(document)?;
    let known: HashSet<&str> = catalogs.iter().map(|c| c.db_id.as_str()).collect();
    let mut examples = Vec::with_capacity(values.len());
    let mut unknown_idx = Vec::new();
    let mut unknown_ids = Vec::new();
    for (position, value) in values.into_iter().enumerate() {
        let raw: RawExample =
            serde_json::from_value(value).map_err(|e| IngestError::MalformedRecord {
                position,
                message: e.to_string(),
            })?;
        if !known.contains(raw.db_id.as_str()) {
            unknown_idx.push(position);
            if !unknown_ids.contains(&raw.db_id) {
                unknown_ids.push(raw.db_id.clone());
            }
        }
        if raw.query.trim().is_empty() {
            return Err(IngestError::EmptyGold { index: position });
        }
        examples.push(Example {
            db_id: raw.db_id,
            question: raw.question,
            gold_sql: raw.query,
        });
    }
    if !unknown_idx.is_empty() {
        return Err(IngestError::UnknownDatabase {
            indices: unknown_idx,
            db_ids: unknown_ids,
        });
    }
    Ok(examples)
}

/// Catalog lookup by `db_id`.
#[derive(Debug, Clone, Default)]
pub struct CatalogSet {
    catalogs: Vec<SchemaCatalog>,
    by_id: HashMap<String, usize>,
}

impl CatalogSet {
    pub fn new(catalogs: Vec<SchemaCatalog>) -> CatalogSet {
        let by_id = catalogs
            .iter()
            .enumerate()
            .map(|(i, c)| (c.db_id.clone(), i))
            .collect();
        CatalogSet { catalogs, by_id }
    }

    pub fn get(&self, db_id: &str) -> Option<&SchemaCatalog> {
        self.by_id.get(db_id).map(|&i| &self.catalogs[i])
    }

    pub fn as_slice(&self) -> &[SchemaCatalog] {
        &self.catalogs
    }

    pub fn len(&self) -> usize {
        self.catalogs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalogs.is_empty()
    }
}
