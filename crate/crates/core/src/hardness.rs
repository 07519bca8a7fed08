//! Four-level SQL hardness.
//!
//! The counters replicate the benchmark evaluator's, including its quirks:
//! every extra FROM table counts toward `c1`, subqueries in FROM are not
//! nested queries, and the aggregate tally also counts negated WHERE
//! predicates and HAVING connectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogSet, Example};
use crate::sql::{parse_sql, Condition, SqlComponents, SqlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HardnessLevel {
    #[serde(rename = "easy")]
    Easy,
    #[serde(rename = "medium")]
    Medium,
    #[serde(rename = "hard")]
    Hard,
    #[serde(rename = "extra-hard", alias = "extra")]
    ExtraHard,
}

impl HardnessLevel {
    pub const ALL: [HardnessLevel; 4] = [
        HardnessLevel::Easy,
        HardnessLevel::Medium,
        HardnessLevel::Hard,
        HardnessLevel::ExtraHard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HardnessLevel::Easy => "easy",
            HardnessLevel::Medium => "medium",
            HardnessLevel::Hard => "hard",
            HardnessLevel::ExtraHard => "extra-hard",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for HardnessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown hardness level `{0}`")]
pub struct UnknownLevel(pub String);

impl FromStr for HardnessLevel {
    type Err = UnknownLevel;

    /// Accepts the canonical names and the benchmark's `extra`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "easy" => Ok(HardnessLevel::Easy),
            "medium" => Ok(HardnessLevel::Medium),
            "hard" => Ok(HardnessLevel::Hard),
            "extra-hard" | "extra" | "extra_hard" | "extrahard" => Ok(HardnessLevel::ExtraHard),
            _ => Err(UnknownLevel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentCounts {
    pub c1: u32,
    pub c2: u32,
    pub others: u32,
}

fn connectors(c: &Option<Condition>) -> (usize, usize) {
    c.as_ref()
        .map_or((0, 0), |c| (c.or_count(), c.connector_count()))
}

/// Counts the top level of `q`. Nested queries add to `c2` only.
pub fn count_components(q: &SqlComponents) -> ComponentCounts {
    let conds = [&q.from.conditions, &q.where_clause, &q.having];
    let preds: Vec<_> = conds
        .iter()
        .filter_map(|c| c.as_ref())
        .flat_map(|c| c.predicates())
        .collect();

    let mut c1 = 0;
    c1 += q.where_clause.is_some() as usize;
    c1 += !q.group_by.is_empty() as usize;
    c1 += !q.order_by.is_empty() as usize;
    c1 += q.limit.is_some() as usize;
    c1 += q.from.tables.len().saturating_sub(1);
    c1 += conds.iter().map(|c| connectors(c).0).sum::<usize>();
    c1 += preds
        .iter()
        .filter(|p| p.op == crate::sql::CmpOp::Like)
        .count();

    let c2 = q.condition_subqueries().len() + q.set_op.is_some() as usize;

    let where_preds = q
        .where_clause
        .as_ref()
        .map_or(Vec::new(), |c| c.predicates());
    let having_preds = q.having.as_ref().map_or(Vec::new(), |c| c.predicates());
    let mut aggs = q.select.items.iter().filter(|i| i.agg.is_some()).count();
    aggs += where_preds.iter().filter(|p| p.negated).count();
    aggs += q.group_by.iter().filter(|c| c.agg.is_some()).count();
    aggs += q
        .order_by
        .iter()
        .flat_map(|o| o.value.col_units())
        .filter(|c| c.agg.is_some())
        .count();
    aggs += having_preds.iter().filter(|p| p.negated).count();
    aggs += connectors(&q.having).1;

    let others = (aggs > 1) as usize
        + (q.select.items.len() > 1) as usize
        + (where_preds.len() > 1) as usize
        + (q.group_by.len() > 1) as usize;

    ComponentCounts {
        c1: c1 as u32,
        c2: c2 as u32,
        others: others as u32,
    }
}

/// First matching rule wins: easy, medium, hard, then extra-hard.
pub fn classify_hardness(c: ComponentCounts) -> HardnessLevel {
    let ComponentCounts { c1, c2, others } = c;
    if c1 <= 1 && others == 0 && c2 == 0 {
        HardnessLevel::Easy
    } else if (others <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && others < 2 && c2 == 0) {
        HardnessLevel::Medium
    } else if (others > 2 && c1 <= 2 && c2 == 0)
        || (2 < c1 && c1 <= 3 && others <= 2 && c2 == 0)
        || (c1 <= 1 && others == 0 && c2 <= 1)
    {
        HardnessLevel::Hard
    } else {
        HardnessLevel::ExtraHard
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelError {
    #[error("example {index}: {source}")]
    Parse { index: usize, source: SqlError },
    #[error("example {index}: no catalog for `{db_id}`")]
    MissingCatalog { index: usize, db_id: String },
}

/// One labelled example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardnessLabel {
    pub index: usize,
    pub db_id: String,
    pub level: HardnessLevel,
    pub counts: ComponentCounts,
}

/// Fraction and count of examples per level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub total: usize,
    /// Indexed by [`HardnessLevel::index`].
    pub counts: [usize; 4],
}

impl Distribution {
    pub fn from_levels(levels: impl IntoIterator<Item = HardnessLevel>) -> Distribution {
        let mut d = Distribution::default();
        for l in levels {
            d.counts[l.index()] += 1;
            d.total += 1;
        }
        d
    }

    /// Percentage of `level`; 0 for an empty corpus.
    pub fn percent(&self, level: HardnessLevel) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.counts[level.index()] as f64 / self.total as f64
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, level) in HardnessLevel::ALL.iter().enumerate() {
            if i > 0 {
                f.write_str("  ")?;
            }
            write!(
                f,
                "{level} {:.2}% ({})",
                self.percent(*level),
                self.counts[i]
            )?;
        }
        write!(f, "  total {}", self.total)
    }
}

/// Labels every example from its gold SQL.
pub fn label_corpus(
    examples: &[Example],
    catalogs: &CatalogSet,
) -> Result<(Vec<HardnessLabel>, Distribution), LabelError> {
    let labels = examples
        .iter()
        .enumerate()
        .map(|(index, ex)| label_example(index, ex, catalogs))
        .collect::<Result<Vec<_>, _>>()?;
    let dist = Distribution::from_levels(labels.iter().map(|l| l.level));
    Ok((labels, dist))
}

pub fn label_example(
    index: usize,
    ex: &Example,
    catalogs: &CatalogSet,
) -> Result<HardnessLabel, LabelError> {
    let catalog = catalogs
        .get(&ex.db_id)
        .ok_or_else(|| LabelError::MissingCatalog {
            index,
            db_id: ex.db_id.clone(),
        })?;
    let q =
        parse_sql(&ex.gold_sql, catalog).map_err(|source| LabelError::Parse { index, source })?;
    let counts = count_components(&q);
    Ok(HardnessLabel {
        index,
        db_id: ex.db_id.clone(),
        level: classify_hardness(counts),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(c1: u32, c2: u32, others: u32) -> ComponentCounts {
        ComponentCounts { c1, c2, others }
    }

    #[test]
    fn rule_boundaries() {
        use HardnessLevel::*;
        assert_eq!(classify_hardness(counts(0, 0, 0)), Easy);
        assert_eq!(classify_hardness(counts(1, 0, 0)), Easy);
        assert_eq!(classify_hardness(counts(1, 0, 2)), Medium);
        assert_eq!(classify_hardness(counts(2, 0, 1)), Medium);
        assert_eq!(classify_hardness(counts(2, 0, 2)), ExtraHard);
        assert_eq!(classify_hardness(counts(1, 0, 3)), Hard);
        assert_eq!(classify_hardness(counts(3, 0, 2)), Hard);
        assert_eq!(classify_hardness(counts(1, 1, 0)), Hard);
        assert_eq!(classify_hardness(counts(2, 1, 2)), ExtraHard);
        assert_eq!(classify_hardness(counts(4, 0, 0)), ExtraHard);
        assert_eq!(classify_hardness(counts(0, 2, 0)), ExtraHard);
    }

    #[test]
    fn level_names() {
        assert_eq!(
            "extra".parse::<HardnessLevel>().unwrap(),
            HardnessLevel::ExtraHard
        );
        assert_eq!(
            serde_json::to_string(&HardnessLevel::ExtraHard).unwrap(),
            "\"extra-hard\""
        );
        assert_eq!(
            serde_json::from_str::<HardnessLevel>("\"extra\"").unwrap(),
            HardnessLevel::ExtraHard
        );
        assert!("trivial".parse::<HardnessLevel>().is_err());
    }

    #[test]
    fn empty_distribution_is_zero() {
        let d = Distribution::from_levels([]);
        assert_eq!(d.total, 0);
        assert_eq!(d.percent(HardnessLevel::Easy), 0.0);
    }
}
