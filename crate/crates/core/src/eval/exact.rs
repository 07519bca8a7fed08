//! Exact-set-match: clause-wise structural equality with values masked.
//!
//! Both queries are brought to a canonical form and compared with `==`:
//! multi-valued clauses are sorted, conditions become a sorted set of sorted
//! conjunctions, and the limit keeps only its presence. ORDER BY stays in
//! source order.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::{ColumnId, SchemaCatalog};
use crate::sql::{
    mask_values, parse_sql, ColumnRef, Condition, Operand, SqlComponents, SqlError, TableUnit,
};

/// Switches between the reference evaluator's defaults and stricter readings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Compare DISTINCT flags. The reference evaluator ignores them.
    pub keep_distinct: bool,
    /// Compare JOIN ... ON conditions. The reference evaluator ignores them.
    pub compare_join_conditions: bool,
}

/// Exact-set-match without foreign-key canonicalization.
pub fn exact_set_match(gold: &SqlComponents, pred: &SqlComponents) -> bool {
    canonical(gold, &EmConfig::default(), None) == canonical(pred, &EmConfig::default(), None)
}

/// Maps each foreign-key-linked column to the lowest-indexed column of its
/// key group, as the reference evaluator does.
#[derive(Debug, Clone, Default)]
pub struct ForeignKeyMap {
    map: HashMap<ColumnRef, ColumnRef>,
}

impl ForeignKeyMap {
    pub fn new(catalog: &SchemaCatalog) -> ForeignKeyMap {
        // Groups are not merged when a pair bridges two existing groups; the
        // pair joins the first group that contains either endpoint.
        let mut groups: Vec<BTreeSet<ColumnId>> = Vec::new();
        for &(a, b) in &catalog.foreign_keys {
            let g = match groups.iter().position(|g| g.contains(&a) || g.contains(&b)) {
                Some(g) => g,
                None => {
                    groups.push(BTreeSet::new());
                    groups.len() - 1
                }
            };
            groups[g].insert(a);
            groups[g].insert(b);
        }
        let column_ref = |id: ColumnId| -> Option<ColumnRef> {
            let t = catalog.owner(id)?;
            let c = catalog.column(id)?;
            Some(ColumnRef::column(&catalog.tables[t].name, &c.name))
        };
        let mut map = HashMap::new();
        for g in groups {
            let Some(rep) = g.iter().next().and_then(|&id| column_ref(id)) else {
                continue;
            };
            for &id in &g {
                if let Some(col) = column_ref(id) {
                    // later groups overwrite earlier ones, as in the reference
                    map.insert(col, rep.clone());
                }
            }
        }
        ForeignKeyMap { map }
    }

    fn get(&self, col: &ColumnRef) -> Option<&ColumnRef> {
        self.map.get(col)
    }
}

/// Exact-set-match bound to one catalog.
#[derive(Debug, Clone)]
pub struct ExactMatcher<'c> {
    catalog: &'c SchemaCatalog,
    fk: ForeignKeyMap,
    config: EmConfig,
}

impl<'c> ExactMatcher<'c> {
    pub fn new(catalog: &'c SchemaCatalog, config: EmConfig) -> ExactMatcher<'c> {
        ExactMatcher {
            catalog,
            fk: ForeignKeyMap::new(catalog),
            config,
        }
    }

    pub fn matches(&self, gold: &SqlComponents, pred: &SqlComponents) -> bool {
        canonical(gold, &self.config, Some(&self.fk))
            == canonical(pred, &self.config, Some(&self.fk))
    }

    /// Parses both texts. A gold parse failure is an error; a predicted parse
    /// failure is a non-match.
    pub fn matches_sql(&self, gold_sql: &str, pred_sql: &str) -> Result<bool, SqlError> {
        let gold = parse_sql(gold_sql, self.catalog)?;
        Ok(match parse_sql(pred_sql, self.catalog) {
            Ok(pred) => self.matches(&gold, &pred),
            Err(_) => false,
        })
    }
}

/// Canonical form used for comparison.
pub fn canonical(
    q: &SqlComponents,
    config: &EmConfig,
    fk: Option<&ForeignKeyMap>,
) -> SqlComponents {
    let mut q = mask_values(q);
    if let Some(fk) = fk {
        apply_fk(&mut q, fk);
    }
    normalize(&mut q, config);
    q
}

/// Rewrites columns of the query's own FROM tables, in every clause of the
/// query and its set-operation arms. Subqueries are left alone.
fn apply_fk(q: &mut SqlComponents, fk: &ForeignKeyMap) {
    let tables: Vec<String> = q
        .from
        .tables
        .iter()
        .filter_map(|t| match t {
            TableUnit::Table(name) => Some(name.clone()),
            TableUnit::Subquery(_) => None,
        })
        .collect();
    let rewrite = |c: &mut crate::sql::ColUnit| {
        if let ColumnRef::Column { table, .. } = &c.column {
            if tables.contains(table) {
                if let Some(rep) = fk.get(&c.column) {
                    c.column = rep.clone();
                }
            }
        }
    };
    for item in &mut q.select.items {
        item.value.col_units_mut().for_each(rewrite);
    }
    for cond in [&mut q.from.conditions, &mut q.where_clause, &mut q.having]
        .into_iter()
        .flatten()
    {
        for p in cond.predicates_mut() {
            p.lhs.col_units_mut().for_each(rewrite);
            for o in std::iter::once(&mut p.rhs).chain(p.rhs2.as_mut()) {
                if let Operand::Column(v) = o {
                    v.col_units_mut().for_each(rewrite);
                }
            }
        }
    }
    q.group_by.iter_mut().for_each(rewrite);
    for o in &mut q.order_by {
        o.value.col_units_mut().for_each(rewrite);
    }
    if let Some(op) = &mut q.set_op {
        apply_fk(&mut op.query, fk);
    }
}

fn normalize(q: &mut SqlComponents, config: &EmConfig) {
    if !config.keep_distinct {
        q.select.distinct = false;
        for item in &mut q.select.items {
            item.value.col_units_mut().for_each(|c| c.distinct = false);
        }
        for c in &mut q.group_by {
            c.distinct = false;
        }
        for o in &mut q.order_by {
            o.value.col_units_mut().for_each(|c| c.distinct = false);
        }
    }
    q.select.items.sort();

    for t in &mut q.from.tables {
        if let TableUnit::Subquery(sub) = t {
            normalize(sub, config);
        }
    }
    q.from.tables.sort();
    q.from.conditions = if config.compare_join_conditions {
        q.from
            .conditions
            .take()
            .map(|c| normalize_condition(c, config))
    } else {
        None
    };
    q.where_clause = q
        .where_clause
        .take()
        .map(|c| normalize_condition(c, config));
    q.having = q.having.take().map(|c| normalize_condition(c, config));

    q.group_by.sort();
    q.group_by.dedup();
    q.limit = q.limit.map(|_| 0);
    if let Some(op) = &mut q.set_op {
        normalize(&mut op.query, config);
    }
}

/// Sorted, deduplicated disjunction of sorted, deduplicated conjunctions.
fn normalize_condition(c: Condition, config: &EmConfig) -> Condition {
    let mut disjuncts: Vec<Vec<_>> = c
        .dnf()
        .into_iter()
        .map(|conj| {
            let mut conj: Vec<_> = conj
                .into_iter()
                .cloned()
                .map(|mut p| {
                    if !config.keep_distinct {
                        p.lhs.col_units_mut().for_each(|u| u.distinct = false);
                    }
                    for o in std::iter::once(&mut p.rhs).chain(p.rhs2.as_mut()) {
                        if let Operand::Subquery(sub) = o {
                            normalize(sub, config);
                        }
                    }
                    p
                })
                .collect();
            conj.sort();
            conj.dedup();
            conj
        })
        .collect();
    disjuncts.sort();
    disjuncts.dedup();
    Condition::Or(
        disjuncts
            .into_iter()
            .map(|conj| Condition::And(conj.into_iter().map(Condition::Pred).collect()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_schema_catalogs;

    const CONCERT: &str = r#"[{
        "column_names": [[-1,"*"],[0,"stadium id"],[0,"name"],[0,"capacity"],[1,"singer id"],[1,"name"],[1,"age"],[1,"country"],
                         [2,"concert id"],[2,"stadium id"],[3,"concert id"],[3,"singer id"]],
        "column_names_original": [[-1,"*"],[0,"Stadium_ID"],[0,"Name"],[0,"Capacity"],[1,"Singer_ID"],[1,"Name"],[1,"Age"],[1,"Country"],
                         [2,"concert_ID"],[2,"Stadium_ID"],[3,"concert_ID"],[3,"Singer_ID"]],
        "column_types": ["text","number","text","number","number","text","number","text","number","text","number","text"],
        "db_id": "concert_singer",
        "foreign_keys": [[9,1],[11,4],[10,8]],
        "primary_keys": [1,4,8,10],
        "table_names": ["stadium","singer","concert","singer in concert"],
        "table_names_original": ["stadium","singer","concert","singer_in_concert"]
    }]"#;

    fn em(gold: &str, pred: &str) -> bool {
        let cat = &parse_schema_catalogs(CONCERT).unwrap()[0];
        ExactMatcher::new(cat, EmConfig::default())
            .matches_sql(gold, pred)
            .unwrap()
    }

    #[test]
    fn values_are_masked() {
        assert!(em(
            "SELECT name FROM singer WHERE age > 56",
            "SELECT name FROM singer WHERE age > 60"
        ));
    }

    #[test]
    fn select_list_is_a_set() {
        assert!(em(
            "SELECT name, age FROM singer",
            "SELECT age, name FROM singer"
        ));
    }

    #[test]
    fn order_direction_matters() {
        assert!(!em(
            "SELECT name FROM singer ORDER BY age DESC",
            "SELECT name FROM singer ORDER BY age ASC"
        ));
    }

    #[test]
    fn limit_presence_only() {
        assert!(em(
            "SELECT name FROM singer ORDER BY age LIMIT 1",
            "SELECT name FROM singer ORDER BY age LIMIT 3"
        ));
        assert!(!em(
            "SELECT name FROM singer ORDER BY age LIMIT 1",
            "SELECT name FROM singer ORDER BY age"
        ));
    }

    #[test]
    fn conjunction_order_is_ignored() {
        assert!(em(
            "SELECT name FROM singer WHERE age > 1 AND country = 'x'",
            "SELECT name FROM singer WHERE country = 'y' AND age > 2"
        ));
        assert!(!em(
            "SELECT name FROM singer WHERE age > 1 AND country = 'x'",
            "SELECT name FROM singer WHERE age > 1 OR country = 'x'"
        ));
    }

    #[test]
    fn foreign_keys_are_canonical() {
        assert!(em(
            "SELECT T1.singer_id FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id",
            "SELECT T2.singer_id FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id"
        ));
    }

    #[test]
    fn distinct_follows_config() {
        let cat = &parse_schema_catalogs(CONCERT).unwrap()[0];
        let (g, p) = (
            "SELECT DISTINCT country FROM singer",
            "SELECT country FROM singer",
        );
        assert!(ExactMatcher::new(cat, EmConfig::default())
            .matches_sql(g, p)
            .unwrap());
        let strict = EmConfig {
            keep_distinct: true,
            ..EmConfig::default()
        };
        assert!(!ExactMatcher::new(cat, strict).matches_sql(g, p).unwrap());
    }

    #[test]
    fn join_conditions_follow_config() {
        let cat = &parse_schema_catalogs(CONCERT).unwrap()[0];
        let g = "SELECT T1.name FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id";
        let p = "SELECT T1.name FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.concert_id";
        assert!(ExactMatcher::new(cat, EmConfig::default())
            .matches_sql(g, p)
            .unwrap());
        let strict = EmConfig {
            compare_join_conditions: true,
            ..EmConfig::default()
        };
        assert!(!ExactMatcher::new(cat, strict).matches_sql(g, p).unwrap());
    }

    #[test]
    fn unparseable_prediction_is_no_match() {
        assert!(!em("SELECT name FROM singer", "SELEC name FROM singer"));
    }

    #[test]
    fn nested_subquery_values_masked() {
        assert!(em(
            "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer WHERE country = 'a')",
            "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer WHERE country = 'b')"
        ));
    }
}
