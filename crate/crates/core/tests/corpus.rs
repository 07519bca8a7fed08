//! Checks against the installed benchmark files and frozen reference labels.

mod support;

use sqlhard::catalog::{parse_schema_catalogs, ColumnId, SchemaCatalog};
use sqlhard::hardness::{
    classify_hardness, count_components, label_corpus, ComponentCounts, HardnessLevel,
};
use sqlhard::sql::{
    mask_values, parse_sql, Agg, CmpOp, ColumnRef, Condition, Literal, LiteralKind, Operand,
    SqlError, TableUnit,
};
use support::{fixture, read_jsonl, split_or_skip};

fn catalog(db_id: &str) -> Option<SchemaCatalog> {
    let text = std::fs::read_to_string(support::spider_dir().join("tables.json")).ok()?;
    parse_schema_catalogs(&text)
        .unwrap()
        .into_iter()
        .find(|c| c.db_id == db_id)
}

macro_rules! catalog_or_skip {
    ($db:expr) => {
        match catalog($db) {
            Some(c) => c,
            None => {
                eprintln!("skipping: tables.json unavailable");
                return;
            }
        }
    };
}

fn counts(c1: u32, c2: u32, others: u32) -> ComponentCounts {
    ComponentCounts { c1, c2, others }
}

#[test]
fn concert_singer_catalog() {
    let c = catalog_or_skip!("concert_singer");
    let names: Vec<_> = c.tables.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["stadium", "singer", "concert", "singer_in_concert"]);
    assert_eq!(c.column_count(), 22);
    let fks: Vec<_> = c
        .foreign_keys
        .iter()
        .map(|&(a, b)| (c.qualified_name(a), c.qualified_name(b)))
        .collect();
    assert_eq!(
        fks,
        [
            (
                "concert.stadium_id".to_string(),
                "stadium.stadium_id".to_string()
            ),
            (
                "singer_in_concert.singer_id".into(),
                "singer.singer_id".into()
            ),
            (
                "singer_in_concert.concert_id".into(),
                "concert.concert_id".into()
            ),
        ]
    );
}

#[test]
fn dev_has_1034_examples() {
    let Some((_, dev)) = split_or_skip("dev.json") else {
        return;
    };
    assert_eq!(dev.len(), 1034);
}

#[test]
fn count_star_with_one_predicate() {
    let c = catalog_or_skip!("department_management");
    let q = parse_sql("SELECT count(*) FROM head WHERE age > 56", &c).unwrap();
    assert_eq!(q.select.items.len(), 1);
    assert_eq!(q.select.items[0].agg, Agg::Count);
    assert_eq!(q.select.items[0].value.left.column, ColumnRef::Star);
    assert_eq!(q.from.tables, [TableUnit::Table("head".into())]);
    let Some(Condition::Pred(p)) = &q.where_clause else {
        panic!("{q:?}")
    };
    assert_eq!(p.op, CmpOp::Gt);
    assert!(!p.negated);
    assert_eq!(p.lhs.left.column, ColumnRef::column("head", "age"));
    assert_eq!(
        p.rhs,
        Operand::Literal(Literal {
            kind: LiteralKind::Number,
            text: "56".into()
        })
    );
    assert_eq!(count_components(&q), counts(1, 0, 0));
    assert_eq!(classify_hardness(count_components(&q)), HardnessLevel::Easy);
}

#[test]
fn aliases_resolve_to_base_tables() {
    let c = catalog_or_skip!("concert_singer");
    let q = parse_sql(
        "SELECT T1.name FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id",
        &c,
    )
    .unwrap();
    assert_eq!(
        q.from.tables,
        [
            TableUnit::Table("singer".into()),
            TableUnit::Table("singer_in_concert".into())
        ]
    );
    assert_eq!(
        q.select.items[0].value.left.column,
        ColumnRef::column("singer", "name")
    );
    let Some(Condition::Pred(on)) = &q.from.conditions else {
        panic!()
    };
    assert_eq!(on.lhs.left.column, ColumnRef::column("singer", "singer_id"));
}

#[test]
fn unresolvable_and_unsupported() {
    let c = catalog_or_skip!("concert_singer");
    assert!(matches!(
        parse_sql("SELECT nope FROM singer", &c),
        Err(SqlError::Resolution { .. })
    ));
    let err = parse_sql("SELECT rank() OVER (ORDER BY age) FROM singer", &c).unwrap_err();
    assert!(
        matches!(&err, SqlError::UnsupportedSyntax { token, .. } if token == "rank"),
        "{err}"
    );
}

#[test]
fn reference_counter_examples() {
    let c = catalog_or_skip!("concert_singer");
    let level = |sql: &str| {
        let q = parse_sql(sql, &c).unwrap();
        (
            count_components(&q),
            classify_hardness(count_components(&q)),
        )
    };
    assert_eq!(
        level("SELECT name FROM singer"),
        (counts(0, 0, 0), HardnessLevel::Easy)
    );
    assert_eq!(
        level("SELECT name, country, age FROM singer ORDER BY age DESC"),
        (counts(1, 0, 1), HardnessLevel::Medium)
    );
    assert_eq!(
        level("SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer)"),
        (counts(1, 1, 0), HardnessLevel::Hard)
    );
    let (n, l) = level(
        "SELECT name FROM singer WHERE age > 20 AND country = 'France' ORDER BY age \
         UNION SELECT name FROM singer WHERE is_male = 'T'",
    );
    assert_eq!((n.c1, n.c2), (2, 1));
    assert_eq!(l, HardnessLevel::ExtraHard);
    assert_eq!(classify_hardness(counts(2, 1, 2)), HardnessLevel::ExtraHard);
}

#[test]
fn nested_literals_are_masked() {
    let c = catalog_or_skip!("concert_singer");
    let q = parse_sql(
        "SELECT name FROM singer WHERE age > 30 AND singer_id IN \
         (SELECT singer_id FROM singer_in_concert WHERE concert_id = 2)",
        &c,
    )
    .unwrap();
    let by_hand = parse_sql(
        "SELECT name FROM singer WHERE age > 1 AND singer_id IN \
         (SELECT singer_id FROM singer_in_concert WHERE concert_id = 'x')",
        &c,
    )
    .unwrap();
    let m = mask_values(&q);
    assert_eq!(m, mask_values(&by_hand));
    assert_ne!(m, q);
    let Some(Condition::And(parts)) = &m.where_clause else {
        panic!()
    };
    let Condition::Pred(inner) = &parts[1] else {
        panic!()
    };
    let Operand::Subquery(sub) = &inner.rhs else {
        panic!()
    };
    let Some(Condition::Pred(p)) = &sub.where_clause else {
        panic!()
    };
    assert_eq!(p.rhs, Operand::Masked);
    let plain = parse_sql("SELECT name FROM singer", &c).unwrap();
    assert_eq!(mask_values(&plain), plain);
}

#[test]
fn every_dev_query_parses() {
    let Some((catalogs, dev)) = split_or_skip("dev.json") else {
        return;
    };
    let failures: Vec<_> = dev
        .iter()
        .enumerate()
        .filter_map(|(i, ex)| {
            parse_sql(&ex.gold_sql, catalogs.get(&ex.db_id).unwrap())
                .err()
                .map(|e| format!("{i}: {e}"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn dev_labels_match_reference() {
    let Some((catalogs, dev)) = split_or_skip("dev.json") else {
        return;
    };
    let (labels, dist) = label_corpus(&dev, &catalogs).unwrap();
    let reference = read_jsonl(&fixture("dev_hardness_official.jsonl"));
    assert_eq!(reference.len(), labels.len());
    let disagreements: Vec<_> = labels
        .iter()
        .zip(&reference)
        .filter(|(l, r)| {
            r["hardness"]
                .as_str()
                .unwrap()
                .parse::<HardnessLevel>()
                .unwrap()
                != l.level
        })
        .map(|(l, _)| l.index)
        .collect();
    assert!(disagreements.is_empty(), "{disagreements:?}");
    let pct: Vec<f64> = HardnessLevel::ALL
        .iter()
        .map(|&l| (dist.percent(l) * 100.0).round() / 100.0)
        .collect();
    assert_eq!(pct, [23.98, 43.13, 16.83, 16.05]);
}

#[test]
fn column_ids_are_one_based() {
    let c = catalog_or_skip!("concert_singer");
    assert_eq!(c.qualified_name(ColumnId(1)), "stadium.stadium_id");
    assert!(ColumnId(0).is_star());
}
