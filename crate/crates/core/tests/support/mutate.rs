//! Stress pairs for exact-set-match: each gold query is mutated once by
//! value substitution, select-list permutation or clause deletion, then
//! printed back to SQL.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sqlhard::catalog::{CatalogSet, Example};
use sqlhard::sql::{parse_sql, Condition, Literal, LiteralKind, Operand, SqlComponents, TableUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    ValueSubstitution,
    SelectPermutation,
    DeleteWhere,
    DeleteGroupBy,
    DeleteHaving,
    DeleteOrderBy,
    DeleteLimit,
    DeleteSetOp,
    DeleteSelectItem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressPair {
    pub source_index: usize,
    pub db_id: String,
    pub mutation: Mutation,
    pub gold: String,
    pub pred: String,
}

pub const SEED: u64 = 0x05ee_de11;

fn visit_literals(q: &mut SqlComponents, f: &mut dyn FnMut(&mut Literal)) {
    for cond in [&mut q.from.conditions, &mut q.where_clause, &mut q.having]
        .into_iter()
        .flatten()
    {
        visit_condition(cond, f);
    }
    for t in &mut q.from.tables {
        if let TableUnit::Subquery(sub) = t {
            visit_literals(sub, f);
        }
    }
    if let Some(op) = &mut q.set_op {
        visit_literals(&mut op.query, f);
    }
}

fn visit_condition(c: &mut Condition, f: &mut dyn FnMut(&mut Literal)) {
    for p in c.predicates_mut() {
        for o in std::iter::once(&mut p.rhs).chain(p.rhs2.as_mut()) {
            match o {
                Operand::Literal(l) if l.kind != LiteralKind::Null => f(l),
                Operand::List(items) => items.iter_mut().for_each(&mut *f),
                Operand::Subquery(sub) => visit_literals(sub, f),
                _ => {}
            }
        }
    }
}

fn substitute(l: &mut Literal, rng: &mut ChaCha8Rng) {
    match l.kind {
        LiteralKind::Number => {
            let bump = rng.gen_range(1..50);
            l.text = match l.text.parse::<i64>() {
                Ok(n) => (n + bump).to_string(),
                Err(_) => format!(
                    "{}",
                    l.text.parse::<f64>().unwrap_or(0.0) + bump as f64 + 0.5
                ),
            };
        }
        LiteralKind::String => {
            let inner = &l.text[1..l.text.len() - 1];
            l.text = format!("\"{}x{}\"", inner.replace('"', ""), rng.gen_range(0..100));
        }
        LiteralKind::Null => {}
    }
}

fn applicable(q: &SqlComponents) -> Vec<Mutation> {
    let mut out = Vec::new();
    let mut q2 = q.clone();
    let mut literals = 0;
    visit_literals(&mut q2, &mut |_| literals += 1);
    if literals > 0 {
        out.push(Mutation::ValueSubstitution);
    }
    if q.select.items.len() > 1 && q.select.items.iter().any(|i| i != &q.select.items[0]) {
        out.push(Mutation::SelectPermutation);
        out.push(Mutation::DeleteSelectItem);
    }
    if q.where_clause.is_some() {
        out.push(Mutation::DeleteWhere);
    }
    if !q.group_by.is_empty() {
        out.push(Mutation::DeleteGroupBy);
    }
    if q.having.is_some() {
        out.push(Mutation::DeleteHaving);
    }
    if !q.order_by.is_empty() {
        out.push(Mutation::DeleteOrderBy);
    }
    if q.limit.is_some() {
        out.push(Mutation::DeleteLimit);
    }
    if q.set_op.is_some() {
        out.push(Mutation::DeleteSetOp);
    }
    out
}

fn apply(q: &mut SqlComponents, m: Mutation, rng: &mut ChaCha8Rng) {
    match m {
        Mutation::ValueSubstitution => {
            let mut n = 0;
            visit_literals(q, &mut |_| n += 1);
            let target = rng.gen_range(0..n);
            let mut i = 0;
            let mut sub_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            visit_literals(q, &mut |l| {
                if i == target {
                    substitute(l, &mut sub_rng);
                }
                i += 1;
            });
        }
        Mutation::SelectPermutation => {
            let original = q.select.items.clone();
            while q.select.items == original {
                q.select.items.shuffle(rng);
            }
        }
        Mutation::DeleteSelectItem => {
            let i = rng.gen_range(0..q.select.items.len());
            q.select.items.remove(i);
        }
        Mutation::DeleteWhere => q.where_clause = None,
        Mutation::DeleteGroupBy => {
            q.group_by.clear();
            q.having = None;
        }
        Mutation::DeleteHaving => q.having = None,
        Mutation::DeleteOrderBy => {
            q.order_by.clear();
            q.limit = None;
        }
        Mutation::DeleteLimit => q.limit = None,
        Mutation::DeleteSetOp => q.set_op = None,
    }
}

/// `count` pairs drawn deterministically from `examples`.
pub fn stress_pairs(examples: &[Example], catalogs: &CatalogSet, count: usize) -> Vec<StressPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        order.shuffle(&mut rng);
        for &i in &order {
            if pairs.len() == count {
                break;
            }
            let ex = &examples[i];
            let catalog = catalogs.get(&ex.db_id).expect("catalog");
            let gold = parse_sql(&ex.gold_sql, catalog).expect("gold parses");
            let options = applicable(&gold);
            let Some(&m) = options.choose(&mut rng) else {
                continue;
            };
            let mut mutated = gold.clone();
            apply(&mut mutated, m, &mut rng);
            pairs.push(StressPair {
                source_index: i,
                db_id: ex.db_id.clone(),
                mutation: m,
                gold: ex.gold_sql.clone(),
                pred: mutated.to_string(),
            });
        }
    }
    pairs
}
