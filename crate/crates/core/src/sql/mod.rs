//! Canonical component form of the Spider SQL dialect.
//!
//! [`parse_sql`] resolves aliases to base tables and lowercases identifiers.
//! Literals keep their source text until [`mask_values`] erases them.
//! Multi-valued clauses are stored in source order. Comparisons that need set
//! semantics (exact-set-match) do their own normalization.

mod lexer;
mod parser;
mod print;

use std::fmt;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_sql;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("unsupported syntax at `{token}` (offset {offset})")]
    UnsupportedSyntax { token: String, offset: usize },
    #[error("cannot resolve `{name}`; candidates: {candidates:?}")]
    Resolution {
        name: String,
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agg {
    None,
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl Agg {
    pub fn from_keyword(word: &str) -> Option<Agg> {
        Some(match word {
            "max" => Agg::Max,
            "min" => Agg::Min,
            "count" => Agg::Count,
            "sum" => Agg::Sum,
            "avg" => Agg::Avg,
            _ => return None,
        })
    }

    pub fn is_some(self) -> bool {
        self != Agg::None
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Agg::None => "",
            Agg::Max => "max",
            Agg::Min => "min",
            Agg::Count => "count",
            Agg::Sum => "sum",
            Agg::Avg => "avg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitOp {
    Minus,
    Plus,
    Times,
    Divide,
}

impl UnitOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnitOp::Minus => "-",
            UnitOp::Plus => "+",
            UnitOp::Times => "*",
            UnitOp::Divide => "/",
        }
    }
}

/// A resolved column reference. Names are lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnRef {
    Star,
    Column {
        table: String,
        column: String,
    },
    /// Output column of a derived table in FROM.
    Derived(String),
}

impl ColumnRef {
    pub fn column(table: &str, column: &str) -> ColumnRef {
        ColumnRef::Column {
            table: table.to_lowercase(),
            column: column.to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColUnit {
    pub agg: Agg,
    pub column: ColumnRef,
    pub distinct: bool,
}

impl ColUnit {
    pub fn plain(column: ColumnRef) -> ColUnit {
        ColUnit {
            agg: Agg::None,
            column,
            distinct: false,
        }
    }
}

/// A column unit, optionally combined with a second one by one arithmetic
/// operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValUnit {
    pub left: ColUnit,
    pub right: Option<(UnitOp, ColUnit)>,
}

impl ValUnit {
    pub fn col(unit: ColUnit) -> ValUnit {
        ValUnit {
            left: unit,
            right: None,
        }
    }

    pub fn col_units(&self) -> impl Iterator<Item = &ColUnit> {
        std::iter::once(&self.left).chain(self.right.as_ref().map(|(_, c)| c))
    }

    pub fn col_units_mut(&mut self) -> impl Iterator<Item = &mut ColUnit> {
        std::iter::once(&mut self.left).chain(self.right.as_mut().map(|(_, c)| c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SelectItem {
    pub agg: Agg,
    pub value: ValUnit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Between,
    Like,
    In,
    Is,
    Exists,
}

impl CmpOp {
    pub fn keyword(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Between => "BETWEEN",
            CmpOp::Like => "LIKE",
            CmpOp::In => "IN",
            CmpOp::Is => "IS",
            CmpOp::Exists => "EXISTS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LiteralKind {
    Number,
    String,
    Null,
}

/// A literal with its source text (quotes included for strings).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub kind: LiteralKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Literal(Literal),
    List(Vec<Literal>),
    Column(ValUnit),
    Subquery(Box<SqlComponents>),
    /// A value erased by [`mask_values`].
    Masked,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub negated: bool,
    pub op: CmpOp,
    pub lhs: ValUnit,
    pub rhs: Operand,
    /// Upper bound of BETWEEN.
    pub rhs2: Option<Operand>,
}

/// Boolean combination of predicates. `And` never directly contains `And`,
/// and `Or` never directly contains `Or`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Pred(Predicate),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

impl Condition {
    pub fn and(parts: Vec<Condition>) -> Condition {
        Self::combine(parts, true)
    }

    pub fn or(parts: Vec<Condition>) -> Condition {
        Self::combine(parts, false)
    }

    fn combine(parts: Vec<Condition>, conj: bool) -> Condition {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match (p, conj) {
                (Condition::And(inner), true) | (Condition::Or(inner), false) => flat.extend(inner),
                (p, _) => flat.push(p),
            }
        }
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        if conj {
            Condition::And(flat)
        } else {
            Condition::Or(flat)
        }
    }

    /// Predicates in source order.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Condition::Pred(p) => out.push(p),
            Condition::And(v) | Condition::Or(v) => v.iter().for_each(|c| c.collect(out)),
        }
    }

    pub fn predicates_mut(&mut self) -> Vec<&mut Predicate> {
        let mut out = Vec::new();
        self.collect_mut(&mut out);
        out
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Predicate>) {
        match self {
            Condition::Pred(p) => out.push(p),
            Condition::And(v) | Condition::Or(v) => v.iter_mut().for_each(|c| c.collect_mut(out)),
        }
    }

    /// Number of OR connectors as written.
    pub fn or_count(&self) -> usize {
        match self {
            Condition::Pred(_) => 0,
            Condition::And(v) => v.iter().map(Condition::or_count).sum(),
            Condition::Or(v) => v.len() - 1 + v.iter().map(Condition::or_count).sum::<usize>(),
        }
    }

    /// Number of AND/OR connectors as written.
    pub fn connector_count(&self) -> usize {
        match self {
            Condition::Pred(_) => 0,
            Condition::And(v) | Condition::Or(v) => {
                v.len() - 1 + v.iter().map(Condition::connector_count).sum::<usize>()
            }
        }
    }

    /// Disjunctive normal form: each inner vector is one conjunction.
    pub fn dnf(&self) -> Vec<Vec<&Predicate>> {
        match self {
            Condition::Pred(p) => vec![vec![p]],
            Condition::Or(v) => v.iter().flat_map(Condition::dnf).collect(),
            Condition::And(v) => v.iter().fold(vec![Vec::new()], |acc, c| {
                let rhs = c.dnf();
                let mut out = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        let mut conj = a.clone();
                        conj.extend(b.iter().copied());
                        out.push(conj);
                    }
                }
                out
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableUnit {
    Table(String),
    Subquery(Box<SqlComponents>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct From {
    pub tables: Vec<TableUnit>,
    /// JOIN ... ON conditions, kept apart from WHERE.
    pub conditions: Option<Condition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderItem {
    pub value: ValUnit,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetOpKind {
    Intersect,
    Union,
    Except,
}

impl SetOpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Union => "UNION",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetOp {
    pub kind: SetOpKind,
    pub query: Box<SqlComponents>,
}

/// One parsed query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SqlComponents {
    pub select: Select,
    pub from: From,
    pub where_clause: Option<Condition>,
    pub group_by: Vec<ColUnit>,
    pub having: Option<Condition>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub set_op: Option<SetOp>,
}

impl SqlComponents {
    /// Subqueries used as predicate values in ON, WHERE and HAVING.
    pub fn condition_subqueries(&self) -> Vec<&SqlComponents> {
        [&self.from.conditions, &self.where_clause, &self.having]
            .into_iter()
            .flatten()
            .flat_map(|c| c.predicates())
            .flat_map(|p| [Some(&p.rhs), p.rhs2.as_ref()])
            .flatten()
            .filter_map(|o| match o {
                Operand::Subquery(q) => Some(q.as_ref()),
                _ => None,
            })
            .collect()
    }

    fn for_each_condition_mut(&mut self, mut f: impl FnMut(&mut Predicate)) {
        for cond in [
            &mut self.from.conditions,
            &mut self.where_clause,
            &mut self.having,
        ]
        .into_iter()
        .flatten()
        {
            for p in cond.predicates_mut() {
                f(p);
            }
        }
    }
}

impl fmt::Display for SqlComponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_query(f, self)
    }
}

/// Replaces every literal (and literal list) with [`Operand::Masked`],
/// recursing into subqueries. Column operands are kept.
pub fn mask_values(components: &SqlComponents) -> SqlComponents {
    let mut out = components.clone();
    mask_in_place(&mut out);
    out
}

fn mask_in_place(q: &mut SqlComponents) {
    q.for_each_condition_mut(|p| {
        for operand in std::iter::once(&mut p.rhs).chain(p.rhs2.as_mut()) {
            match operand {
                Operand::Subquery(sub) => mask_in_place(sub),
                Operand::Column(_) | Operand::Masked => {}
                other => *other = Operand::Masked,
            }
        }
    });
    for unit in &mut q.from.tables {
        if let TableUnit::Subquery(sub) = unit {
            mask_in_place(sub);
        }
    }
    if let Some(op) = &mut q.set_op {
        mask_in_place(&mut op.query);
    }
}
