//! Renders components back to SQL text.
//!
//! Every FROM table gets an alias `T<n>`, numbered across the whole statement
//! so nested queries never shadow an outer alias. Columns print qualified
//! through the innermost alias bound to their table.

use std::fmt::{self, Write};

use super::*;

pub(super) fn write_query(f: &mut fmt::Formatter<'_>, q: &SqlComponents) -> fmt::Result {
    let mut p = Printer {
        out: String::new(),
        next_alias: 1,
        scopes: Vec::new(),
    };
    p.query(q);
    f.write_str(&p.out)
}

struct Printer {
    out: String,
    next_alias: usize,
    /// (table, alias) bindings per enclosing query, innermost last.
    scopes: Vec<Vec<(String, String)>>,
}

impl Printer {
    fn query(&mut self, q: &SqlComponents) {
        let mut scope = Vec::new();
        for unit in &q.from.tables {
            if let TableUnit::Table(t) = unit {
                scope.push((t.clone(), format!("T{}", self.next_alias)));
                self.next_alias += 1;
            }
        }
        self.scopes.push(scope);

        self.out.push_str("SELECT ");
        if q.select.distinct {
            self.out.push_str("DISTINCT ");
        }
        for (i, item) in q.select.items.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            if item.agg.is_some() {
                let _ = write!(self.out, "{}(", item.agg.keyword());
                self.val_unit(&item.value);
                self.out.push(')');
            } else {
                self.val_unit(&item.value);
            }
        }

        self.out.push_str(" FROM ");
        let mut aliases = self.scopes.last().unwrap().clone().into_iter();
        for (i, unit) in q.from.tables.iter().enumerate() {
            if i > 0 {
                self.out.push_str(" JOIN ");
            }
            match unit {
                TableUnit::Table(t) => {
                    let (_, alias) = aliases.next().expect("one alias per table");
                    let _ = write!(self.out, "{t} AS {alias}");
                }
                TableUnit::Subquery(sub) => {
                    self.out.push('(');
                    self.query(sub);
                    self.out.push(')');
                }
            }
        }
        if let Some(c) = &q.from.conditions {
            self.out.push_str(" ON ");
            self.condition(c, false);
        }
        if let Some(c) = &q.where_clause {
            self.out.push_str(" WHERE ");
            self.condition(c, false);
        }
        if !q.group_by.is_empty() {
            self.out.push_str(" GROUP BY ");
            for (i, unit) in q.group_by.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(", ");
                }
                self.col_unit(unit);
            }
        }
        if let Some(c) = &q.having {
            self.out.push_str(" HAVING ");
            self.condition(c, false);
        }
        if !q.order_by.is_empty() {
            self.out.push_str(" ORDER BY ");
            for (i, item) in q.order_by.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(", ");
                }
                self.val_unit(&item.value);
                if item.direction == Direction::Desc {
                    self.out.push_str(" DESC");
                }
            }
        }
        if let Some(n) = q.limit {
            let _ = write!(self.out, " LIMIT {n}");
        }
        self.scopes.pop();
        if let Some(op) = &q.set_op {
            let _ = write!(self.out, " {} ", op.kind.keyword());
            self.query(&op.query);
        }
    }

    fn condition(&mut self, c: &Condition, in_and: bool) {
        match c {
            Condition::Pred(p) => self.predicate(p),
            Condition::And(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" AND ");
                    }
                    self.condition(part, true);
                }
            }
            Condition::Or(parts) => {
                if in_and {
                    self.out.push('(');
                }
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" OR ");
                    }
                    self.condition(part, false);
                }
                if in_and {
                    self.out.push(')');
                }
            }
        }
    }

    fn predicate(&mut self, p: &Predicate) {
        if p.op == CmpOp::Exists {
            if p.negated {
                self.out.push_str("NOT ");
            }
            self.out.push_str("EXISTS ");
            self.operand(&p.rhs);
            return;
        }
        let prefix_not =
            p.negated && !matches!(p.op, CmpOp::Between | CmpOp::Like | CmpOp::In | CmpOp::Is);
        if prefix_not {
            self.out.push_str("NOT ");
        }
        self.val_unit(&p.lhs);
        self.out.push(' ');
        match p.op {
            CmpOp::Is => {
                self.out.push_str("IS ");
                if p.negated {
                    self.out.push_str("NOT ");
                }
            }
            op => {
                if p.negated && !prefix_not {
                    self.out.push_str("NOT ");
                }
                self.out.push_str(op.keyword());
                self.out.push(' ');
            }
        }
        self.operand(&p.rhs);
        if let Some(hi) = &p.rhs2 {
            self.out.push_str(" AND ");
            self.operand(hi);
        }
    }

    fn operand(&mut self, o: &Operand) {
        match o {
            Operand::Literal(l) => self.out.push_str(&l.text),
            Operand::List(items) => {
                self.out.push('(');
                for (i, l) in items.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.out.push_str(&l.text);
                }
                self.out.push(')');
            }
            Operand::Column(v) => self.val_unit(v),
            Operand::Subquery(q) => {
                self.out.push('(');
                self.query(q);
                self.out.push(')');
            }
            Operand::Masked => self.out.push_str("\"value\""),
        }
    }

    fn val_unit(&mut self, v: &ValUnit) {
        self.col_unit(&v.left);
        if let Some((op, right)) = &v.right {
            let _ = write!(self.out, " {} ", op.symbol());
            self.col_unit(right);
        }
    }

    fn col_unit(&mut self, c: &ColUnit) {
        if c.agg.is_some() {
            let _ = write!(self.out, "{}(", c.agg.keyword());
        }
        if c.distinct {
            self.out.push_str("DISTINCT ");
        }
        match &c.column {
            ColumnRef::Star => self.out.push('*'),
            ColumnRef::Derived(name) => self.out.push_str(name),
            ColumnRef::Column { table, column } => {
                let alias = self
                    .scopes
                    .iter()
                    .rev()
                    .flat_map(|s| s.iter())
                    .find(|(t, _)| t == table)
                    .map(|(_, a)| a.clone());
                let _ = write!(self.out, "{}.{}", alias.as_deref().unwrap_or(table), column);
            }
        }
        if c.agg.is_some() {
            self.out.push(')');
        }
    }
}
