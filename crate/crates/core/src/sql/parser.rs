//! Recursive-descent parser for the Spider dialect.
//!
//! FROM is parsed before the select list so that unqualified columns resolve
//! against the tables of their own query first, then against enclosing
//! queries.

use super::lexer::{tokenize, Token, TokenKind};
use super::*;
use crate::catalog::SchemaCatalog;

const KEYWORDS: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "by",
    "having",
    "order",
    "limit",
    "intersect",
    "union",
    "except",
    "join",
    "on",
    "as",
    "and",
    "or",
    "not",
    "in",
    "like",
    "between",
    "is",
    "null",
    "exists",
    "asc",
    "desc",
    "distinct",
    "inner",
    "left",
    "right",
    "outer",
    "cross",
    "natural",
    "full",
];

fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Parses one statement against `catalog`.
pub fn parse_sql(sql: &str, catalog: &SchemaCatalog) -> Result<SqlComponents, SqlError> {
    let toks = tokenize(sql)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_offset: sql.len(),
        catalog,
    };
    let (q, _) = p.query(&[])?;
    while p.eat(";") {}
    if p.pos < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(q)
}

#[derive(Clone)]
enum Source {
    /// Lowercase base-table name.
    Table(String),
    /// Output column names of a FROM subquery.
    Derived(Vec<String>),
}

#[derive(Clone)]
struct Binding {
    alias: Option<String>,
    source: Source,
}

#[derive(Clone, Default)]
struct Scope {
    bindings: Vec<Binding>,
    /// Select-list aliases that name a single column unit.
    outputs: Vec<(String, ColUnit)>,
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    end_offset: usize,
    catalog: &'a SchemaCatalog,
}

type Res<T> = Result<T, SqlError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.toks.get(self.pos + k)
    }

    fn at(&self, norm: &str) -> bool {
        self.peek().is_some_and(|t| t.is(norm))
    }

    fn at_k(&self, k: usize, norm: &str) -> bool {
        self.peek_at(k).is_some_and(|t| t.is(norm))
    }

    fn eat(&mut self, norm: &str) -> bool {
        if self.at(norm) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, norm: &str) -> Res<()> {
        if self.eat(norm) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn unexpected(&self) -> SqlError {
        match self.peek() {
            Some(t) => SqlError::UnsupportedSyntax {
                token: t.text.clone(),
                offset: t.offset,
            },
            None => SqlError::UnsupportedSyntax {
                token: "<end of input>".to_string(),
                offset: self.end_offset,
            },
        }
    }

    /// A non-keyword word usable as a name.
    fn at_name(&self) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Word && !is_keyword(&t.norm))
    }

    fn name(&mut self) -> Res<String> {
        if self.at_name() {
            let n = self.toks[self.pos].norm.clone();
            self.pos += 1;
            Ok(n)
        } else {
            Err(self.unexpected())
        }
    }

    /// `query := ['('] core [')'] [';'...] [setop query]`
    fn query(&mut self, outer: &[Scope]) -> Res<(SqlComponents, Vec<String>)> {
        let paren = self.eat("(");
        let (mut q, names) = self.core(outer)?;
        if paren {
            self.expect(")")?;
        }
        while self.eat(";") {}
        let kind = match self.peek().map(|t| t.norm.as_str()) {
            Some("intersect") => Some(SetOpKind::Intersect),
            Some("union") => Some(SetOpKind::Union),
            Some("except") => Some(SetOpKind::Except),
            _ => None,
        };
        if let Some(kind) = kind {
            self.pos += 1;
            if self.at("all") {
                return Err(self.unexpected());
            }
            let (rhs, _) = self.query(outer)?;
            q.set_op = Some(SetOp {
                kind,
                query: Box::new(rhs),
            });
        }
        Ok((q, names))
    }

    fn core(&mut self, outer: &[Scope]) -> Res<(SqlComponents, Vec<String>)> {
        self.expect("select")?;
        let select_start = self.pos;
        let from_at = self.find_from()?;
        self.pos = from_at + 1;
        let mut q = SqlComponents::default();
        let mut local = Scope::default();
        let (from, scope) = self.from_clause(outer)?;
        q.from = from;
        local.bindings = scope.bindings;
        let from_end = self.pos;

        self.pos = select_start;
        let stack = ScopeStack {
            local: &local,
            outer,
        };
        let (select, names, outputs) = self.select_list(&stack, from_at)?;
        q.select = select;
        local.outputs = outputs;
        self.pos = from_end;
        let stack = ScopeStack {
            local: &local,
            outer,
        };

        if self.eat("where") {
            q.where_clause = Some(self.condition(&stack)?);
        }
        if self.at("group") {
            self.pos += 1;
            self.expect("by")?;
            loop {
                q.group_by.push(self.col_unit(&stack)?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        if self.eat("having") {
            q.having = Some(self.condition(&stack)?);
        }
        if self.at("order") {
            self.pos += 1;
            self.expect("by")?;
            loop {
                let value = self.val_unit(&stack)?;
                let direction = if self.eat("desc") {
                    Direction::Desc
                } else {
                    self.eat("asc");
                    Direction::Asc
                };
                q.order_by.push(OrderItem { value, direction });
                if !self.eat(",") {
                    break;
                }
            }
        }
        if self.at("limit") {
            self.pos += 1;
            let tok = self.peek().cloned();
            match tok {
                Some(t) if t.kind == TokenKind::Number => match t.text.parse::<u64>() {
                    Ok(n) => {
                        q.limit = Some(n);
                        self.pos += 1;
                    }
                    Err(_) => return Err(self.unexpected()),
                },
                _ => return Err(self.unexpected()),
            }
        }
        Ok((q, names))
    }

    /// Index of the FROM keyword of the current query.
    fn find_from(&self) -> Res<usize> {
        let mut depth = 0usize;
        for (i, t) in self.toks.iter().enumerate().skip(self.pos) {
            if t.kind == TokenKind::Str {
                continue;
            }
            match t.norm.as_str() {
                "(" => depth += 1,
                ")" if depth == 0 => break,
                ")" => depth -= 1,
                "from" if depth == 0 => return Ok(i),
                "where" | "group" | "having" | "order" | "limit" | "intersect" | "union"
                | "except" | ";"
                    if depth == 0 =>
                {
                    break
                }
                _ => {}
            }
        }
        let at = self
            .toks
            .get(self.pos)
            .map(|t| (t.text.clone(), t.offset))
            .unwrap_or_else(|| ("<end of input>".into(), self.end_offset));
        Err(SqlError::UnsupportedSyntax {
            token: format!("SELECT without FROM near `{}`", at.0),
            offset: at.1,
        })
    }

    fn from_clause(&mut self, outer: &[Scope]) -> Res<(From, Scope)> {
        let mut from = From::default();
        let mut scope = Scope::default();
        let mut conds = Vec::new();
        loop {
            if self.at("(") {
                self.pos += 1;
                let (sub, names) = self.query(outer)?;
                self.expect(")")?;
                let alias = self.alias()?;
                from.tables.push(TableUnit::Subquery(Box::new(sub)));
                scope.bindings.push(Binding {
                    alias,
                    source: Source::Derived(names),
                });
            } else {
                let tok = self.peek().cloned();
                let name = self.name()?;
                let Some(t) = self.catalog.table_index(&name) else {
                    let tok = tok.expect("name consumed a token");
                    return Err(SqlError::Resolution {
                        name: tok.text,
                        candidates: self
                            .catalog
                            .tables
                            .iter()
                            .map(|t| t.name.to_lowercase())
                            .collect(),
                    });
                };
                let table = self.catalog.tables[t].name.to_lowercase();
                let alias = self.alias()?;
                from.tables.push(TableUnit::Table(table.clone()));
                scope.bindings.push(Binding {
                    alias,
                    source: Source::Table(table),
                });
            }
            // ON may cite tables joined later, so conditions are parsed once
            // every binding is known
            while self.eat("on") {
                let start = self.pos;
                self.skip_join_condition();
                conds.push((start, self.pos));
            }
            if self.eat(",") || self.eat("join") {
                continue;
            }
            let join_kw = ["inner", "left", "right", "full", "cross", "natural"];
            if join_kw.iter().any(|k| self.at(k)) {
                self.pos += 1;
                self.eat("outer");
                self.expect("join")?;
                continue;
            }
            break;
        }
        let from_end = self.pos;
        let mut parsed = Vec::with_capacity(conds.len());
        for (start, end) in conds {
            self.pos = start;
            let stack = ScopeStack {
                local: &scope,
                outer,
            };
            parsed.push(self.condition(&stack)?);
            if self.pos != end {
                return Err(self.unexpected());
            }
        }
        self.pos = from_end;
        if !parsed.is_empty() {
            from.conditions = Some(Condition::and(parsed));
        }
        Ok((from, scope))
    }

    /// Advances past one ON condition without interpreting it.
    fn skip_join_condition(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if t.kind != TokenKind::Str {
                match t.norm.as_str() {
                    "(" => depth += 1,
                    ")" if depth == 0 => return,
                    ")" => depth -= 1,
                    "," | ";" | "on" | "join" | "inner" | "left" | "right" | "full" | "cross"
                    | "natural" | "where" | "group" | "having" | "order" | "limit"
                    | "intersect" | "union" | "except"
                        if depth == 0 =>
                    {
                        return
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    fn alias(&mut self) -> Res<Option<String>> {
        if self.eat("as") {
            return self.name().map(Some);
        }
        if self.at_name() {
            return self.name().map(Some);
        }
        Ok(None)
    }

    #[allow(clippy::type_complexity)]
    fn select_list(
        &mut self,
        stack: &ScopeStack<'_>,
        from_at: usize,
    ) -> Res<(Select, Vec<String>, Vec<(String, ColUnit)>)> {
        let mut select = Select {
            distinct: self.eat("distinct"),
            items: Vec::new(),
        };
        let mut names = Vec::new();
        let mut outputs = Vec::new();
        loop {
            let item = self.select_item(stack)?;
            let alias = if self.eat("as") || self.at_name() {
                Some(self.name()?)
            } else {
                None
            };
            let name = alias.clone().unwrap_or_else(|| output_name(&item));
            if let Some(a) = alias {
                if item.value.right.is_none() {
                    let mut unit = item.value.left.clone();
                    if item.agg.is_some() {
                        if unit.agg.is_some() {
                            return Err(self.unexpected());
                        }
                        unit.agg = item.agg;
                    }
                    outputs.push((a, unit));
                }
            }
            names.push(name);
            select.items.push(item);
            if !self.eat(",") {
                break;
            }
        }
        if self.pos != from_at {
            return Err(self.unexpected());
        }
        Ok((select, names, outputs))
    }

    fn select_item(&mut self, stack: &ScopeStack<'_>) -> Res<SelectItem> {
        let agg = self
            .peek()
            .filter(|t| t.kind == TokenKind::Word && self.at_k(1, "("))
            .and_then(|t| Agg::from_keyword(&t.norm));
        let Some(agg) = agg else {
            return Ok(SelectItem {
                agg: Agg::None,
                value: self.val_unit(stack)?,
            });
        };
        self.pos += 2;
        let distinct = self.eat("distinct");
        let mut value = self.val_unit(stack)?;
        self.expect(")")?;
        if distinct {
            value.left.distinct = true;
        }
        if let Some(op) = self.unit_op() {
            // `agg(a) op agg(b)`: arithmetic over aggregated column units
            if value.right.is_some() || value.left.agg.is_some() {
                return Err(self.unexpected());
            }
            self.pos += 1;
            let mut left = value.left;
            left.agg = agg;
            let right = self.col_unit(stack)?;
            return Ok(SelectItem {
                agg: Agg::None,
                value: ValUnit {
                    left,
                    right: Some((op, right)),
                },
            });
        }
        Ok(SelectItem { agg, value })
    }

    fn unit_op(&self) -> Option<UnitOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Symbol {
            return None;
        }
        Some(match t.norm.as_str() {
            "-" => UnitOp::Minus,
            "+" => UnitOp::Plus,
            "*" => UnitOp::Times,
            "/" => UnitOp::Divide,
            _ => return None,
        })
    }

    fn val_unit(&mut self, stack: &ScopeStack<'_>) -> Res<ValUnit> {
        if self.at("(") && !self.at_k(1, "select") {
            let save = self.pos;
            self.pos += 1;
            if let Ok(inner) = self.val_unit(stack) {
                if self.eat(")") {
                    if self.unit_op().is_some() {
                        return Err(self.unexpected());
                    }
                    return Ok(inner);
                }
            }
            self.pos = save;
        }
        let left = self.col_unit(stack)?;
        let right = match self.unit_op() {
            Some(op) => {
                self.pos += 1;
                Some((op, self.col_unit(stack)?))
            }
            None => None,
        };
        Ok(ValUnit { left, right })
    }

    fn col_unit(&mut self, stack: &ScopeStack<'_>) -> Res<ColUnit> {
        if self.at("(") {
            self.pos += 1;
            let unit = self.col_unit(stack)?;
            self.expect(")")?;
            return Ok(unit);
        }
        let agg = self
            .peek()
            .filter(|t| t.kind == TokenKind::Word && self.at_k(1, "("))
            .and_then(|t| Agg::from_keyword(&t.norm));
        if let Some(agg) = agg {
            self.pos += 2;
            let distinct = self.eat("distinct");
            let mut unit = self.col_unit(stack)?;
            self.expect(")")?;
            if unit.agg.is_some() {
                return Err(self.unexpected());
            }
            unit.agg = agg;
            unit.distinct |= distinct;
            return Ok(unit);
        }
        let distinct = self.eat("distinct");
        let mut unit = self.column(stack)?;
        unit.distinct |= distinct;
        Ok(unit)
    }

    /// A column reference, `*`, or a select-list alias.
    fn column(&mut self, stack: &ScopeStack<'_>) -> Res<ColUnit> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected());
        };
        if tok.is("*") {
            self.pos += 1;
            return Ok(ColUnit::plain(ColumnRef::Star));
        }
        // Non-aggregate calls such as `rank()` or `lower(x)` are outside the grammar.
        if tok.kind != TokenKind::Word || is_keyword(&tok.norm) || self.at_k(1, "(") {
            return Err(self.unexpected());
        }
        self.pos += 1;
        match tok.norm.split_once('.') {
            Some((q, "*")) => {
                stack
                    .qualifier(q, self.catalog)
                    .map_err(|e| e.named(&tok.text))?;
                Ok(ColUnit::plain(ColumnRef::Star))
            }
            Some((q, c)) => stack
                .qualified(q, c, self.catalog)
                .map(ColUnit::plain)
                .map_err(|e| e.named(&tok.text)),
            None => stack
                .unqualified(&tok.norm, self.catalog)
                .map_err(|e| e.named(&tok.text)),
        }
    }

    fn condition(&mut self, stack: &ScopeStack<'_>) -> Res<Condition> {
        let mut parts = vec![self.conjunction(stack)?];
        while self.eat("or") {
            parts.push(self.conjunction(stack)?);
        }
        Ok(Condition::or(parts))
    }

    fn conjunction(&mut self, stack: &ScopeStack<'_>) -> Res<Condition> {
        let mut parts = vec![self.atom(stack)?];
        while self.eat("and") {
            parts.push(self.atom(stack)?);
        }
        Ok(Condition::and(parts))
    }

    fn atom(&mut self, stack: &ScopeStack<'_>) -> Res<Condition> {
        if self.at("exists") || (self.at("not") && self.at_k(1, "exists")) {
            let negated = self.eat("not");
            self.pos += 1;
            self.expect("(")?;
            let (sub, _) = self.query(&stack.nested())?;
            self.expect(")")?;
            return Ok(Condition::Pred(Predicate {
                negated,
                op: CmpOp::Exists,
                lhs: ValUnit::col(ColUnit::plain(ColumnRef::Star)),
                rhs: Operand::Subquery(Box::new(sub)),
                rhs2: None,
            }));
        }
        if self.at("(") && !self.at_k(1, "select") {
            let save = self.pos;
            self.pos += 1;
            if let Ok(c) = self.condition(stack) {
                if self.eat(")") {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        let prefix_not = self.eat("not");
        let mut pred = self.predicate(stack)?;
        pred.negated ^= prefix_not;
        Ok(Condition::Pred(pred))
    }

    fn predicate(&mut self, stack: &ScopeStack<'_>) -> Res<Predicate> {
        let lhs = self.val_unit(stack)?;
        let mut negated = self.eat("not");
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected());
        };
        let op = match (tok.kind, tok.norm.as_str()) {
            (TokenKind::Symbol, "=") => CmpOp::Eq,
            (TokenKind::Symbol, "!=") => CmpOp::Ne,
            (TokenKind::Symbol, "<") => CmpOp::Lt,
            (TokenKind::Symbol, "<=") => CmpOp::Le,
            (TokenKind::Symbol, ">") => CmpOp::Gt,
            (TokenKind::Symbol, ">=") => CmpOp::Ge,
            (TokenKind::Word, "between") => CmpOp::Between,
            (TokenKind::Word, "like") => CmpOp::Like,
            (TokenKind::Word, "in") => CmpOp::In,
            (TokenKind::Word, "is") => CmpOp::Is,
            _ => return Err(self.unexpected()),
        };
        if negated && !matches!(op, CmpOp::Between | CmpOp::Like | CmpOp::In) {
            return Err(self.unexpected());
        }
        self.pos += 1;
        let mut rhs2 = None;
        let rhs = match op {
            CmpOp::Is => {
                negated = self.eat("not");
                let t = self.peek().cloned();
                match t {
                    Some(t) if t.is("null") => {
                        self.pos += 1;
                        Operand::Literal(Literal {
                            kind: LiteralKind::Null,
                            text: t.text,
                        })
                    }
                    _ => return Err(self.unexpected()),
                }
            }
            CmpOp::Between => {
                let lo = self.operand(stack, false)?;
                self.expect("and")?;
                rhs2 = Some(self.operand(stack, false)?);
                lo
            }
            CmpOp::In => self.operand(stack, true)?,
            _ => self.operand(stack, false)?,
        };
        Ok(Predicate {
            negated,
            op,
            lhs,
            rhs,
            rhs2,
        })
    }

    fn operand(&mut self, stack: &ScopeStack<'_>, allow_list: bool) -> Res<Operand> {
        if self.at("(") && self.at_k(1, "select") {
            self.pos += 1;
            let (sub, _) = self.query(&stack.nested())?;
            self.expect(")")?;
            return Ok(Operand::Subquery(Box::new(sub)));
        }
        if allow_list && self.at("(") {
            self.pos += 1;
            let mut items = Vec::new();
            loop {
                items.push(self.literal()?.ok_or_else(|| self.unexpected())?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
            return Ok(Operand::List(items));
        }
        if let Some(lit) = self.literal()? {
            return Ok(Operand::Literal(lit));
        }
        Ok(Operand::Column(self.val_unit(stack)?))
    }

    /// A literal at the cursor, or `None` if the cursor is not at one.
    fn literal(&mut self) -> Res<Option<Literal>> {
        let Some(t) = self.peek().cloned() else {
            return Ok(None);
        };
        let lit = match t.kind {
            TokenKind::Str => Literal {
                kind: LiteralKind::String,
                text: t.text,
            },
            TokenKind::Number => Literal {
                kind: LiteralKind::Number,
                text: t.text,
            },
            TokenKind::Symbol if t.norm == "-" || t.norm == "+" => match self.peek_at(1) {
                Some(n) if n.kind == TokenKind::Number => {
                    let text = format!("{}{}", t.text, n.text);
                    self.pos += 1;
                    Literal {
                        kind: LiteralKind::Number,
                        text,
                    }
                }
                _ => return Ok(None),
            },
            TokenKind::Word if t.norm == "null" => Literal {
                kind: LiteralKind::Null,
                text: t.text,
            },
            _ => return Ok(None),
        };
        self.pos += 1;
        Ok(Some(lit))
    }
}

fn output_name(item: &SelectItem) -> String {
    match (&item.value.left.column, &item.value.right, item.agg) {
        (ColumnRef::Column { column, .. }, None, Agg::None) => column.clone(),
        (ColumnRef::Derived(name), None, Agg::None) => name.clone(),
        _ => String::new(),
    }
}

/// Resolution failure before the offending token is known.
enum Unresolved {
    Missing(Vec<String>),
}

impl Unresolved {
    fn named(self, name: &str) -> SqlError {
        match self {
            Unresolved::Missing(candidates) => SqlError::Resolution {
                name: name.to_string(),
                candidates,
            },
        }
    }
}

struct ScopeStack<'s> {
    local: &'s Scope,
    outer: &'s [Scope],
}

impl<'s> ScopeStack<'s> {
    /// Innermost first.
    fn scopes(&self) -> impl Iterator<Item = &Scope> {
        std::iter::once(self.local).chain(self.outer.iter())
    }

    /// Scopes visible to a subquery nested in this query, innermost first.
    fn nested(&self) -> Vec<Scope> {
        self.scopes()
            .map(|s| Scope {
                bindings: s.bindings.clone(),
                outputs: Vec::new(),
            })
            .collect()
    }

    fn binding(&self, q: &str) -> Option<&Binding> {
        self.scopes().flat_map(|s| s.bindings.iter()).find(|b| {
            b.alias.as_deref() == Some(q) || matches!(&b.source, Source::Table(t) if t == q)
        })
    }

    fn qualifier(&self, q: &str, catalog: &SchemaCatalog) -> Result<(), Unresolved> {
        if self.binding(q).is_some() || catalog.table_index(q).is_some() {
            Ok(())
        } else {
            Err(Unresolved::Missing(self.visible_aliases()))
        }
    }

    fn visible_aliases(&self) -> Vec<String> {
        self.scopes()
            .flat_map(|s| s.bindings.iter())
            .flat_map(|b| {
                let t = match &b.source {
                    Source::Table(t) => Some(t.clone()),
                    Source::Derived(_) => None,
                };
                b.alias.clone().into_iter().chain(t)
            })
            .collect()
    }

    fn qualified(
        &self,
        q: &str,
        c: &str,
        catalog: &SchemaCatalog,
    ) -> Result<ColumnRef, Unresolved> {
        let table = match self.binding(q).map(|b| &b.source) {
            Some(Source::Derived(names)) => {
                return if names.iter().any(|n| n == c) {
                    Ok(ColumnRef::Derived(c.to_string()))
                } else {
                    Err(Unresolved::Missing(names.clone()))
                };
            }
            Some(Source::Table(t)) => t.clone(),
            None => match catalog.table_index(q) {
                Some(i) => catalog.tables[i].name.to_lowercase(),
                None => return Err(Unresolved::Missing(self.visible_aliases())),
            },
        };
        if catalog.find_column(&table, c).is_some() {
            Ok(ColumnRef::column(&table, c))
        } else {
            Err(Unresolved::Missing(candidates(c, &[table], catalog)))
        }
    }

    fn unqualified(&self, c: &str, catalog: &SchemaCatalog) -> Result<ColUnit, Unresolved> {
        for scope in self.scopes() {
            for b in &scope.bindings {
                if let Source::Table(t) = &b.source {
                    if catalog.find_column(t, c).is_some() {
                        return Ok(ColUnit::plain(ColumnRef::column(t, c)));
                    }
                }
            }
            for b in &scope.bindings {
                if let Source::Derived(names) = &b.source {
                    if names.iter().any(|n| n == c) {
                        return Ok(ColUnit::plain(ColumnRef::Derived(c.to_string())));
                    }
                }
            }
            if let Some((_, unit)) = scope.outputs.iter().find(|(a, _)| a == c) {
                return Ok(unit.clone());
            }
        }
        let tables: Vec<String> = self
            .scopes()
            .flat_map(|s| s.bindings.iter())
            .filter_map(|b| match &b.source {
                Source::Table(t) => Some(t.clone()),
                Source::Derived(_) => None,
            })
            .collect();
        Err(Unresolved::Missing(candidates(c, &tables, catalog)))
    }
}

/// Columns named `c` anywhere in the catalog, else every column of `tables`.
fn candidates(c: &str, tables: &[String], catalog: &SchemaCatalog) -> Vec<String> {
    let same_name: Vec<String> = catalog
        .tables
        .iter()
        .flat_map(|t| {
            t.columns
                .iter()
                .filter(|col| col.name.eq_ignore_ascii_case(c))
                .map(move |col| format!("{}.{}", t.name, col.name).to_lowercase())
        })
        .collect();
    if !same_name.is_empty() {
        return same_name;
    }
    tables
        .iter()
        .filter_map(|t| catalog.table_index(t))
        .flat_map(|i| {
            let t = &catalog.tables[i];
            t.columns
                .iter()
                .map(move |col| format!("{}.{}", t.name, col.name).to_lowercase())
        })
        .collect()
}
