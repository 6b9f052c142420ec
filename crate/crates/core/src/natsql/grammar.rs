//! Concrete text syntax for NatSQL clauses.
//!
//! ```text
//! SELECT <items>
//! WHERE [and|or] <cond> [(and|or) <cond>]*
//! GROUP BY <cols>
//! ORDER BY <items> (ASC|DESC) [LIMIT n]
//! extra <col>
//! ```
//!
//! Keywords are case-insensitive and columns are written `table.column`.

use std::str::FromStr;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl SyntaxError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        SyntaxError { position, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == '\'' || c == '"' {
            let quote = bytes[i];
            i += 1;
            let mut value = String::new();
            loop {
                if i >= bytes.len() {
                    return Err(SyntaxError::new(start, "unterminated string literal"));
                }
                if bytes[i] == quote {
                    if i + 1 < bytes.len() && bytes[i + 1] == quote {
                        value.push(quote as char);
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                let ch = text[i..].chars().next().expect("in bounds");
                value.push(ch);
                i += ch.len_utf8();
            }
            out.push(Spanned { tok: Tok::Str(value), pos: start });
            continue;
        }
        let negative_number =
            c == '-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit());
        if c.is_ascii_digit() || negative_number {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // `2010_sales` style identifiers start with digits.
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                while i < bytes.len() && is_word_byte(bytes[i]) {
                    i += 1;
                }
                out.push(Spanned { tok: Tok::Word(text[start..i].to_string()), pos: start });
            } else {
                out.push(Spanned { tok: Tok::Number(text[start..i].to_string()), pos: start });
            }
            continue;
        }
        if is_word_byte(bytes[i]) {
            while i < bytes.len() && is_word_byte(bytes[i]) {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Word(text[start..i].to_string()), pos: start });
            continue;
        }
        let two = text.get(i..i + 2).unwrap_or("");
        let sym = match two {
            "!=" => Some("!="),
            "<>" => Some("!="),
            ">=" => Some(">="),
            "<=" => Some("<="),
            _ => None,
        };
        if let Some(sym) = sym {
            out.push(Spanned { tok: Tok::Sym(sym), pos: start });
            i += 2;
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            ',' => ",",
            '.' => ".",
            '*' => "*",
            '=' => "=",
            '>' => ">",
            '<' => "<",
            _ => return Err(SyntaxError::new(start, format!("unexpected character `{c}`"))),
        };
        out.push(Spanned { tok: Tok::Sym(sym), pos: start });
        i += 1;
    }
    Ok(out)
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

struct Parser {
    toks: Vec<Spanned>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { toks: lex(text)?, idx: 0, end: text.len() })
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |t| t.pos)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.idx + offset).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.idx >= self.toks.len()
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.pos(), message)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        self.is_keyword_at(0, kw)
    }

    fn is_keyword_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.peek_at(offset), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
            && !matches!(self.peek_at(offset + 1), Some(Tok::Sym(".")))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{sym}`")))
        }
    }

    fn at_clause_start(&self) -> bool {
        self.is_keyword("select")
            || self.is_keyword("where")
            || self.is_keyword("extra")
            || (self.is_keyword("group") && self.is_keyword_at(1, "by"))
            || (self.is_keyword("order") && self.is_keyword_at(1, "by"))
    }

    fn column(&mut self) -> Result<ColumnRef, SyntaxError> {
        let table = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            _ => return Err(self.error("expected table.column")),
        };
        self.idx += 1;
        self.expect_sym(".")?;
        let column = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            Some(Tok::Sym("*")) => "*".to_string(),
            _ => return Err(self.error("expected column name or `*` after `.`")),
        };
        self.idx += 1;
        Ok(ColumnRef::new(table, column))
    }

    fn item(&mut self) -> Result<SelectItem, SyntaxError> {
        if let Some(Tok::Word(w)) = self.peek() {
            if let Some(agg) = Agg::from_keyword(w) {
                if matches!(self.peek_at(1), Some(Tok::Sym("("))) {
                    self.idx += 2;
                    let distinct = self.eat_keyword("distinct");
                    let column = self.column()?;
                    self.expect_sym(")")?;
                    return Ok(SelectItem { agg, column, distinct });
                }
            }
        }
        let distinct = self.eat_keyword("distinct");
        let column = self.column()?;
        Ok(SelectItem { agg: Agg::None, column, distinct })
    }

    fn items(&mut self) -> Result<Vec<SelectItem>, SyntaxError> {
        let mut items = vec![self.item()?];
        while self.eat_sym(",") {
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn columns(&mut self) -> Result<Vec<ColumnRef>, SyntaxError> {
        let mut cols = vec![self.column()?];
        while self.eat_sym(",") {
            cols.push(self.column()?);
        }
        Ok(cols)
    }

    fn op(&mut self) -> Result<Op, SyntaxError> {
        let op = match self.peek() {
            Some(Tok::Sym("=")) => Op::Eq,
            Some(Tok::Sym("!=")) => Op::Ne,
            Some(Tok::Sym(">")) => Op::Gt,
            Some(Tok::Sym("<")) => Op::Lt,
            Some(Tok::Sym(">=")) => Op::Ge,
            Some(Tok::Sym("<=")) => Op::Le,
            _ if self.is_keyword("like") => Op::Like,
            _ if self.is_keyword("in") => Op::In,
            _ if self.is_keyword("between") => Op::Between,
            _ if self.is_keyword("not") => {
                self.idx += 1;
                if self.eat_keyword("like") {
                    return Ok(Op::NotLike);
                }
                if self.eat_keyword("in") {
                    return Ok(Op::NotIn);
                }
                return Err(self.error("expected `like` or `in` after `not`"));
            }
            _ => return Err(self.error("expected comparison operator")),
        };
        self.idx += 1;
        Ok(op)
    }

    fn literal(&mut self) -> Result<Literal, SyntaxError> {
        let lit = match self.peek() {
            Some(Tok::Str(s)) => Literal::text(s.clone()),
            Some(Tok::Number(n)) => Literal::number(n.clone()),
            _ => return Err(self.error("expected literal value")),
        };
        self.idx += 1;
        Ok(lit)
    }

    fn condition(&mut self) -> Result<Condition, SyntaxError> {
        let left = self.item()?;
        let op = self.op()?;
        let right = if op == Op::Between {
            let lo = self.literal()?;
            self.expect_keyword("and")?;
            let hi = self.literal()?;
            Rhs::Range(lo, hi)
        } else {
            match self.peek() {
                Some(Tok::Str(_)) | Some(Tok::Number(_)) => Rhs::Literal(self.literal()?),
                _ => Rhs::Item(self.item()?),
            }
        };
        Ok(Condition::new(left, op, right))
    }

    fn conjunction(&mut self) -> Option<Conj> {
        if self.eat_keyword("and") {
            Some(Conj::And)
        } else if self.eat_keyword("or") {
            Some(Conj::Or)
        } else {
            None
        }
    }

    fn where_clause(&mut self) -> Result<WhereClause, SyntaxError> {
        let joiner = self.conjunction();
        let mut conditions = vec![self.condition()?];
        while !self.at_end() && !self.at_clause_start() {
            let conj = self
                .conjunction()
                .ok_or_else(|| self.error("expected `and` or `or` between conditions"))?;
            conditions.last_mut().expect("non-empty").conj_to_next = Some(conj);
            conditions.push(self.condition()?);
        }
        Ok(WhereClause { joiner, conditions })
    }

    fn order_clause(&mut self) -> Result<OrderClause, SyntaxError> {
        let items = self.items()?;
        let direction = if self.eat_keyword("desc") {
            Direction::Desc
        } else {
            self.eat_keyword("asc");
            Direction::Asc
        };
        let limit = if self.eat_keyword("limit") {
            match self.peek() {
                Some(Tok::Number(n)) => {
                    let n = n
                        .parse::<u64>()
                        .map_err(|_| self.error("LIMIT expects a non-negative integer"))?;
                    self.idx += 1;
                    Some(n)
                }
                _ => return Err(self.error("LIMIT expects a non-negative integer")),
            }
        } else {
            None
        };
        Ok(OrderClause { items, direction, limit })
    }

    fn clause(&mut self) -> Result<NatSqlClause, SyntaxError> {
        if self.eat_keyword("select") {
            Ok(NatSqlClause::Select(self.items()?))
        } else if self.eat_keyword("where") {
            Ok(NatSqlClause::Where(self.where_clause()?))
        } else if self.is_keyword("group") {
            self.idx += 1;
            self.expect_keyword("by")?;
            Ok(NatSqlClause::GroupBy(self.columns()?))
        } else if self.is_keyword("order") {
            self.idx += 1;
            self.expect_keyword("by")?;
            Ok(NatSqlClause::OrderBy(self.order_clause()?))
        } else if self.eat_keyword("extra") {
            Ok(NatSqlClause::Extra(self.column()?))
        } else {
            Err(self.error("expected SELECT, WHERE, GROUP BY, ORDER BY or extra"))
        }
    }
}

/// Parses exactly one clause.
pub fn parse_clause(text: &str) -> Result<NatSqlClause, SyntaxError> {
    let mut p = Parser::new(text)?;
    let clause = p.clause()?;
    if !p.at_end() {
        return Err(p.error("trailing input after clause"));
    }
    Ok(clause)
}

/// Parses a whole query written as a sequence of clauses. `extra` columns
/// are kept unplaced.
pub fn parse_query(text: &str) -> Result<NatSqlQuery, SyntaxError> {
    let mut p = Parser::new(text)?;
    let mut q = NatSqlQuery::default();
    while !p.at_end() {
        let pos = p.pos();
        match p.clause()? {
            NatSqlClause::Select(items) => q.select.extend(items),
            NatSqlClause::Where(w) => {
                if let Some(last) = q.conditions.last_mut() {
                    last.conj_to_next = Some(w.joiner.unwrap_or(Conj::And));
                }
                q.conditions.extend(w.conditions);
            }
            NatSqlClause::GroupBy(cols) => q.group_by.extend(cols),
            NatSqlClause::OrderBy(o) => {
                if q.order_by.is_some() {
                    return Err(SyntaxError::new(pos, "more than one ORDER BY clause"));
                }
                q.order_by = Some(o);
            }
            NatSqlClause::Extra(col) => q.extras.push(col),
        }
    }
    if q.select.is_empty() {
        return Err(SyntaxError::new(0, "query has no SELECT clause"));
    }
    Ok(q)
}

impl FromStr for NatSqlClause {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_clause(s)
    }
}

impl FromStr for NatSqlQuery {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}

macro_rules! serde_via_text {
    ($ty:ty) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_text!(NatSqlClause);
serde_via_text!(NatSqlQuery);
