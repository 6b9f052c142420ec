//! Recursive-descent parser for the SQL subset found in text-to-SQL gold
//! queries: single `SELECT` blocks with joins, `WHERE`/`GROUP BY`/`HAVING`/
//! `ORDER BY`/`LIMIT`, nested queries in conditions and `FROM`, and the
//! three set operators.

use crate::natsql::{Agg, Conj, Direction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("SQL parse error at byte {position}: {message}")]
pub struct SqlParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub distinct: bool,
    pub select: Vec<SelectExpr>,
    pub from: FromClause,
    pub where_: CondList,
    pub group_by: Vec<ColUnit>,
    pub having: CondList,
    pub order_by: Option<OrderBy>,
    pub limit: Option<String>,
    pub set_op: Option<(SetOp, Box<Query>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectExpr {
    pub agg: Agg,
    pub val: ValUnit,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FromClause {
    pub tables: Vec<TableUnit>,
    pub conds: CondList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableUnit {
    Table { name: String, alias: Option<String> },
    Subquery { query: Box<Query>, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CondList {
    pub conds: Vec<CondUnit>,
    /// `conjs[i]` joins `conds[i]` and `conds[i + 1]`.
    pub conjs: Vec<Conj>,
}

impl CondList {
    pub fn is_empty(&self) -> bool {
        self.conds.is_empty()
    }

    pub fn len(&self) -> usize {
        self.conds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WhereOp {
    Between,
    Eq,
    Gt,
    Lt,
    Ge,
    Le,
    Ne,
    In,
    Like,
    Is,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondUnit {
    pub not: bool,
    pub op: WhereOp,
    pub left: ValUnit,
    pub val1: Value,
    pub val2: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Literal(String),
    Column(ColUnit),
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValUnit {
    pub left: ColUnit,
    pub arith: Option<(ArithOp, ColUnit)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColUnit {
    pub agg: Agg,
    pub column: ColName,
    pub distinct: bool,
}

/// Possibly qualified column name; `name == "*"` for the star.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColName {
    pub qualifier: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBy {
    pub direction: Direction,
    pub items: Vec<ValUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetOp {
    Intersect,
    Union,
    Except,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Number(String),
    Sym(&'static str),
}

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "intersect", "union",
    "except", "join", "on", "as", "and", "or", "not", "in", "like", "between", "is", "asc", "desc",
    "distinct", "inner", "left", "right", "outer", "cross", "all",
];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SqlParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position: usize, message: &str| SqlParseError { position, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() || c == b';' {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'\'' | b'"' | b'`' => {
                let quote = c;
                i += 1;
                let mut value = String::new();
                loop {
                    if i >= bytes.len() {
                        return Err(err(start, "unterminated quoted token"));
                    }
                    if bytes[i] == quote {
                        if bytes.get(i + 1) == Some(&quote) {
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
                let tok = if quote == b'`' { Tok::Ident(value) } else { Tok::Str(value) };
                out.push((tok, start));
            }
            b'0'..=b'9' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                    while i < bytes.len() && is_ident_byte(bytes[i]) {
                        i += 1;
                    }
                    out.push((Tok::Ident(text[start..i].to_string()), start));
                } else {
                    out.push((Tok::Number(text[start..i].to_string()), start));
                }
            }
            _ if is_ident_byte(c) => {
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let two = text.get(i..i + 2).unwrap_or("");
                let sym = match two {
                    "!=" | "<>" => Some("!="),
                    ">=" => Some(">="),
                    "<=" => Some("<="),
                    "==" => Some("="),
                    _ => None,
                };
                if let Some(s) = sym {
                    out.push((Tok::Sym(s), start));
                    i += 2;
                    continue;
                }
                let s = match c {
                    b'(' => "(",
                    b')' => ")",
                    b',' => ",",
                    b'.' => ".",
                    b'*' => "*",
                    b'=' => "=",
                    b'>' => ">",
                    b'<' => "<",
                    b'+' => "+",
                    b'-' => "-",
                    b'/' => "/",
                    _ => return Err(err(start, "unexpected character")),
                };
                out.push((Tok::Sym(s), start));
                i += 1;
            }
        }
    }
    Ok(out)
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

type PResult<T> = Result<T, SqlParseError>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|t| &t.0)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.idx + k).map(|t| &t.0)
    }

    fn error(&self, message: impl Into<String>) -> SqlParseError {
        let position = self.toks.get(self.idx).map_or(self.end, |t| t.1);
        SqlParseError { position, message: message.into() }
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Some(Tok::Ident(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}", kw.to_ascii_uppercase())))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn query(&mut self) -> PResult<Query> {
        let mut q = self.select_core()?;
        let op = if self.eat_kw("intersect") {
            Some(SetOp::Intersect)
        } else if self.eat_kw("union") {
            self.eat_kw("all");
            Some(SetOp::Union)
        } else if self.eat_kw("except") {
            Some(SetOp::Except)
        } else {
            None
        };
        if let Some(op) = op {
            q.set_op = Some((op, Box::new(self.query()?)));
        }
        Ok(q)
    }

    fn select_core(&mut self) -> PResult<Query> {
        if self.is_sym("(") && self.is_kw_at(1, "select") {
            self.idx += 1;
            let q = self.query()?;
            self.expect_sym(")")?;
            return Ok(q);
        }
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        let mut select = vec![self.select_expr()?];
        while self.eat_sym(",") {
            select.push(self.select_expr()?);
        }
        self.expect_kw("from")?;
        let from = self.from_clause()?;
        let where_ = if self.eat_kw("where") { self.conditions()? } else { CondList::default() };
        let mut group_by = Vec::new();
        if self.is_kw("group") && self.is_kw_at(1, "by") {
            self.idx += 2;
            group_by.push(self.col_unit()?);
            while self.eat_sym(",") {
                group_by.push(self.col_unit()?);
            }
        }
        let having = if self.eat_kw("having") { self.conditions()? } else { CondList::default() };
        let mut order_by = None;
        if self.is_kw("order") && self.is_kw_at(1, "by") {
            self.idx += 2;
            let mut direction = Direction::Asc;
            let mut items = Vec::new();
            loop {
                items.push(self.val_unit()?);
                if self.eat_kw("asc") {
                    direction = Direction::Asc;
                } else if self.eat_kw("desc") {
                    direction = Direction::Desc;
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            order_by = Some(OrderBy { direction, items });
        }
        let limit = if self.eat_kw("limit") {
            match self.peek() {
                Some(Tok::Number(n)) => {
                    let n = n.clone();
                    self.idx += 1;
                    Some(n)
                }
                _ => return Err(self.error("LIMIT expects a number")),
            }
        } else {
            None
        };
        Ok(Query { distinct, select, from, where_, group_by, having, order_by, limit, set_op: None })
    }

    fn select_expr(&mut self) -> PResult<SelectExpr> {
        if let Some(Tok::Ident(w)) = self.peek() {
            if let Some(agg) = Agg::from_keyword(w) {
                if matches!(self.peek_at(1), Some(Tok::Sym("("))) {
                    self.idx += 2;
                    let val = self.val_unit()?;
                    self.expect_sym(")")?;
                    return Ok(SelectExpr { agg, val });
                }
            }
        }
        Ok(SelectExpr { agg: Agg::None, val: self.val_unit()? })
    }

    fn from_clause(&mut self) -> PResult<FromClause> {
        let mut from = FromClause { tables: vec![self.table_unit()?], conds: CondList::default() };
        loop {
            let joined = if self.eat_sym(",") {
                true
            } else {
                let save = self.idx;
                for kw in ["inner", "left", "right", "cross", "outer"] {
                    self.eat_kw(kw);
                }
                if self.eat_kw("join") {
                    true
                } else {
                    self.idx = save;
                    false
                }
            };
            if !joined {
                break;
            }
            from.tables.push(self.table_unit()?);
            if self.eat_kw("on") {
                let conds = self.conditions()?;
                if !from.conds.is_empty() {
                    from.conds.conjs.push(Conj::And);
                }
                from.conds.conds.extend(conds.conds);
                from.conds.conjs.extend(conds.conjs);
            }
        }
        Ok(from)
    }

    fn alias(&mut self) -> Option<String> {
        let explicit = self.eat_kw("as");
        match self.peek() {
            Some(Tok::Ident(w)) if explicit || !RESERVED.contains(&w.to_ascii_lowercase().as_str()) => {
                let a = w.clone();
                self.idx += 1;
                Some(a)
            }
            _ => None,
        }
    }

    fn table_unit(&mut self) -> PResult<TableUnit> {
        if self.is_sym("(") {
            self.idx += 1;
            let query = Box::new(self.query()?);
            self.expect_sym(")")?;
            let alias = self.alias();
            return Ok(TableUnit::Subquery { query, alias });
        }
        let name = match self.peek() {
            Some(Tok::Ident(w)) => w.clone(),
            _ => return Err(self.error("expected table name")),
        };
        self.idx += 1;
        let alias = self.alias();
        Ok(TableUnit::Table { name, alias })
    }

    fn conditions(&mut self) -> PResult<CondList> {
        let mut list = CondList { conds: vec![self.condition()?], conjs: Vec::new() };
        loop {
            let conj = if self.eat_kw("and") {
                Conj::And
            } else if self.eat_kw("or") {
                Conj::Or
            } else {
                break;
            };
            list.conjs.push(conj);
            list.conds.push(self.condition()?);
        }
        Ok(list)
    }

    fn condition(&mut self) -> PResult<CondUnit> {
        // Parenthesised single conditions, e.g. `(a = 1)`.
        if self.is_sym("(") && !self.is_kw_at(1, "select") {
            let save = self.idx;
            self.idx += 1;
            if let Ok(c) = self.condition() {
                if self.eat_sym(")") {
                    return Ok(c);
                }
            }
            self.idx = save;
        }
        let mut not = self.eat_kw("not");
        let left = self.val_unit()?;
        not |= self.eat_kw("not");
        let op = match self.peek() {
            Some(Tok::Sym("=")) => WhereOp::Eq,
            Some(Tok::Sym("!=")) => WhereOp::Ne,
            Some(Tok::Sym(">")) => WhereOp::Gt,
            Some(Tok::Sym("<")) => WhereOp::Lt,
            Some(Tok::Sym(">=")) => WhereOp::Ge,
            Some(Tok::Sym("<=")) => WhereOp::Le,
            _ if self.is_kw("like") => WhereOp::Like,
            _ if self.is_kw("in") => WhereOp::In,
            _ if self.is_kw("between") => WhereOp::Between,
            _ if self.is_kw("is") => WhereOp::Is,
            _ => return Err(self.error("expected comparison operator")),
        };
        self.idx += 1;
        if op == WhereOp::Is {
            not |= self.eat_kw("not");
        }
        let val1 = self.value()?;
        let val2 = if op == WhereOp::Between {
            self.expect_kw("and")?;
            Some(self.value()?)
        } else {
            None
        };
        Ok(CondUnit { not, op, left, val1, val2 })
    }

    fn value(&mut self) -> PResult<Value> {
        if self.is_sym("(") && self.is_kw_at(1, "select") {
            self.idx += 1;
            let q = self.query()?;
            self.expect_sym(")")?;
            return Ok(Value::Subquery(Box::new(q)));
        }
        if self.is_sym("-") && matches!(self.peek_at(1), Some(Tok::Number(_))) {
            self.idx += 1;
            if let Some(Tok::Number(n)) = self.peek() {
                let n = format!("-{n}");
                self.idx += 1;
                return Ok(Value::Literal(n));
            }
        }
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.idx += 1;
                Ok(Value::Literal(s))
            }
            Some(Tok::Number(n)) => {
                let n = n.clone();
                self.idx += 1;
                Ok(Value::Literal(n))
            }
            Some(Tok::Ident(w)) if w.eq_ignore_ascii_case("null") => {
                self.idx += 1;
                Ok(Value::Literal("null".into()))
            }
            _ => Ok(Value::Column(self.col_unit()?)),
        }
    }

    fn val_unit(&mut self) -> PResult<ValUnit> {
        let left = self.col_unit()?;
        let op = match self.peek() {
            Some(Tok::Sym("+")) => Some(ArithOp::Add),
            Some(Tok::Sym("-")) => Some(ArithOp::Sub),
            Some(Tok::Sym("*")) => Some(ArithOp::Mul),
            Some(Tok::Sym("/")) => Some(ArithOp::Div),
            _ => None,
        };
        let arith = match op {
            Some(op) => {
                self.idx += 1;
                Some((op, self.col_unit()?))
            }
            None => None,
        };
        Ok(ValUnit { left, arith })
    }

    fn col_unit(&mut self) -> PResult<ColUnit> {
        if let Some(Tok::Ident(w)) = self.peek() {
            if let Some(agg) = Agg::from_keyword(w) {
                if matches!(self.peek_at(1), Some(Tok::Sym("("))) {
                    self.idx += 2;
                    let distinct = self.eat_kw("distinct");
                    let column = self.col_name()?;
                    self.expect_sym(")")?;
                    return Ok(ColUnit { agg, column, distinct });
                }
            }
        }
        if self.is_sym("(") {
            self.idx += 1;
            let inner = self.col_unit()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        let distinct = self.eat_kw("distinct");
        Ok(ColUnit { agg: Agg::None, column: self.col_name()?, distinct })
    }

    fn col_name(&mut self) -> PResult<ColName> {
        if self.eat_sym("*") {
            return Ok(ColName { qualifier: None, name: "*".into() });
        }
        let first = match self.peek() {
            Some(Tok::Ident(w)) if !RESERVED.contains(&w.to_ascii_lowercase().as_str()) => w.clone(),
            _ => return Err(self.error("expected column")),
        };
        self.idx += 1;
        if self.eat_sym(".") {
            let name = match self.peek() {
                Some(Tok::Ident(w)) => w.clone(),
                Some(Tok::Sym("*")) => "*".into(),
                _ => return Err(self.error("expected column after `.`")),
            };
            self.idx += 1;
            return Ok(ColName { qualifier: Some(first), name });
        }
        Ok(ColName { qualifier: None, name: first })
    }
}

pub fn parse_sql(text: &str) -> Result<Query, SqlParseError> {
    let mut p = Parser { toks: lex(text)?, idx: 0, end: text.len() };
    let q = p.query()?;
    if p.idx < p.toks.len() {
        return Err(p.error("unexpected trailing tokens"));
    }
    Ok(q)
}
