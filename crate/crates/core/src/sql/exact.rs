//! Component-wise exact-set matching of two SQL queries.
//!
//! Both sides are normalised before comparison: aliases are resolved to
//! table names, unqualified columns are attributed to a table when that is
//! unambiguous, literal values are replaced by a placeholder, and every
//! unordered component (select list, conditions, group-by, from tables) is
//! compared as a sorted multiset.

use std::collections::{BTreeMap, BTreeSet};

use super::parser::*;
use crate::natsql::{Agg, Direction};
use crate::types::SchemaDb;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NCol {
    agg: Agg,
    name: String,
    distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NVal {
    left: NCol,
    arith: Option<(ArithOp, NCol)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum NValue {
    Placeholder,
    Col(NCol),
    Sub(Box<NQuery>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NCond {
    not: bool,
    op: WhereOp,
    left: NVal,
    val1: NValue,
    val2: Option<NValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum NTable {
    Table(String),
    Sub(Box<NQuery>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NQuery {
    select: Vec<(Agg, NVal)>,
    from: Vec<NTable>,
    where_: Vec<NCond>,
    group_by: Vec<NCol>,
    having: Vec<NCond>,
    order_by: Option<(Direction, Vec<NVal>)>,
    limit: bool,
    keywords: BTreeSet<&'static str>,
    set_op: Option<(SetOp, Box<NQuery>)>,
}

struct Scope<'a> {
    aliases: BTreeMap<String, String>,
    tables: Vec<String>,
    parent: Option<&'a Scope<'a>>,
    schema: Option<&'a SchemaDb>,
}

impl Scope<'_> {
    fn resolve_qualifier(&self, q: &str) -> String {
        let q = q.to_lowercase();
        if let Some(t) = self.aliases.get(&q) {
            return t.clone();
        }
        match self.parent {
            Some(p) if !self.tables.contains(&q) && p.knows(&q) => p.resolve_qualifier(&q),
            _ => q,
        }
    }

    fn knows(&self, q: &str) -> bool {
        self.aliases.contains_key(q)
            || self.tables.iter().any(|t| t == q)
            || self.parent.is_some_and(|p| p.knows(q))
    }

    fn resolve_bare(&self, column: &str) -> String {
        if self.tables.len() == 1 {
            return self.tables[0].clone();
        }
        if let Some(schema) = self.schema {
            let owners: Vec<&String> = self
                .tables
                .iter()
                .filter(|t| {
                    schema
                        .table(t)
                        .is_some_and(|tb| tb.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
                })
                .collect();
            if let Some(first) = owners.first() {
                return (*first).clone();
            }
        }
        String::new()
    }

    fn col(&self, c: &ColUnit) -> NCol {
        let name = if c.column.name == "*" {
            "*".to_string()
        } else {
            let column = c.column.name.to_lowercase();
            let table = match &c.column.qualifier {
                Some(q) => self.resolve_qualifier(q),
                None => self.resolve_bare(&column),
            };
            format!("{table}.{column}")
        };
        NCol { agg: c.agg, name, distinct: c.distinct }
    }

    fn val(&self, v: &ValUnit) -> NVal {
        NVal { left: self.col(&v.left), arith: v.arith.as_ref().map(|(op, c)| (*op, self.col(c))) }
    }

    fn value(&self, v: &Value) -> NValue {
        match v {
            Value::Literal(_) => NValue::Placeholder,
            Value::Column(c) => NValue::Col(self.col(c)),
            Value::Subquery(q) => NValue::Sub(Box::new(normalize(q, Some(self), self.schema))),
        }
    }

    fn conds(&self, list: &CondList) -> Vec<NCond> {
        let mut out: Vec<NCond> = list
            .conds
            .iter()
            .map(|c| NCond {
                not: c.not,
                op: c.op,
                left: self.val(&c.left),
                val1: self.value(&c.val1),
                val2: c.val2.as_ref().map(|v| self.value(v)),
            })
            .collect();
        out.sort();
        out
    }
}

fn normalize(q: &Query, parent: Option<&Scope<'_>>, schema: Option<&SchemaDb>) -> NQuery {
    let mut scope = Scope { aliases: BTreeMap::new(), tables: Vec::new(), parent, schema };
    for t in &q.from.tables {
        if let TableUnit::Table { name, alias } = t {
            let name = name.to_lowercase();
            if let Some(a) = alias {
                scope.aliases.insert(a.to_lowercase(), name.clone());
            }
            scope.tables.push(name);
        }
    }

    let mut from: Vec<NTable> = q
        .from
        .tables
        .iter()
        .map(|t| match t {
            TableUnit::Table { name, .. } => NTable::Table(name.to_lowercase()),
            TableUnit::Subquery { query, .. } => NTable::Sub(Box::new(normalize(query, None, schema))),
        })
        .collect();
    from.sort();

    let mut select: Vec<(Agg, NVal)> = q.select.iter().map(|s| (s.agg, scope.val(&s.val))).collect();
    select.sort();

    let mut group_by: Vec<NCol> = q.group_by.iter().map(|c| scope.col(c)).collect();
    group_by.sort();
    group_by.dedup();

    let order_by = q
        .order_by
        .as_ref()
        .map(|o| (o.direction, o.items.iter().map(|v| scope.val(v)).collect()));

    let mut keywords = BTreeSet::new();
    for list in [&q.where_, &q.having] {
        if list.conjs.contains(&crate::natsql::Conj::Or) {
            keywords.insert("or");
        }
        for c in &list.conds {
            if c.not {
                keywords.insert("not");
            }
            match c.op {
                WhereOp::In => {
                    keywords.insert("in");
                }
                WhereOp::Like => {
                    keywords.insert("like");
                }
                _ => {}
            }
        }
    }

    NQuery {
        select,
        from,
        where_: scope.conds(&q.where_),
        group_by,
        having: scope.conds(&q.having),
        order_by,
        limit: q.limit.is_some(),
        keywords,
        set_op: q
            .set_op
            .as_ref()
            .map(|(op, rhs)| (*op, Box::new(normalize(rhs, None, schema)))),
    }
}

/// Per-component outcome of an exact-set comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComponentMatch {
    pub select: bool,
    pub from: bool,
    pub where_: bool,
    pub group_by: bool,
    pub having: bool,
    pub order_by: bool,
    pub keywords: bool,
    pub set_op: bool,
}

impl ComponentMatch {
    pub fn all(&self) -> bool {
        self.select
            && self.from
            && self.where_
            && self.group_by
            && self.having
            && self.order_by
            && self.keywords
            && self.set_op
    }
}

/// Compares the components of two parsed queries.
pub fn compare(pred: &Query, gold: &Query, schema: Option<&SchemaDb>) -> ComponentMatch {
    let p = normalize(pred, None, schema);
    let g = normalize(gold, None, schema);
    ComponentMatch {
        select: p.select == g.select,
        from: p.from == g.from,
        where_: p.where_ == g.where_,
        group_by: p.group_by == g.group_by,
        having: p.having == g.having,
        order_by: p.order_by == g.order_by && p.limit == g.limit,
        keywords: p.keywords == g.keywords,
        set_op: p.set_op == g.set_op,
    }
}

/// Exact-set match of two parsed queries.
pub fn exact_match_queries(pred: &Query, gold: &Query, schema: Option<&SchemaDb>) -> bool {
    normalize(pred, None, schema) == normalize(gold, None, schema)
}

/// Exact-set match of two SQL strings. Returns `Err` when either side does
/// not parse.
pub fn exact_match(pred: &str, gold: &str, schema: Option<&SchemaDb>) -> Result<bool, SqlParseError> {
    let g = parse_sql(gold)?;
    let p = parse_sql(pred)?;
    Ok(exact_match_queries(&p, &g, schema))
}
