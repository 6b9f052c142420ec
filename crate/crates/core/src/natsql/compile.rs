//! NatSQL to SQL conversion over a schema.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::ast::*;
use crate::types::SchemaDb;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("column {0} does not resolve against the schema")]
    UnresolvedColumn(ColumnRef),
    #[error("unconvertible NatSQL: {0}")]
    Unconvertible(String),
}

fn unconvertible(reason: impl Into<String>) -> CompileError {
    CompileError::Unconvertible(reason.into())
}

/// Converts a combined NatSQL query to SQL.
///
/// Tables are joined along shortest foreign-key paths; a condition compared
/// against a column item becomes a nested `SELECT`; aggregate conditions go
/// to `HAVING` with a `GROUP BY` that is either explicit or inferred.
pub fn natsql_to_sql(q: &NatSqlQuery, schema: &SchemaDb) -> Result<String, CompileError> {
    if let Some(col) = q.extras.first() {
        return Err(unconvertible(format!("extra column {col} was never placed")));
    }
    if q.select.is_empty() {
        return Err(unconvertible("empty SELECT list"));
    }
    for col in q.columns() {
        if !schema.resolves(col) {
            return Err(CompileError::UnresolvedColumn(col.clone()));
        }
    }

    let (where_conds, having_conds) = partition_conditions(&q.conditions)?;
    let group_by = if q.group_by.is_empty() {
        infer_group_by(q, schema, &having_conds)?
    } else {
        q.group_by.clone()
    };

    let mut tables: Vec<String> = Vec::new();
    let mut note = |t: &str| {
        if !tables.iter().any(|x| x == t) {
            tables.push(t.to_string());
        }
    };
    q.select.iter().for_each(|i| note(&i.column.table));
    where_conds.iter().for_each(|(c, _)| note(&c.left.column.table));
    having_conds.iter().for_each(|(c, _)| note(&c.left.column.table));
    group_by.iter().for_each(|c| note(&c.table));
    if let Some(o) = &q.order_by {
        o.items.iter().for_each(|i| note(&i.column.table));
    }

    let joins = plan_joins(&tables, schema)?;
    let aliases: HashMap<&str, String> = if joins.len() > 1 {
        joins.iter().enumerate().map(|(i, j)| (j.table.as_str(), format!("T{}", i + 1))).collect()
    } else {
        HashMap::new()
    };
    let r = Renderer { schema, aliases };

    let mut sql = String::from("SELECT ");
    if q.select.iter().any(|i| i.distinct && !i.is_aggregate()) {
        sql.push_str("DISTINCT ");
    }
    let items: Vec<String> = q.select.iter().map(|i| r.item(i, true)).collect();
    sql.push_str(&items.join(", "));

    sql.push_str(" FROM ");
    for (i, join) in joins.iter().enumerate() {
        let name = schema.table_name(&join.table);
        if i > 0 {
            sql.push_str(" JOIN ");
        }
        match r.aliases.get(join.table.as_str()) {
            Some(alias) => {
                sql.push_str(name);
                sql.push_str(" AS ");
                sql.push_str(alias);
            }
            None => sql.push_str(name),
        }
        if let Some((left, right)) = &join.on {
            sql.push_str(&format!(" ON {} = {}", r.column(left), r.column(right)));
        }
    }

    if !where_conds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&r.conditions(&where_conds)?);
    }
    if !group_by.is_empty() {
        let cols: Vec<String> = group_by.iter().map(|c| r.column(c)).collect();
        sql.push_str(" GROUP BY ");
        sql.push_str(&cols.join(", "));
    }
    if !having_conds.is_empty() {
        sql.push_str(" HAVING ");
        sql.push_str(&r.conditions(&having_conds)?);
    }
    if let Some(o) = &q.order_by {
        let items: Vec<String> = o.items.iter().map(|i| r.item(i, false)).collect();
        sql.push_str(" ORDER BY ");
        sql.push_str(&items.join(", "));
        sql.push_str(match o.direction {
            Direction::Asc => " ASC",
            Direction::Desc => " DESC",
        });
        if let Some(n) = o.limit {
            sql.push_str(&format!(" LIMIT {n}"));
        }
    }
    Ok(sql)
}

type Placed<'a> = (&'a Condition, Conj);

/// Splits conditions into WHERE and HAVING lists. Each entry carries the
/// conjunction joining it to the previous entry of the same list.
fn partition_conditions(
    conds: &[Condition],
) -> Result<(Vec<Placed<'_>>, Vec<Placed<'_>>), CompileError> {
    let has_having = conds.iter().any(Condition::is_having);
    let has_where = conds.iter().any(|c| !c.is_having());
    let has_or = conds
        .iter()
        .take(conds.len().saturating_sub(1))
        .any(|c| c.conj_to_next == Some(Conj::Or));
    if has_having && has_where && has_or {
        return Err(unconvertible("`or` mixes WHERE and HAVING conditions"));
    }
    let mut where_conds = Vec::new();
    let mut having_conds = Vec::new();
    for (i, c) in conds.iter().enumerate() {
        if c.is_having() && c.is_subquery() {
            return Err(unconvertible("aggregate compared against a nested query"));
        }
        let conj = if i == 0 {
            Conj::And
        } else {
            conds[i - 1].conj_to_next.unwrap_or(Conj::And)
        };
        if c.is_having() {
            having_conds.push((c, conj));
        } else {
            where_conds.push((c, conj));
        }
    }
    Ok((where_conds, having_conds))
}

/// Grouping key when aggregation needs one and none was annotated.
///
/// Counting rows of the projected column's own table groups by the projected
/// values; counting rows of a related table groups by the projected table's
/// primary key; with nothing projected the aggregated table's key is used.
fn infer_group_by(
    q: &NatSqlQuery,
    schema: &SchemaDb,
    having: &[Placed<'_>],
) -> Result<Vec<ColumnRef>, CompileError> {
    let select_agg = q.select.iter().find(|i| i.is_aggregate());
    let order_agg = q.order_by.as_ref().and_then(|o| o.items.iter().find(|i| i.is_aggregate()));
    let plain: Vec<&ColumnRef> = q
        .select
        .iter()
        .filter(|i| !i.is_aggregate() && !i.column.is_star())
        .map(|i| &i.column)
        .collect();

    let needs_group =
        !having.is_empty() || order_agg.is_some() || (select_agg.is_some() && !plain.is_empty());
    if !needs_group {
        return Ok(Vec::new());
    }
    let agg_table = having
        .first()
        .map(|(c, _)| &c.left.column.table)
        .or(order_agg.map(|i| &i.column.table))
        .or(select_agg.map(|i| &i.column.table))
        .expect("aggregation present");

    if plain.is_empty() {
        return schema
            .primary_key(agg_table)
            .map(|pk| vec![pk.clone()])
            .ok_or_else(|| unconvertible(format!("no primary key to group {agg_table} by")));
    }
    if plain.iter().all(|c| &c.table == agg_table) {
        let mut cols: Vec<ColumnRef> = Vec::new();
        for c in plain {
            if !cols.contains(c) {
                cols.push(c.clone());
            }
        }
        return Ok(cols);
    }
    let anchor = &plain[0].table;
    Ok(match schema.primary_key(anchor) {
        Some(pk) => vec![pk.clone()],
        None => plain.into_iter().cloned().collect(),
    })
}

struct Join {
    table: String,
    on: Option<(ColumnRef, ColumnRef)>,
}

/// Connects `tables` (first one first) by undirected shortest foreign-key
/// paths. Ties go to the lexicographically smaller table.
fn plan_joins(tables: &[String], schema: &SchemaDb) -> Result<Vec<Join>, CompileError> {
    let mut adjacency: BTreeMap<String, BTreeMap<String, (ColumnRef, ColumnRef)>> = BTreeMap::new();
    for (a, b) in &schema.foreign_keys {
        if a.table == b.table {
            continue;
        }
        adjacency
            .entry(a.table.clone())
            .or_default()
            .entry(b.table.clone())
            .or_insert_with(|| (a.clone(), b.clone()));
        adjacency
            .entry(b.table.clone())
            .or_default()
            .entry(a.table.clone())
            .or_insert_with(|| (b.clone(), a.clone()));
    }

    let mut joins = vec![Join { table: tables[0].clone(), on: None }];
    for target in &tables[1..] {
        if joins.iter().any(|j| &j.table == target) {
            continue;
        }
        let mut sources: Vec<&String> = joins.iter().map(|j| &j.table).collect();
        sources.sort();
        let mut parent: HashMap<String, Option<String>> = HashMap::new();
        let mut queue = VecDeque::new();
        for s in sources {
            parent.insert(s.clone(), None);
            queue.push_back(s.clone());
        }
        while let Some(cur) = queue.pop_front() {
            if &cur == target {
                break;
            }
            for next in adjacency.get(&cur).into_iter().flat_map(|m| m.keys()) {
                if !parent.contains_key(next) {
                    parent.insert(next.clone(), Some(cur.clone()));
                    queue.push_back(next.clone());
                }
            }
        }
        if !parent.contains_key(target) {
            return Err(unconvertible(format!("no foreign-key path reaches {target}")));
        }
        let mut path = vec![target.clone()];
        while let Some(Some(p)) = parent.get(path.last().unwrap()) {
            path.push(p.clone());
        }
        path.reverse();
        for pair in path.windows(2) {
            let (from, to) = (&pair[0], &pair[1]);
            let fk = adjacency[from][to].clone();
            joins.push(Join { table: to.clone(), on: Some(fk) });
        }
    }
    Ok(joins)
}

struct Renderer<'a> {
    schema: &'a SchemaDb,
    aliases: HashMap<&'a str, String>,
}

impl Renderer<'_> {
    fn column(&self, c: &ColumnRef) -> String {
        let name = if c.is_star() { "*" } else { self.schema.column_name(c) };
        match self.aliases.get(c.table.as_str()) {
            Some(alias) if !c.is_star() => format!("{alias}.{name}"),
            _ => name.to_string(),
        }
    }

    fn item(&self, i: &SelectItem, in_select: bool) -> String {
        let col = self.column(&i.column);
        match i.agg {
            Agg::None if in_select => col,
            Agg::None if i.distinct => format!("DISTINCT {col}"),
            Agg::None => col,
            agg if i.distinct => format!("{}(DISTINCT {col})", agg.keyword()),
            agg => format!("{}({col})", agg.keyword()),
        }
    }

    fn subquery(&self, i: &SelectItem) -> String {
        let table = self.schema.table_name(&i.column.table);
        let bare = Renderer { schema: self.schema, aliases: HashMap::new() };
        format!("(SELECT {} FROM {table})", bare.item(i, false))
    }

    fn conditions(&self, conds: &[Placed<'_>]) -> Result<String, CompileError> {
        let mut out = String::new();
        for (i, (c, conj)) in conds.iter().enumerate() {
            if i > 0 {
                out.push_str(match conj {
                    Conj::And => " AND ",
                    Conj::Or => " OR ",
                });
            }
            out.push_str(&self.item(&c.left, false));
            out.push(' ');
            out.push_str(&sql_op(c.op));
            out.push(' ');
            match &c.right {
                Rhs::Literal(l) => out.push_str(&l.to_string()),
                Rhs::Range(lo, hi) => out.push_str(&format!("{lo} AND {hi}")),
                Rhs::Item(item) => out.push_str(&self.subquery(item)),
            }
        }
        Ok(out)
    }
}

fn sql_op(op: Op) -> String {
    op.symbol().to_ascii_uppercase()
}
