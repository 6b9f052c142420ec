//! Difficulty buckets following the component-count heuristic used by the
//! standard text-to-SQL evaluation script, including its counting quirks
//! (negated conditions and `HAVING` conjunctions count as aggregates).

use super::parser::*;
use crate::natsql::{Agg, Conj};
use crate::types::DifficultyLevel;

fn all_conds(q: &Query) -> impl Iterator<Item = &CondUnit> {
    q.from.conds.conds.iter().chain(&q.where_.conds).chain(&q.having.conds)
}

fn component1(q: &Query) -> usize {
    let mut n = 0;
    n += usize::from(!q.where_.is_empty());
    n += usize::from(!q.group_by.is_empty());
    n += usize::from(q.order_by.is_some());
    n += usize::from(q.limit.is_some());
    n += q.from.tables.len().saturating_sub(1);
    n += [&q.from.conds, &q.where_, &q.having]
        .iter()
        .flat_map(|l| &l.conjs)
        .filter(|c| **c == Conj::Or)
        .count();
    n += all_conds(q).filter(|c| c.op == WhereOp::Like).count();
    n
}

fn component2(q: &Query) -> usize {
    let nested = all_conds(q)
        .flat_map(|c| std::iter::once(&c.val1).chain(c.val2.as_ref()))
        .filter(|v| matches!(v, Value::Subquery(_)))
        .count();
    nested + usize::from(q.set_op.is_some())
}

fn others(q: &Query) -> usize {
    let mut aggs = q.select.iter().filter(|s| s.agg != Agg::None).count();
    aggs += q.where_.conds.iter().filter(|c| c.not).count();
    aggs += q.group_by.iter().filter(|c| c.agg != Agg::None).count();
    if let Some(o) = &q.order_by {
        for v in &o.items {
            aggs += usize::from(v.left.agg != Agg::None);
            if let Some((_, c)) = &v.arith {
                aggs += usize::from(c.agg != Agg::None);
            }
        }
    }
    aggs += q.having.conds.iter().filter(|c| c.not).count() + q.having.conjs.len();

    usize::from(aggs > 1)
        + usize::from(q.select.len() > 1)
        + usize::from(q.where_.len() > 1)
        + usize::from(q.group_by.len() > 1)
}

pub fn classify_query(q: &Query) -> DifficultyLevel {
    let (c1, c2, o) = (component1(q), component2(q), others(q));
    if c1 <= 1 && o == 0 && c2 == 0 {
        DifficultyLevel::Easy
    } else if (o <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && o < 2 && c2 == 0) {
        DifficultyLevel::Medium
    } else if (o > 2 && c1 <= 2 && c2 == 0)
        || (2 < c1 && c1 <= 3 && o <= 2 && c2 == 0)
        || (c1 <= 1 && o == 0 && c2 <= 1)
    {
        DifficultyLevel::Hard
    } else {
        DifficultyLevel::Extra
    }
}

pub fn classify_difficulty(sql: &str) -> Result<DifficultyLevel, SqlParseError> {
    Ok(classify_query(&parse_sql(sql)?))
}
