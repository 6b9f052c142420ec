use super::ast::*;
use crate::types::ClauseAnnotation;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CombineError {
    #[error("no SELECT clause among the units")]
    NoSelectClause,
    #[error("ORDER BY clauses disagree: {0}")]
    ConflictingOrderBy(String),
}

/// Builds the NatSQL query of a sentence from its units' clauses, in unit
/// order. `NONE` units are skipped.
///
/// `extra` columns are placed relative to their neighbours: after an
/// immediately preceding `ORDER BY` they extend its item list; otherwise a
/// later `ORDER BY` receives them at its front; failing both they join the
/// `SELECT` list.
pub fn combine_clauses<'a, I>(units: I) -> Result<NatSqlQuery, CombineError>
where
    I: IntoIterator<Item = &'a ClauseAnnotation>,
{
    let clauses: Vec<&NatSqlClause> =
        units.into_iter().filter_map(|u| u.payload.as_ref()).collect();

    let mut q = NatSqlQuery::default();
    let mut previous: Option<ClauseKind> = None;
    let mut pending_front: Vec<ColumnRef> = Vec::new();

    for (i, clause) in clauses.iter().enumerate() {
        match clause {
            NatSqlClause::Select(items) => q.select.extend(items.iter().cloned()),
            NatSqlClause::Where(w) => {
                if let Some(last) = q.conditions.last_mut() {
                    last.conj_to_next = Some(w.joiner.unwrap_or(Conj::And));
                }
                q.conditions.extend(w.conditions.iter().cloned());
                if let Some(last) = q.conditions.last_mut() {
                    last.conj_to_next = None;
                }
            }
            NatSqlClause::GroupBy(cols) => {
                for c in cols {
                    if !q.group_by.contains(c) {
                        q.group_by.push(c.clone());
                    }
                }
            }
            NatSqlClause::OrderBy(o) => {
                let mut incoming = o.clone();
                if !pending_front.is_empty() {
                    let mut items: Vec<SelectItem> =
                        pending_front.drain(..).map(SelectItem::column).collect();
                    items.append(&mut incoming.items);
                    incoming.items = items;
                }
                merge_order(&mut q.order_by, incoming)?;
            }
            NatSqlClause::Extra(col) => {
                if previous == Some(ClauseKind::OrderBy) {
                    let order = q.order_by.as_mut().expect("ORDER BY seen");
                    order.items.push(SelectItem::column(col.clone()));
                } else if clauses[i + 1..].iter().any(|c| c.kind() == ClauseKind::OrderBy) {
                    pending_front.push(col.clone());
                } else {
                    q.select.push(SelectItem::column(col.clone()));
                }
                // An extra column does not change what it sits next to.
                continue;
            }
        }
        previous = Some(clause.kind());
    }
    debug_assert!(pending_front.is_empty());

    if q.select.is_empty() {
        return Err(CombineError::NoSelectClause);
    }
    Ok(q)
}

fn merge_order(slot: &mut Option<OrderClause>, incoming: OrderClause) -> Result<(), CombineError> {
    let Some(existing) = slot else {
        *slot = Some(incoming);
        return Ok(());
    };
    if existing.direction != incoming.direction {
        return Err(CombineError::ConflictingOrderBy(format!(
            "{} vs {}",
            existing.direction, incoming.direction
        )));
    }
    match (existing.limit, incoming.limit) {
        (Some(a), Some(b)) if a != b => {
            return Err(CombineError::ConflictingOrderBy(format!("LIMIT {a} vs LIMIT {b}")));
        }
        (None, Some(b)) => existing.limit = Some(b),
        _ => {}
    }
    existing.items.extend(incoming.items);
    Ok(())
}
