//! Compositional elements: maximal leading or trailing runs of WHERE and
//! ORDER BY units, together with the noun they are judged to modify.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::natsql::{ClauseKind, ColumnRef};
use crate::schema_match::PhraseMatcher;
use crate::types::{AnnotatedExample, DepParse, DepToken, SchemaDb, Span, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Leading,
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NounRef {
    pub index: usize,
    pub form: String,
    pub lemma: String,
}

impl NounRef {
    fn of(t: &DepToken) -> Self {
        NounRef { index: t.index, form: t.form.clone(), lemma: t.lemma.to_lowercase() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("element starts the sentence, there is no preceding token")]
    NoPrecedingToken,
    #[error("element does not belong to example `{0}`")]
    ForeignElement(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionalElement {
    pub source_example: String,
    pub db_id: String,
    pub units: Vec<Unit>,
    pub position: Position,
    /// `None` when the element starts its sentence.
    pub modified_noun: Option<NounRef>,
    pub tables_used: BTreeSet<String>,
    /// Explicit GROUP BY columns of the source example.
    pub source_group_by: Vec<ColumnRef>,
    /// Source tokens covered by the element, with their original indices.
    pub tokens: Vec<DepToken>,
}

impl CompositionalElement {
    pub fn span(&self) -> Span {
        Span::new(self.units[0].span().start, self.units[self.units.len() - 1].span().end)
    }

    pub fn all_where(&self) -> bool {
        self.units.iter().all(|u| u.kind() == ClauseKind::Where)
    }

    pub fn text(&self) -> String {
        crate::types::join_forms(&self.tokens)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.units.is_empty() {
            out.push("element has no units".to_string());
        }
        for u in &self.units {
            if !matches!(u.kind(), ClauseKind::Where | ClauseKind::OrderBy) {
                out.push(format!("element unit has kind {}", u.kind()));
            }
            if !u.annotation.no_mentioned_columns.is_empty() {
                out.push("element unit carries a NO MENTIONED mark".to_string());
            }
        }
        if !self.units.is_empty() && self.tokens.len() != self.span().len() {
            out.push("element tokens do not match its span".to_string());
        }
        out
    }
}

fn extractable(u: &Unit) -> bool {
    matches!(u.kind(), ClauseKind::Where | ClauseKind::OrderBy)
}

fn tables_of(units: &[Unit]) -> BTreeSet<String> {
    units
        .iter()
        .filter_map(|u| u.annotation.payload.as_ref())
        .flat_map(|c| c.columns())
        .map(|c| c.table.clone())
        .collect()
}

/// Syntactic head of a span: its first token whose governor lies outside.
fn span_head(parse: &DepParse, span: Span) -> usize {
    (span.start..span.end)
        .find(|&i| {
            let t = &parse.tokens[i];
            t.is_root() || !span.contains(t.head)
        })
        .unwrap_or(span.start)
}

/// The token an element modifies: the latest earlier mention of one of its
/// tables, else the token right before it.
pub fn modified_noun(
    parse: &DepParse,
    element_start: usize,
    tables_used: &BTreeSet<String>,
    matcher: &PhraseMatcher,
) -> Result<NounRef, ExtractError> {
    let mention = tables_used
        .iter()
        .flat_map(|t| matcher.table_mentions(parse, t))
        .filter(|s| s.end <= element_start)
        .max_by_key(|s| (s.end, s.start));
    if let Some(span) = mention {
        return Ok(NounRef::of(&parse.tokens[span_head(parse, span)]));
    }
    if element_start == 0 {
        return Err(ExtractError::NoPrecedingToken);
    }
    Ok(NounRef::of(&parse.tokens[element_start - 1]))
}

/// Element extractor bound to one schema.
pub struct Extractor {
    matcher: PhraseMatcher,
}

impl Extractor {
    pub fn new(schema: &SchemaDb) -> Self {
        Extractor { matcher: PhraseMatcher::new(schema) }
    }

    pub fn matcher(&self) -> &PhraseMatcher {
        &self.matcher
    }

    /// At most one leading and one trailing element.
    pub fn extract(&self, e: &AnnotatedExample) -> Vec<CompositionalElement> {
        let n = e.units.len();
        let lead = e.units.iter().take_while(|u| extractable(u)).count();
        let trail = e.units.iter().rev().take_while(|u| extractable(u)).count();

        let mut ranges = Vec::new();
        if lead > 0 && lead < n {
            // Overlap is only possible when every unit is extractable; the
            // trailing element wins then.
            ranges.push((0..lead, Position::Leading));
        }
        if trail > 0 {
            ranges.push((n - trail..n, Position::Trailing));
        }

        let group_by = explicit_group_by(e);
        let mut out = Vec::new();
        for (range, position) in ranges {
            let units = &e.units[range];
            if units.iter().any(|u| !u.annotation.no_mentioned_columns.is_empty()) {
                tracing::debug!(example = %e.example_id, ?position, "element dropped: NO MENTIONED");
                continue;
            }
            let tables_used = tables_of(units);
            if tables_used.len() > 1 {
                tracing::debug!(example = %e.example_id, tables = ?tables_used, "multi-table element");
            }
            let span = Span::new(units[0].span().start, units[units.len() - 1].span().end);
            let modified = modified_noun(&e.parse, span.start, &tables_used, &self.matcher).ok();
            out.push(CompositionalElement {
                source_example: e.example_id.clone(),
                db_id: e.db_id.clone(),
                units: units.to_vec(),
                position,
                modified_noun: modified,
                tables_used,
                source_group_by: group_by.clone(),
                tokens: e.parse.tokens[span.start..span.end].to_vec(),
            });
        }
        out
    }

    /// Recomputes an element's modified noun against its source example.
    pub fn modified_noun(
        &self,
        el: &CompositionalElement,
        e: &AnnotatedExample,
    ) -> Result<NounRef, ExtractError> {
        if el.source_example != e.example_id {
            return Err(ExtractError::ForeignElement(e.example_id.clone()));
        }
        modified_noun(&e.parse, el.span().start, &el.tables_used, &self.matcher)
    }
}

/// GROUP BY columns stated by the example's own units.
pub fn explicit_group_by(e: &AnnotatedExample) -> Vec<ColumnRef> {
    let mut out: Vec<ColumnRef> = Vec::new();
    for u in &e.units {
        if let Some(crate::natsql::NatSqlClause::GroupBy(cols)) = &u.annotation.payload {
            for c in cols {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
    }
    out
}

pub fn extract_elements(e: &AnnotatedExample, schema: &SchemaDb) -> Vec<CompositionalElement> {
    Extractor::new(schema).extract(e)
}
