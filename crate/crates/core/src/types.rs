//! Shared domain types.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::natsql::{ClauseKind, ColumnRef, NatSqlClause, NatSqlQuery, Rhs};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepToken {
    /// 0-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub pos: String,
    /// Governing token; the root points at itself.
    pub head: usize,
    pub deprel: String,
}

impl DepToken {
    pub fn is_root(&self) -> bool {
        self.head == self.index
    }

    pub fn is_punct(&self) -> bool {
        self.pos == "PUNCT" || self.deprel == "punct"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepParse {
    pub question_id: String,
    pub tokens: Vec<DepToken>,
}

impl DepParse {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.tokens.iter().position(DepToken::is_root)
    }

    pub fn text(&self) -> String {
        join_forms(&self.tokens)
    }

    pub fn span_text(&self, span: Span) -> String {
        join_forms(&self.tokens[span.start..span.end])
    }

    /// Children lists, in token order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len()];
        for t in &self.tokens {
            if !t.is_root() && t.head < self.tokens.len() {
                children[t.head].push(t.index);
            }
        }
        children
    }

    /// Tree violations; empty for a well-formed parse.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.tokens.len();
        if n == 0 {
            out.push("empty parse".to_string());
            return out;
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i {
                out.push(format!("token index {} at position {i}", t.index));
            }
            if t.head >= n {
                out.push(format!("head out of bounds at {i}"));
            }
            if t.deprel.is_empty()
                || !t.deprel.bytes().all(|b| b.is_ascii_lowercase() || b == b':' || b == b'_')
            {
                out.push(format!("relation label `{}` at {i} is not lowercase ascii", t.deprel));
            }
        }
        let roots = self.tokens.iter().enumerate().filter(|(i, t)| t.head == *i).count();
        if roots != 1 {
            out.push(format!("expected exactly one root, found {roots}"));
        }
        if out.is_empty() {
            for start in 0..n {
                let mut seen = HashSet::new();
                let mut cur = start;
                while self.tokens[cur].head != cur {
                    if !seen.insert(cur) {
                        out.push(format!("head cycle through {start}"));
                        break;
                    }
                    cur = self.tokens[cur].head;
                }
                if !out.is_empty() {
                    break;
                }
            }
        }
        out
    }
}

pub(crate) fn join_forms(tokens: &[DepToken]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.form);
    }
    s
}

/// Half-open token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubSentence {
    pub span: Span,
    pub text: String,
}

impl SubSentence {
    pub fn from_parse(parse: &DepParse, span: Span) -> Self {
        SubSentence { span, text: parse.span_text(span) }
    }
}

/// Segments from a sorted boundary list (segment starts, excluding 0).
pub fn segments_from_boundaries(parse: &DepParse, boundaries: &[usize]) -> Vec<SubSentence> {
    let mut starts = vec![0];
    starts.extend(boundaries.iter().copied().filter(|&b| b > 0 && b < parse.len()));
    starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let e = starts.get(i + 1).copied().unwrap_or(parse.len());
            SubSentence::from_parse(parse, Span::new(s, e))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClauseAnnotation {
    pub kind: ClauseKind,
    pub payload: Option<NatSqlClause>,
    pub no_mentioned_columns: Vec<ColumnRef>,
}

impl ClauseAnnotation {
    pub fn none() -> Self {
        ClauseAnnotation { kind: ClauseKind::None, payload: None, no_mentioned_columns: Vec::new() }
    }

    pub fn clause(clause: NatSqlClause) -> Self {
        ClauseAnnotation { kind: clause.kind(), payload: Some(clause), no_mentioned_columns: Vec::new() }
    }

    pub fn with_no_mentioned(mut self, cols: Vec<ColumnRef>) -> Self {
        self.no_mentioned_columns = cols;
        self
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match (&self.kind, &self.payload) {
            (ClauseKind::None, Some(_)) => out.push("NONE annotation carries a payload".into()),
            (ClauseKind::None, None) => {}
            (kind, None) => out.push(format!("{kind} annotation without payload")),
            (kind, Some(p)) if p.kind() != *kind => {
                out.push(format!("{kind} annotation carries a {} payload", p.kind()))
            }
            _ => {}
        }
        out
    }
}

/// One sub-sentence with its clause annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Unit {
    pub sentence: SubSentence,
    pub annotation: ClauseAnnotation,
}

impl Unit {
    pub fn kind(&self) -> ClauseKind {
        self.annotation.kind
    }

    pub fn span(&self) -> Span {
        self.sentence.span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemaDb {
    pub db_id: String,
    pub tables: Vec<Table>,
    #[serde(default)]
    pub primary_keys: Vec<ColumnRef>,
    #[serde(default)]
    pub foreign_keys: Vec<(ColumnRef, ColumnRef)>,
}

impl SchemaDb {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, col: &ColumnRef) -> Option<&Column> {
        self.table(&col.table)?.columns.iter().find(|c| c.name.eq_ignore_ascii_case(&col.column))
    }

    /// True when the reference names a table of this schema and, unless it
    /// is a star reference, one of its columns.
    pub fn resolves(&self, col: &ColumnRef) -> bool {
        if col.is_star() {
            self.table(&col.table).is_some()
        } else {
            self.column(col).is_some()
        }
    }

    pub fn primary_key(&self, table: &str) -> Option<&ColumnRef> {
        self.primary_keys.iter().find(|pk| pk.table.eq_ignore_ascii_case(table))
    }

    pub fn is_primary_key(&self, col: &ColumnRef) -> bool {
        self.primary_keys.iter().any(|pk| pk == col)
    }

    /// Schema-spelled table name, falling back to the reference itself.
    pub fn table_name<'a>(&'a self, name: &'a str) -> &'a str {
        self.table(name).map_or(name, |t| t.name.as_str())
    }

    /// Schema-spelled column name, falling back to the reference itself.
    pub fn column_name<'a>(&'a self, col: &'a ColumnRef) -> &'a str {
        self.column(col).map_or(col.column.as_str(), |c| c.name.as_str())
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut tables = BTreeSet::new();
        for t in &self.tables {
            if !tables.insert(t.name.to_ascii_lowercase()) {
                out.push(format!("duplicate table {}", t.name));
            }
            let mut cols = BTreeSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.to_ascii_lowercase()) {
                    out.push(format!("duplicate column {}.{}", t.name, c.name));
                }
            }
        }
        for pk in &self.primary_keys {
            if !self.resolves(pk) {
                out.push(format!("unresolved primary key {pk}"));
            }
        }
        for (a, b) in &self.foreign_keys {
            for end in [a, b] {
                if !self.resolves(end) || end.is_star() {
                    out.push(format!("unresolved foreign key endpoint {end}"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedExample {
    pub example_id: String,
    pub db_id: String,
    pub parse: DepParse,
    pub units: Vec<Unit>,
}

impl AnnotatedExample {
    pub fn sentence(&self) -> String {
        self.parse.text()
    }

    pub fn annotations(&self) -> impl Iterator<Item = &ClauseAnnotation> {
        self.units.iter().map(|u| &u.annotation)
    }

    /// Combined NatSQL of all units.
    pub fn natsql(&self) -> Result<NatSqlQuery, crate::natsql::CombineError> {
        crate::natsql::combine_clauses(self.annotations())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SUB")]
    Sub,
    #[serde(rename = "APP")]
    App,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sub => "SUB",
            Method::App => "APP",
        })
    }
}

pub use crate::natsql::Conj as Connector;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeneratedExample {
    pub example_id: String,
    pub db_id: String,
    pub source_ids: (String, String),
    pub method: Method,
    pub connector: Option<Connector>,
    pub sentence: String,
    /// Token sequence of `sentence`, with a dependency tree spliced from the
    /// source parses.
    pub parse: DepParse,
    pub units: Vec<Unit>,
    pub natsql: NatSqlQuery,
    pub sql: Option<String>,
}

impl GeneratedExample {
    /// View as an annotated example, e.g. to feed generated data back in as
    /// hosts.
    pub fn to_annotated(&self) -> AnnotatedExample {
        AnnotatedExample {
            example_id: self.example_id.clone(),
            db_id: self.db_id.clone(),
            parse: self.parse.clone(),
            units: self.units.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyLevel {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl DifficultyLevel {
    pub const ALL: [DifficultyLevel; 4] =
        [DifficultyLevel::Easy, DifficultyLevel::Medium, DifficultyLevel::Hard, DifficultyLevel::Extra];
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifficultyLevel::Easy => "easy",
            DifficultyLevel::Medium => "medium",
            DifficultyLevel::Hard => "hard",
            DifficultyLevel::Extra => "extra",
        })
    }
}

/// Unit spans must tile the sentence in order, each carrying its own text.
pub fn partition_violations(e: &AnnotatedExample) -> Vec<String> {
    let mut out = Vec::new();
    let n = e.parse.len();
    let mut expected = 0;
    for unit in &e.units {
        let span = unit.span();
        if span.is_empty() || span.end > n {
            out.push(format!("invalid span {span}"));
            continue;
        }
        if span.start > expected {
            out.push(format!("span gap at {expected}"));
        } else if span.start < expected {
            out.push(format!("span overlap at {}", span.start));
        }
        expected = span.end;
        if unit.sentence.text != e.parse.span_text(span) {
            out.push(format!("sub-sentence text mismatch at {span}"));
        }
    }
    if e.units.is_empty() {
        out.push("example has no units".to_string());
    } else if expected < n {
        out.push(format!("span gap at {expected}"));
    }
    out
}

/// Checks every type invariant of `e` and resolves its column and table
/// references against `schema`. Returns human-readable violations, empty when
/// the example is well-formed.
pub fn validate_example(e: &AnnotatedExample, schema: &SchemaDb) -> Vec<String> {
    let mut out = e.parse.violations();
    if !e.db_id.eq_ignore_ascii_case(&schema.db_id) {
        out.push(format!("db_id {} does not match schema {}", e.db_id, schema.db_id));
    }
    out.extend(partition_violations(e));
    for unit in &e.units {
        out.extend(unit.annotation.violations());
        if let Some(payload) = &unit.annotation.payload {
            for col in payload.columns() {
                check_column(schema, col, &mut out);
            }
            if let NatSqlClause::Where(w) = payload {
                for c in &w.conditions {
                    if matches!(&c.right, Rhs::Range(..)) != (c.op == crate::natsql::Op::Between) {
                        out.push(format!("between operator without two literals in `{c}`"));
                    }
                }
            }
        }
        for col in &unit.annotation.no_mentioned_columns {
            check_column(schema, col, &mut out);
        }
    }
    out
}

fn check_column(schema: &SchemaDb, col: &ColumnRef, out: &mut Vec<String>) {
    if schema.table(&col.table).is_none() {
        out.push(format!("unresolved table {}", col.table));
    } else if !schema.resolves(col) {
        out.push(format!("unresolved column {col}"));
    }
}
