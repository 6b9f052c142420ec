//! File formats: tab-separated parse files, JSON-lines records for
//! examples, elements and generated data, schema files and SQL lists.
//!
//! JSON-lines artifacts may start with a `{"cgforge_header": ...}` line and
//! end with a `{"cgforge_summary": ...}` line; readers skip both.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::extract::{CompositionalElement, NounRef, Position};
use crate::natsql::{parse_clause, parse_query, ClauseKind, ColumnRef};
use crate::types::{
    partition_violations, AnnotatedExample, ClauseAnnotation, Connector, DepParse, DepToken, GeneratedExample,
    Method, SchemaDb, Span, SubSentence, Unit,
};

pub const HEADER_KEY: &str = "cgforge_header";
pub const SUMMARY_KEY: &str = "cgforge_summary";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Format { line, message: message.into() }
}

/// One sentence of a parse file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRecord {
    pub question_id: String,
    pub db_id: Option<String>,
    pub model: String,
    pub parse: DepParse,
}

fn header_fields(line: &str, lineno: usize) -> Result<(String, Option<String>, String), IoError> {
    let body = line.trim_start_matches('#').trim();
    let (mut qid, mut db, mut model) = (None, None, None);
    for field in body.split_whitespace() {
        let Some((k, v)) = field.split_once('=') else {
            return Err(format_err(lineno, format!("malformed header field `{field}`")));
        };
        match k {
            "question_id" => qid = Some(v.to_string()),
            "db_id" => db = Some(v.to_string()),
            "model" => model = Some(v.to_string()),
            _ => {}
        }
    }
    let qid = qid.ok_or_else(|| format_err(lineno, "header lacks question_id"))?;
    let model = model.ok_or_else(|| format_err(lineno, "header lacks model"))?;
    Ok((qid, db, model))
}

fn finish_sentence(
    out: &mut Vec<ParseRecord>,
    header: Option<(String, Option<String>, String, usize)>,
    tokens: Vec<DepToken>,
) -> Result<(), IoError> {
    let Some((question_id, db_id, model, line)) = header else {
        return Ok(());
    };
    if tokens.is_empty() {
        return Err(format_err(line, format!("sentence `{question_id}` has no tokens")));
    }
    let parse = DepParse { question_id: question_id.clone(), tokens };
    if let Some(v) = parse.violations().first() {
        return Err(format_err(line, format!("sentence `{question_id}`: {v}")));
    }
    out.push(ParseRecord { question_id, db_id, model, parse });
    Ok(())
}

/// Reads a parse file. Token lines carry 1-based indices and heads with 0
/// for the root; they are converted to 0-based positions with the root
/// pointing at itself. Relation labels are lowercased.
pub fn read_parse_file(text: &str) -> Result<Vec<ParseRecord>, IoError> {
    let mut out = Vec::new();
    let mut header: Option<(String, Option<String>, String, usize)> = None;
    let mut tokens: Vec<DepToken> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish_sentence(&mut out, header.take(), std::mem::take(&mut tokens))?;
            continue;
        }
        if line.starts_with('#') {
            finish_sentence(&mut out, header.take(), std::mem::take(&mut tokens))?;
            let (q, d, m) = header_fields(line, lineno)?;
            header = Some((q, d, m, lineno));
            continue;
        }
        if header.is_none() {
            return Err(format_err(lineno, "token line before a sentence header"));
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(format_err(lineno, format!("expected 6 tab-separated columns, found {}", cols.len())));
        }
        let index: usize = cols[0].parse().map_err(|_| format_err(lineno, "bad token index"))?;
        let head: usize = cols[4].parse().map_err(|_| format_err(lineno, "bad head index"))?;
        if index != tokens.len() + 1 {
            return Err(format_err(lineno, format!("token index {index}, expected {}", tokens.len() + 1)));
        }
        let position = index - 1;
        tokens.push(DepToken {
            index: position,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            pos: cols[3].to_string(),
            head: if head == 0 { position } else { head - 1 },
            deprel: cols[5].to_lowercase(),
        });
    }
    finish_sentence(&mut out, header, tokens)?;
    Ok(out)
}

pub fn write_parse_file(records: &[ParseRecord]) -> String {
    let mut s = String::new();
    for (k, r) in records.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        let _ = write!(s, "# question_id={}", r.question_id);
        if let Some(db) = &r.db_id {
            let _ = write!(s, " db_id={db}");
        }
        let _ = writeln!(s, " model={}", r.model);
        for t in &r.parse.tokens {
            let head = if t.is_root() { 0 } else { t.head + 1 };
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", t.index + 1, t.form, t.lemma, t.pos, head, t.deprel);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub text: String,
    pub kind: ClauseKind,
    #[serde(default)]
    pub clause: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub no_mentioned: Vec<ColumnRef>,
}

impl UnitRecord {
    pub fn from_unit(u: &Unit) -> Self {
        UnitRecord {
            start: u.span().start,
            end: u.span().end,
            text: u.sentence.text.clone(),
            kind: u.kind(),
            clause: u.annotation.payload.as_ref().map(|c| c.to_string()),
            no_mentioned: u.annotation.no_mentioned_columns.clone(),
        }
    }

    /// Resolves against the tokens the unit indexes into.
    pub fn to_unit(&self, parse: &DepParse) -> Result<Unit, String> {
        let span = Span::new(self.start, self.end);
        if span.is_empty() || span.end > parse.len() {
            return Err(format!("unit span {span} outside the sentence"));
        }
        let sentence = SubSentence::from_parse(parse, span);
        if !self.text.is_empty() && self.text != sentence.text {
            return Err(format!("unit text `{}` does not match tokens `{}`", self.text, sentence.text));
        }
        let payload = match &self.clause {
            Some(c) => Some(parse_clause(c).map_err(|e| format!("clause `{c}`: {e}"))?),
            None => None,
        };
        let annotation = ClauseAnnotation {
            kind: self.kind,
            payload,
            no_mentioned_columns: self.no_mentioned.clone(),
        };
        if let Some(v) = annotation.violations().first() {
            return Err(v.clone());
        }
        Ok(Unit { sentence, annotation })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub example_id: String,
    pub db_id: String,
    pub tokens: Vec<DepToken>,
    pub units: Vec<UnitRecord>,
}

impl ExampleRecord {
    pub fn from_example(e: &AnnotatedExample) -> Self {
        ExampleRecord {
            example_id: e.example_id.clone(),
            db_id: e.db_id.clone(),
            tokens: e.parse.tokens.clone(),
            units: e.units.iter().map(UnitRecord::from_unit).collect(),
        }
    }

    pub fn into_example(self) -> Result<AnnotatedExample, String> {
        let parse = DepParse { question_id: self.example_id.clone(), tokens: self.tokens };
        if let Some(v) = parse.violations().first() {
            return Err(v.clone());
        }
        let units = self.units.iter().map(|u| u.to_unit(&parse)).collect::<Result<_, _>>()?;
        let e = AnnotatedExample { example_id: self.example_id, db_id: self.db_id, parse, units };
        match partition_violations(&e).into_iter().next() {
            Some(v) => Err(format!("{}: {v}", e.example_id)),
            None => Ok(e),
        }
    }
}

/// Units for a sentence whose tokens live in a parse file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub example_id: String,
    pub db_id: String,
    pub units: Vec<UnitRecord>,
}

/// Pairs annotation records with parse-file sentences by id.
pub fn join_annotations(parses: &[ParseRecord], annotations: Vec<AnnotationRecord>) -> Result<Vec<AnnotatedExample>, IoError> {
    let by_id: std::collections::HashMap<&str, &ParseRecord> =
        parses.iter().map(|p| (p.question_id.as_str(), p)).collect();
    annotations
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let p = by_id
                .get(a.example_id.as_str())
                .ok_or_else(|| format_err(i + 1, format!("no parse for `{}`", a.example_id)))?;
            if p.db_id.as_ref().is_some_and(|d| *d != a.db_id) {
                return Err(format_err(i + 1, format!("`{}`: db_id differs from the parse file", a.example_id)));
            }
            ExampleRecord { example_id: a.example_id, db_id: a.db_id, tokens: p.parse.tokens.clone(), units: a.units }
                .into_example()
                .map_err(|m| format_err(i + 1, m))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub source_example: String,
    pub db_id: String,
    pub position: Position,
    pub modified_noun: Option<NounRef>,
    pub tables_used: BTreeSet<String>,
    #[serde(default)]
    pub source_group_by: Vec<ColumnRef>,
    pub units: Vec<UnitRecord>,
    pub tokens: Vec<DepToken>,
}

impl ElementRecord {
    pub fn from_element(e: &CompositionalElement) -> Self {
        ElementRecord {
            source_example: e.source_example.clone(),
            db_id: e.db_id.clone(),
            position: e.position,
            modified_noun: e.modified_noun.clone(),
            tables_used: e.tables_used.clone(),
            source_group_by: e.source_group_by.clone(),
            units: e.units.iter().map(UnitRecord::from_unit).collect(),
            tokens: e.tokens.clone(),
        }
    }

    pub fn into_element(self) -> Result<CompositionalElement, String> {
        let Some(first) = self.tokens.first() else {
            return Err("element without tokens".into());
        };
        let offset = first.index;
        // Unit spans index the source sentence; rebuild a parse window whose
        // token positions line up with them.
        let mut tokens = vec![
            DepToken {
                index: 0,
                form: String::new(),
                lemma: String::new(),
                pos: String::new(),
                head: 0,
                deprel: String::new(),
            };
            offset
        ];
        tokens.extend(self.tokens.iter().cloned());
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i && i >= offset {
                return Err(format!("element token index {} at position {i}", t.index));
            }
        }
        let window = DepParse { question_id: self.source_example.clone(), tokens };
        let units: Vec<Unit> = self.units.iter().map(|u| u.to_unit(&window)).collect::<Result<_, _>>()?;
        let el = CompositionalElement {
            source_example: self.source_example,
            db_id: self.db_id,
            units,
            position: self.position,
            modified_noun: self.modified_noun,
            tables_used: self.tables_used,
            source_group_by: self.source_group_by,
            tokens: self.tokens,
        };
        if let Some(v) = el.violations().first() {
            return Err(v.clone());
        }
        Ok(el)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRecord {
    pub example_id: String,
    pub db_id: String,
    pub source_ids: (String, String),
    pub method: Method,
    pub connector: Option<Connector>,
    pub sentence: String,
    pub tokens: Vec<DepToken>,
    pub units: Vec<UnitRecord>,
    pub natsql: String,
    pub sql: Option<String>,
}

impl GeneratedRecord {
    pub fn from_generated(g: &GeneratedExample) -> Self {
        GeneratedRecord {
            example_id: g.example_id.clone(),
            db_id: g.db_id.clone(),
            source_ids: g.source_ids.clone(),
            method: g.method,
            connector: g.connector,
            sentence: g.sentence.clone(),
            tokens: g.parse.tokens.clone(),
            units: g.units.iter().map(UnitRecord::from_unit).collect(),
            natsql: g.natsql.to_string(),
            sql: g.sql.clone(),
        }
    }

    pub fn into_generated(self) -> Result<GeneratedExample, String> {
        let parse = DepParse { question_id: self.example_id.clone(), tokens: self.tokens };
        let units = self.units.iter().map(|u| u.to_unit(&parse)).collect::<Result<_, _>>()?;
        let natsql = parse_query(&self.natsql).map_err(|e| format!("natsql: {e}"))?;
        Ok(GeneratedExample {
            example_id: self.example_id,
            db_id: self.db_id,
            source_ids: self.source_ids,
            method: self.method,
            connector: self.connector,
            sentence: self.sentence,
            parse,
            units,
            natsql,
            sql: self.sql,
        })
    }
}

/// Reads JSON-lines records, skipping blank lines and artifact header and
/// summary lines.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, IoError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|source| IoError::Json { line: lineno, source })?;
        if value.get(HEADER_KEY).is_some() || value.get(SUMMARY_KEY).is_some() {
            continue;
        }
        out.push(serde_json::from_value(value).map_err(|source| IoError::Json { line: lineno, source })?);
    }
    Ok(out)
}

fn convert<R, T>(text: &str, f: impl Fn(R) -> Result<T, String>) -> Result<Vec<T>, IoError>
where
    R: DeserializeOwned,
{
    // Line numbers for conversion errors count only record lines.
    let records: Vec<R> = read_jsonl(text)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| f(r).map_err(|m| format_err(i + 1, format!("record {}: {m}", i + 1))))
        .collect()
}

pub fn read_examples(text: &str) -> Result<Vec<AnnotatedExample>, IoError> {
    convert(text, ExampleRecord::into_example)
}

pub fn read_elements(text: &str) -> Result<Vec<CompositionalElement>, IoError> {
    convert(text, ElementRecord::into_element)
}

pub fn read_generated(text: &str) -> Result<Vec<GeneratedExample>, IoError> {
    convert(text, GeneratedRecord::into_generated)
}

pub fn to_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(&r).expect("records serialise"));
        s.push('\n');
    }
    s
}

/// Schema files hold a JSON array of schemas, a single schema object, or
/// one schema per line.
pub fn read_schemas(text: &str) -> Result<Vec<SchemaDb>, IoError> {
    let trimmed = text.trim_start();
    let schemas: Vec<SchemaDb> = if trimmed.starts_with('[') {
        serde_json::from_str(text).map_err(|source| IoError::Json { line: 1, source })?
    } else {
        match serde_json::from_str::<SchemaDb>(text) {
            Ok(s) => vec![s],
            Err(_) => read_jsonl(text)?,
        }
    };
    for s in &schemas {
        if let Some(v) = s.violations().first() {
            return Err(format_err(1, format!("schema `{}`: {v}", s.db_id)));
        }
    }
    Ok(schemas)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlRecord {
    pub id: String,
    /// Empty when no SQL was produced; such predictions never match.
    #[serde(default)]
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub db_id: Option<String>,
}

/// SQL lists: JSON lines `{"id", "sql"}` or tab-separated `id<TAB>sql`.
pub fn read_sql_records(text: &str) -> Result<Vec<SqlRecord>, IoError> {
    let first = text.lines().find(|l| !l.trim().is_empty());
    if first.is_some_and(|l| l.trim_start().starts_with('{')) {
        return read_jsonl(text);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, sql)) = line.split_once('\t') else {
            return Err(format_err(i + 1, "expected `id<TAB>sql`"));
        };
        out.push(SqlRecord { id: id.trim().to_string(), sql: sql.trim().to_string(), db_id: None });
    }
    Ok(out)
}
