//! Matching of schema names (tables and columns) against sentence tokens.

use crate::natsql::ColumnRef;
use crate::types::{DepParse, SchemaDb, Span};

pub const MAX_PHRASE_WORDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaTarget {
    Table(String),
    Column(ColumnRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseMatch {
    pub span: Span,
    pub target: SchemaTarget,
}

/// Crude singular form: `ies -> y`, and a trailing `s` dropped unless the
/// word ends in `ss`.
pub fn singularize(word: &str) -> String {
    let w = word.to_lowercase();
    if w.len() > 3 && w.ends_with("ies") {
        format!("{}y", &w[..w.len() - 3])
    } else if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..w.len() - 1].to_string()
    } else {
        w
    }
}

fn phrase_words(name: &str) -> Vec<String> {
    name.split(|c: char| c == '_' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(singularize)
        .collect()
}

#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    phrases: Vec<(Vec<String>, SchemaTarget)>,
}

impl PhraseMatcher {
    pub fn new(schema: &SchemaDb) -> Self {
        let mut phrases = Vec::new();
        for t in &schema.tables {
            let words = phrase_words(&t.name);
            if (1..=MAX_PHRASE_WORDS).contains(&words.len()) {
                phrases.push((words, SchemaTarget::Table(t.name.to_lowercase())));
            }
            for c in &t.columns {
                let words = phrase_words(&c.name);
                if (1..=MAX_PHRASE_WORDS).contains(&words.len()) {
                    phrases.push((words, SchemaTarget::Column(ColumnRef::new(&t.name, &c.name))));
                }
            }
        }
        Self { phrases }
    }

    /// All occurrences of any schema phrase, in order of start position.
    /// Matches may overlap.
    pub fn find(&self, parse: &DepParse) -> Vec<PhraseMatch> {
        let norms: Vec<[String; 2]> = parse
            .tokens
            .iter()
            .map(|t| [singularize(&t.form), singularize(&t.lemma)])
            .collect();
        let mut out = Vec::new();
        for start in 0..norms.len() {
            for (words, target) in &self.phrases {
                let end = start + words.len();
                if end > norms.len() {
                    continue;
                }
                let hit = words
                    .iter()
                    .zip(&norms[start..end])
                    .all(|(w, forms)| forms.iter().any(|f| f == w));
                if hit {
                    out.push(PhraseMatch { span: Span::new(start, end), target: target.clone() });
                }
            }
        }
        out
    }

    /// Mentions of the given table, in order of start position.
    pub fn table_mentions(&self, parse: &DepParse, table: &str) -> Vec<Span> {
        self.find(parse)
            .into_iter()
            .filter(|m| matches!(&m.target, SchemaTarget::Table(t) if t.eq_ignore_ascii_case(table)))
            .map(|m| m.span)
            .collect()
    }
}
