//! A compact hand-written example format: the sentence is given as
//! annotated segments of whitespace-separated tokens, and the parse is a
//! left-to-right chain. Useful for small corpora where the tree shape does
//! not matter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::io::UnitRecord;
use crate::natsql::{ClauseKind, ColumnRef};
use crate::types::{AnnotatedExample, DepParse, DepToken};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSegment {
    pub text: String,
    pub kind: ClauseKind,
    #[serde(default)]
    pub clause: Option<String>,
    #[serde(default)]
    pub no_mentioned: Vec<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactExample {
    pub id: String,
    pub db_id: String,
    pub segments: Vec<CompactSegment>,
    /// Lemma overrides by lowercased form; other lemmas are the lowercased
    /// form itself.
    #[serde(default)]
    pub lemmas: BTreeMap<String, String>,
    #[serde(default)]
    pub gold_sql: Option<String>,
    #[serde(default)]
    pub unconvertible: bool,
}

fn is_punct(form: &str) -> bool {
    !form.is_empty() && form.chars().all(|c| c.is_ascii_punctuation())
}

impl CompactExample {
    pub fn chain_parse(&self) -> DepParse {
        let forms: Vec<&str> = self.segments.iter().flat_map(|s| s.text.split_whitespace()).collect();
        let tokens = forms
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let lower = f.to_lowercase();
                let punct = is_punct(f);
                DepToken {
                    index: i,
                    form: f.to_string(),
                    lemma: self.lemmas.get(&lower).cloned().unwrap_or(lower),
                    pos: if punct { "PUNCT".into() } else { "X".into() },
                    head: i.saturating_sub(1),
                    deprel: if i == 0 {
                        "root".into()
                    } else if punct {
                        "punct".into()
                    } else {
                        "dep".into()
                    },
                }
            })
            .collect();
        DepParse { question_id: self.id.clone(), tokens }
    }

    pub fn to_example(&self) -> Result<AnnotatedExample, String> {
        let parse = self.chain_parse();
        let mut units = Vec::new();
        let mut start = 0;
        for s in &self.segments {
            let len = s.text.split_whitespace().count();
            let record = UnitRecord {
                start,
                end: start + len,
                text: String::new(),
                kind: s.kind,
                clause: s.clause.clone(),
                no_mentioned: s.no_mentioned.clone(),
            };
            units.push(record.to_unit(&parse).map_err(|e| format!("{}: {e}", self.id))?);
            start += len;
        }
        Ok(AnnotatedExample { example_id: self.id.clone(), db_id: self.db_id.clone(), parse, units })
    }
}

/// Reads a JSON array of compact examples.
pub fn read_compact(text: &str) -> Result<Vec<CompactExample>, serde_json::Error> {
    serde_json::from_str(text)
}
