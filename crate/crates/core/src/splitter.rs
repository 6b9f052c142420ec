//! Dependency-based sentence splitting.
//!
//! Candidate boundaries come from a fixed set of relations. Two refinement
//! passes then remove boundaries that would cut a schema name in half and
//! undo segments shorter than the configured minimum.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::schema_match::PhraseMatcher;
use crate::types::{segments_from_boundaries, DepParse, SchemaDb, SubSentence};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("segmentations cover {left} and {right} tokens")]
    LengthMismatch { left: usize, right: usize },
    #[error("no segmentation pairs to compare")]
    EmptyCorpus,
    #[error("invalid split configuration: {0}")]
    InvalidConfig(String),
}

const PRE_SPLIT: &[&str] = &["relcl", "advcl", "acl", "conj", "npadvmod", "prep"];
const SUBJECT: &[&str] = &["nsubj", "csubj", "nsubjpass"];
const CLAUSAL_MODIFIERS: &[&str] = &["relcl", "advcl", "acl"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub split_relations: BTreeSet<String>,
    pub min_prep_subtree: usize,
    pub min_segment_tokens: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            split_relations: PRE_SPLIT.iter().chain(SUBJECT).map(|s| s.to_string()).collect(),
            min_prep_subtree: 3,
            min_segment_tokens: 2,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        if self.min_segment_tokens < 2 {
            return Err(SplitError::InvalidConfig(format!(
                "min_segment_tokens must be at least 2, got {}",
                self.min_segment_tokens
            )));
        }
        if let Some(r) = self
            .split_relations
            .iter()
            .find(|r| !PRE_SPLIT.contains(&r.as_str()) && !SUBJECT.contains(&r.as_str()))
        {
            return Err(SplitError::InvalidConfig(format!("unsupported split relation `{r}`")));
        }
        Ok(())
    }
}

struct Subtrees {
    left: Vec<usize>,
    right: Vec<usize>,
    size: Vec<usize>,
}

fn subtrees(parse: &DepParse) -> Subtrees {
    let n = parse.len();
    let mut s = Subtrees { left: (0..n).collect(), right: (0..n).collect(), size: vec![1; n] };
    // Every token's span is pushed to all of its ancestors.
    for i in 0..n {
        let mut cur = i;
        let mut steps = 0;
        while !parse.tokens[cur].is_root() && steps < n {
            cur = parse.tokens[cur].head;
            s.left[cur] = s.left[cur].min(i);
            s.right[cur] = s.right[cur].max(i);
            s.size[cur] += 1;
            steps += 1;
        }
    }
    s
}

/// Size of a conjunct without its coordination material and further
/// conjuncts.
fn conjunct_size(parse: &DepParse, children: &[Vec<usize>], sub: &Subtrees, i: usize) -> usize {
    let mut size = sub.size[i];
    for &c in &children[i] {
        if matches!(parse.tokens[c].deprel.as_str(), "cc" | "preconj" | "punct" | "conj") {
            size -= sub.size[c];
        }
    }
    size
}

/// Unrefined boundaries (segment start positions), sorted and deduplicated,
/// excluding 0 and the sentence length.
pub fn candidate_boundaries(parse: &DepParse, cfg: &SplitConfig) -> Vec<usize> {
    let n = parse.len();
    let children = parse.children();
    let sub = subtrees(parse);
    let mut out = BTreeSet::new();
    for t in &parse.tokens {
        let rel = t.deprel.as_str();
        if t.is_root() || !cfg.split_relations.contains(rel) {
            continue;
        }
        let i = t.index;
        if PRE_SPLIT.contains(&rel) {
            if rel == "prep" && sub.size[i] < cfg.min_prep_subtree {
                continue;
            }
            if rel == "conj"
                && conjunct_size(parse, &children, &sub, i) <= 2
                && conjunct_size(parse, &children, &sub, t.head) <= 2
            {
                continue;
            }
            out.insert(sub.left[i]);
        } else {
            let gov = &parse.tokens[t.head];
            if gov.is_root() || CLAUSAL_MODIFIERS.contains(&gov.deprel.as_str()) {
                continue;
            }
            out.insert(sub.right[i] + 1);
        }
    }
    out.into_iter().filter(|&b| b > 0 && b < n).collect()
}

/// Removes boundaries strictly inside a schema phrase of two or more tokens.
pub fn merge_schema_phrases(parse: &DepParse, matcher: &PhraseMatcher, boundaries: &[usize]) -> Vec<usize> {
    let spans: Vec<_> = matcher.find(parse).into_iter().map(|m| m.span).filter(|s| s.len() > 1).collect();
    boundaries
        .iter()
        .copied()
        .filter(|&b| !spans.iter().any(|s| s.start < b && b < s.end))
        .collect()
}

/// Merges segments shorter than `min_len`: into the following segment, or
/// into the preceding one for the final segment.
pub fn undo_short_segments(len: usize, boundaries: &[usize], min_len: usize) -> Vec<usize> {
    let mut b: Vec<usize> = boundaries.to_vec();
    loop {
        let mut starts = vec![0];
        starts.extend(&b);
        let short = (0..starts.len()).find(|&k| {
            let end = starts.get(k + 1).copied().unwrap_or(len);
            end - starts[k] < min_len
        });
        match short {
            // `b[k]` is the end of segment k, `b[k - 1]` its start.
            Some(k) if k + 1 < starts.len() => {
                b.remove(k);
            }
            Some(k) if k > 0 => {
                b.remove(k - 1);
            }
            _ => return b,
        }
    }
}

pub fn refine_boundaries(
    parse: &DepParse,
    matcher: &PhraseMatcher,
    cfg: &SplitConfig,
    boundaries: &[usize],
) -> Vec<usize> {
    let mut b: Vec<usize> = boundaries.iter().copied().filter(|&x| x > 0 && x < parse.len()).collect();
    b.sort_unstable();
    b.dedup();
    let b = merge_schema_phrases(parse, matcher, &b);
    undo_short_segments(parse.len(), &b, cfg.min_segment_tokens)
}

/// Splits with a prebuilt matcher; convenient when many sentences share a
/// schema.
pub fn split_with_matcher(parse: &DepParse, matcher: &PhraseMatcher, cfg: &SplitConfig) -> Vec<SubSentence> {
    let candidates = candidate_boundaries(parse, cfg);
    let refined = refine_boundaries(parse, matcher, cfg, &candidates);
    segments_from_boundaries(parse, &refined)
}

pub fn split_sentence(parse: &DepParse, schema: &SchemaDb, cfg: &SplitConfig) -> Vec<SubSentence> {
    split_with_matcher(parse, &PhraseMatcher::new(schema), cfg)
}

fn total_tokens(segs: &[SubSentence]) -> usize {
    segs.iter().map(|s| s.span.len()).sum()
}

pub fn split_similarity(a: &[SubSentence], b: &[SubSentence], max_deviation: usize) -> Result<bool, SplitError> {
    let (left, right) = (total_tokens(a), total_tokens(b));
    if left != right {
        return Err(SplitError::LengthMismatch { left, right });
    }
    if a.len() != b.len() {
        return Ok(false);
    }
    Ok(a.iter().zip(b).skip(1).all(|(x, y)| x.span.start.abs_diff(y.span.start) <= max_deviation))
}

pub fn corpus_similarity(
    pairs: &[(Vec<SubSentence>, Vec<SubSentence>)],
    max_deviation: usize,
) -> Result<f64, SplitError> {
    if pairs.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    let mut hits = 0usize;
    for (a, b) in pairs {
        hits += usize::from(split_similarity(a, b, max_deviation)?);
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Column, ColumnType, DepToken, Span, Table};

    /// `(form, head, deprel)` triples; lemma is the lowercased form.
    fn parse(spec: &[(&str, usize, &str)]) -> DepParse {
        DepParse {
            question_id: "t".into(),
            tokens: spec
                .iter()
                .enumerate()
                .map(|(i, (f, h, r))| DepToken {
                    index: i,
                    form: f.to_string(),
                    lemma: f.to_lowercase(),
                    pos: if *r == "punct" { "PUNCT".into() } else { "X".into() },
                    head: *h,
                    deprel: r.to_string(),
                })
                .collect(),
        }
    }

    fn empty_schema() -> SchemaDb {
        SchemaDb { db_id: "d".into(), tables: vec![], primary_keys: vec![], foreign_keys: vec![] }
    }

    fn texts(segs: &[SubSentence]) -> Vec<String> {
        segs.iter().map(|s| s.text.clone()).collect()
    }

    fn segs(len: usize, starts: &[usize]) -> Vec<SubSentence> {
        let mut s = vec![0];
        s.extend(starts);
        (0..s.len())
            .map(|k| {
                let e = s.get(k + 1).copied().unwrap_or(len);
                SubSentence { span: Span::new(s[k], e), text: String::new() }
            })
            .collect()
    }

    #[test]
    fn trailing_prep_phrase() {
        // List the names of students in ascending order
        let p = parse(&[
            ("List", 0, "root"),
            ("the", 2, "det"),
            ("names", 0, "dobj"),
            ("of", 2, "prep"),
            ("students", 3, "pobj"),
            ("in", 0, "prep"),
            ("ascending", 7, "amod"),
            ("order", 5, "pobj"),
        ]);
        let out = split_sentence(&p, &empty_schema(), &SplitConfig::default());
        assert_eq!(texts(&out), vec!["List the names of students", "in ascending order"]);
    }

    #[test]
    fn relative_clause_is_a_segment() {
        // Find the pets who is older than ten and show their names
        let p = parse(&[
            ("Find", 0, "root"),
            ("the", 2, "det"),
            ("pets", 0, "dobj"),
            ("who", 4, "nsubj"),
            ("is", 2, "relcl"),
            ("older", 4, "acomp"),
            ("than", 5, "prep"),
            ("ten", 6, "pobj"),
        ]);
        let out = split_sentence(&p, &empty_schema(), &SplitConfig::default());
        assert_eq!(texts(&out), vec!["Find the pets", "who is older than ten"]);
    }

    #[test]
    fn unsplittable_sentence() {
        let p = parse(&[("Show", 0, "root"), ("all", 2, "det"), ("names", 0, "dobj"), (".", 0, "punct")]);
        let out = split_sentence(&p, &empty_schema(), &SplitConfig::default());
        assert_eq!(texts(&out), vec!["Show all names ."]);
    }

    #[test]
    fn schema_phrase_blocks_boundary() {
        // What is the total horses on farms ... with "horses ..." as a prep
        // subtree so that its left edge falls inside "total horses".
        let p = parse(&[
            ("What", 1, "attr"),
            ("is", 1, "root"),
            ("the", 3, "det"),
            ("total", 1, "nsubj"),
            ("horses", 3, "prep"),
            ("on", 4, "prep"),
            ("the", 7, "det"),
            ("farms", 5, "pobj"),
        ]);
        let cfg = SplitConfig::default();
        assert_eq!(candidate_boundaries(&p, &cfg), vec![4, 5]);
        let schema = SchemaDb {
            db_id: "farm".into(),
            tables: vec![Table {
                name: "farm".into(),
                columns: vec![Column { name: "Total_Horses".into(), column_type: ColumnType::Number }],
            }],
            primary_keys: vec![],
            foreign_keys: vec![],
        };
        let out = split_sentence(&p, &schema, &cfg);
        assert_eq!(texts(&out), vec!["What is the total horses", "on the farms"]);
    }

    #[test]
    fn short_conjuncts_do_not_split() {
        // Show the singers aged 32 or 33
        let p = parse(&[
            ("Show", 0, "root"),
            ("singers", 0, "dobj"),
            ("aged", 1, "acl"),
            ("32", 2, "npadvmod"),
            ("or", 3, "cc"),
            ("33", 3, "conj"),
        ]);
        let c = candidate_boundaries(&p, &SplitConfig::default());
        assert_eq!(c, vec![2, 3]);
        assert!(!c.contains(&5));
    }

    #[test]
    fn undo_direction() {
        assert_eq!(undo_short_segments(6, &[1, 3], 2), vec![3]);
        assert_eq!(undo_short_segments(6, &[3, 5], 2), vec![3]);
        assert_eq!(undo_short_segments(6, &[2, 3], 2), vec![2]);
        assert_eq!(undo_short_segments(1, &[], 2), Vec::<usize>::new());
    }

    #[test]
    fn similarity_with_deviation() {
        let a = segs(10, &[3, 6]);
        assert!(split_similarity(&a, &a, 0).unwrap());
        let b = segs(10, &[3, 8]);
        assert!(!split_similarity(&a, &b, 1).unwrap());
        assert!(split_similarity(&a, &b, 2).unwrap());
        assert!(!split_similarity(&a, &segs(10, &[3]), 5).unwrap());
        assert_eq!(
            split_similarity(&a, &segs(9, &[3, 6]), 0),
            Err(SplitError::LengthMismatch { left: 10, right: 9 })
        );
    }

    #[test]
    fn corpus_fraction() {
        let same = (segs(8, &[4]), segs(8, &[4]));
        let shifted = (segs(8, &[2]), segs(8, &[5]));
        let pairs = vec![same.clone(), same.clone(), same, shifted];
        assert_eq!(corpus_similarity(&pairs, 2).unwrap(), 0.75);
        assert_eq!(corpus_similarity(&[], 1), Err(SplitError::EmptyCorpus));
    }

    #[test]
    fn config_validation() {
        assert!(SplitConfig::default().validate().is_ok());
        let bad = SplitConfig { min_segment_tokens: 1, ..SplitConfig::default() };
        assert!(bad.validate().is_err());
    }
}
