//! Dataset-level reports: exact-match accuracy by difficulty, difficulty
//! distributions and split stability.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::io::SqlRecord;
use crate::splitter::{split_similarity, split_with_matcher, SplitConfig};
use crate::schema_match::PhraseMatcher;
use crate::sql::{classify_query, compare, parse_sql};
use crate::types::{DepParse, DifficultyLevel, GeneratedExample, SchemaDb, SubSentence};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and gold ids differ: {} only in predictions, {} only in gold (first: {})", only_pred.len(), only_gold.len(), only_pred.iter().chain(only_gold).next().map(String::as_str).unwrap_or("-"))]
    IdMismatch { only_pred: Vec<String>, only_gold: Vec<String> },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("gold SQL for `{id}` does not parse: {message}")]
    GoldParse { id: String, message: String },
    #[error("no parse for generated example(s): {}", .0.join(", "))]
    MissingParses(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    /// First mismatching component, or `unparsable`.
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub total: usize,
    pub overall_accuracy: f64,
    pub per_difficulty: BTreeMap<DifficultyLevel, LevelStat>,
    pub failures: Vec<Failure>,
}

impl Report {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}: {} examples, exact match {:.1}%", self.name, self.total, self.overall_accuracy * 100.0);
        let _ = writeln!(s, "{:<8} {:>7} {:>9}", "level", "count", "accuracy");
        for (level, st) in &self.per_difficulty {
            let _ = writeln!(s, "{:<8} {:>7} {:>8.1}%", level.to_string(), st.count, st.accuracy * 100.0);
        }
        if !self.failures.is_empty() {
            let _ = writeln!(s, "mismatches: {}", self.failures.len());
        }
        s
    }
}

fn index(records: &[SqlRecord]) -> Result<BTreeMap<&str, &SqlRecord>, EvalError> {
    let mut m = BTreeMap::new();
    for r in records {
        if m.insert(r.id.as_str(), r).is_some() {
            return Err(EvalError::DuplicateId(r.id.clone()));
        }
    }
    Ok(m)
}

fn first_mismatch(m: &crate::sql::ComponentMatch) -> &'static str {
    [
        (m.select, "select"),
        (m.from, "from"),
        (m.where_, "where"),
        (m.group_by, "group_by"),
        (m.having, "having"),
        (m.order_by, "order_by"),
        (m.keywords, "keywords"),
        (m.set_op, "set_op"),
    ]
    .into_iter()
    .find(|(ok, _)| !ok)
    .map_or("none", |(_, name)| name)
}

/// Exact-match accuracy of `pred` against `gold`, broken down by the
/// difficulty of the gold query. A gold record's `db_id` selects its schema;
/// with a single schema it applies to every record.
pub fn evaluate_exact_match(
    name: &str,
    pred: &[SqlRecord],
    gold: &[SqlRecord],
    schemas: &[SchemaDb],
) -> Result<Report, EvalError> {
    let p = index(pred)?;
    let g = index(gold)?;
    let pk: BTreeSet<&str> = p.keys().copied().collect();
    let gk: BTreeSet<&str> = g.keys().copied().collect();
    if pk != gk {
        return Err(EvalError::IdMismatch {
            only_pred: pk.difference(&gk).map(|s| s.to_string()).collect(),
            only_gold: gk.difference(&pk).map(|s| s.to_string()).collect(),
        });
    }
    let by_db: HashMap<&str, &SchemaDb> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();

    let mut hits: BTreeMap<DifficultyLevel, (usize, usize)> = BTreeMap::new();
    let mut failures = Vec::new();
    for (id, gold_rec) in &g {
        let gq = parse_sql(&gold_rec.sql)
            .map_err(|e| EvalError::GoldParse { id: id.to_string(), message: e.to_string() })?;
        let schema = match &gold_rec.db_id {
            Some(db) => by_db.get(db.as_str()).copied(),
            None if schemas.len() == 1 => Some(&schemas[0]),
            None => None,
        };
        let level = classify_query(&gq);
        let entry = hits.entry(level).or_default();
        entry.0 += 1;
        match parse_sql(&p[id].sql) {
            Ok(pq) => {
                let m = compare(&pq, &gq, schema);
                if m.all() {
                    entry.1 += 1;
                } else {
                    failures.push(Failure { id: id.to_string(), category: first_mismatch(&m).into() });
                }
            }
            Err(_) => failures.push(Failure { id: id.to_string(), category: "unparsable".into() }),
        }
    }
    let total = g.len();
    let correct: usize = hits.values().map(|(_, c)| c).sum();
    Ok(Report {
        name: name.to_string(),
        total,
        overall_accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        per_difficulty: hits
            .into_iter()
            .map(|(l, (n, c))| (l, LevelStat { count: n, accuracy: c as f64 / n as f64 }))
            .collect(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyStats {
    pub total: usize,
    pub counts: BTreeMap<DifficultyLevel, usize>,
    pub fractions: BTreeMap<DifficultyLevel, f64>,
    /// Records without SQL (no conversion) or whose SQL does not parse.
    pub unconvertible: usize,
    pub unconvertible_ids: Vec<String>,
}

impl DifficultyStats {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let classified = self.total - self.unconvertible;
        let _ = writeln!(s, "{} examples, {} classified, {} unconvertible", self.total, classified, self.unconvertible);
        for level in DifficultyLevel::ALL {
            let n = self.counts.get(&level).copied().unwrap_or(0);
            let f = self.fractions.get(&level).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{:<8} {:>7} {:>6.1}%", level.to_string(), n, f * 100.0);
        }
        s
    }
}

/// Difficulty distribution over `(id, sql)` items; items without usable SQL
/// are counted separately and excluded from the fractions.
pub fn dataset_stats<'a>(items: impl IntoIterator<Item = (&'a str, Option<&'a str>)>) -> DifficultyStats {
    let mut counts: BTreeMap<DifficultyLevel, usize> = DifficultyLevel::ALL.iter().map(|l| (*l, 0)).collect();
    let mut total = 0;
    let mut unconvertible_ids = Vec::new();
    for (id, sql) in items {
        total += 1;
        match sql.map(parse_sql) {
            Some(Ok(q)) => *counts.entry(classify_query(&q)).or_default() += 1,
            _ => unconvertible_ids.push(id.to_string()),
        }
    }
    let classified = total - unconvertible_ids.len();
    let fractions = counts
        .iter()
        .map(|(l, n)| (*l, if classified == 0 { 0.0 } else { *n as f64 / classified as f64 }))
        .collect();
    DifficultyStats { total, counts, fractions, unconvertible: unconvertible_ids.len(), unconvertible_ids }
}

pub fn generated_stats(examples: &[GeneratedExample]) -> DifficultyStats {
    dataset_stats(examples.iter().map(|g| (g.example_id.as_str(), g.sql.as_deref())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub total: usize,
    /// Fraction of examples whose re-split agrees within 0, 1 and 2 tokens.
    pub within_0: f64,
    pub within_1: f64,
    pub within_2: f64,
    /// Re-parses whose token count differs from the stored units.
    pub length_mismatches: usize,
}

/// Compares each generated example's unit segmentation with a fresh split
/// of its parse (keyed by example id).
pub fn split_stability_report(
    generated: &[GeneratedExample],
    parses: &HashMap<String, DepParse>,
    schemas: &[SchemaDb],
    cfg: &SplitConfig,
) -> Result<StabilityReport, EvalError> {
    let missing: Vec<String> =
        generated.iter().filter(|g| !parses.contains_key(&g.example_id)).map(|g| g.example_id.clone()).collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingParses(missing));
    }
    let matchers: HashMap<&str, PhraseMatcher> =
        schemas.iter().map(|s| (s.db_id.as_str(), PhraseMatcher::new(s))).collect();
    let empty = PhraseMatcher::new(&SchemaDb {
        db_id: String::new(),
        tables: vec![],
        primary_keys: vec![],
        foreign_keys: vec![],
    });
    let mut hits = [0usize; 3];
    let mut length_mismatches = 0;
    for g in generated {
        let matcher = matchers.get(g.db_id.as_str()).unwrap_or(&empty);
        let resplit = split_with_matcher(&parses[&g.example_id], matcher, cfg);
        let stored: Vec<SubSentence> = g.units.iter().map(|u| u.sentence.clone()).collect();
        for (d, hit) in hits.iter_mut().enumerate() {
            match split_similarity(&stored, &resplit, d) {
                Ok(true) => *hit += 1,
                Ok(false) => {}
                Err(_) => {
                    if d == 0 {
                        length_mismatches += 1;
                    }
                }
            }
        }
    }
    let total = generated.len();
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    Ok(StabilityReport {
        total,
        within_0: frac(hits[0]),
        within_1: frac(hits[1]),
        within_2: frac(hits[2]),
        length_mismatches,
    })
}
