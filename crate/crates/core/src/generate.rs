//! Recombination of compositional elements within one domain.
//!
//! Substitution swaps an element of a host sentence for an element taken
//! from another sentence; appending attaches an element after the host's
//! trailing element with a connector word. Both are gated by complexity,
//! logic and coherence checks on the resulting annotation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extract::{explicit_group_by, CompositionalElement, NounRef, Position};
use crate::natsql::{
    combine_clauses, natsql_to_sql, Agg, ClauseKind, ColumnRef, CombineError, Condition, Conj,
    NatSqlClause, NatSqlQuery, Op, Rhs,
};
use crate::types::{
    AnnotatedExample, ClauseAnnotation, Connector, DepParse, DepToken, GeneratedExample, Method,
    SchemaDb, Span, SubSentence, Unit,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckLabel {
    #[serde(rename = "complexity.subquery")]
    ComplexitySubquery,
    #[serde(rename = "complexity.having")]
    ComplexityHaving,
    #[serde(rename = "complexity.where_count")]
    ComplexityWhereCount,
    #[serde(rename = "complexity.order_by")]
    ComplexityOrderBy,
    #[serde(rename = "complexity.subquery_condition")]
    ComplexitySubqueryCondition,
    #[serde(rename = "complexity.nl_length")]
    ComplexityNlLength,
    #[serde(rename = "logic.repeat")]
    LogicRepeat,
    #[serde(rename = "logic.negation")]
    LogicNegation,
    #[serde(rename = "logic.group_by")]
    LogicGroupBy,
    #[serde(rename = "coherence.noun")]
    CoherenceNoun,
}

impl CheckLabel {
    pub const ALL: [CheckLabel; 10] = [
        CheckLabel::ComplexitySubquery,
        CheckLabel::ComplexityHaving,
        CheckLabel::ComplexityWhereCount,
        CheckLabel::ComplexityOrderBy,
        CheckLabel::ComplexitySubqueryCondition,
        CheckLabel::ComplexityNlLength,
        CheckLabel::LogicRepeat,
        CheckLabel::LogicNegation,
        CheckLabel::LogicGroupBy,
        CheckLabel::CoherenceNoun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckLabel::ComplexitySubquery => "complexity.subquery",
            CheckLabel::ComplexityHaving => "complexity.having",
            CheckLabel::ComplexityWhereCount => "complexity.where_count",
            CheckLabel::ComplexityOrderBy => "complexity.order_by",
            CheckLabel::ComplexitySubqueryCondition => "complexity.subquery_condition",
            CheckLabel::ComplexityNlLength => "complexity.nl_length",
            CheckLabel::LogicRepeat => "logic.repeat",
            CheckLabel::LogicNegation => "logic.negation",
            CheckLabel::LogicGroupBy => "logic.group_by",
            CheckLabel::CoherenceNoun => "coherence.noun",
        }
    }
}

impl fmt::Display for CheckLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub passed: bool,
    pub failed_checks: Vec<CheckLabel>,
}

impl CheckVerdict {
    pub fn from_failures(mut failed_checks: Vec<CheckLabel>) -> Self {
        failed_checks.sort();
        failed_checks.dedup();
        CheckVerdict { passed: failed_checks.is_empty(), failed_checks }
    }

    pub fn failed(&self, label: CheckLabel) -> bool {
        self.failed_checks.contains(&label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub max_subqueries: usize,
    pub max_having: usize,
    pub max_where: usize,
    pub max_order_by: usize,
    /// Appended results must have fewer units than this.
    pub max_subsentences: usize,
    /// Connectors tried for appending, in output order.
    pub connectors: Vec<Connector>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_subqueries: 1,
            max_having: 1,
            max_where: 3,
            max_order_by: 1,
            max_subsentences: 4,
            connectors: vec![Conj::And, Conj::Or],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.connectors.is_empty() {
            return Err("at least one connector is required".into());
        }
        if self.connectors.len() == 2 && self.connectors[0] == self.connectors[1] {
            return Err("duplicate connector".into());
        }
        if self.max_subsentences < 2 {
            return Err("max_subsentences must be at least 2".into());
        }
        Ok(())
    }

    /// Differences from the default bounds, for logging.
    pub fn overrides(&self) -> Vec<String> {
        let d = GeneratorConfig::default();
        let mut out = Vec::new();
        let pairs = [
            ("max_subqueries", self.max_subqueries, d.max_subqueries),
            ("max_having", self.max_having, d.max_having),
            ("max_where", self.max_where, d.max_where),
            ("max_order_by", self.max_order_by, d.max_order_by),
            ("max_subsentences", self.max_subsentences, d.max_subsentences),
        ];
        for (name, value, default) in pairs {
            if value != default {
                out.push(format!("{name}={value} (default {default})"));
            }
        }
        if self.connectors != d.connectors {
            out.push(format!("connectors={:?}", self.connectors));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("elements come from different domains: `{0}` and `{1}`")]
    DomainMismatch(String, String),
    #[error("both elements come from example `{0}`")]
    SameSource(String),
    #[error("element from `{element}` is not part of host `{host}`")]
    ForeignHost { element: String, host: String },
    #[error("element from `{0}` is not the trailing element of its host")]
    NotTrailing(String),
    #[error("`or` can only connect an element made of WHERE clauses")]
    InvalidConnector,
    #[error("no host example `{0}`")]
    MissingHost(String),
    #[error(transparent)]
    Combine(#[from] CombineError),
}

fn check_pair(e1: &CompositionalElement, e2: &CompositionalElement, host: &AnnotatedExample) -> Result<(), GenerateError> {
    if e1.db_id != e2.db_id {
        return Err(GenerateError::DomainMismatch(e1.db_id.clone(), e2.db_id.clone()));
    }
    if host.db_id != e1.db_id {
        return Err(GenerateError::DomainMismatch(host.db_id.clone(), e1.db_id.clone()));
    }
    if e1.source_example == e2.source_example {
        return Err(GenerateError::SameSource(e1.source_example.clone()));
    }
    Ok(())
}

/// Index range of the element's units inside the host.
fn unit_range(e1: &CompositionalElement, host: &AnnotatedExample) -> Result<std::ops::Range<usize>, GenerateError> {
    let foreign =
        || GenerateError::ForeignHost { element: e1.source_example.clone(), host: host.example_id.clone() };
    if e1.source_example != host.example_id || e1.units.is_empty() {
        return Err(foreign());
    }
    let start = host.units.iter().position(|u| u.span() == e1.units[0].span()).ok_or_else(foreign)?;
    let end = start + e1.units.len();
    if end > host.units.len() || host.units[start..end] != e1.units[..] {
        return Err(foreign());
    }
    Ok(start..end)
}

fn where_conditions(units: &[&Unit]) -> usize {
    units
        .iter()
        .filter_map(|u| match &u.annotation.payload {
            Some(NatSqlClause::Where(w)) => Some(w.conditions.len()),
            _ => None,
        })
        .sum()
}

fn condition_key(c: &Condition) -> (crate::natsql::SelectItem, Op, String) {
    let right = match &c.right {
        Rhs::Literal(l) => format!("lit:{:?}", l.folded()),
        Rhs::Range(a, b) => format!("range:{:?}:{:?}", a.folded(), b.folded()),
        Rhs::Item(i) => format!("item:{i}"),
    };
    (c.left.clone(), c.op, right)
}

fn has_repeat(q: &NatSqlQuery) -> bool {
    let keys: Vec<_> = q.conditions.iter().map(condition_key).collect();
    (0..keys.len()).any(|i| keys[i + 1..].contains(&keys[i]))
}

fn negates_content(q: &NatSqlQuery) -> bool {
    let selected: Vec<&ColumnRef> =
        q.select.iter().filter(|s| s.agg == Agg::None).map(|s| &s.column).collect();
    let mut negated = false;
    for c in &q.conditions {
        let bare = c.left.agg == Agg::None;
        let on_selected = bare && selected.contains(&&c.left.column);
        let self_exclusion = c.op == Op::NotIn
            && matches!(&c.right, Rhs::Item(i) if i.agg == Agg::None && i.column == c.left.column);
        if self_exclusion || (on_selected && matches!(c.op, Op::Ne | Op::NotLike | Op::NotIn)) {
            negated = true;
        } else if on_selected && c.op == Op::Eq {
            tracing::info!(condition = %c, "admitted equality on a selected column");
        }
    }
    negated
}

fn same_noun(a: Option<&NounRef>, b: Option<&NounRef>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a.lemma.eq_ignore_ascii_case(&b.lemma),
        _ => false,
    }
}

struct Candidate<'a> {
    result: Vec<&'a ClauseAnnotation>,
    host_part: Vec<&'a Unit>,
    host_group_by: Vec<ColumnRef>,
    e1_noun: Option<&'a NounRef>,
    appending: bool,
}

fn run_checks(c: Candidate<'_>, e2: &CompositionalElement, cfg: &GeneratorConfig) -> Result<CheckVerdict, GenerateError> {
    let mut failed = Vec::new();
    let order_units = c.result.iter().filter(|a| a.kind == ClauseKind::OrderBy).count();
    if order_units > cfg.max_order_by {
        failed.push(CheckLabel::ComplexityOrderBy);
    }
    if c.appending && c.result.len() >= cfg.max_subsentences {
        failed.push(CheckLabel::ComplexityNlLength);
    }
    if !same_noun(c.e1_noun, e2.modified_noun.as_ref()) {
        failed.push(CheckLabel::CoherenceNoun);
    }
    if !c.host_group_by.is_empty()
        && !e2.source_group_by.is_empty()
        && sorted(&c.host_group_by) != sorted(&e2.source_group_by)
    {
        failed.push(CheckLabel::LogicGroupBy);
    }

    match combine_clauses(c.result.iter().copied()) {
        Ok(q) => {
            if q.subquery_count() > cfg.max_subqueries {
                failed.push(CheckLabel::ComplexitySubquery);
            }
            if q.having_count() > cfg.max_having {
                failed.push(CheckLabel::ComplexityHaving);
            }
            if q.conditions.len() > cfg.max_where {
                failed.push(CheckLabel::ComplexityWhereCount);
            }
            let donor: Vec<&Unit> = e2.units.iter().collect();
            if q.subquery_count() > 0 && where_conditions(&c.host_part) > 0 && where_conditions(&donor) > 0 {
                failed.push(CheckLabel::ComplexitySubqueryCondition);
            }
            if has_repeat(&q) {
                failed.push(CheckLabel::LogicRepeat);
            }
            if negates_content(&q) {
                failed.push(CheckLabel::LogicNegation);
            }
        }
        // Two ORDER BY clauses that cannot be merged: already rejected.
        Err(CombineError::ConflictingOrderBy(_)) if order_units > cfg.max_order_by => {}
        Err(e) => return Err(e.into()),
    }
    Ok(CheckVerdict::from_failures(failed))
}

fn sorted(cols: &[ColumnRef]) -> Vec<ColumnRef> {
    let mut v = cols.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Admission checks for replacing `e1` (an element of `host`) with `e2`.
pub fn can_be_substituted_by(
    e1: &CompositionalElement,
    e2: &CompositionalElement,
    host: &AnnotatedExample,
    cfg: &GeneratorConfig,
) -> Result<CheckVerdict, GenerateError> {
    check_pair(e1, e2, host)?;
    let range = unit_range(e1, host)?;
    let before = &host.units[..range.start];
    let after = &host.units[range.end..];
    let result = before
        .iter()
        .chain(&e2.units)
        .chain(after)
        .map(|u| &u.annotation)
        .collect();
    let candidate = Candidate {
        result,
        host_part: before.iter().chain(after).collect(),
        host_group_by: explicit_group_by(host),
        e1_noun: e1.modified_noun.as_ref(),
        appending: false,
    };
    run_checks(candidate, e2, cfg)
}

/// Admission checks for appending `e2` after `e1`, the trailing element of
/// `host`.
pub fn can_append(
    host: &AnnotatedExample,
    e1: &CompositionalElement,
    e2: &CompositionalElement,
    cfg: &GeneratorConfig,
) -> Result<CheckVerdict, GenerateError> {
    check_pair(e1, e2, host)?;
    let range = unit_range(e1, host)?;
    if e1.position != Position::Trailing || range.end != host.units.len() {
        return Err(GenerateError::NotTrailing(e1.source_example.clone()));
    }
    let result = host.units.iter().chain(&e2.units).map(|u| &u.annotation).collect();
    let candidate = Candidate {
        result,
        host_part: host.units.iter().collect(),
        host_group_by: explicit_group_by(host),
        e1_noun: e1.modified_noun.as_ref(),
        appending: true,
    };
    run_checks(candidate, e2, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Host(usize),
    Donor(usize),
    Connector,
}

struct Piece {
    origin: Origin,
    token: DepToken,
    slot: usize,
}

/// Builds the spliced token sequence and dependency tree.
///
/// `removed` are host tokens whose dependents are re-attached to the donor's
/// top token; `anchor` is the host token the donor top attaches to.
fn assemble(
    question_id: &str,
    pieces: Vec<Piece>,
    removed: Span,
    anchor: Option<usize>,
    donor_set: &[usize],
) -> (DepParse, Vec<usize>) {
    let mut host_map = HashMap::new();
    let mut donor_map = HashMap::new();
    for (new, p) in pieces.iter().enumerate() {
        match p.origin {
            Origin::Host(i) => {
                host_map.insert(i, new);
            }
            Origin::Donor(i) => {
                donor_map.insert(i, new);
            }
            Origin::Connector => {}
        }
    }
    let donor_top = pieces.iter().position(|p| match p.origin {
        Origin::Donor(i) => p.token.head == i || !donor_set.contains(&p.token.head),
        _ => false,
    });
    let host_root = pieces.iter().position(|p| matches!(p.origin, Origin::Host(i) if p.token.head == i));
    let root = host_root.or(donor_top).unwrap_or(0);
    let anchor_new = anchor.and_then(|a| host_map.get(&a).copied());

    let heads: Vec<usize> = pieces
        .iter()
        .enumerate()
        .map(|(new, p)| match p.origin {
            Origin::Host(i) if p.token.head == i => new,
            Origin::Host(_) => match host_map.get(&p.token.head) {
                Some(&h) => h,
                None if removed.contains(p.token.head) => donor_top.unwrap_or(root),
                None => root,
            },
            Origin::Donor(_) if Some(new) == donor_top => anchor_new.unwrap_or(if host_root.is_some() { root } else { new }),
            Origin::Donor(_) => match donor_map.get(&p.token.head) {
                Some(&h) => h,
                None if p.token.is_punct() => root,
                None => donor_top.unwrap_or(root),
            },
            Origin::Connector => donor_top.unwrap_or(root),
        })
        .collect();

    let build = |heads: &[usize]| DepParse {
        question_id: question_id.to_string(),
        tokens: pieces
            .iter()
            .enumerate()
            .map(|(new, p)| DepToken { index: new, head: heads[new], ..p.token.clone() })
            .collect(),
    };
    let mut parse = build(&heads);
    if !parse.violations().is_empty() {
        // Re-attaching through the anchor closed a cycle; hang the donor off
        // the root instead.
        let mut fixed = heads.clone();
        if let Some(top) = donor_top {
            fixed[top] = if host_root.is_some() { root } else { top };
        }
        parse = build(&fixed);
    }
    let slots = pieces.iter().map(|p| p.slot).collect();
    (parse, slots)
}

fn units_from_slots(parse: &DepParse, slots: &[usize], annotations: Vec<ClauseAnnotation>) -> Vec<Unit> {
    let mut out = Vec::new();
    for (slot, annotation) in annotations.into_iter().enumerate() {
        let members: Vec<usize> = (0..slots.len()).filter(|&i| slots[i] == slot).collect();
        let (Some(&first), Some(&last)) = (members.first(), members.last()) else {
            continue;
        };
        out.push(Unit { sentence: SubSentence::from_parse(parse, Span::new(first, last + 1)), annotation });
    }
    out
}

/// Sentence-final marks at the end of `tokens`; quotes and brackets stay
/// with the phrase they close.
fn trailing_punct(tokens: &[DepToken]) -> usize {
    tokens
        .iter()
        .rev()
        .take_while(|t| t.is_punct() && matches!(t.form.as_str(), "." | "?" | "!" | ";" | ","))
        .count()
}

fn finish(
    id: &str,
    host: &AnnotatedExample,
    e2: &CompositionalElement,
    method: Method,
    connector: Option<Connector>,
    parse: DepParse,
    units: Vec<Unit>,
    schema: Option<&SchemaDb>,
) -> Result<GeneratedExample, GenerateError> {
    let natsql = combine_clauses(units.iter().map(|u| &u.annotation))?;
    let sql = schema.and_then(|s| match natsql_to_sql(&natsql, s) {
        Ok(sql) => Some(sql),
        Err(e) => {
            tracing::debug!(example = id, error = %e, "no SQL for generated example");
            None
        }
    });
    Ok(GeneratedExample {
        example_id: id.to_string(),
        db_id: host.db_id.clone(),
        source_ids: (host.example_id.clone(), e2.source_example.clone()),
        method,
        connector,
        sentence: parse.text(),
        parse,
        units,
        natsql,
        sql,
    })
}

fn head_outside(tokens: &[DepToken], span: Span) -> Option<usize> {
    tokens[span.start..span.end]
        .iter()
        .find(|t| t.is_root() || !span.contains(t.head))
        .and_then(|t| (!t.is_root()).then_some(t.head))
}

/// Replaces `e1`'s units in `host` with `e2`'s.
pub fn generate_substitution_example(
    e1: &CompositionalElement,
    e2: &CompositionalElement,
    host: &AnnotatedExample,
    id: &str,
    schema: Option<&SchemaDb>,
) -> Result<GeneratedExample, GenerateError> {
    check_pair(e1, e2, host)?;
    let range = unit_range(e1, host)?;
    let tokens = &host.parse.tokens;
    let s1 = e1.span();
    let at_end = s1.end == tokens.len();

    let mut donor: Vec<&DepToken> = e2.tokens.iter().collect();
    let donor_punct = trailing_punct(&e2.tokens);
    if !at_end && donor_punct < donor.len() {
        donor.truncate(donor.len() - donor_punct);
    }
    let host_punct = if at_end { trailing_punct(&tokens[s1.start..s1.end]) } else { 0 };
    let reuse_punct = at_end && donor_punct == 0 && host_punct > 0 && host_punct < s1.len();

    let donor_slot = range.start;
    let mut pieces = Vec::new();
    for u in &host.units[..range.start] {
        for i in u.span().start..u.span().end {
            pieces.push(Piece { origin: Origin::Host(i), token: tokens[i].clone(), slot: pieces_slot(host, i) });
        }
    }
    for t in &donor {
        let slot = donor_slot + e2_unit_of(e2, t.index).unwrap_or(e2.units.len() - 1);
        pieces.push(Piece { origin: Origin::Donor(t.index), token: (*t).clone(), slot });
    }
    if reuse_punct {
        for i in s1.end - host_punct..s1.end {
            pieces.push(Piece {
                origin: Origin::Host(i),
                token: tokens[i].clone(),
                slot: donor_slot + e2.units.len() - 1,
            });
        }
    }
    let shift = e2.units.len() as isize - e1.units.len() as isize;
    for u in &host.units[range.end..] {
        for i in u.span().start..u.span().end {
            let slot = (pieces_slot(host, i) as isize + shift) as usize;
            pieces.push(Piece { origin: Origin::Host(i), token: tokens[i].clone(), slot });
        }
    }

    let removed = if reuse_punct { Span::new(s1.start, s1.end - host_punct) } else { s1 };
    let anchor = head_outside(tokens, s1);
    let donor_set: Vec<usize> = donor.iter().map(|t| t.index).collect();
    let (parse, slots) = assemble(id, pieces, removed, anchor, &donor_set);

    let annotations = host.units[..range.start]
        .iter()
        .chain(&e2.units)
        .chain(&host.units[range.end..])
        .map(|u| u.annotation.clone())
        .collect();
    let units = units_from_slots(&parse, &slots, annotations);
    finish(id, host, e2, Method::Sub, None, parse, units, schema)
}

fn pieces_slot(host: &AnnotatedExample, token: usize) -> usize {
    host.units.iter().position(|u| u.span().contains(token)).unwrap_or(0)
}

fn e2_unit_of(e2: &CompositionalElement, token: usize) -> Option<usize> {
    e2.units.iter().position(|u| u.span().contains(token))
}

/// Appends `e2` after the host's trailing element `e1`, joined by
/// `connector`.
pub fn generate_appending_example(
    host: &AnnotatedExample,
    e1: &CompositionalElement,
    e2: &CompositionalElement,
    connector: Connector,
    id: &str,
    schema: Option<&SchemaDb>,
) -> Result<GeneratedExample, GenerateError> {
    check_pair(e1, e2, host)?;
    if connector == Conj::Or && !e2.all_where() {
        return Err(GenerateError::InvalidConnector);
    }
    let range = unit_range(e1, host)?;
    if e1.position != Position::Trailing || range.end != host.units.len() {
        return Err(GenerateError::NotTrailing(e1.source_example.clone()));
    }
    let tokens = &host.parse.tokens;
    let n = tokens.len();
    let last_unit = &host.units[host.units.len() - 1];
    let host_punct = trailing_punct(&tokens[last_unit.span().start..n]).min(last_unit.span().len() - 1);
    let donor_punct = trailing_punct(&e2.tokens);

    let mut pieces = Vec::new();
    for i in 0..n - host_punct {
        pieces.push(Piece { origin: Origin::Host(i), token: tokens[i].clone(), slot: pieces_slot(host, i) });
    }
    let base = host.units.len();
    pieces.push(Piece {
        origin: Origin::Connector,
        token: DepToken {
            index: 0,
            form: connector.keyword().to_string(),
            lemma: connector.keyword().to_string(),
            pos: "CCONJ".into(),
            head: 0,
            deprel: "cc".into(),
        },
        slot: base,
    });
    for t in &e2.tokens {
        let slot = base + e2_unit_of(e2, t.index).unwrap_or(e2.units.len() - 1);
        pieces.push(Piece { origin: Origin::Donor(t.index), token: t.clone(), slot });
    }
    if donor_punct == 0 {
        for i in n - host_punct..n {
            pieces.push(Piece { origin: Origin::Host(i), token: tokens[i].clone(), slot: base + e2.units.len() - 1 });
        }
    }

    let s1 = e1.span();
    // The new element modifies what the host's trailing element modifies.
    let anchor = head_outside(tokens, s1).or_else(|| {
        tokens[s1.start..s1.end].iter().find(|t| t.is_root()).map(|t| t.index)
    });
    let donor_set: Vec<usize> = e2.tokens.iter().map(|t| t.index).collect();
    let (parse, slots) = assemble(id, pieces, Span::new(n, n), anchor, &donor_set);

    let mut annotations: Vec<ClauseAnnotation> =
        host.units.iter().chain(&e2.units).map(|u| u.annotation.clone()).collect();
    if let Some(NatSqlClause::Where(w)) = annotations[base].payload.as_mut() {
        w.joiner = match connector {
            Conj::Or => Some(Conj::Or),
            Conj::And => None,
        };
    }
    let units = units_from_slots(&parse, &slots, annotations);
    finish(id, host, e2, Method::App, Some(connector), parse, units, schema)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub pairs_considered: usize,
    pub sub_emitted: usize,
    pub app_emitted: usize,
    pub sub_rejected: usize,
    pub app_rejected: usize,
    pub failed_checks: BTreeMap<CheckLabel, usize>,
    pub unconvertible: usize,
    pub errors: usize,
}

impl GenerationStats {
    pub fn merge(&mut self, other: &GenerationStats) {
        self.pairs_considered += other.pairs_considered;
        self.sub_emitted += other.sub_emitted;
        self.app_emitted += other.app_emitted;
        self.sub_rejected += other.sub_rejected;
        self.app_rejected += other.app_rejected;
        for (k, v) in &other.failed_checks {
            *self.failed_checks.entry(*k).or_default() += v;
        }
        self.unconvertible += other.unconvertible;
        self.errors += other.errors;
    }

    fn record(&mut self, verdict: &CheckVerdict) {
        for l in &verdict.failed_checks {
            *self.failed_checks.entry(*l).or_default() += 1;
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DomainOutput {
    pub sub: Vec<GeneratedExample>,
    pub app: Vec<GeneratedExample>,
    pub stats: GenerationStats,
}

pub struct Generator<'a> {
    cfg: GeneratorConfig,
    schema: Option<&'a SchemaDb>,
}

impl<'a> Generator<'a> {
    pub fn new(cfg: GeneratorConfig, schema: Option<&'a SchemaDb>) -> Self {
        Generator { cfg, schema }
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    /// The ordered double loop over element pairs of one domain.
    pub fn generate_domain(
        &self,
        elements: &[CompositionalElement],
        hosts: &[AnnotatedExample],
    ) -> Result<DomainOutput, GenerateError> {
        let mut out = DomainOutput::default();
        let Some(first) = elements.first() else {
            return Ok(out);
        };
        let db = first.db_id.as_str();
        if let Some(e) = elements.iter().find(|e| e.db_id != db) {
            return Err(GenerateError::DomainMismatch(db.to_string(), e.db_id.clone()));
        }
        let by_id: HashMap<&str, &AnnotatedExample> =
            hosts.iter().filter(|h| h.db_id == db).map(|h| (h.example_id.as_str(), h)).collect();

        for e1 in elements {
            let host = *by_id
                .get(e1.source_example.as_str())
                .ok_or_else(|| GenerateError::MissingHost(e1.source_example.clone()))?;
            for e2 in elements {
                if std::ptr::eq(e1, e2) || e1.source_example == e2.source_example {
                    continue;
                }
                out.stats.pairs_considered += 1;
                self.try_sub(e1, e2, host, db, &mut out);
                if e1.position == Position::Trailing {
                    self.try_app(e1, e2, host, db, &mut out);
                }
            }
        }
        Ok(out)
    }

    fn try_sub(&self, e1: &CompositionalElement, e2: &CompositionalElement, host: &AnnotatedExample, db: &str, out: &mut DomainOutput) {
        match can_be_substituted_by(e1, e2, host, &self.cfg) {
            Ok(v) if v.passed => {
                let id = format!("{db}/sub/{:05}", out.sub.len());
                match generate_substitution_example(e1, e2, host, &id, self.schema) {
                    Ok(g) => {
                        if self.schema.is_some() && g.sql.is_none() {
                            out.stats.unconvertible += 1;
                        }
                        out.stats.sub_emitted += 1;
                        out.sub.push(g);
                    }
                    Err(e) => {
                        tracing::warn!(host = %host.example_id, error = %e, "substitution failed");
                        out.stats.errors += 1;
                    }
                }
            }
            Ok(v) => {
                out.stats.sub_rejected += 1;
                out.stats.record(&v);
            }
            Err(e) => {
                tracing::warn!(host = %host.example_id, error = %e, "substitution check failed");
                out.stats.errors += 1;
            }
        }
    }

    fn try_app(&self, e1: &CompositionalElement, e2: &CompositionalElement, host: &AnnotatedExample, db: &str, out: &mut DomainOutput) {
        match can_append(host, e1, e2, &self.cfg) {
            Ok(v) if v.passed => {
                for &c in &self.cfg.connectors {
                    if c == Conj::Or && !e2.all_where() {
                        continue;
                    }
                    let id = format!("{db}/app/{:05}", out.app.len());
                    match generate_appending_example(host, e1, e2, c, &id, self.schema) {
                        Ok(g) => {
                            if self.schema.is_some() && g.sql.is_none() {
                                out.stats.unconvertible += 1;
                            }
                            out.stats.app_emitted += 1;
                            out.app.push(g);
                        }
                        Err(e) => {
                            tracing::warn!(host = %host.example_id, error = %e, "appending failed");
                            out.stats.errors += 1;
                        }
                    }
                }
            }
            Ok(v) => {
                out.stats.app_rejected += 1;
                out.stats.record(&v);
            }
            Err(e) => {
                tracing::warn!(host = %host.example_id, error = %e, "appending check failed");
                out.stats.errors += 1;
            }
        }
    }
}

pub fn generate_domain(
    elements: &[CompositionalElement],
    hosts: &[AnnotatedExample],
    cfg: &GeneratorConfig,
    schema: Option<&SchemaDb>,
) -> Result<DomainOutput, GenerateError> {
    Generator::new(cfg.clone(), schema).generate_domain(elements, hosts)
}
