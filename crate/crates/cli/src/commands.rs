use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use cgforge_core::eval::{dataset_stats, evaluate_exact_match, generated_stats, split_stability_report, Report};
use cgforge_core::extract::{CompositionalElement, Extractor, Position};
use cgforge_core::generate::{generate_domain, GenerationStats};
use cgforge_core::io::{
    read_elements, read_examples, read_generated, read_jsonl, read_parse_file, read_schemas, read_sql_records,
    ElementRecord, ExampleRecord, GeneratedRecord, IoError, SqlRecord,
};
use cgforge_core::natsql::natsql_to_sql;
use cgforge_core::schema_match::PhraseMatcher;
use cgforge_core::splitter::split_with_matcher;
use cgforge_core::{AnnotatedExample, ClauseAnnotation, SchemaDb, Unit};

use crate::artifact::{header, render, write_atomic};
use crate::config::{PipelineConfig, ENV_PREFIX};
use crate::error::CliError;

pub fn need(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &'static str) -> Result<PathBuf, CliError> {
    flag.or_else(|| configured.clone()).ok_or_else(|| CliError::MissingPath {
        flag: name,
        field: name,
        env: format!("{ENV_PREFIX}{}", name.to_ascii_uppercase()),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn parsed<T>(path: &Path, r: Result<T, IoError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Format { path: path.to_path_buf(), source })
}

fn load_schemas(path: &Path) -> Result<BTreeMap<String, SchemaDb>, CliError> {
    let schemas = parsed(path, read_schemas(&read(path)?))?;
    Ok(schemas.into_iter().map(|s| (s.db_id.clone(), s)).collect())
}

fn load_examples(path: &Path) -> Result<Vec<AnnotatedExample>, CliError> {
    parsed(path, read_examples(&read(path)?))
}

/// The schema a record belongs to; records without a database id use the
/// only schema when there is exactly one.
fn schema_for<'a>(
    schemas: &'a BTreeMap<String, SchemaDb>,
    id: &str,
    db_id: Option<&str>,
) -> Result<&'a SchemaDb, CliError> {
    let found = match db_id {
        Some(db) => schemas.get(db),
        None if schemas.len() == 1 => schemas.values().next(),
        None => None,
    };
    found.ok_or_else(|| CliError::UnknownDatabase { id: id.to_string(), db_id: db_id.unwrap_or("<none>").to_string() })
}

pub struct SplitArgs {
    pub parses: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
}

pub fn split(cfg: &PipelineConfig, a: &SplitArgs) -> Result<String, CliError> {
    let records = parsed(&a.parses, read_parse_file(&read(&a.parses)?))?;
    let schemas = load_schemas(&a.schema)?;
    let matchers: HashMap<&str, PhraseMatcher> =
        schemas.iter().map(|(db, s)| (db.as_str(), PhraseMatcher::new(s))).collect();

    let examples = records
        .par_iter()
        .map(|r| {
            let schema = schema_for(&schemas, &r.question_id, r.db_id.as_deref())?;
            let units = split_with_matcher(&r.parse, &matchers[schema.db_id.as_str()], &cfg.split)
                .into_iter()
                .map(|sentence| Unit { sentence, annotation: ClauseAnnotation::none() })
                .collect();
            Ok(AnnotatedExample {
                example_id: r.question_id.clone(),
                db_id: schema.db_id.clone(),
                parse: r.parse.clone(),
                units,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let units: usize = examples.iter().map(|e| e.units.len()).sum();
    let models: BTreeSet<&str> = records.iter().map(|r| r.model.as_str()).collect();
    let summary = json!({ "sentences": examples.len(), "units": units, "parser_models": models });
    let text = render(
        &header("split", "examples", &cfg.hash()),
        examples.iter().map(ExampleRecord::from_example),
        Some(&summary),
    );
    write_atomic(&a.out, &text)?;
    Ok(format!("split: {} sentences, {units} units -> {}", examples.len(), a.out.display()))
}

pub struct ExtractArgs {
    pub examples: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
}

pub fn extract(cfg: &PipelineConfig, a: &ExtractArgs) -> Result<String, CliError> {
    let examples = load_examples(&a.examples)?;
    let schemas = load_schemas(&a.schema)?;
    let extractors: HashMap<&str, Extractor> =
        schemas.iter().map(|(db, s)| (db.as_str(), Extractor::new(s))).collect();

    let per_example = examples
        .par_iter()
        .map(|e| {
            let schema = schema_for(&schemas, &e.example_id, Some(&e.db_id))?;
            Ok(extractors[schema.db_id.as_str()].extract(e))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let elements: Vec<CompositionalElement> = per_example.into_iter().flatten().collect();

    let leading = elements.iter().filter(|e| e.position == Position::Leading).count();
    let trailing = elements.len() - leading;
    let summary = json!({ "examples": examples.len(), "elements": elements.len(), "leading": leading, "trailing": trailing });
    let text = render(
        &header("extract", "elements", &cfg.hash()),
        elements.iter().map(ElementRecord::from_element),
        Some(&summary),
    );
    write_atomic(&a.out, &text)?;
    Ok(format!(
        "extract: {} examples, {} elements ({leading} leading, {trailing} trailing) -> {}",
        examples.len(),
        elements.len(),
        a.out.display()
    ))
}

pub struct GenerateArgs {
    pub elements: PathBuf,
    pub examples: PathBuf,
    pub schema: PathBuf,
    pub out_sub: PathBuf,
    pub out_app: PathBuf,
}

/// Runs the pair loop for every domain in parallel. Domains are visited in
/// database-id order so output order does not depend on scheduling.
pub fn generate(cfg: &PipelineConfig, a: &GenerateArgs) -> Result<String, CliError> {
    let elements = parsed(&a.elements, read_elements(&read(&a.elements)?))?;
    let examples = load_examples(&a.examples)?;
    let schemas = load_schemas(&a.schema)?;

    let mut domains: BTreeMap<&str, Vec<CompositionalElement>> = BTreeMap::new();
    for e in &elements {
        domains.entry(e.db_id.as_str()).or_default().push(e.clone());
    }
    let mut hosts: HashMap<&str, Vec<AnnotatedExample>> = HashMap::new();
    for h in &examples {
        hosts.entry(h.db_id.as_str()).or_default().push(h.clone());
    }

    let outputs = domains
        .par_iter()
        .map(|(db, els)| {
            let schema = schema_for(&schemas, &els[0].source_example, Some(db))?;
            let hs = hosts.get(db).map_or(&[][..], Vec::as_slice);
            let out = generate_domain(els, hs, &cfg.generator, Some(schema))
                .map_err(|source| CliError::Generate { db_id: db.to_string(), source })?;
            tracing::info!(db = %db, sub = out.sub.len(), app = out.app.len(), "domain done");
            Ok((*db, out))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut total = GenerationStats::default();
    let mut per_domain = BTreeMap::new();
    for (db, out) in &outputs {
        total.merge(&out.stats);
        per_domain.insert(*db, &out.stats);
    }
    let summary = json!({ "total": total, "per_domain": per_domain });
    let hash = cfg.hash();
    let sub = outputs.iter().flat_map(|(_, o)| &o.sub).map(GeneratedRecord::from_generated);
    let app = outputs.iter().flat_map(|(_, o)| &o.app).map(GeneratedRecord::from_generated);
    write_atomic(&a.out_sub, &render(&header("generate", "sub", &hash), sub, Some(&summary)))?;
    write_atomic(&a.out_app, &render(&header("generate", "app", &hash), app, Some(&summary)))?;

    let failed: Vec<String> = total.failed_checks.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(format!(
        "generate: {} domains, {} pairs, {} SUB + {} APP emitted, {} + {} rejected, {} unconvertible, {} errors{}{}",
        outputs.len(),
        total.pairs_considered,
        total.sub_emitted,
        total.app_emitted,
        total.sub_rejected,
        total.app_rejected,
        total.unconvertible,
        total.errors,
        if failed.is_empty() { "" } else { "; failed checks: " },
        failed.join(" "),
    ))
}

#[derive(Debug, Serialize)]
struct ComposeRecord {
    id: String,
    db_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    natsql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub struct ComposeArgs {
    pub examples: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
}

/// Records that cannot be combined or compiled keep an `error` and no
/// `sql`; they are counted rather than treated as failures of the run.
pub fn compose(cfg: &PipelineConfig, a: &ComposeArgs) -> Result<String, CliError> {
    let examples = load_examples(&a.examples)?;
    let schemas = load_schemas(&a.schema)?;
    let records = examples
        .par_iter()
        .map(|e| {
            let schema = schema_for(&schemas, &e.example_id, Some(&e.db_id))?;
            let mut r =
                ComposeRecord { id: e.example_id.clone(), db_id: e.db_id.clone(), natsql: None, sql: None, error: None };
            match e.natsql() {
                Ok(q) => {
                    r.natsql = Some(q.to_string());
                    match natsql_to_sql(&q, schema) {
                        Ok(sql) => r.sql = Some(sql),
                        Err(err) => r.error = Some(err.to_string()),
                    }
                }
                Err(err) => r.error = Some(format!("combine: {err}")),
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let converted = records.iter().filter(|r| r.sql.is_some()).count();
    let not_combined = records.iter().filter(|r| r.natsql.is_none()).count();
    let not_compiled = records.len() - converted - not_combined;
    let summary = json!({
        "examples": records.len(),
        "converted": converted,
        "unconvertible": not_compiled,
        "combine_errors": not_combined,
    });
    write_atomic(&a.out, &render(&header("compose", "sql", &cfg.hash()), &records, Some(&summary)))?;
    Ok(format!(
        "compose: {} examples, {converted} converted, {not_compiled} unconvertible, {not_combined} not combinable -> {}",
        records.len(),
        a.out.display()
    ))
}

fn load_sql(path: &Path) -> Result<Vec<SqlRecord>, CliError> {
    parsed(path, read_sql_records(&read(path)?))
}

fn correct(r: &Report) -> usize {
    r.total - r.failures.len()
}

pub struct MatchArgs {
    pub pred: PathBuf,
    pub gold: PathBuf,
    pub schema: Option<PathBuf>,
}

pub fn exact(a: &MatchArgs) -> Result<String, CliError> {
    let pred = load_sql(&a.pred)?;
    let gold = load_sql(&a.gold)?;
    let schemas: Vec<SchemaDb> = match &a.schema {
        Some(p) => load_schemas(p)?.into_values().collect(),
        None => Vec::new(),
    };
    let r = evaluate_exact_match("match", &pred, &gold, &schemas)?;
    Ok(format!("match: {}/{} exact ({:.1}%)", correct(&r), r.total, r.overall_accuracy * 100.0))
}

pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub gold: PathBuf,
    pub schema: PathBuf,
    pub report: PathBuf,
}

pub fn evaluate(cfg: &PipelineConfig, a: &EvaluateArgs) -> Result<String, CliError> {
    let pred = load_sql(&a.pred)?;
    let gold = load_sql(&a.gold)?;
    let schemas: Vec<SchemaDb> = load_schemas(&a.schema)?.into_values().collect();
    let name = a.gold.file_stem().map_or_else(|| "gold".into(), |s| s.to_string_lossy().into_owned());
    let r = evaluate_exact_match(&name, &pred, &gold, &schemas)?;
    write_atomic(&a.report, &render(&header("evaluate", "report", &cfg.hash()), [&r], None))?;
    Ok(format!(
        "{}evaluate: {}/{} exact ({:.1}%) -> {}",
        r.render(),
        correct(&r),
        r.total,
        r.overall_accuracy * 100.0,
        a.report.display()
    ))
}

pub struct StatsArgs {
    pub examples: PathBuf,
    pub schema: PathBuf,
    pub parses: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Difficulty distribution of either generated records (their stored SQL)
/// or annotated examples (compiled here). With `parses`, generated records
/// also get a split-stability comparison against those re-parses.
pub fn stats(cfg: &PipelineConfig, a: &StatsArgs) -> Result<String, CliError> {
    let text = read(&a.examples)?;
    let schemas = load_schemas(&a.schema)?;
    let first: Option<Value> = parsed(&a.examples, read_jsonl::<Value>(&text))?.into_iter().next();
    let is_generated = first.as_ref().is_some_and(|v| v.get("method").is_some());

    let mut out = String::new();
    let mut record = serde_json::Map::new();
    if is_generated {
        let generated = parsed(&a.examples, read_generated(&text))?;
        let d = generated_stats(&generated);
        out.push_str(&d.render());
        record.insert("difficulty".into(), json!(d));
        if let Some(p) = &a.parses {
            let parses = parsed(p, read_parse_file(&read(p)?))?;
            let by_id = parses.into_iter().map(|r| (r.question_id, r.parse)).collect();
            let all: Vec<SchemaDb> = schemas.values().cloned().collect();
            let s = split_stability_report(&generated, &by_id, &all, &cfg.split)?;
            out.push_str(&format!(
                "split stability over {}: {:.1}% exact, {:.1}% within 1, {:.1}% within 2\n",
                s.total,
                s.within_0 * 100.0,
                s.within_1 * 100.0,
                s.within_2 * 100.0
            ));
            record.insert("stability".into(), json!(s));
        }
    } else {
        let examples = parsed(&a.examples, read_examples(&text))?;
        let sql = examples
            .iter()
            .map(|e| {
                let schema = schema_for(&schemas, &e.example_id, Some(&e.db_id))?;
                let compiled = e.natsql().ok().and_then(|q| natsql_to_sql(&q, schema).ok());
                Ok((e.example_id.as_str(), compiled))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let d = dataset_stats(sql.iter().map(|(id, s)| (*id, s.as_deref())));
        out.push_str(&d.render());
        record.insert("difficulty".into(), json!(d));
    }
    if let Some(p) = &a.report {
        write_atomic(p, &render(&header("stats", "report", &cfg.hash()), [Value::Object(record)], None))?;
    }
    Ok(out.trim_end().to_string())
}
