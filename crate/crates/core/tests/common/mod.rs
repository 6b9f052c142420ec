#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use cgforge_core::compact::{read_compact, CompactExample};
use cgforge_core::io::{join_annotations, read_jsonl, read_parse_file, read_schemas, AnnotationRecord};
use cgforge_core::{AnnotatedExample, SchemaDb};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn schemas() -> HashMap<String, SchemaDb> {
    read_schemas(&read_fixture("schemas.json"))
        .expect("schemas")
        .into_iter()
        .map(|s| (s.db_id.clone(), s))
        .collect()
}

pub fn worked_examples() -> Vec<AnnotatedExample> {
    let parses = read_parse_file(&read_fixture("worked/parses.conll")).expect("parses");
    let notes: Vec<AnnotationRecord> = read_jsonl(&read_fixture("worked/annotations.jsonl")).expect("annotations");
    join_annotations(&parses, notes).expect("join")
}

pub fn example<'a>(all: &'a [AnnotatedExample], id: &str) -> &'a AnnotatedExample {
    all.iter().find(|e| e.example_id == id).unwrap_or_else(|| panic!("no example {id}"))
}

pub fn compact(rel: &str) -> Vec<CompactExample> {
    read_compact(&read_fixture(rel)).expect("compact fixture")
}

pub fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}
