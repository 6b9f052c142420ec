//! Output files: a header line naming the tool version and config hash,
//! the records, and an optional summary line. Files are written to a
//! temporary sibling and renamed into place.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use cgforge_core::io::{to_jsonl, HEADER_KEY, SUMMARY_KEY};

use crate::error::CliError;

pub fn header(command: &str, artifact: &str, config_hash: &str) -> Value {
    json!({
        HEADER_KEY: {
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "artifact": artifact,
            "config_hash": config_hash,
        }
    })
}

pub fn render<T: Serialize>(header: &Value, records: impl IntoIterator<Item = T>, summary: Option<&Value>) -> String {
    let mut s = format!("{header}\n");
    s.push_str(&to_jsonl(records));
    if let Some(v) = summary {
        s.push_str(&json!({ SUMMARY_KEY: v }).to_string());
        s.push('\n');
    }
    s
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let err = |source| CliError::Write { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
