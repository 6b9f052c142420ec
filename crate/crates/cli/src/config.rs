//! Pipeline configuration: one TOML document holding file paths, the
//! splitter settings and the generator bounds. Environment variables
//! prefixed with `CGFORGE_` may replace path fields, nothing else.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cgforge_core::generate::GeneratorConfig;
use cgforge_core::splitter::SplitConfig;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "CGFORGE_";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub schema: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub parses: Option<PathBuf>,
    pub elements: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_sub: Option<PathBuf>,
    pub out_app: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Paths {
    fn fields_mut(&mut self) -> [(&'static str, &mut Option<PathBuf>); 10] {
        [
            ("schema", &mut self.schema),
            ("examples", &mut self.examples),
            ("parses", &mut self.parses),
            ("elements", &mut self.elements),
            ("out", &mut self.out),
            ("out_sub", &mut self.out_sub),
            ("out_app", &mut self.out_app),
            ("pred", &mut self.pred),
            ("gold", &mut self.gold),
            ("report", &mut self.report),
        ]
    }

    /// Replaces fields from `CGFORGE_<FIELD>` variables, as read by `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        for (name, slot) in self.fields_mut() {
            let key = format!("{ENV_PREFIX}{}", name.to_ascii_uppercase());
            if let Some(v) = var(&key).filter(|v| !v.is_empty()) {
                tracing::debug!(%key, value = %v, "path from environment");
                *slot = Some(PathBuf::from(v));
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub split: SplitConfig,
    pub generator: GeneratorConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Loads `path` (or the defaults when absent), then applies environment
    /// overrides and validates the algorithm settings.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| CliError::Read { path: p.to_path_buf(), source })?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        cfg.paths.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.split.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.generator.validate().map_err(|e| CliError::Config(format!("generator: {e}")))?;
        for o in self.generator.overrides() {
            tracing::info!(setting = %o, "generator bound overridden");
        }
        Ok(())
    }

    /// SHA-256 over the algorithm settings. Paths are excluded so the same
    /// settings hash identically wherever the files live.
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({ "split": self.split, "generator": self.generator });
        Sha256::digest(canonical.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
