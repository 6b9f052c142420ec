use std::path::PathBuf;

use cgforge_core::eval::EvalError;
use cgforge_core::generate::GenerateError;
use cgforge_core::io::IoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("missing input: pass --{flag} or set paths.{field} / CGFORGE_{env}")]
    MissingPath { flag: &'static str, field: &'static str, env: String },
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: IoError },
    #[error("`{id}` refers to database `{db_id}`, which is not in the schema file")]
    UnknownDatabase { id: String, db_id: String },
    #[error("domain {db_id}: {source}")]
    Generate { db_id: String, source: GenerateError },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl CliError {
    /// Stable `module::Kind` code printed with every error.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::MissingPath { .. } => "config::ConfigError",
            CliError::Read { .. } | CliError::Write { .. } => "io::IoError",
            CliError::Format { source: IoError::Json { .. }, .. } => "io::Json",
            CliError::Format { source: IoError::Format { .. }, .. } => "io::Format",
            CliError::UnknownDatabase { .. } => "io::UnknownDatabase",
            CliError::Generate { source, .. } => match source {
                GenerateError::DomainMismatch(..) => "generate::DomainMismatch",
                GenerateError::SameSource(_) => "generate::SameSource",
                GenerateError::ForeignHost { .. } => "generate::ForeignHost",
                GenerateError::NotTrailing(_) => "generate::NotTrailing",
                GenerateError::InvalidConnector => "generate::InvalidConnector",
                GenerateError::MissingHost(_) => "generate::MissingHost",
                GenerateError::Combine(_) => "natsql::CombineError",
            },
            CliError::Eval(e) => match e {
                EvalError::IdMismatch { .. } => "eval::IdMismatch",
                EvalError::DuplicateId(_) => "eval::DuplicateId",
                EvalError::GoldParse { .. } => "eval::GoldParse",
                EvalError::MissingParses(_) => "eval::MissingParses",
            },
        }
    }
}
