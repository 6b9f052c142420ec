//! Compositional data augmentation for text-to-SQL: sentence splitting,
//! NatSQL clause handling, compositional element extraction, example
//! generation and evaluation.

pub mod compact;
pub mod eval;
pub mod extract;
pub mod generate;
pub mod io;
pub mod natsql;
pub mod schema_match;
pub mod splitter;
pub mod sql;
pub mod types;

pub use types::*;
