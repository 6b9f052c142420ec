//! A parser for gold-standard SQL plus the exact-set match metric and the
//! difficulty classifier built on it.

mod exact;
mod hardness;
mod parser;

pub use exact::{compare, exact_match, exact_match_queries, ComponentMatch};
pub use hardness::{classify_difficulty, classify_query};
pub use parser::*;
