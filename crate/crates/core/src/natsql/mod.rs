//! The NatSQL intermediate representation: clause grammar, clause
//! combination and conversion to SQL.

mod ast;
mod combine;
mod compile;
mod grammar;

pub use ast::*;
pub use combine::{combine_clauses, CombineError};
pub use compile::{natsql_to_sql, CompileError};
pub use grammar::{parse_clause, parse_query, SyntaxError};
