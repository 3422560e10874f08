//! SystemVerilog assertion subset: tokenizer, parser, checkers.
//!
//! Covered: property declarations (with optional formal ports and end
//! label), `assert`/`assume`/`cover property` statements with action
//! blocks, clocking events, `disable iff`, `|->`/`|=>`, `##N` and
//! `##[m:n]` delays, `[*n]`/`[*m:n]`/`[=n]`/`[->n]`/`[+]` repetition,
//! `and`/`or`/`not`/`intersect`/`within`/`throughout`, and the usual
//! boolean, relational, bitwise, indexing and concatenation expressions.

mod ast;
mod check;
mod diag;
mod external;
mod parser;
mod token;

pub use ast::*;
pub use check::{
    format_log, partition, AssertionRecord, BuiltinChecker, CheckError, CheckStatus,
    PartitionError, SyntaxChecker,
};
pub use diag::{codes, Diagnostic, Severity};
pub use external::{
    external_check, generic_profile, DiagnosticPattern, ExternalChecker, ExternalCheckerConfig,
};
pub use parser::{parse_assertion, parse_with, ParseOptions, ParseOutcome};
pub use token::{token_stream, tokenize, Token, TokenKind};
