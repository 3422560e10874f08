use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::diag::Diagnostic;
use super::parser::{parse_with, ParseOptions};
use crate::tree::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    /// The checker could not run at all (missing binary, spawn failure).
    #[error("checker unavailable: {0}")]
    Unavailable(String),
    #[error("checker timed out after {0} s")]
    Timeout(u64),
    #[error("checker configuration: {0}")]
    Config(String),
    #[error("checker i/o: {0}")]
    Io(String),
}

/// Anything that turns assertion text into diagnostics. An empty list (or
/// one with warnings only) means the text passes.
pub trait SyntaxChecker: Send + Sync {
    fn check(&self, assertion_text: &str) -> Result<Vec<Diagnostic>, CheckError>;

    fn name(&self) -> &str;
}

/// The in-process parser.
#[derive(Debug, Clone, Default)]
pub struct BuiltinChecker {
    options: ParseOptions,
}

impl BuiltinChecker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Warn on identifiers outside `signals`.
    pub fn with_known_signals<I: IntoIterator<Item = String>>(signals: I) -> Self {
        Self { options: ParseOptions { known_identifiers: Some(signals.into_iter().collect::<HashSet<_>>()) } }
    }
}

impl SyntaxChecker for BuiltinChecker {
    fn check(&self, assertion_text: &str) -> Result<Vec<Diagnostic>, CheckError> {
        Ok(parse_with(assertion_text, &self.options).diagnostics)
    }

    fn name(&self) -> &str {
        "builtin"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Unchecked,
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionRecord {
    pub text: String,
    pub signal: String,
    /// Tree node the text first appeared in; `None` for corrected texts.
    pub node_id: Option<NodeId>,
    pub status: CheckStatus,
    pub diagnostics: Vec<Diagnostic>,
}

impl AssertionRecord {
    pub fn new(text: impl Into<String>, signal: impl Into<String>, node_id: Option<NodeId>) -> Self {
        Self {
            text: text.into(),
            signal: signal.into(),
            node_id,
            status: CheckStatus::Unchecked,
            diagnostics: Vec::new(),
        }
    }

    /// Runs `checker` and fills status/diagnostics.
    pub fn check_with(&mut self, checker: &dyn SyntaxChecker) -> Result<(), CheckError> {
        match checker.check(&self.text) {
            Ok(diags) => {
                self.status = if diags.iter().any(Diagnostic::is_error) {
                    CheckStatus::Fail
                } else {
                    CheckStatus::Pass
                };
                self.diagnostics = diags;
                Ok(())
            }
            Err(e) => {
                self.status = CheckStatus::Unchecked;
                self.diagnostics.clear();
                Err(e)
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{} assertion(s) left unchecked: {cause}", unchecked.len())]
pub struct PartitionError {
    pub cause: CheckError,
    /// Records the checker failed on, in input order.
    pub unchecked: Vec<AssertionRecord>,
}

/// Checks every record once and splits them into (passing, failing), keeping
/// input order within each group.
pub fn partition(
    records: Vec<AssertionRecord>,
    checker: &dyn SyntaxChecker,
) -> Result<(Vec<AssertionRecord>, Vec<AssertionRecord>), PartitionError> {
    let mut pass = Vec::new();
    let mut fail = Vec::new();
    let mut unchecked = Vec::new();
    let mut cause = None;
    for mut r in records {
        match r.check_with(checker) {
            Ok(()) if r.status == CheckStatus::Pass => pass.push(r),
            Ok(()) => fail.push(r),
            Err(e) => {
                cause.get_or_insert(e);
                unchecked.push(r);
            }
        }
    }
    match cause {
        Some(cause) => Err(PartitionError { cause, unchecked }),
        None => Ok((pass, fail)),
    }
}

/// Renders checked records as the log handed to the critic and generator.
pub fn format_log(records: &[AssertionRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        let verdict = match r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Unchecked => "UNCHECKED",
        };
        let _ = writeln!(out, "Assertion {}: {verdict}", i + 1);
        for d in &r.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out
}
