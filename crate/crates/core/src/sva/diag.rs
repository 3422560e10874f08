use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Diagnostic codes. Their text is part of the prompt contract, so changing
/// one changes scripted replays.
pub mod codes {
    pub const UNEXPECTED_TOKEN: &str = "E001";
    pub const EXPECTED_EXPRESSION: &str = "E002";
    pub const EXPECTED_TOKEN: &str = "E003";
    pub const UNEXPECTED_EOF: &str = "E004";
    pub const LEXICAL: &str = "E005";
    pub const ARITY: &str = "E006";
    pub const LABEL_MISMATCH: &str = "E007";
    pub const EMPTY_INPUT: &str = "E008";
    pub const TOOL_FAILURE: &str = "E100";
    pub const UNRESOLVED_PROPERTY: &str = "W001";
    pub const UNKNOWN_SYSTEM_FUNCTION: &str = "W002";
    pub const UNKNOWN_IDENTIFIER: &str = "W003";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// 1-based.
    pub line: u32,
    /// 1-based.
    pub column: u32,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: u32, column: u32, code: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, line, column, code: code.into(), message: message.into() }
    }

    pub fn warning(line: u32, column: u32, code: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, line, column, code: code.into(), message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}[{}]: {}", self.line, self.column, self.severity, self.code, self.message)
    }
}

/// Line/column just past the last character of `source`.
pub fn end_position(source: &str) -> (u32, u32) {
    let line = source.matches('\n').count() as u32 + 1;
    let last = source.rsplit('\n').next().unwrap_or("");
    (line, last.chars().count() as u32 + 1)
}
