//! Adapter that runs an external formal/lint tool over one assertion and
//! turns its output into diagnostics.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::check::{CheckError, SyntaxChecker};
use super::diag::{codes, Diagnostic, Severity};

pub const FILE_PLACEHOLDER: &str = "{file}";

/// One output pattern. Named groups: `line` (required), `col` and `message`
/// (optional; the whole line is the message when absent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticPattern {
    pub regex: String,
    pub severity: Severity,
    #[serde(default)]
    pub code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalCheckerConfig {
    /// Command line with a `{file}` placeholder, split shell-style.
    pub command: String,
    pub patterns: Vec<DiagnosticPattern>,
    pub timeout_secs: u64,
}

impl Default for ExternalCheckerConfig {
    fn default() -> Self {
        Self { command: String::new(), patterns: generic_profile(), timeout_secs: 60 }
    }
}

/// Profile for tools printing `ERROR (line N): text` / `WARNING (line N): text`.
pub fn generic_profile() -> Vec<DiagnosticPattern> {
    let pat = |word: &str, severity| DiagnosticPattern {
        regex: format!(
            r"^\s*{word}\s*\(line\s+(?P<line>\d+)(?:\s*,\s*col(?:umn)?\s+(?P<col>\d+))?\)\s*:?\s*(?P<message>.*)$"
        ),
        severity,
        code: None,
    };
    vec![pat("ERROR", Severity::Error), pat("WARNING", Severity::Warning)]
}

pub struct ExternalChecker {
    argv: Vec<String>,
    patterns: Vec<(Regex, Severity, String)>,
    timeout: Duration,
}

impl ExternalChecker {
    pub fn new(config: &ExternalCheckerConfig) -> Result<Self, CheckError> {
        let argv = shlex::split(&config.command)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| CheckError::Config(format!("cannot split command {:?}", config.command)))?;
        if !argv.iter().any(|a| a.contains(FILE_PLACEHOLDER)) {
            return Err(CheckError::Config(format!("command lacks the {FILE_PLACEHOLDER} placeholder")));
        }
        let patterns = config
            .patterns
            .iter()
            .map(|p| {
                let re = Regex::new(&p.regex).map_err(|e| CheckError::Config(e.to_string()))?;
                if !re.capture_names().any(|n| n == Some("line")) {
                    return Err(CheckError::Config(format!("pattern {:?} lacks a `line` group", p.regex)));
                }
                let code = p.code.clone().unwrap_or_else(|| match p.severity {
                    Severity::Error => codes::TOOL_FAILURE.to_string(),
                    Severity::Warning => "W100".to_string(),
                });
                Ok((re, p.severity, code))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { argv, patterns, timeout: Duration::from_secs(config.timeout_secs.max(1)) })
    }

    fn parse_output(&self, output: &str, source: &str, success: bool, status: &str) -> Vec<Diagnostic> {
        let max_line = source.lines().count().max(1) as u32;
        let mut diags = Vec::new();
        for line in output.lines() {
            for (re, severity, code) in &self.patterns {
                let Some(caps) = re.captures(line) else { continue };
                let num = |name| caps.name(name).and_then(|m| m.as_str().parse::<u32>().ok());
                let message = caps
                    .name("message")
                    .map_or(line.trim(), |m| m.as_str().trim())
                    .to_string();
                diags.push(Diagnostic {
                    severity: *severity,
                    line: num("line").unwrap_or(1).clamp(1, max_line),
                    column: num("col").unwrap_or(1).max(1),
                    code: code.clone(),
                    message,
                });
                break;
            }
        }
        if !success && !diags.iter().any(Diagnostic::is_error) {
            diags.push(Diagnostic::error(1, 1, codes::TOOL_FAILURE, format!("tool exited with {status}")));
        }
        diags
    }
}

impl SyntaxChecker for ExternalChecker {
    fn check(&self, assertion_text: &str) -> Result<Vec<Diagnostic>, CheckError> {
        let io = |e: std::io::Error| CheckError::Io(e.to_string());
        let mut file = tempfile::Builder::new().prefix("assertion").suffix(".sv").tempfile().map_err(io)?;
        file.write_all(assertion_text.as_bytes()).map_err(io)?;
        file.flush().map_err(io)?;
        let path = file.path().to_string_lossy().into_owned();
        let args: Vec<String> = self.argv.iter().map(|a| a.replace(FILE_PLACEHOLDER, &path)).collect();

        let mut child = Command::new(&args[0])
            .args(&args[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CheckError::Unavailable(format!("{}: {e}", args[0])))?;

        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let status = match child.wait_timeout(self.timeout).map_err(io)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(CheckError::Timeout(self.timeout.as_secs()));
            }
        };
        let mut output = out_reader.join().unwrap_or_default();
        output.push('\n');
        output.push_str(&err_reader.join().unwrap_or_default());
        Ok(self.parse_output(&output, assertion_text, status.success(), &status.to_string()))
    }

    fn name(&self) -> &str {
        "external"
    }
}

/// Runs `command_template` once over `assertion_text` with the generic
/// output profile.
pub fn external_check(command_template: &str, assertion_text: &str) -> Result<Vec<Diagnostic>, CheckError> {
    let config = ExternalCheckerConfig { command: command_template.to_string(), ..Default::default() };
    ExternalChecker::new(&config)?.check(assertion_text)
}
