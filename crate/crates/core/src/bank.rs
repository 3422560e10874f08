//! Per-signal information bank: data model, construction from the three
//! analyzer agents, and JSON persistence.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{context, AgentError, ChatBackend, TemplateSet};
use crate::sva::{tokenize, TokenKind};

#[derive(Debug, Error)]
pub enum BankError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("stage 1: {0}")]
    Stage(String),
    #[error("invalid bank: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Load { path: String, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalInfo {
    pub spec_name: String,
    pub verilog_name: String,
    pub description: String,
    #[serde(default)]
    pub definition: String,
    #[serde(default)]
    pub functionality: String,
    #[serde(default)]
    pub interconnection: String,
    #[serde(default)]
    pub additional_info: String,
    #[serde(default)]
    pub related_signals: Vec<String>,
}

impl SignalInfo {
    /// The bank entry as embedded in stage-2/3 prompts.
    pub fn excerpt(&self) -> String {
        let mut out = format!("Signal: {}", self.verilog_name);
        if !self.spec_name.is_empty() && self.spec_name != self.verilog_name {
            let _ = write!(out, " ({})", self.spec_name);
        }
        for (label, value) in [
            ("Description", &self.description),
            ("Definition", &self.definition),
            ("Functionality", &self.functionality),
            ("Interconnection", &self.interconnection),
            ("Additional Information", &self.additional_info),
        ] {
            if !value.is_empty() {
                let _ = write!(out, "\n{label}: {value}");
            }
        }
        if !self.related_signals.is_empty() {
            let _ = write!(out, "\nRelated Signals: {}", self.related_signals.join(", "));
        }
        out
    }

    /// Query used against the reference index.
    pub fn rag_query(&self) -> String {
        format!("{} {}", self.verilog_name, self.description)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveformSummary {
    pub waveform_name: String,
    pub signals: Vec<String>,
    #[serde(default)]
    pub timing_relationship: String,
    #[serde(default)]
    pub causal_dependencies: String,
    #[serde(default)]
    pub state_transitions: String,
    #[serde(default)]
    pub protocol_mechanisms: String,
    #[serde(default)]
    pub additional_observations: String,
}

impl WaveformSummary {
    pub fn render(&self) -> String {
        let mut out = format!("[Waveform Name]: {}\n[Signals]: {}", self.waveform_name, self.signals.join(", "));
        for (label, value) in [
            ("Timing Relationship", &self.timing_relationship),
            ("Causal Dependencies", &self.causal_dependencies),
            ("State Transitions", &self.state_transitions),
            ("Protocol/Handshaking Mechanisms", &self.protocol_mechanisms),
            ("Additional Observations", &self.additional_observations),
        ] {
            if !value.is_empty() {
                let _ = write!(out, "\n- [{label}]: {value}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationBank {
    pub design_name: String,
    pub workflow_info: String,
    pub signals: Vec<SignalInfo>,
    #[serde(default)]
    pub waveforms: Vec<WaveformSummary>,
}

impl InformationBank {
    /// Checks hard invariants; returns soft warnings (dangling related signals).
    pub fn validate(&self) -> Result<Vec<String>, BankError> {
        if self.signals.is_empty() {
            return Err(BankError::Invalid("no signals".into()));
        }
        let mut seen = HashSet::new();
        for (i, s) in self.signals.iter().enumerate() {
            if s.verilog_name.trim().is_empty() {
                return Err(BankError::Invalid(format!("signals[{i}].verilog_name is empty")));
            }
            if !seen.insert(s.verilog_name.as_str()) {
                return Err(BankError::Invalid(format!("duplicate verilog_name {:?}", s.verilog_name)));
            }
        }
        for (i, w) in self.waveforms.iter().enumerate() {
            if w.signals.is_empty() {
                return Err(BankError::Invalid(format!("waveforms[{i}].signals is empty")));
            }
        }
        let known: HashSet<&str> = self
            .signals
            .iter()
            .flat_map(|s| [s.spec_name.as_str(), s.verilog_name.as_str()])
            .collect();
        let mut warnings = Vec::new();
        for s in &self.signals {
            for r in &s.related_signals {
                if !known.contains(r.as_str()) {
                    warnings.push(format!("{}: related signal {r:?} is not in the bank", s.verilog_name));
                }
            }
        }
        Ok(warnings)
    }

    pub fn signal(&self, verilog_name: &str) -> Option<&SignalInfo> {
        self.signals.iter().find(|s| s.verilog_name == verilog_name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bank serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BankError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let bank: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let inner = e.inner().to_string();
            if let Some(field) = inner.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
            BankError::Load { path, message: inner }
        })?;
        bank.validate()?;
        Ok(bank)
    }
}

pub fn save_bank(bank: &InformationBank, path: &Path) -> Result<(), BankError> {
    bank.validate()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BankError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bank.to_json()).map_err(|e| BankError::Io(format!("{}: {e}", path.display())))
}

pub fn load_bank(path: &Path) -> Result<InformationBank, BankError> {
    let text = std::fs::read_to_string(path).map_err(|e| BankError::Io(format!("{}: {e}", path.display())))?;
    InformationBank::from_json(&text)
}

/// Forgiving `[Header]: content` sections. Headers are matched at line start
/// (after optional bullet, bold or brackets) against `names`,
/// case-insensitively; content runs to the next recognized header.
fn sections(text: &str, names: &[&str]) -> Vec<(usize, String)> {
    let header = |line: &str| -> Option<(usize, String)> {
        let mut s = line.trim_start();
        s = s.trim_start_matches(['-', '*', '•', '#', ' ']);
        let lower = s.to_ascii_lowercase();
        for (idx, name) in names.iter().enumerate() {
            let n = name.to_ascii_lowercase();
            for (open, close) in [("[", "]"), ("", "")] {
                let Some(rest) = lower.strip_prefix(open).and_then(|r| r.strip_prefix(n.as_str())) else {
                    continue;
                };
                let Some(rest) = rest.strip_prefix(close) else { continue };
                let rest = rest.trim_start_matches('*').trim_start();
                let Some(body) = rest.strip_prefix(':') else { continue };
                let offset = s.len() - body.len();
                return Some((idx, s[offset..].trim_start_matches(['*', ' ']).trim().to_string()));
            }
        }
        None
    };
    let mut out: Vec<(usize, String)> = Vec::new();
    for line in text.lines() {
        if let Some(h) = header(line) {
            out.push(h);
        } else if let Some((_, body)) = out.last_mut() {
            if !line.trim().is_empty() {
                if !body.is_empty() {
                    body.push('\n');
                }
                body.push_str(line.trim());
            }
        }
    }
    out
}

fn clean_name(s: &str) -> String {
    s.trim().trim_matches(|c: char| "[]`*\"'".contains(c) || c.is_whitespace()).to_string()
}

fn split_list(s: &str) -> Vec<String> {
    s.split([',', ';', '\n'])
        .map(clean_name)
        .filter(|x| !x.is_empty() && !x.eq_ignore_ascii_case("none") && !x.eq_ignore_ascii_case("n/a"))
        .collect()
}

fn mapping_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:[-*•]\s*|\d+\.\s*)?(?:\*\*)?\[?\s*`?([A-Za-z_][A-Za-z0-9_$]*)`?\s*\]?(?:\*\*)?\s*:\s*(.*\S)\s*$")
            .expect("valid")
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mapping {
    pub pairs: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Parses `[name]: description` lines, keeping names that occur as
/// identifiers in `verilog_decls`.
pub fn parse_mapping(response: &str, verilog_decls: &str) -> Mapping {
    let idents: HashSet<String> = tokenize(verilog_decls)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| t.lexeme)
        .collect();
    let mut out = Mapping::default();
    for line in response.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let Some(caps) = mapping_line().captures(line) else {
            out.warnings.push(format!("unparsed mapping line: {line}"));
            continue;
        };
        let (name, desc) = (caps[1].to_string(), caps[2].trim().to_string());
        if !idents.contains(&name) {
            out.warnings.push(format!("{name}: not declared in the Verilog file, dropped"));
        } else if out.pairs.iter().any(|(n, _)| *n == name) {
            out.warnings.push(format!("{name}: mapped twice, keeping the first"));
        } else {
            out.pairs.push((name, desc));
        }
    }
    out
}

pub fn map_signals(
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
    spec_text: &str,
    verilog_decls: &str,
) -> Result<Mapping, BankError> {
    if spec_text.trim().is_empty() || verilog_decls.trim().is_empty() {
        return Err(BankError::Stage("specification and Verilog declarations must be non-empty".into()));
    }
    let ctx = context([("specification_text", spec_text), ("verilog_decls", verilog_decls)]);
    let reply = crate::agents::call(backend, &templates.signal_mapper, &ctx)?;
    let mapping = parse_mapping(&reply, verilog_decls);
    if mapping.pairs.is_empty() {
        return Err(BankError::Stage("signal mapper produced no usable signals".into()));
    }
    Ok(mapping)
}

const SIGNAL_SECTIONS: [&str; 7] = [
    "Signal Name",
    "Description",
    "Definition",
    "Functionality",
    "Interconnection",
    "Additional Information",
    "Related Signals",
];

/// Builds a `SignalInfo` from a spec-analyzer reply.
pub fn parse_signal_info(response: &str, verilog_name: &str, mapped_description: &str) -> Result<SignalInfo, BankError> {
    if !response.contains(verilog_name) {
        return Err(BankError::Stage(format!("{verilog_name}: analyzer response never names the signal")));
    }
    let mut fields: [String; 7] = Default::default();
    for (idx, body) in sections(response, &SIGNAL_SECTIONS) {
        if fields[idx].is_empty() {
            fields[idx] = body;
        }
    }
    let [name, description, definition, functionality, interconnection, additional_info, related] = fields;
    let spec_name = clean_name(name.lines().next().unwrap_or(""));
    Ok(SignalInfo {
        spec_name: if spec_name.is_empty() { verilog_name.to_string() } else { spec_name },
        verilog_name: verilog_name.to_string(),
        description: if description.is_empty() { mapped_description.to_string() } else { description },
        definition,
        functionality,
        interconnection,
        additional_info,
        related_signals: split_list(&related),
    })
}

pub fn analyze_signal(
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
    spec_text: &str,
    signal_name: &str,
    mapped_description: &str,
) -> Result<SignalInfo, BankError> {
    let ctx = context([("specification_text", spec_text), ("signal_name", signal_name)]);
    let reply = crate::agents::call(backend, &templates.spec_analyzer, &ctx)?;
    parse_signal_info(&reply, signal_name, mapped_description)
}

const WAVEFORM_SECTIONS: [&str; 8] = [
    "Waveform Name",
    "Signals",
    "Timing Relationship",
    "Causal Dependencies",
    "State Transitions",
    "Protocol/Handshaking Mechanisms",
    "Additional Observations",
    "Interdependence Analysis",
];

pub fn parse_waveform(response: &str, fallback_name: &str) -> Option<WaveformSummary> {
    let mut fields: [String; 8] = Default::default();
    for (idx, body) in sections(response, &WAVEFORM_SECTIONS) {
        if fields[idx].is_empty() {
            fields[idx] = body;
        }
    }
    let [name, signals, timing, causal, states, protocol, other, _] = fields;
    let signals = split_list(&signals);
    if signals.is_empty() {
        return None;
    }
    let name = clean_name(&name);
    Some(WaveformSummary {
        waveform_name: if name.is_empty() { fallback_name.to_string() } else { name },
        signals,
        timing_relationship: timing,
        causal_dependencies: causal,
        state_transitions: states,
        protocol_mechanisms: protocol,
        additional_observations: other,
    })
}

/// `Ok(None)` when the reply cannot be parsed; waveforms are optional.
pub fn analyze_waveform(
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
    spec_text: &str,
    waveform_ref: &str,
    label: &str,
) -> Result<Option<WaveformSummary>, BankError> {
    let ctx = context([("specification_text", spec_text), ("waveform_text", waveform_ref)]);
    let reply = crate::agents::call(backend, &templates.waveform_analyzer, &ctx)?;
    Ok(parse_waveform(&reply, label))
}

pub fn workflow_info(pairs: &[(String, String)], waveforms: &[WaveformSummary], design_summary: Option<&str>) -> String {
    let mut out = String::from("Signal mapping:\n");
    for (name, desc) in pairs {
        let _ = writeln!(out, "[{name}]: {desc}");
    }
    if !waveforms.is_empty() {
        out.push_str("\nWaveform analyses:\n");
        for w in waveforms {
            out.push_str(&w.render());
            out.push_str("\n\n");
        }
    }
    if let Some(summary) = design_summary.map(str::trim).filter(|s| !s.is_empty()) {
        let _ = writeln!(out, "\nDesign summary:\n{summary}");
    }
    out.trim_end().to_string()
}

pub struct BankInputs<'a> {
    pub design_name: &'a str,
    pub spec_text: &'a str,
    pub verilog_decls: &'a str,
    /// `(label, text)` per waveform description.
    pub waveforms: &'a [(String, String)],
    pub design_summary: Option<&'a str>,
}

#[derive(Debug, Clone)]
pub struct BankBuild {
    pub bank: InformationBank,
    pub warnings: Vec<String>,
}

/// Mapper, then one analysis per mapped signal, then one per waveform.
/// Signals whose analysis fails are dropped with a warning.
pub fn build_bank(backend: &dyn ChatBackend, templates: &TemplateSet, inputs: &BankInputs<'_>) -> Result<BankBuild, BankError> {
    let mapping = map_signals(backend, templates, inputs.spec_text, inputs.verilog_decls)?;
    let mut warnings = mapping.warnings.clone();
    let mut signals = Vec::new();
    for (name, desc) in &mapping.pairs {
        match analyze_signal(backend, templates, inputs.spec_text, name, desc) {
            Ok(info) => signals.push(info),
            Err(BankError::Stage(msg)) => warnings.push(msg),
            Err(e) => return Err(e),
        }
    }
    if signals.is_empty() {
        return Err(BankError::Stage("no signal could be analyzed".into()));
    }
    let mut waveforms = Vec::new();
    for (label, text) in inputs.waveforms {
        match analyze_waveform(backend, templates, inputs.spec_text, text, label)? {
            Some(w) => waveforms.push(w),
            None => warnings.push(format!("waveform {label}: unparseable analysis, skipped")),
        }
    }
    let bank = InformationBank {
        design_name: inputs.design_name.to_string(),
        workflow_info: workflow_info(&mapping.pairs, &waveforms, inputs.design_summary),
        signals,
        waveforms,
    };
    warnings.extend(bank.validate()?);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(BankBuild { bank, warnings })
}
