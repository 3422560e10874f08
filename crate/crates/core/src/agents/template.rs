use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::backend::ChatMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    SignalMapper,
    SpecAnalyzer,
    WaveformAnalyzer,
    Sva,
    Critic,
    SyntaxCorrection,
    Deduplication,
}

impl AgentRole {
    pub const ALL: [AgentRole; 7] = [
        AgentRole::SignalMapper,
        AgentRole::SpecAnalyzer,
        AgentRole::WaveformAnalyzer,
        AgentRole::Sva,
        AgentRole::Critic,
        AgentRole::SyntaxCorrection,
        AgentRole::Deduplication,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::SignalMapper => "signal_mapper",
            AgentRole::SpecAnalyzer => "spec_analyzer",
            AgentRole::WaveformAnalyzer => "waveform_analyzer",
            AgentRole::Sva => "sva",
            AgentRole::Critic => "critic",
            AgentRole::SyntaxCorrection => "syntax_correction",
            AgentRole::Deduplication => "deduplication",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("missing placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("template {name}: {message}")]
    Malformed { name: String, message: String },
    #[error("template {name}: {message}")]
    Io { name: String, message: String },
}

/// Placeholder values keyed by name.
pub type PromptContext = BTreeMap<String, String>;

/// Builds a context from `(name, value)` pairs.
pub fn context<'a, I>(pairs: I) -> PromptContext
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: AgentRole,
    pub system_text: String,
    pub user_text_template: String,
}

impl PromptTemplate {
    /// Parses the `[system]` / `[user]` section file format.
    pub fn parse(role: AgentRole, name: &str, text: &str) -> Result<Self, TemplateError> {
        let mut system: Option<Vec<&str>> = None;
        let mut user: Option<Vec<&str>> = None;
        let mut in_user = None;
        for line in text.lines() {
            match line.trim_end() {
                "[system]" => {
                    system = Some(Vec::new());
                    in_user = Some(false);
                }
                "[user]" => {
                    user = Some(Vec::new());
                    in_user = Some(true);
                }
                _ => match in_user {
                    Some(true) => user.as_mut().expect("open").push(line),
                    Some(false) => system.as_mut().expect("open").push(line),
                    None if line.trim().is_empty() => {}
                    None => {
                        return Err(TemplateError::Malformed {
                            name: name.into(),
                            message: "text before the first section header".into(),
                        })
                    }
                },
            }
        }
        let missing = |s: &str| TemplateError::Malformed { name: name.into(), message: format!("no [{s}] section") };
        let join = |lines: Vec<&str>| lines.join("\n").trim_matches('\n').to_string();
        Ok(Self {
            role,
            system_text: join(system.ok_or_else(|| missing("system"))?),
            user_text_template: join(user.ok_or_else(|| missing("user"))?),
        })
    }

    /// Names referenced in either section, in first-use order.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names = Vec::new();
        for text in [&self.system_text, &self.user_text_template] {
            for seg in segments(text) {
                if let Segment::Placeholder(n) = seg {
                    if !names.iter().any(|x| x == n) {
                        names.push(n.to_string());
                    }
                }
            }
        }
        names
    }

    /// `[system, user]` with every placeholder substituted.
    pub fn render(&self, ctx: &PromptContext) -> Result<Vec<ChatMessage>, TemplateError> {
        Ok(vec![
            ChatMessage::system(substitute(&self.system_text, ctx)?),
            ChatMessage::user(substitute(&self.user_text_template, ctx)?),
        ])
    }
}

pub fn render_prompt(template: &PromptTemplate, ctx: &PromptContext) -> Result<Vec<ChatMessage>, TemplateError> {
    template.render(ctx)
}

enum Segment<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

/// `{name}` with `name` in `[a-z0-9_]+` is a placeholder; `{{`/`}}` escape a
/// brace; any other brace is literal.
fn segments(text: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let (mut i, mut lit) = (0, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Segment::Text(&text[lit..i + 1]));
                i += 2;
                lit = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Segment::Text(&text[lit..i + 1]));
                i += 2;
                lit = i;
            }
            b'{' => {
                let name_len = bytes[i + 1..]
                    .iter()
                    .take_while(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || **b == b'_')
                    .count();
                if name_len > 0 && bytes.get(i + 1 + name_len) == Some(&b'}') {
                    out.push(Segment::Text(&text[lit..i]));
                    out.push(Segment::Placeholder(&text[i + 1..i + 1 + name_len]));
                    i += name_len + 2;
                    lit = i;
                } else {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    out.push(Segment::Text(&text[lit..]));
    out
}

fn substitute(text: &str, ctx: &PromptContext) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    for seg in segments(text) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Placeholder(name) => out.push_str(
                ctx.get(name).ok_or_else(|| TemplateError::MissingPlaceholder(name.to_string()))?,
            ),
        }
    }
    Ok(out)
}

const DEFAULTS: [(&str, AgentRole, &str); 8] = [
    ("signal_mapper", AgentRole::SignalMapper, include_str!("../../templates/signal_mapper.txt")),
    ("spec_analyzer", AgentRole::SpecAnalyzer, include_str!("../../templates/spec_analyzer.txt")),
    ("waveform_analyzer", AgentRole::WaveformAnalyzer, include_str!("../../templates/waveform_analyzer.txt")),
    ("sva", AgentRole::Sva, include_str!("../../templates/sva.txt")),
    ("sva_weak", AgentRole::Sva, include_str!("../../templates/sva_weak.txt")),
    ("critic", AgentRole::Critic, include_str!("../../templates/critic.txt")),
    ("syntax_correction", AgentRole::SyntaxCorrection, include_str!("../../templates/syntax_correction.txt")),
    ("deduplication", AgentRole::Deduplication, include_str!("../../templates/deduplication.txt")),
];

/// All prompts used by the pipeline. `sva_weak` is the generator prompt for
/// the root answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub signal_mapper: PromptTemplate,
    pub spec_analyzer: PromptTemplate,
    pub waveform_analyzer: PromptTemplate,
    pub sva: PromptTemplate,
    pub sva_weak: PromptTemplate,
    pub critic: PromptTemplate,
    pub syntax_correction: PromptTemplate,
    pub deduplication: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::load(|_| Ok(None)).expect("shipped templates parse")
    }
}

impl TemplateSet {
    /// Defaults, with any `<name>.txt` found in `dir` taking precedence.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        Self::load(|name| {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                return Ok(None);
            }
            std::fs::read_to_string(&path)
                .map(Some)
                .map_err(|e| TemplateError::Io { name: name.into(), message: e.to_string() })
        })
    }

    fn load(mut source: impl FnMut(&str) -> Result<Option<String>, TemplateError>) -> Result<Self, TemplateError> {
        let mut parsed = Vec::with_capacity(DEFAULTS.len());
        for (name, role, builtin) in DEFAULTS {
            let text = source(name)?;
            parsed.push(PromptTemplate::parse(role, name, text.as_deref().unwrap_or(builtin))?);
        }
        let mut it = parsed.into_iter();
        let mut next = || it.next().expect("eight templates");
        Ok(Self {
            signal_mapper: next(),
            spec_analyzer: next(),
            waveform_analyzer: next(),
            sva: next(),
            sva_weak: next(),
            critic: next(),
            syntax_correction: next(),
            deduplication: next(),
        })
    }

    pub fn by_name(&self, name: &str) -> Option<&PromptTemplate> {
        Some(match name {
            "signal_mapper" => &self.signal_mapper,
            "spec_analyzer" => &self.spec_analyzer,
            "waveform_analyzer" => &self.waveform_analyzer,
            "sva" => &self.sva,
            "sva_weak" => &self.sva_weak,
            "critic" => &self.critic,
            "syntax_correction" => &self.syntax_correction,
            "deduplication" => &self.deduplication,
            _ => return None,
        })
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        DEFAULTS.iter().map(|(n, _, _)| *n)
    }
}
