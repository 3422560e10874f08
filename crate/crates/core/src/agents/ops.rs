use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::backend::{BackendError, ChatBackend};
use super::extract::{extract_answer, extract_assertions, normalize_assertion, normalize_pool};
use super::score::{CritiqueResult, ScoreError};
use super::template::{context, PromptContext, PromptTemplate, TemplateError, TemplateSet};
use crate::bank::SignalInfo;
use crate::scalar::Scalar;
use crate::sva::AssertionRecord;
use crate::tree::{AnswerContent, SearchParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("invalid input: {0}")]
    Input(String),
}

/// Renders `template` and sends it.
pub fn call(backend: &dyn ChatBackend, template: &PromptTemplate, ctx: &PromptContext) -> Result<String, AgentError> {
    let messages = template.render(ctx)?;
    let reply = backend.complete_for(template.role, &messages)?;
    if reply.trim().is_empty() {
        return Err(BackendError::EmptyResponse.into());
    }
    Ok(reply)
}

/// What every stage-2 prompt knows about the signal.
#[derive(Debug, Clone, Copy)]
pub struct SignalPrompt<'a> {
    pub templates: &'a TemplateSet,
    pub signal: &'a SignalInfo,
    pub workflow: &'a str,
}

impl SignalPrompt<'_> {
    fn base(&self) -> PromptContext {
        let excerpt = self.signal.excerpt();
        context([
            ("signal_name", self.signal.verilog_name.as_str()),
            ("specification_text", excerpt.as_str()),
            ("workflow_info", self.workflow),
        ])
    }
}

fn or_none(text: &str) -> &str {
    if text.trim().is_empty() {
        "(none)"
    } else {
        text
    }
}

pub fn generate_weak_answer(backend: &dyn ChatBackend, p: &SignalPrompt<'_>) -> Result<AnswerContent, AgentError> {
    if p.signal.verilog_name.trim().is_empty() || p.signal.description.trim().is_empty() {
        return Err(AgentError::Input("signal needs a name and a description".into()));
    }
    let reply = call(backend, &p.templates.sva_weak, &p.base())?;
    Ok(extract_answer(&reply))
}

fn critic_context(p: &SignalPrompt<'_>, answer: &AnswerContent, syntax_log: &str) -> PromptContext {
    let mut ctx = p.base();
    ctx.insert("assertions".into(), or_none(&answer.assertions_text()).to_string());
    ctx.insert("syntax_log".into(), or_none(syntax_log).to_string());
    ctx
}

/// Scored critique of `answer`. The reply must carry a score marker.
pub fn critique<S: Scalar>(
    backend: &dyn ChatBackend,
    p: &SignalPrompt<'_>,
    answer: &AnswerContent,
    syntax_log: &str,
    params: &SearchParams<S>,
) -> Result<CritiqueResult<S>, AgentError> {
    let reply = call(backend, &p.templates.critic, &critic_context(p, answer, syntax_log))?;
    Ok(CritiqueResult::from_text(reply, params.score_cap)?)
}

/// Critic text used as improvement feedback; a score marker is optional.
pub fn request_feedback(
    backend: &dyn ChatBackend,
    p: &SignalPrompt<'_>,
    answer: &AnswerContent,
    syntax_log: &str,
) -> Result<String, AgentError> {
    call(backend, &p.templates.critic, &critic_context(p, answer, syntax_log))
}

pub struct RefineInput<'a> {
    pub answer: &'a AnswerContent,
    pub critic_feedback: &'a str,
    pub syntax_log: &'a str,
    pub rag_context: &'a str,
}

pub fn refine(backend: &dyn ChatBackend, p: &SignalPrompt<'_>, input: &RefineInput<'_>) -> Result<AnswerContent, AgentError> {
    let mut ctx = p.base();
    ctx.insert("assertions".into(), or_none(&input.answer.assertions_text()).to_string());
    ctx.insert("feedback".into(), or_none(input.critic_feedback).to_string());
    ctx.insert("syntax_log".into(), or_none(input.syntax_log).to_string());
    ctx.insert("rag_context".into(), or_none(input.rag_context).to_string());
    let reply = call(backend, &p.templates.sva, &ctx)?;
    Ok(extract_answer(&reply))
}

/// Asks for fixed versions of `bad`. No call when `bad` is empty.
pub fn correct_syntax(
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
    bad: &[AssertionRecord],
    spec_excerpt: &str,
    signal_name: &str,
) -> Result<Vec<String>, AgentError> {
    if bad.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(r) = bad.iter().find(|r| r.diagnostics.is_empty()) {
        return Err(AgentError::Input(format!("assertion without diagnostics: {}", r.text)));
    }
    let mut listing = String::new();
    for (i, r) in bad.iter().enumerate() {
        let _ = writeln!(listing, "// Assertion {}\n{}\n// Syntax errors:", i + 1, r.text.trim_end());
        for d in &r.diagnostics {
            let _ = writeln!(listing, "//   {d}");
        }
        listing.push('\n');
    }
    let ctx = context([
        ("specification_text", spec_excerpt),
        ("signal_name", signal_name),
        ("assertions", listing.trim_end()),
    ]);
    let reply = call(backend, &templates.syntax_correction, &ctx)?;
    Ok(extract_assertions(&reply))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupOutcome {
    pub kept: Vec<String>,
    /// Set when the model's answer was rejected and the pool kept.
    pub warning: Option<String>,
    pub backend_called: bool,
}

/// LLM deduplication constrained to a subset of `pool` (compared after
/// normalization). Returned texts are the pool's own texts, in pool order.
pub fn deduplicate(
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
    pool: &[String],
    spec_excerpt: &str,
    signal_name: &str,
) -> Result<DedupOutcome, AgentError> {
    let pool = normalize_pool(pool);
    if pool.len() <= 1 {
        return Ok(DedupOutcome { kept: pool, warning: None, backend_called: false });
    }
    let listing = format!("\n```systemverilog\n{}\n```", pool.join("\n\n"));
    let ctx = context([
        ("specification_text", spec_excerpt),
        ("signal_name", signal_name),
        ("assertions", listing.as_str()),
    ]);
    let reply = call(backend, &templates.deduplication, &ctx)?;
    let returned: HashSet<String> = extract_assertions(&reply).iter().map(|t| normalize_assertion(t)).collect();
    let pool_keys: HashSet<String> = pool.iter().map(|t| normalize_assertion(t)).collect();
    let warning = if returned.is_empty() {
        Some("deduplication returned no assertions; keeping the pool".to_string())
    } else {
        let foreign = returned.iter().filter(|k| !pool_keys.contains(*k)).count();
        (foreign > 0).then(|| format!("deduplication returned {foreign} assertion(s) not in the pool; keeping the pool"))
    };
    let kept = match warning {
        Some(_) => pool,
        None => pool.into_iter().filter(|t| returned.contains(&normalize_assertion(t))).collect(),
    };
    Ok(DedupOutcome { kept, warning, backend_called: true })
}
