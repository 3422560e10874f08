//! Agent roles as prompt templates over a chat-completion backend.

mod backend;
mod extract;
mod http;
mod ops;
mod score;
mod template;

pub use backend::{BackendError, ChatBackend, ChatMessage, ChatRole, Script, ScriptEntry, ScriptedBackend};
pub use extract::{extract_answer, extract_assertions, normalize_assertion, normalize_pool, split_units};
pub use http::{HttpBackend, HttpBackendConfig};
pub use ops::{
    call, correct_syntax, critique, deduplicate, generate_weak_answer, refine, request_feedback, AgentError,
    DedupOutcome, RefineInput, SignalPrompt,
};
pub use score::{parse_score, suppress, CritiqueResult, ScoreError, SCORE_MAX, SCORE_MIN};
pub use template::{context, render_prompt, AgentRole, PromptContext, PromptTemplate, TemplateError, TemplateSet};
