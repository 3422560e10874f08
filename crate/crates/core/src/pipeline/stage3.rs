use serde::{Deserialize, Serialize};

use crate::agents::{correct_syntax, deduplicate, normalize_assertion, AgentError, ChatBackend, TemplateSet};
use crate::scalar::Scalar;
use crate::sva::{partition, AssertionRecord, CheckStatus, PartitionError, SyntaxChecker};
use crate::tree::ReasoningTree;

#[derive(Debug, thiserror::Error)]
pub enum Stage3Error {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Checker(#[from] PartitionError),
}

/// Assertion sets of the combination stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage3Lists {
    /// Every node's assertions, first occurrence per normalized text.
    pub pooled: Vec<AssertionRecord>,
    pub a1: Vec<String>,
    pub a2: Vec<AssertionRecord>,
    pub a2_prime: Vec<String>,
    /// Corrections that still failed the checker.
    pub dropped: Vec<AssertionRecord>,
    pub a3: Vec<String>,
    pub a_deduplicated: Vec<String>,
    pub warnings: Vec<String>,
}

/// Pools every node's assertions in node order, keeping the first node a
/// normalized text appeared in.
pub fn pool_tree<S: Scalar>(tree: &ReasoningTree<S>) -> Vec<AssertionRecord> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for node in tree.iter() {
        for a in &node.answer.assertions {
            if seen.insert(normalize_assertion(a)) {
                out.push(AssertionRecord::new(a.clone(), tree.signal_name.clone(), Some(node.id)));
            }
        }
    }
    out
}

pub struct Stage3Env<'a> {
    pub templates: &'a TemplateSet,
    pub backend: &'a dyn ChatBackend,
    pub checker: &'a dyn SyntaxChecker,
    pub spec_excerpt: &'a str,
    pub signal_name: &'a str,
}

/// Partition, correct, recheck, combine and deduplicate `pool`.
pub fn combine(env: &Stage3Env<'_>, pool: Vec<AssertionRecord>) -> Result<Stage3Lists, Stage3Error> {
    let mut lists = Stage3Lists { pooled: pool.clone(), ..Default::default() };
    let (pass, fail) = partition(pool, env.checker)?;
    lists.a1 = pass.into_iter().map(|r| r.text).collect();
    lists.a2 = fail;

    let corrected = correct_syntax(env.backend, env.templates, &lists.a2, env.spec_excerpt, env.signal_name)?;
    let records = corrected.into_iter().map(|t| AssertionRecord::new(t, env.signal_name, None)).collect();
    let (fixed, still_bad) = partition(records, env.checker)?;
    for r in &still_bad {
        lists.warnings.push(format!("corrected assertion still fails the checker, dropped: {}", r.text.trim()));
    }
    lists.a2_prime = fixed.into_iter().map(|r| r.text).collect();
    lists.dropped = still_bad;

    lists.a3 = lists.a1.iter().chain(&lists.a2_prime).cloned().collect();
    let dedup = deduplicate(env.backend, env.templates, &lists.a3, env.spec_excerpt, env.signal_name)?;
    lists.warnings.extend(dedup.warning);
    lists.a_deduplicated = dedup.kept;
    debug_assert!(lists.a2.iter().all(|r| r.status == CheckStatus::Fail));
    Ok(lists)
}

pub fn run_stage3<S: Scalar>(env: &Stage3Env<'_>, tree: &ReasoningTree<S>) -> Result<Stage3Lists, Stage3Error> {
    combine(env, pool_tree(tree))
}
