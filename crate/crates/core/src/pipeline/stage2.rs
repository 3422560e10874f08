use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::agents::{critique, generate_weak_answer, refine, request_feedback, AgentError, ChatBackend, CritiqueResult, RefineInput, SignalPrompt};
use crate::rag::{format_context, Embedder, FlatIndex};
use crate::scalar::Scalar;
use crate::sva::{format_log, AssertionRecord, CheckStatus, SyntaxChecker};
use crate::tree::{AnswerContent, NodeId, ReasoningTree, TreeError};

/// LLM calls in one rollout: re-sample, feedback, refine, evaluate.
pub const CALLS_PER_ROLLOUT: u32 = 4;
/// Calls kept back for correction and deduplication.
pub const STAGE3_RESERVE: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum Stage2Error {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// 0 for initialization.
    pub rollout: u32,
    pub step: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// Reference retrieval used by refine.
pub struct Retrieval<'a, S: Scalar> {
    pub index: &'a FlatIndex<S>,
    pub embedder: &'a dyn Embedder<S>,
    pub k: usize,
}

pub struct Stage2Env<'a, S: Scalar> {
    pub config: &'a RunConfig<S>,
    pub prompt: SignalPrompt<'a>,
    pub backend: &'a dyn ChatBackend,
    pub checker: &'a dyn SyntaxChecker,
    pub retrieval: Option<Retrieval<'a, S>>,
    /// Calls already made for this signal; consulted before each rollout.
    pub calls_made: &'a dyn Fn() -> u32,
}

#[derive(Debug, Clone)]
pub struct Stage2Outcome<S> {
    pub tree: ReasoningTree<S>,
    pub trace: Vec<TraceEvent>,
    pub warnings: Vec<String>,
    pub early_stopped: bool,
    /// Set when a backend failure ended the search; the tree is partial.
    pub error: Option<String>,
}

struct CheckedAnswer {
    log: String,
    all_pass: bool,
}

fn check_answer(checker: &dyn SyntaxChecker, signal: &str, answer: &AnswerContent, warnings: &mut Vec<String>) -> CheckedAnswer {
    let mut records: Vec<AssertionRecord> =
        answer.assertions.iter().map(|a| AssertionRecord::new(a.clone(), signal, None)).collect();
    let mut unchecked = false;
    for r in &mut records {
        if let Err(e) = r.check_with(checker) {
            if !unchecked {
                warnings.push(format!("syntax check skipped: {e}"));
            }
            unchecked = true;
        }
    }
    let all_pass = !records.is_empty() && records.iter().all(|r| r.status == CheckStatus::Pass);
    CheckedAnswer { log: format_log(&records), all_pass }
}

struct Search<'e, 'a, S: Scalar> {
    env: &'e Stage2Env<'a, S>,
    tree: ReasoningTree<S>,
    /// Per node: every assertion passes the checker.
    passes: Vec<bool>,
    trace: Vec<TraceEvent>,
    warnings: Vec<String>,
}

enum Scored<S> {
    Ok(CritiqueResult<S>),
    /// Score unusable even after the permitted retry.
    Unusable(String),
}

impl<S: Scalar> Search<'_, '_, S> {
    fn budget_left(&self) -> u32 {
        self.env.config.max_calls_per_signal().saturating_sub(STAGE3_RESERVE).saturating_sub((self.env.calls_made)())
    }

    fn event(&mut self, rollout: u32, step: &str, node: Option<NodeId>, detail: impl Into<String>) {
        self.trace.push(TraceEvent { rollout, step: step.into(), node, raw_score: None, reward: None, detail: detail.into() });
    }

    /// Critic score with one retry on a bad score, if `after` more calls
    /// still fit once the retry is spent.
    fn score(&mut self, answer: &AnswerContent, log: &str, after: u32) -> Result<Scored<S>, AgentError> {
        let params = &self.env.config.search;
        match critique(self.env.backend, &self.env.prompt, answer, log, params) {
            Ok(c) => Ok(Scored::Ok(c)),
            Err(AgentError::Score(first)) => {
                if self.budget_left() < 1 + after {
                    return Ok(Scored::Unusable(format!("{first}; no budget to retry")));
                }
                match critique(self.env.backend, &self.env.prompt, answer, log, params) {
                    Ok(c) => Ok(Scored::Ok(c)),
                    Err(AgentError::Score(second)) => Ok(Scored::Unusable(format!("{first}; retry: {second}"))),
                    Err(e) => Err(e),
                }
            }
            Err(e) => Err(e),
        }
    }

    fn reward(&mut self, rollout: u32, step: &str, node: NodeId, c: &CritiqueResult<S>) -> Result<(), TreeError> {
        self.tree.record_reward(node, c.suppressed_score, &self.env.config.search)?;
        self.tree.backpropagate(node)?;
        self.trace.push(TraceEvent {
            rollout,
            step: step.into(),
            node: Some(node),
            raw_score: Some(c.raw_score.as_f64()),
            reward: Some(c.suppressed_score.as_f64()),
            detail: String::new(),
        });
        Ok(())
    }

    fn initialize(&mut self) -> Result<bool, Stage2Error> {
        let signal = self.env.prompt.signal.verilog_name.clone();
        let checked = check_answer(self.env.checker, &signal, &self.tree.root_node().answer, &mut self.warnings);
        self.passes[0] = checked.all_pass;
        self.tree.nodes[0].answer.syntax_log = Some(checked.log.clone());
        let root = self.tree.root_node().answer.clone();
        self.event(0, "weak_answer", Some(NodeId::ROOT), format!("{} assertion(s)", root.assertions.len()));
        match self.score(&root, &checked.log, 0)? {
            Scored::Ok(c) => {
                self.reward(0, "evaluate", NodeId::ROOT, &c)?;
                Ok(true)
            }
            Scored::Unusable(why) => {
                self.warnings.push(format!("root evaluation failed, no rollouts: {why}"));
                self.event(0, "evaluate_failed", Some(NodeId::ROOT), why);
                Ok(false)
            }
        }
    }

    /// One rollout. `Ok(false)` when it was aborted.
    fn rollout(&mut self, r: u32) -> Result<bool, Stage2Error> {
        let env = self.env;
        let selected = self.tree.select_node(&env.config.search)?;
        let answer = self.tree.node(selected)?.answer.clone();
        let prior_log = answer.syntax_log.clone().unwrap_or_default();
        self.event(r, "select", Some(selected), "");

        match self.score(&answer, &prior_log, 3)? {
            Scored::Ok(c) => self.reward(r, "resample", selected, &c)?,
            Scored::Unusable(why) => return self.abort(r, selected, why),
        }

        let feedback = request_feedback(env.backend, &env.prompt, &answer, &prior_log)?;
        let signal = env.prompt.signal.verilog_name.clone();
        let selected_log = check_answer(env.checker, &signal, &answer, &mut self.warnings).log;
        let rag_context = match &env.retrieval {
            Some(ret) => match ret.index.query(&env.prompt.signal.rag_query(), ret.k, ret.embedder) {
                Ok(hits) => format_context(&hits),
                Err(e) => {
                    self.warnings.push(format!("retrieval failed: {e}"));
                    String::new()
                }
            },
            None => String::new(),
        };
        let refined = refine(
            env.backend,
            &env.prompt,
            &RefineInput { answer: &answer, critic_feedback: &feedback, syntax_log: &selected_log, rag_context: &rag_context },
        )?;
        if refined.assertions.is_empty() {
            return self.abort(r, selected, "refined answer contains no assertions".into());
        }

        let mut child_answer = refined;
        let checked = check_answer(env.checker, &signal, &child_answer, &mut self.warnings);
        child_answer.syntax_log = Some(checked.log.clone());
        let scored = self.score(&child_answer, &checked.log, 0)?;
        let c = match scored {
            Scored::Ok(c) => c,
            Scored::Unusable(why) => return self.abort(r, selected, why),
        };
        let child = self.tree.add_child(selected, child_answer)?;
        self.passes.push(checked.all_pass);
        self.event(r, "expand", Some(child), format!("child of {selected}"));
        self.reward(r, "evaluate", child, &c)?;
        self.tree.mark_rollout_completed();
        Ok(true)
    }

    fn abort(&mut self, r: u32, node: NodeId, why: String) -> Result<bool, Stage2Error> {
        self.warnings.push(format!("rollout {r} aborted: {why}"));
        self.event(r, "abort", Some(node), why);
        Ok(false)
    }

    fn should_stop(&self) -> bool {
        let cfg = self.env.config;
        cfg.early_stop
            && self.tree.best_node().is_some_and(|best| {
                self.passes[best.id.index()] && best.last_reward().is_some_and(|s| s >= cfg.early_stop_score)
            })
    }
}

/// Weak-answer initialization followed by up to `n_rollouts` rollouts.
pub fn run_stage2<S: Scalar>(env: &Stage2Env<'_, S>) -> Result<Stage2Outcome<S>, Stage2Error> {
    let signal = env.prompt.signal.verilog_name.clone();
    let root = generate_weak_answer(env.backend, &env.prompt)?;
    let mut search = Search {
        env,
        tree: ReasoningTree::new(signal, root),
        passes: vec![false],
        trace: Vec::new(),
        warnings: Vec::new(),
    };
    let mut early_stopped = false;
    let mut error = None;
    let result = (|| -> Result<(), Stage2Error> {
        if !search.initialize()? {
            return Ok(());
        }
        for r in 1..=env.config.search.n_rollouts {
            if search.budget_left() < CALLS_PER_ROLLOUT {
                search.warnings.push(format!("call budget reached before rollout {r}"));
                break;
            }
            if !search.rollout(r)? {
                break;
            }
            if search.should_stop() {
                early_stopped = true;
                let best = search.tree.best_node().map(|n| n.id);
                search.event(r, "early_stop", best, "best node passes syntax with a high score");
                break;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        if matches!(e, Stage2Error::Tree(_)) {
            return Err(e);
        }
        search.event(search.tree.rollouts_completed + 1, "failed", None, e.to_string());
        error = Some(e.to_string());
    }
    Ok(Stage2Outcome { tree: search.tree, trace: search.trace, warnings: search.warnings, early_stopped, error })
}
