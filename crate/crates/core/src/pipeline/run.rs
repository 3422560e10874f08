use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{BackendKind, CheckerKind, ConfigError, RunConfig};
use super::ledger::{CallLedger, Metered};
use super::stage2::{run_stage2, Retrieval, Stage2Env, Stage2Error, TraceEvent};
use super::stage3::{run_stage3, Stage3Env, Stage3Lists};
use crate::agents::{ChatBackend, HttpBackend, ScriptedBackend, SignalPrompt, TemplateError, TemplateSet};
use crate::bank::{build_bank, load_bank, save_bank, BankError, BankInputs, InformationBank, SignalInfo};
use crate::rag::{FlatIndex, HashedBowEmbedder, RagError};
use crate::scalar::Scalar;
use crate::sva::{BuiltinChecker, CheckError, ExternalChecker, SyntaxChecker};
use crate::tree::ReasoningTree;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Checker(#[from] CheckError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend: {0}")]
    Backend(String),
    #[error("{0}")]
    Input(String),
    #[error("unknown signal {0:?}")]
    UnknownSignal(String),
    #[error("{0}")]
    Io(String),
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes") + "\n"
}

pub fn build_backend<S: Scalar>(config: &RunConfig<S>) -> Result<Box<dyn ChatBackend>, PipelineError> {
    match config.backend.kind {
        BackendKind::Scripted => {
            let path = config
                .backend
                .script
                .as_deref()
                .ok_or_else(|| PipelineError::Backend("scripted backend needs a script file".into()))?;
            Ok(Box::new(ScriptedBackend::from_file(path).map_err(|e| PipelineError::Backend(e.to_string()))?))
        }
        BackendKind::Http => Ok(Box::new(
            HttpBackend::from_config(&config.backend.http).map_err(|e| PipelineError::Backend(e.to_string()))?,
        )),
    }
}

pub fn build_checker<S: Scalar>(config: &RunConfig<S>, bank: &InformationBank) -> Result<Box<dyn SyntaxChecker>, PipelineError> {
    Ok(match config.checker.kind {
        CheckerKind::Builtin if config.checker.known_signals => {
            Box::new(BuiltinChecker::with_known_signals(bank.signals.iter().map(|s| s.verilog_name.clone())))
        }
        CheckerKind::Builtin => Box::new(BuiltinChecker::new()),
        CheckerKind::External => Box::new(ExternalChecker::new(&config.checker.external)?),
    })
}

pub fn load_templates<S: Scalar>(config: &RunConfig<S>) -> Result<TemplateSet, PipelineError> {
    Ok(match &config.paths.templates {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::default(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct Stage1Inputs {
    pub design_name: String,
    pub spec: Option<PathBuf>,
    pub verilog_decls: Option<PathBuf>,
    pub waveforms: Vec<PathBuf>,
    pub design_summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Result {
    pub bank: InformationBank,
    pub ledger: CallLedger,
    pub warnings: Vec<String>,
}

/// Builds the bank from the input files and saves it to `paths.bank`.
pub fn run_stage1<S: Scalar>(
    config: &RunConfig<S>,
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
    inputs: &Stage1Inputs,
) -> Result<Stage1Result, PipelineError> {
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone().ok_or_else(|| PipelineError::Input(format!("stage 1 needs a {what} file")))
    };
    let spec_text = read(&need(&inputs.spec, "specification")?)?;
    let decls = read(&need(&inputs.verilog_decls, "Verilog declarations")?)?;
    let waveforms = inputs
        .waveforms
        .iter()
        .map(|p| {
            let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            read(p).map(|text| (label, text))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = inputs.design_summary.as_deref().map(read).transpose()?;

    let ledger = Mutex::new(CallLedger::unlimited());
    let metered = Metered::new(backend, &ledger);
    let built = build_bank(
        &metered,
        templates,
        &BankInputs {
            design_name: &inputs.design_name,
            spec_text: &spec_text,
            verilog_decls: &decls,
            waveforms: &waveforms,
            design_summary: summary.as_deref(),
        },
    )?;
    save_bank(&built.bank, &config.paths.bank)?;
    Ok(Stage1Result { bank: built.bank, ledger: metered.snapshot(), warnings: built.warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SignalRunResult<S> {
    pub signal: String,
    pub status: SignalStatus,
    pub error: Option<String>,
    pub tree: Option<ReasoningTree<S>>,
    pub trace: Vec<TraceEvent>,
    pub early_stopped: bool,
    pub stage3: Option<Stage3Lists>,
    pub ledger: CallLedger,
    pub warnings: Vec<String>,
}

/// Shared, read-only state for the per-signal runs.
pub struct DesignContext<'a, S: Scalar> {
    pub config: &'a RunConfig<S>,
    pub templates: &'a TemplateSet,
    pub backend: &'a dyn ChatBackend,
    pub checker: &'a dyn SyntaxChecker,
    pub bank: &'a InformationBank,
    pub index: Option<&'a FlatIndex<S>>,
}

/// Stages 2 and 3 for one signal. Failures are reported in the result.
pub fn run_signal<S: Scalar>(ctx: &DesignContext<'_, S>, signal: &SignalInfo) -> SignalRunResult<S> {
    let ledger = Mutex::new(CallLedger::with_limit(ctx.config.max_calls_per_signal()));
    let metered = Metered::new(ctx.backend, &ledger);
    let calls_made = || ledger.lock().unwrap_or_else(|p| p.into_inner()).total_calls;
    let embedder = ctx.index.map(|i| HashedBowEmbedder { dimension: i.dimension().unwrap_or(ctx.config.rag.dimension) });
    let env = Stage2Env {
        config: ctx.config,
        prompt: SignalPrompt { templates: ctx.templates, signal, workflow: &ctx.bank.workflow_info },
        backend: &metered,
        checker: ctx.checker,
        retrieval: ctx.index.zip(embedder.as_ref()).map(|(index, e)| Retrieval { index, embedder: e, k: ctx.config.rag.k }),
        calls_made: &calls_made,
    };
    let mut result = SignalRunResult {
        signal: signal.verilog_name.clone(),
        status: SignalStatus::Failed,
        error: None,
        tree: None,
        trace: Vec::new(),
        early_stopped: false,
        stage3: None,
        ledger: CallLedger::default(),
        warnings: Vec::new(),
    };
    match run_stage2(&env) {
        Err(e @ (Stage2Error::Agent(_) | Stage2Error::Tree(_))) => result.error = Some(format!("stage 2: {e}")),
        Ok(outcome) => {
            result.trace = outcome.trace;
            result.warnings = outcome.warnings;
            result.early_stopped = outcome.early_stopped;
            if let Some(e) = outcome.error {
                result.error = Some(format!("stage 2: {e}"));
            } else {
                let excerpt = signal.excerpt();
                let env3 = Stage3Env {
                    templates: ctx.templates,
                    backend: &metered,
                    checker: ctx.checker,
                    spec_excerpt: &excerpt,
                    signal_name: &signal.verilog_name,
                };
                match run_stage3(&env3, &outcome.tree) {
                    Ok(lists) => {
                        result.warnings.extend(lists.warnings.iter().cloned());
                        result.stage3 = Some(lists);
                        result.status = SignalStatus::Completed;
                    }
                    Err(e) => result.error = Some(format!("stage 3: {e}")),
                }
            }
            result.tree = Some(outcome.tree);
        }
    }
    result.ledger = metered.snapshot();
    result
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSummary {
    pub signal: String,
    pub status: SignalStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub nodes: usize,
    pub rollouts_completed: u32,
    pub early_stopped: bool,
    pub a1: usize,
    pub a2: usize,
    pub a2_prime: usize,
    pub a3: usize,
    pub a_deduplicated: usize,
    pub calls: u32,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignReport {
    pub design_name: String,
    pub n_signals: usize,
    pub n_rollouts: u32,
    pub max_api_calls_per_signal: u32,
    /// `n_signals * max_api_calls_per_signal`.
    pub max_api_calls: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1_calls: Option<u32>,
    pub signal_calls: u32,
    pub total_calls: u32,
    pub signals: Vec<SignalSummary>,
    pub failures: Vec<String>,
}

impl DesignReport {
    pub fn new<S: Scalar>(config: &RunConfig<S>, design_name: &str, results: &[SignalRunResult<S>], stage1_calls: Option<u32>) -> Self {
        let per_signal = config.max_calls_per_signal();
        let signals: Vec<SignalSummary> = results
            .iter()
            .map(|r| {
                let lists = r.stage3.clone().unwrap_or_default();
                SignalSummary {
                    signal: r.signal.clone(),
                    status: r.status,
                    error: r.error.clone(),
                    nodes: r.tree.as_ref().map_or(0, ReasoningTree::len),
                    rollouts_completed: r.tree.as_ref().map_or(0, |t| t.rollouts_completed),
                    early_stopped: r.early_stopped,
                    a1: lists.a1.len(),
                    a2: lists.a2.len(),
                    a2_prime: lists.a2_prime.len(),
                    a3: lists.a3.len(),
                    a_deduplicated: lists.a_deduplicated.len(),
                    calls: r.ledger.total_calls,
                    warnings: r.warnings.len(),
                }
            })
            .collect();
        let signal_calls = signals.iter().map(|s| s.calls).sum();
        Self {
            design_name: design_name.to_string(),
            n_signals: results.len(),
            n_rollouts: config.search.n_rollouts,
            max_api_calls_per_signal: per_signal,
            max_api_calls: per_signal * results.len() as u32,
            stage1_calls,
            signal_calls,
            total_calls: signal_calls + stage1_calls.unwrap_or(0),
            failures: signals.iter().filter(|s| s.status == SignalStatus::Failed).map(|s| s.signal.clone()).collect(),
            signals,
        }
    }
}

fn dir_name(signal: &str) -> String {
    signal.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

/// Node-by-node checker logs.
pub fn syntax_log_text<S: Scalar>(tree: &ReasoningTree<S>) -> String {
    let mut out = String::new();
    for n in tree.iter() {
        let _ = writeln!(out, "== {} ==", n.id);
        out.push_str(n.answer.syntax_log.as_deref().unwrap_or("(not checked)\n"));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct StatusFile<'a> {
    signal: &'a str,
    status: SignalStatus,
    error: &'a Option<String>,
    early_stopped: bool,
    warnings: &'a [String],
}

/// `<out>/signals/<name>/{tree.json, trace.json, syntax_log.txt, stage3.json, ledger.json, status.json}`.
pub fn write_signal_artifacts<S: Scalar>(out: &Path, r: &SignalRunResult<S>) -> Result<PathBuf, PipelineError> {
    let dir = out.join("signals").join(dir_name(&r.signal));
    if let Some(tree) = &r.tree {
        write(&dir.join("tree.json"), &(tree.to_json() + "\n"))?;
        write(&dir.join("syntax_log.txt"), &syntax_log_text(tree))?;
    }
    write(&dir.join("trace.json"), &json(&r.trace))?;
    if let Some(lists) = &r.stage3 {
        write(&dir.join("stage3.json"), &json(lists))?;
    }
    write(&dir.join("ledger.json"), &json(&r.ledger))?;
    let status = StatusFile { signal: &r.signal, status: r.status, error: &r.error, early_stopped: r.early_stopped, warnings: &r.warnings };
    write(&dir.join("status.json"), &json(&status))?;
    Ok(dir)
}

#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    pub stage1: Stage1Inputs,
    /// Run only this signal.
    pub only_signal: Option<String>,
    /// Ignore an existing bank file.
    pub rebuild_bank: bool,
}

#[derive(Debug, Clone)]
pub struct DesignRun<S> {
    pub bank: InformationBank,
    pub stage1: Option<Stage1Result>,
    pub results: Vec<SignalRunResult<S>>,
    pub report: DesignReport,
}

/// Stage 1 (unless the bank file exists), then stages 2 and 3 for every
/// selected signal on `config.parallel` threads, then artifacts.
pub fn run_all<S: Scalar>(config: &RunConfig<S>, request: &RunRequest, backend: &dyn ChatBackend) -> Result<DesignRun<S>, PipelineError> {
    config.validate()?;
    let templates = load_templates(config)?;
    let (bank, stage1) = if config.paths.bank.exists() && !request.rebuild_bank {
        (load_bank(&config.paths.bank)?, None)
    } else {
        let s1 = run_stage1(config, backend, &templates, &request.stage1)?;
        write(&config.paths.out.join("stage1.json"), &json(&serde_json::json!({ "ledger": s1.ledger, "warnings": s1.warnings })))?;
        (s1.bank.clone(), Some(s1))
    };
    let selected: Vec<&SignalInfo> = match &request.only_signal {
        Some(name) => vec![bank.signal(name).ok_or_else(|| PipelineError::UnknownSignal(name.clone()))?],
        None => bank.signals.iter().collect(),
    };
    let checker = build_checker(config, &bank)?;
    let index = config.rag.index.as_deref().map(FlatIndex::<S>::load).transpose()?;
    let ctx = DesignContext {
        config,
        templates: &templates,
        backend,
        checker: checker.as_ref(),
        bank: &bank,
        index: index.as_ref(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel)
        .build()
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    let results: Vec<SignalRunResult<S>> = pool.install(|| selected.par_iter().map(|s| run_signal(&ctx, s)).collect());
    for r in &results {
        write_signal_artifacts(&config.paths.out, r)?;
    }
    let design_name = if bank.design_name.is_empty() { request.stage1.design_name.clone() } else { bank.design_name.clone() };
    let report = DesignReport::new(config, &design_name, &results, stage1.as_ref().map(|s| s.ledger.total_calls));
    write(&config.paths.out.join("summary.json"), &json(&report))?;
    Ok(DesignRun { bank, stage1, results, report })
}
