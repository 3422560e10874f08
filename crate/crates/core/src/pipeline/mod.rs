//! End-to-end driver: information bank, per-signal tree search,
//! combination, call accounting and run artifacts.

mod config;
mod ledger;
mod run;
mod stage2;
mod stage3;

pub use config::{
    max_calls_for, BackendKind, BackendSettings, CheckerKind, CheckerSettings, ConfigError, PathSettings, RagSettings,
    RunConfig,
};
pub use ledger::{CallLedger, Metered};
pub use run::{
    build_backend, build_checker, load_templates, run_all, run_signal, run_stage1, syntax_log_text, write_signal_artifacts,
    DesignContext, DesignReport, DesignRun, PipelineError, RunRequest, SignalRunResult, SignalStatus, SignalSummary,
    Stage1Inputs, Stage1Result,
};
pub use stage2::{run_stage2, Retrieval, Stage2Env, Stage2Error, Stage2Outcome, TraceEvent, CALLS_PER_ROLLOUT, STAGE3_RESERVE};
pub use stage3::{combine, pool_tree, run_stage3, Stage3Env, Stage3Error, Stage3Lists};
