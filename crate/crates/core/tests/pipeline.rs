mod common;

use std::sync::Mutex;

use assertforge_core::agents::{AgentRole, ScriptEntry, ScriptedBackend, SignalPrompt, TemplateSet};
use assertforge_core::pipeline::{
    combine, run_all, run_signal, run_stage1, run_stage2, CallLedger, DesignContext, Metered, PipelineError, RunRequest,
    SignalStatus, Stage1Inputs, Stage2Env, Stage3Env,
};
use assertforge_core::sva::{AssertionRecord, BuiltinChecker};
use assertforge_core::tree::NodeId;
use assertforge_core::RunConfig;
use common::*;
use proptest::prelude::*;

fn run_one(cfg: &RunConfig, bank_names: &[&str], backend: &ScriptedBackend) -> assertforge_core::SignalRunResult {
    let bank = bank(bank_names);
    let templates = TemplateSet::default();
    let checker = BuiltinChecker::new();
    let ctx = DesignContext { config: cfg, templates: &templates, backend, checker: &checker, bank: &bank, index: None };
    run_signal(&ctx, &bank.signals[0])
}

#[test]
fn full_run_four_rollouts() {
    let cfg = RunConfig::default();
    let backend = backend(vec![full_signal_script("tx_en", 4)]);
    let r = run_one(&cfg, &["tx_en"], &backend);
    assert_eq!(r.status, SignalStatus::Completed, "{:?}", r.error);
    let tree = r.tree.as_ref().unwrap();
    assert_eq!(tree.len(), 5);
    assert_eq!(tree.rollouts_completed, 4);
    assert_eq!(r.ledger.total_calls, 20);
    let stage2 = r.ledger.calls(AgentRole::Sva) + r.ledger.calls(AgentRole::Critic);
    assert_eq!(stage2, 18);
    assert_eq!(r.ledger.calls(AgentRole::Sva), 5);
    assert_eq!(r.ledger.calls(AgentRole::SyntaxCorrection), 1);
    assert_eq!(r.ledger.calls(AgentRole::Deduplication), 1);
    assert_eq!(backend.remaining(), 0);
    assert!(!r.early_stopped);
    let lists = r.stage3.unwrap();
    assert_eq!(lists.a2.len(), 1);
    assert_eq!(lists.a2_prime, [valid("tx_en", 0)]);
    assert_eq!(lists.a3.last().unwrap(), &valid("tx_en", 0));
    assert_eq!(lists.a_deduplicated, [valid("tx_en", 1), valid("tx_en", 0)]);
}

#[test]
fn early_stop_after_second_rollout() {
    let cfg = RunConfig::default();
    let n = "irq";
    let script = SignalScript::new(n)
        .init(&[valid(n, 1)], 50.0)
        .rollout(50.0, &[valid(n, 2)], 60.0)
        .rollout(58.0, &[valid(n, 3)], 92.0)
        .say(fence(&[valid(n, 3)]));
    let backend = backend(vec![script]);
    let r = run_one(&cfg, &[n], &backend);
    assert!(r.early_stopped);
    assert_eq!(r.tree.as_ref().unwrap().len(), 3);
    assert_eq!(r.ledger.calls(AgentRole::Sva) + r.ledger.calls(AgentRole::Critic), 10);
    assert_eq!(r.ledger.calls(AgentRole::SyntaxCorrection), 0);
    assert_eq!(r.ledger.total_calls, 11);
    assert_eq!(r.status, SignalStatus::Completed);
}

#[test]
fn early_stop_can_be_disabled() {
    let mut cfg = RunConfig { early_stop: false, ..Default::default() };
    cfg.search.n_rollouts = 2;
    let n = "irq";
    let script = SignalScript::new(n)
        .init(&[valid(n, 1)], 95.0)
        .rollout(95.0, &[valid(n, 2)], 95.0)
        .rollout(95.0, &[valid(n, 3)], 95.0)
        .say(fence(&[valid(n, 3)]));
    let r = run_one(&cfg, &[n], &backend(vec![script]));
    assert!(!r.early_stopped);
    assert_eq!(r.tree.unwrap().len(), 3);
}

#[test]
fn scores_are_suppressed_in_the_tree() {
    let mut cfg = RunConfig::default();
    cfg.search.n_rollouts = 0;
    let n = "a";
    let script = SignalScript::new(n).init(&[valid(n, 1)], 99.0);
    let r = run_one(&cfg, &[n], &backend(vec![script]));
    let root = r.tree.unwrap().root_node().clone();
    assert_eq!(root.reward_samples, [95.0]);
    assert_eq!(r.trace[1].raw_score, Some(99.0));
}

#[test]
fn score_failure_retried_once_then_rollout_aborted() {
    let cfg = RunConfig::default();
    let n = "a";
    let script = SignalScript::new(n)
        .init(&[valid(n, 1)], 40.0)
        .say("no marker")
        .say(scored(41.0))
        .say("feedback")
        .say(fence(&[valid(n, 2)]))
        .say("still none")
        .say("[SCORE: 300]");
    let backend = backend(vec![script]);
    let r = run_one(&cfg, &[n], &backend);
    let tree = r.tree.unwrap();
    assert_eq!(tree.len(), 1);
    assert_eq!(tree.rollouts_completed, 0);
    assert_eq!(tree.root_node().reward_samples, [40.0, 41.0]);
    assert_eq!(r.ledger.calls(AgentRole::Critic), 6);
    assert!(r.warnings.iter().any(|w| w.contains("rollout 1 aborted")));
    assert_eq!(r.status, SignalStatus::Completed);
    assert_eq!(r.stage3.unwrap().a_deduplicated, [valid(n, 1)]);
}

#[test]
fn empty_refinement_aborts_rollout() {
    let cfg = RunConfig::default();
    let n = "a";
    let script = SignalScript::new(n).init(&[valid(n, 1)], 40.0).say(scored(40.0)).say("fb").say("prose only, no code");
    let r = run_one(&cfg, &[n], &backend(vec![script]));
    assert_eq!(r.tree.unwrap().len(), 1);
    assert_eq!(r.ledger.total_calls, 5);
}

#[test]
fn exhausted_script_fails_signal_and_keeps_partial_tree() {
    let cfg = RunConfig::default();
    let n = "a";
    let script = SignalScript::new(n).init(&[valid(n, 1)], 40.0).rollout(40.0, &[valid(n, 2)], 50.0);
    let r = run_one(&cfg, &[n], &backend(vec![script]));
    assert_eq!(r.status, SignalStatus::Failed);
    assert!(r.error.as_deref().unwrap().contains("exhausted"));
    assert_eq!(r.tree.unwrap().len(), 2);
    assert!(r.stage3.is_none());
}

#[test]
fn small_budget_limits_rollouts_without_overrun() {
    let cfg = RunConfig { max_api_calls_per_signal: Some(12), ..Default::default() };
    let r = run_one(&cfg, &["tx"], &backend(vec![full_signal_script("tx", 4)]));
    assert_eq!(r.tree.as_ref().unwrap().len(), 3);
    assert_eq!(r.ledger.total_calls, 12);
    assert!(r.warnings.iter().any(|w| w.contains("call budget")));
}

#[test]
fn rag_context_reaches_refine_prompt() {
    use assertforge_core::rag::HashedBowEmbedder;
    let cfg = RunConfig::default();
    let bank = bank(&["a"]);
    let mut index = assertforge_core::FlatIndex::new();
    index
        .add("book.txt", &["a control signal sampling rules", "unrelated prose about weather"], &HashedBowEmbedder::default())
        .unwrap();
    let n = "a";
    let script = SignalScript::new(n)
        .init(&[valid(n, 1)], 40.0)
        .rollout(40.0, &[valid(n, 2)], 50.0)
        .say(fence(&[valid(n, 1)]));
    let backend = backend(vec![script]);
    let mut cfg1 = cfg.clone();
    cfg1.search.n_rollouts = 1;
    let templates = TemplateSet::default();
    let checker = BuiltinChecker::new();
    let ctx = DesignContext { config: &cfg1, templates: &templates, backend: &backend, checker: &checker, bank: &bank, index: Some(&index) };
    run_signal(&ctx, &bank.signals[0]);
    let refine_prompt = &backend.calls()[4][1].content;
    assert!(refine_prompt.contains("Reference material:\n[book.txt #0]\na control signal sampling rules"));
}

#[test]
fn refine_prompt_carries_feedback_and_syntax_log() {
    let mut cfg = RunConfig::default();
    cfg.search.n_rollouts = 1;
    let n = "a";
    let script = SignalScript::new(n)
        .init(&[invalid(n, 1)], 10.0)
        .say(scored(10.0))
        .say("Use a non-overlapping implication.")
        .say(fence(&[valid(n, 2)]))
        .say(scored(30.0))
        .say(fence(&[valid(n, 2)]));
    let backend = backend(vec![script]);
    run_one(&cfg, &[n], &backend);
    let calls = backend.calls();
    let refine = &calls[4][1].content;
    assert!(refine.contains("Use a non-overlapping implication."));
    assert!(refine.contains("Assertion 1: FAIL"));
    assert!(refine.contains(&invalid(n, 1)));
    let root_critic = &calls[1][1].content;
    assert!(root_critic.contains("expected expression after |->"));
}

fn stage3_env<'a>(templates: &'a TemplateSet, backend: &'a Metered<'a>, checker: &'a BuiltinChecker) -> Stage3Env<'a> {
    Stage3Env { templates, backend, checker, spec_excerpt: "excerpt", signal_name: "s" }
}

fn records(texts: &[String]) -> Vec<AssertionRecord> {
    texts.iter().map(|t| AssertionRecord::new(t.clone(), "s", Some(NodeId(0)))).collect()
}

#[test]
fn stage3_correction_fixes_invalid() {
    let (x, y, y_fixed) = (valid("s", 1), invalid("s", 2), valid("s", 2));
    let inner = ScriptedBackend::from_responses([fence(std::slice::from_ref(&y_fixed)), fence(&[x.clone(), y_fixed.clone()])]);
    let ledger = Mutex::new(CallLedger::with_limit(2));
    let metered = Metered::new(&inner, &ledger);
    let templates = TemplateSet::default();
    let checker = BuiltinChecker::new();
    let lists = combine(&stage3_env(&templates, &metered, &checker), records(&[x.clone(), y])).unwrap();
    assert_eq!(lists.a1, std::slice::from_ref(&x));
    assert_eq!(lists.a2_prime, std::slice::from_ref(&y_fixed));
    assert_eq!(lists.a3, [x, y_fixed]);
    assert_eq!(metered.snapshot().total_calls, 2);
}

#[test]
fn stage3_all_valid_skips_correction() {
    let pool = [valid("s", 1), valid("s", 2)];
    let inner = ScriptedBackend::from_responses([fence(&pool)]);
    let ledger = Mutex::new(CallLedger::with_limit(2));
    let metered = Metered::new(&inner, &ledger);
    let templates = TemplateSet::default();
    let checker = BuiltinChecker::new();
    let lists = combine(&stage3_env(&templates, &metered, &checker), records(&pool)).unwrap();
    assert!(lists.a2.is_empty());
    let snap = metered.snapshot();
    assert_eq!(snap.total_calls, 1);
    assert_eq!(snap.calls(AgentRole::Deduplication), 1);
    assert_eq!(lists.a_deduplicated, pool);
}

#[test]
fn stage3_still_failing_correction_is_dropped() {
    let (x, y) = (valid("s", 1), invalid("s", 2));
    let inner = ScriptedBackend::from_responses([fence(&[invalid("s", 3)])]);
    let ledger = Mutex::new(CallLedger::with_limit(2));
    let metered = Metered::new(&inner, &ledger);
    let templates = TemplateSet::default();
    let checker = BuiltinChecker::new();
    let lists = combine(&stage3_env(&templates, &metered, &checker), records(&[x.clone(), y])).unwrap();
    assert!(lists.a2_prime.is_empty());
    assert_eq!(lists.dropped.len(), 1);
    assert!(lists.warnings.iter().any(|w| w.contains("still fails")));
    assert_eq!(lists.a3, std::slice::from_ref(&x));
    assert_eq!(lists.a_deduplicated, [x]);
    assert_eq!(metered.snapshot().total_calls, 1);
}

fn write_inputs(dir: &std::path::Path) -> Stage1Inputs {
    std::fs::write(dir.join("spec.md"), "The timer raises intr when mtime >= mtimecmp.").unwrap();
    std::fs::write(dir.join("decls.v"), "module t(input clk_i, input rst_ni, output intr);\nlogic [63:0] mtime, mtimecmp;\nendmodule").unwrap();
    std::fs::write(dir.join("wave.txt"), "Figure 3: intr follows the compare by one cycle.").unwrap();
    Stage1Inputs {
        design_name: "timer".into(),
        spec: Some(dir.join("spec.md")),
        verilog_decls: Some(dir.join("decls.v")),
        waveforms: vec![dir.join("wave.txt")],
        design_summary: None,
    }
}

fn stage1_responses(with_wave: bool) -> Vec<String> {
    let mut r = vec![
        "[clk_i]: clock\n[intr]: interrupt\n[mtime]: timer".to_string(),
        "clk_i\n[Description]: clock".into(),
        "intr\n[Description]: interrupt output\n[Related Signals]: mtime".into(),
        "mtime\n[Description]: timer counter".into(),
    ];
    if with_wave {
        r.push("[Waveform Name]: compare\n[Signals]: mtime, intr\n- [Timing Relationship]: one cycle".into());
    }
    r
}

#[test]
fn stage1_counts_calls() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(dir.path());
    let mut cfg = RunConfig::default();
    cfg.paths.bank = dir.path().join("bank.json");
    let backend = ScriptedBackend::from_responses(stage1_responses(true));
    let s1 = run_stage1(&cfg, &backend, &TemplateSet::default(), &inputs).unwrap();
    assert_eq!(s1.bank.signals.len(), 3);
    assert_eq!(s1.bank.waveforms.len(), 1);
    assert_eq!(s1.ledger.total_calls, 5);
    assert_eq!(s1.ledger.calls(AgentRole::SpecAnalyzer), 3);
    assert!(cfg.paths.bank.exists());

    let mut no_wave = inputs.clone();
    no_wave.waveforms.clear();
    let backend = ScriptedBackend::from_responses(stage1_responses(false));
    let s1 = run_stage1(&cfg, &backend, &TemplateSet::default(), &no_wave).unwrap();
    assert!(s1.bank.waveforms.is_empty());

    let mut bad = inputs;
    bad.spec = Some(dir.path().join("missing.md"));
    let err = run_stage1(&cfg, &ScriptedBackend::default(), &TemplateSet::default(), &bad).unwrap_err();
    assert!(matches!(err, PipelineError::Input(_)));
}

#[test]
fn run_all_end_to_end_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(dir.path());
    let mut cfg = RunConfig::default();
    cfg.search.n_rollouts = 1;
    cfg.paths.bank = dir.path().join("out/bank.json");
    cfg.paths.out = dir.path().join("out");
    let signal_scripts = || {
        ["clk_i", "intr", "mtime"]
            .iter()
            .map(|n| SignalScript::new(n).init(&[valid(n, 1)], 40.0).rollout(40.0, &[valid(n, 2)], 50.0).say(fence(&[valid(n, 1)])))
            .flat_map(|s| s.entries)
            .collect::<Vec<_>>()
    };
    let mut entries: Vec<ScriptEntry> = stage1_responses(true).into_iter().map(ScriptEntry::any).collect();
    entries.extend(signal_scripts());
    let backend = ScriptedBackend::new(entries);
    let request = RunRequest { stage1: inputs, ..Default::default() };
    let run = run_all(&cfg, &request, &backend).unwrap();
    assert!(run.report.failures.is_empty(), "{:?}", run.report);
    assert_eq!(run.report.stage1_calls, Some(5));
    assert_eq!(run.report.signal_calls, 3 * 7);
    assert_eq!(run.report.max_api_calls, 3 * 8);
    for f in ["tree.json", "trace.json", "syntax_log.txt", "stage3.json", "ledger.json", "status.json"] {
        assert!(cfg.paths.out.join("signals/intr").join(f).exists(), "{f}");
    }
    let first_prompts: Vec<_> = backend.calls()[5..].to_vec();

    let backend = ScriptedBackend::new(signal_scripts());
    let rerun = run_all(&cfg, &request, &backend).unwrap();
    assert_eq!(rerun.report.stage1_calls, None);
    assert_eq!(backend.calls(), first_prompts);
}

#[test]
fn unknown_signal_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_with_bank(dir.path(), &bank(&["a"]), 1);
    let request = RunRequest { only_signal: Some("nope".into()), ..Default::default() };
    let err = run_all(&cfg, &request, &ScriptedBackend::default()).unwrap_err();
    assert!(matches!(err, PipelineError::UnknownSignal(ref s) if s == "nope"));
}

#[test]
fn one_failing_signal_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_with_bank(dir.path(), &bank(&["good", "bad", "fine"]), 4);
    cfg.parallel = 3;
    let broken = SignalScript::new("bad").init(&[valid("bad", 1)], 40.0);
    let backend = backend(vec![full_signal_script("good", 4), broken, full_signal_script("fine", 4)]);
    let run = run_all(&cfg, &RunRequest::default(), &backend).unwrap();
    assert_eq!(run.report.failures, ["bad"]);
    let statuses: Vec<_> = run.results.iter().map(|r| (r.signal.as_str(), r.status)).collect();
    assert_eq!(
        statuses,
        [("good", SignalStatus::Completed), ("bad", SignalStatus::Failed), ("fine", SignalStatus::Completed)]
    );
    assert_eq!(run.results[0].ledger.total_calls, 20);
}

#[test]
fn replay_is_byte_identical() {
    let names = ["a", "b"];
    let mut snaps = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config_with_bank(dir.path(), &bank(&names), 4);
        cfg.parallel = 2;
        let backend = backend(names.iter().map(|n| full_signal_script(n, 4)).collect());
        run_all(&cfg, &RunRequest::default(), &backend).unwrap();
        snaps.push(snapshot(dir.path()));
    }
    assert_eq!(snaps[0], snaps[1]);
    assert!(snaps[0].len() > 10);
}

#[test]
fn stage2_directly_with_unlimited_budget() {
    let cfg = RunConfig::default();
    let info = signal("a");
    let templates = TemplateSet::default();
    let backend = backend(vec![full_signal_script("a", 4)]);
    let checker = BuiltinChecker::new();
    let calls = || backend.call_count() as u32;
    let env = Stage2Env {
        config: &cfg,
        prompt: SignalPrompt { templates: &templates, signal: &info, workflow: "" },
        backend: &backend,
        checker: &checker,
        retrieval: None,
        calls_made: &calls,
    };
    let out = run_stage2(&env).unwrap();
    assert_eq!(out.tree.len(), 5);
    assert_eq!(backend.call_count(), 18);
    out.tree.validate(&cfg.search).unwrap();
}

#[derive(Debug, Clone)]
enum Reply {
    Score(f64),
    Garbage,
}

fn reply() -> impl Strategy<Value = Reply> {
    prop_oneof![8 => (-100i32..=100).prop_map(|s| Reply::Score(s as f64)), 1 => Just(Reply::Garbage)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budget_and_node_count_laws(
        n_rollouts in 0u32..6,
        replies in prop::collection::vec(reply(), 40),
        valid_mask in prop::collection::vec(any::<bool>(), 12),
        early_stop in any::<bool>(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.search.n_rollouts = n_rollouts;
        cfg.early_stop = early_stop;
        let n = "sig";
        let mut replies = replies.into_iter();
        let mut answers = valid_mask.into_iter().enumerate();
        let mut entries = Vec::new();
        let key = format!("Signal name: {n}\n");
        let mut push = |text: String| entries.push(ScriptEntry::keyed(key.clone(), text));
        let mut answer = || {
            let (i, ok) = answers.next().unwrap_or((99, true));
            fence(&[if ok { valid(n, i) } else { invalid(n, i) }])
        };
        push(answer());
        for _ in 0..30 {
            match replies.next().unwrap() {
                Reply::Score(s) => push(scored(s)),
                Reply::Garbage => push("no score here".into()),
            }
            push(scored(10.0));
            push("feedback".into());
            push(answer());
        }
        let backend = ScriptedBackend::new(entries);
        let r = run_one(&cfg, &[n], &backend);
        let limit = 2 + 4 * n_rollouts + 2;
        prop_assert!(r.ledger.total_calls <= limit);
        let tree = r.tree.expect("tree");
        prop_assert_eq!(tree.len() as u32, tree.rollouts_completed + 1);
        prop_assert!(tree.rollouts_completed <= n_rollouts);
        tree.validate(&cfg.search).unwrap();
    }
}
