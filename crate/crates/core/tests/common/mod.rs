#![allow(dead_code)]

use std::path::Path;

use assertforge_core::agents::{ScriptEntry, ScriptedBackend};
use assertforge_core::bank::{save_bank, InformationBank, SignalInfo};
use assertforge_core::RunConfig;

pub fn signal(name: &str) -> SignalInfo {
    SignalInfo {
        spec_name: name.to_uppercase(),
        verilog_name: name.to_string(),
        description: format!("{name} control signal"),
        functionality: "Sampled on the rising clock edge.".into(),
        ..Default::default()
    }
}

pub fn bank(names: &[&str]) -> InformationBank {
    InformationBank {
        design_name: "demo".into(),
        workflow_info: names.iter().map(|n| format!("[{n}]: {n} control signal")).collect::<Vec<_>>().join("\n"),
        signals: names.iter().map(|n| signal(n)).collect(),
        waveforms: vec![],
    }
}

pub fn valid(name: &str, i: usize) -> String {
    format!("assert property (@(posedge clk_i) disable iff (!rst_ni) {name} |-> ##{i} ack_o);")
}

pub fn invalid(name: &str, i: usize) -> String {
    format!("assert property (@(posedge clk_i) {name} && s{i} |-> );")
}

pub fn fence(assertions: &[String]) -> String {
    format!("Analysis of the signal.\n```systemverilog\n{}\n```\n", assertions.join("\n"))
}

pub fn scored(score: f64) -> String {
    format!("Critique text.\n[SCORE: {score}]")
}

/// Keyed script for one signal, in call order.
pub struct SignalScript {
    key: String,
    pub entries: Vec<ScriptEntry>,
}

impl SignalScript {
    pub fn new(name: &str) -> Self {
        Self { key: format!("Signal name: {name}\n"), entries: Vec::new() }
    }

    pub fn say(mut self, response: impl Into<String>) -> Self {
        self.entries.push(ScriptEntry::keyed(self.key.clone(), response));
        self
    }

    pub fn init(self, answer: &[String], score: f64) -> Self {
        self.say(fence(answer)).say(scored(score))
    }

    pub fn rollout(self, resample: f64, refined: &[String], eval: f64) -> Self {
        self.say(scored(resample)).say("Feedback: tighten the timing.").say(fence(refined)).say(scored(eval))
    }
}

/// A signal that runs all rollouts below the early-stop score, with one
/// broken assertion in the root so stage 3 corrects and deduplicates.
pub fn full_signal_script(name: &str, n_rollouts: usize) -> SignalScript {
    let mut s = SignalScript::new(name).init(&[valid(name, 1), invalid(name, 0)], 40.0);
    for r in 0..n_rollouts {
        s = s.rollout(45.0, &[valid(name, 1), valid(name, r + 2)], 50.0 + r as f64);
    }
    s.say(fence(&[valid(name, 0)])).say(fence(&[valid(name, 0), valid(name, 1)]))
}

pub fn backend(scripts: Vec<SignalScript>) -> ScriptedBackend {
    ScriptedBackend::new(scripts.into_iter().flat_map(|s| s.entries).collect())
}

/// Config writing under `dir` with a pre-saved bank.
pub fn config_with_bank(dir: &Path, bank: &InformationBank, n_rollouts: u32) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.search.n_rollouts = n_rollouts;
    cfg.paths.bank = dir.join("bank.json");
    cfg.paths.out = dir.join("out");
    save_bank(bank, &cfg.paths.bank).unwrap();
    cfg
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
