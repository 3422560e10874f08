use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use assertforge_core::agents::split_units;
use assertforge_core::pipeline::DesignReport;
use assertforge_core::sva::{BuiltinChecker, Diagnostic, SyntaxChecker};
use assertforge_core::tree::NodeId;
use assertforge_core::{ReasoningTree, SearchParams};

/// Checks each assertion unit in `text` (or the whole text when it has
/// none). Returns the report and the error count.
pub fn check_text(name: &str, text: &str) -> (String, usize) {
    let checker = BuiltinChecker::new();
    let mut units = Vec::new();
    let mut from = 0;
    for unit in split_units(text) {
        let at = text[from..].find(&unit).map_or(from, |i| from + i);
        units.push((text[..at].matches('\n').count() as u32, unit.clone()));
        from = at + unit.len();
    }
    if units.is_empty() {
        units.push((0, text.to_string()));
    }
    let mut out = String::new();
    let mut errors = 0;
    for (line_offset, unit) in &units {
        let diags = checker.check(unit).unwrap_or_default();
        for d in diags {
            errors += usize::from(d.is_error());
            let shifted = Diagnostic { line: d.line + line_offset, ..d };
            let _ = writeln!(out, "{name}:{shifted}");
        }
    }
    let _ = writeln!(out, "{} assertion(s), {errors} error(s)", units.len());
    (out, errors)
}

pub fn show_tree(path: &Path, with_assertions: bool) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let tree = ReasoningTree::from_json(&text, &SearchParams::default())?;
    let mut out = format!(
        "signal {}: {} node(s), {} rollout(s)\n",
        tree.signal_name,
        tree.len(),
        tree.rollouts_completed
    );
    let best = tree.best_node().map(|n| n.id);
    let mut stack = vec![(NodeId::ROOT, 0usize)];
    while let Some((id, depth)) = stack.pop() {
        let node = tree.node(id)?;
        let rewards: Vec<String> = node.reward_samples.iter().map(|r| format!("{r}")).collect();
        let _ = writeln!(
            out,
            "{}{} Q={:.2} N={} rewards=[{}] assertions={}{}",
            "  ".repeat(depth),
            id,
            node.q_value,
            node.visit_count,
            rewards.join(", "),
            node.answer.assertions.len(),
            if Some(id) == best { " *best" } else { "" }
        );
        if with_assertions {
            for a in &node.answer.assertions {
                for line in a.lines() {
                    let _ = writeln!(out, "{}  | {line}", "  ".repeat(depth));
                }
            }
        }
        stack.extend(node.children.iter().rev().map(|c| (*c, depth + 1)));
    }
    Ok(out)
}

pub fn report_table(report: &DesignReport) -> String {
    let mut out = format!(
        "{:<24} {:>9} {:>5} {:>4} {:>4} {:>4} {:>4} {:>5} {:>5}\n",
        "signal", "status", "nodes", "A1", "A2", "A2'", "A3", "final", "calls"
    );
    for s in &report.signals {
        let status = serde_json::to_value(s.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<24} {:>9} {:>5} {:>4} {:>4} {:>4} {:>4} {:>5} {:>5}",
            s.signal, status, s.nodes, s.a1, s.a2, s.a2_prime, s.a3, s.a_deduplicated, s.calls
        );
    }
    let _ = writeln!(
        out,
        "calls: {} of at most {} ({} per signal){}",
        report.signal_calls,
        report.max_api_calls,
        report.max_api_calls_per_signal,
        report.stage1_calls.map(|c| format!(", plus {c} for the bank")).unwrap_or_default()
    );
    if !report.failures.is_empty() {
        let _ = writeln!(out, "failed: {}", report.failures.join(", "));
    }
    out
}
