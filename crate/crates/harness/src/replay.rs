//! Offline check of a tree log: recompute every node's visit count and mean
//! value from the node records and compare with the recorded final values.

use std::fmt::Write as _;
use std::path::Path;

use sail_core::search::{check_final_records, parse_json_lines, TreeRecord};

use crate::HarnessError;

pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub text: String,
    pub nodes: usize,
    pub mismatches: usize,
}

pub fn replay_records(records: &[TreeRecord], seed: u64) -> ReplayReport {
    let mut tasks: Vec<String> = Vec::new();
    for r in records.iter().filter(|r| r.seed().0 == seed) {
        if !tasks.iter().any(|t| t == r.task().as_str()) {
            tasks.push(r.task().as_str().to_string());
        }
    }
    let mut text = String::new();
    let (mut nodes, mut mismatches) = (0, 0);
    for task in &tasks {
        // Records of one search are contiguous: a run of node records
        // followed by its final records.
        let mut searches: Vec<Vec<TreeRecord>> = Vec::new();
        let mut prev_final = true;
        for r in records
            .iter()
            .filter(|r| r.seed().0 == seed && r.task().as_str() == task)
        {
            let is_node = matches!(r, TreeRecord::Node { .. });
            if is_node && prev_final {
                searches.push(Vec::new());
            }
            prev_final = !is_node;
            searches.last_mut().expect("search started").push(r.clone());
        }
        for (i, search) in searches.iter().enumerate() {
            let _ = writeln!(text, "task {task} seed {seed} search {i}");
            let _ = writeln!(text, "{:>5} {:>7} {:>10} {:>7} {:>10} {:>7}", "node", "visits", "mean", "replay", "mean", "ok");
            for (node, recorded, replayed) in check_final_records(search) {
                nodes += 1;
                let ok = replayed.is_some_and(|r| {
                    r.visits == recorded.visits && (r.mean - recorded.mean).abs() <= TOLERANCE
                });
                if !ok {
                    mismatches += 1;
                }
                let (rv, rm) = replayed.map_or((0, f64::NAN), |r| (r.visits, r.mean));
                let _ = writeln!(
                    text,
                    "{node:>5} {:>7} {:>10.6} {rv:>7} {rm:>10.6} {:>7}",
                    recorded.visits,
                    recorded.mean,
                    if ok { "yes" } else { "NO" }
                );
            }
        }
    }
    if tasks.is_empty() {
        let _ = writeln!(text, "no records for seed {seed}");
    }
    let _ = writeln!(text, "{nodes} nodes checked, {mismatches} mismatches");
    ReplayReport {
        text,
        nodes,
        mismatches,
    }
}

pub fn replay_file(path: &Path, seed: u64) -> Result<ReplayReport, HarnessError> {
    let records = parse_json_lines(&std::fs::read_to_string(path)?)
        .map_err(|e| HarnessError::MalformedLog(e.to_string()))?;
    Ok(replay_records(&records, seed))
}
