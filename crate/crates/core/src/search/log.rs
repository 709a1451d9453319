//! Append-only JSON-lines tree log and the replay check over it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SearchNode, SearchResult};
use crate::types::{SeedId, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeRecord {
    /// Written when a node is evaluated, in creation order.
    Node {
        task: TaskId,
        seed: SeedId,
        node: usize,
        parent: Option<usize>,
        reward: f64,
        prior: f64,
        demos: Vec<SeedId>,
        feedback_from: Option<usize>,
        verified: bool,
    },
    /// Written once per node when the search ends.
    Final {
        task: TaskId,
        seed: SeedId,
        node: usize,
        visits: u64,
        mean: f64,
    },
}

impl TreeRecord {
    pub fn seed(&self) -> SeedId {
        match self {
            TreeRecord::Node { seed, .. } | TreeRecord::Final { seed, .. } => *seed,
        }
    }

    pub fn task(&self) -> &TaskId {
        match self {
            TreeRecord::Node { task, .. } | TreeRecord::Final { task, .. } => task,
        }
    }
}

pub(crate) fn node_record(task: &TaskId, seed: SeedId, n: &SearchNode) -> TreeRecord {
    TreeRecord::Node {
        task: task.clone(),
        seed,
        node: n.id,
        parent: n.parent,
        reward: n.reward,
        prior: n.prior,
        demos: n.provenance.demos.clone(),
        feedback_from: n.provenance.feedback_from,
        verified: n.verified_success,
    }
}

pub fn to_json_lines(records: &[TreeRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

pub fn parse_json_lines(text: &str) -> Result<Vec<TreeRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Visit count and mean value per node, rebuilt from the node records alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replayed {
    pub visits: u64,
    pub mean: f64,
}

/// Replays the backups implied by the node records: every reward counts once
/// for its node and once for each ancestor.
pub fn replay(records: &[TreeRecord]) -> BTreeMap<usize, Replayed> {
    let mut parent = BTreeMap::new();
    let mut sums: BTreeMap<usize, (u64, f64)> = BTreeMap::new();
    for r in records {
        if let TreeRecord::Node {
            node,
            parent: p,
            reward,
            ..
        } = r
        {
            parent.insert(*node, *p);
            let mut cur = Some(*node);
            while let Some(id) = cur {
                let e = sums.entry(id).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += reward;
                cur = parent.get(&id).copied().flatten();
            }
        }
    }
    sums.into_iter()
        .map(|(id, (n, s))| (id, Replayed { visits: n, mean: s / n as f64 }))
        .collect()
}

/// Largest disagreement between the incremental statistics of `result` and
/// a replay of its log, or `None` when a node is missing from either side.
pub fn replay_discrepancy(result: &SearchResult) -> Option<f64> {
    let replayed = replay(&result.log);
    if replayed.len() != result.tree.len() {
        return None;
    }
    let mut worst = 0.0f64;
    for n in &result.tree {
        let r = replayed.get(&n.id)?;
        if r.visits != n.visits {
            return None;
        }
        worst = worst.max((r.mean - n.mean).abs());
    }
    Some(worst)
}

/// Compares replayed statistics with the `Final` records of a log.
pub fn check_final_records(records: &[TreeRecord]) -> Vec<(usize, Replayed, Option<Replayed>)> {
    let replayed = replay(records);
    records
        .iter()
        .filter_map(|r| match r {
            TreeRecord::Final {
                node, visits, mean, ..
            } => Some((
                *node,
                Replayed {
                    visits: *visits,
                    mean: *mean,
                },
                replayed.get(node).copied(),
            )),
            _ => None,
        })
        .collect()
}
