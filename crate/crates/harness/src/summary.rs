//! Success-rate tables over result rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use sail_core::feedback::fixed;

use crate::results::ResultRow;

/// Grid row of the table: everything but the task.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SeriesKey {
    pub strategy: String,
    pub budget: usize,
    pub retrieval: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRate {
    pub task: String,
    pub successes: usize,
    pub count: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    #[serde(flatten)]
    pub key: SeriesKey,
    pub cells: Vec<CellRate>,
    /// Mean of the per-task rates present in this row.
    pub avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub tasks: Vec<String>,
    pub rows: Vec<SeriesRow>,
    pub warnings: Vec<String>,
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut tasks: Vec<String> = Vec::new();
    let mut order: Vec<SeriesKey> = Vec::new();
    let mut counts: BTreeMap<(SeriesKey, String), (usize, usize)> = BTreeMap::new();
    for r in rows {
        if !tasks.contains(&r.task) {
            tasks.push(r.task.clone());
        }
        let key = SeriesKey {
            strategy: r.strategy.clone(),
            budget: r.budget,
            retrieval: r.retrieval.clone(),
            feedback: r.feedback.clone(),
        };
        if !order.contains(&key) {
            order.push(key.clone());
        }
        let e = counts.entry((key, r.task.clone())).or_default();
        e.0 += usize::from(r.success);
        e.1 += 1;
    }
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for key in order {
        let mut cells = Vec::new();
        for task in &tasks {
            match counts.get(&(key.clone(), task.clone())) {
                Some(&(s, n)) => cells.push(CellRate {
                    task: task.clone(),
                    successes: s,
                    count: n,
                    rate: s as f64 / n as f64,
                }),
                None => {
                    let msg = format!(
                        "no rows for {} at {} / {} {} {}; cell omitted",
                        task, key.strategy, key.budget, key.retrieval, key.feedback
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        let avg = cells.iter().map(|c| c.rate).sum::<f64>() / cells.len() as f64;
        out.push(SeriesRow { key, cells, avg });
    }
    Summary {
        tasks,
        rows: out,
        warnings,
    }
}

impl Summary {
    /// Table with one row per series, one column per task and an `Avg`
    /// column; rates to two decimals, missing cells as `-`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<8} {:>6} {:<10} {:<20}", "strategy", "budget", "retrieval", "feedback");
        for t in &self.tasks {
            let _ = write!(out, " {t:>12}");
        }
        let _ = writeln!(out, " {:>6}", "Avg");
        for row in &self.rows {
            let k = &row.key;
            let _ = write!(
                out,
                "{:<8} {:>6} {:<10} {:<20}",
                k.strategy, k.budget, k.retrieval, k.feedback
            );
            for t in &self.tasks {
                let cell = row.cells.iter().find(|c| &c.task == t);
                let text = cell.map_or("-".to_string(), |c| format!("{} ({})", fixed(c.rate, 2), c.count));
                let _ = write!(out, " {text:>12}");
            }
            let _ = writeln!(out, " {:>6}", fixed(row.avg, 2));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Average column rounded to two decimals, in row order.
    pub fn avg_column(&self) -> Vec<String> {
        self.rows.iter().map(|r| fixed(r.avg, 2)).collect()
    }
}
