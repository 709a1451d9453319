//! Subtask-progress scoring of rollouts.
//!
//! A task is decomposed once into ordered subtasks. Sampled frames are then
//! scored sequentially: the backend estimates completion of the current
//! subtask relative to the frame where it started, and a frame's score is
//! `r = ((m - 1) + pct/100) / M`. The node reward is the mean of `r`.

mod oracle;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{oracle_completion_pct, OracleScorer};

use crate::scalar::Real;
use crate::sim::{Rollout, SimError, SimState, TaskSpec};
use crate::types::TaskId;

/// Default number of sampled frames per rollout.
pub const DEFAULT_FRAMES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("scorer backend failed: {0}")]
    BackendFailure(String),
    #[error("backend returned an empty decomposition")]
    EmptyDecomposition,
    #[error("unknown subtask `{0}`")]
    UnknownSubtask(String),
    #[error("decomposition needs a verified demonstration")]
    DemoNotVerified,
    #[error("cannot sample from an empty rollout or with N = 0")]
    NothingToSample,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    /// 1-based position in the list.
    pub index: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskList {
    task: TaskId,
    subtasks: Vec<Subtask>,
}

impl SubtaskList {
    pub fn new(task: TaskId, labels: Vec<String>) -> Result<Self, ScorerError> {
        if labels.is_empty() {
            return Err(ScorerError::EmptyDecomposition);
        }
        let subtasks = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| Subtask { index: i + 1, label })
            .collect();
        Ok(Self { task, subtasks })
    }

    pub fn task(&self) -> &TaskId {
        &self.task
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    /// Label of subtask `m` (1-based).
    pub fn label(&self, m: usize) -> &str {
        &self.subtasks[m - 1].label
    }

    pub fn labels(&self) -> Vec<String> {
        self.subtasks.iter().map(|s| s.label.clone()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Subtask> {
        self.subtasks.iter()
    }
}

/// Stand-in for the scoring model. Percentages outside `[0, 100]` are clamped
/// by the caller.
pub trait ScorerBackend: Send + Sync {
    fn decompose(&self, goal_text: &str, demo: &Rollout) -> Result<Vec<String>, ScorerError>;

    fn completion_pct(
        &self,
        label: &str,
        start: &SimState,
        current: &SimState,
    ) -> Result<i32, ScorerError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub frame_indices: Vec<usize>,
    /// Subtask `m(f)` (1-based) per sampled frame.
    pub subtask_index: Vec<usize>,
    pub pct: Vec<u8>,
    pub r: Vec<f64>,
    pub reward: f64,
    pub failed_at: Option<usize>,
    pub verified_success: bool,
    pub subtask_labels: Vec<String>,
}

impl ProgressReport {
    pub fn num_subtasks(&self) -> usize {
        self.subtask_labels.len()
    }

    pub fn label_at(&self, i: usize) -> &str {
        &self.subtask_labels[self.subtask_index[i] - 1]
    }

    pub fn failed_label(&self) -> Option<&str> {
        self.failed_at.map(|m| self.subtask_labels[m - 1].as_str())
    }

    /// Run-log record: one `frame m pct r` line per sampled frame, then the
    /// summary line.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for i in 0..self.frame_indices.len() {
            let _ = writeln!(
                out,
                "frame={} m={} pct={} r={:.6}",
                self.frame_indices[i], self.subtask_index[i], self.pct[i], self.r[i]
            );
        }
        let failed = self.failed_label().unwrap_or("-");
        let _ = writeln!(
            out,
            "reward={:.6} failed_at={} verified={}",
            self.reward, failed, self.verified_success
        );
        out
    }
}

/// `((m - 1) + pct/100) / M`.
pub fn progress_score<T: Real>(m: usize, pct: T, num_subtasks: usize) -> T {
    (T::of((m - 1) as f64) + pct / T::of(100.0)) / T::of(num_subtasks as f64)
}

/// `round(linspace(0, F - 1, N))`.
pub fn sample_frames(num_frames: usize, n: usize) -> Result<Vec<usize>, ScorerError> {
    if num_frames == 0 || n == 0 {
        return Err(ScorerError::NothingToSample);
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let last = (num_frames - 1) as f64;
    Ok((0..n)
        .map(|i| (last * i as f64 / (n - 1) as f64).round() as usize)
        .collect())
}

/// Scores `rollout` against `subtasks` on `n` sampled frames.
///
/// When a subtask completes, the next one is queried on the same frame with
/// that frame as its start reference, so a frame records the furthest
/// subtask it reaches.
pub fn score(
    rollout: &Rollout,
    subtasks: &SubtaskList,
    backend: &dyn ScorerBackend,
    n: usize,
) -> Result<ProgressReport, ScorerError> {
    let frame_indices = sample_frames(rollout.len(), n)?;
    let total = subtasks.len();
    let mut m = 1;
    let mut start = &rollout.frames[frame_indices[0]];
    let mut subtask_index = Vec::with_capacity(n);
    let mut pcts = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for &f in &frame_indices {
        let frame = &rollout.frames[f];
        let (mut cur_m, mut cur_pct) = (total, 100u8);
        while m <= total {
            let pct = backend
                .completion_pct(subtasks.label(m), start, frame)?
                .clamp(0, 100) as u8;
            (cur_m, cur_pct) = (m, pct);
            if pct < 100 {
                break;
            }
            m += 1;
            start = frame;
        }
        subtask_index.push(cur_m);
        pcts.push(cur_pct);
        r.push(progress_score(cur_m, cur_pct as f64, total));
    }
    let reward = r.iter().sum::<f64>() / r.len() as f64;
    Ok(ProgressReport {
        frame_indices,
        subtask_index,
        pct: pcts,
        r,
        reward,
        failed_at: (m <= total).then_some(m),
        verified_success: rollout.verified_success,
        subtask_labels: subtasks.labels(),
    })
}

/// Scorer with a per-task decomposition cache and call counters.
pub struct ProgressScorer {
    backend: Arc<dyn ScorerBackend>,
    frames: usize,
    cache: Mutex<BTreeMap<TaskId, SubtaskList>>,
    decompose_calls: AtomicU64,
    score_calls: AtomicU64,
}

impl std::fmt::Debug for ProgressScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProgressScorer")
            .field("frames", &self.frames)
            .field("decompose_calls", &self.decompose_calls())
            .field("score_calls", &self.score_calls())
            .finish()
    }
}

impl ProgressScorer {
    pub fn new(backend: Arc<dyn ScorerBackend>, frames: usize) -> Self {
        Self {
            backend,
            frames,
            cache: Mutex::new(BTreeMap::new()),
            decompose_calls: AtomicU64::new(0),
            score_calls: AtomicU64::new(0),
        }
    }

    pub fn oracle(frames: usize) -> Self {
        Self::new(Arc::new(OracleScorer), frames)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Decomposes `task` from a verified demonstration; later calls for the
    /// same task return the cached list without touching the backend.
    pub fn decompose_once(&self, task: &TaskSpec, demo: &Rollout) -> Result<SubtaskList, ScorerError> {
        let mut cache = self.cache.lock().expect("scorer cache poisoned");
        if let Some(list) = cache.get(&task.id) {
            return Ok(list.clone());
        }
        if !demo.verified_success {
            return Err(ScorerError::DemoNotVerified);
        }
        self.decompose_calls.fetch_add(1, Ordering::Relaxed);
        let labels = self.backend.decompose(&task.goal_text, demo)?;
        let list = SubtaskList::new(task.id.clone(), labels)?;
        cache.insert(task.id.clone(), list.clone());
        Ok(list)
    }

    pub fn score(&self, rollout: &Rollout, subtasks: &SubtaskList) -> Result<ProgressReport, ScorerError> {
        self.score_calls.fetch_add(1, Ordering::Relaxed);
        score(rollout, subtasks, self.backend.as_ref(), self.frames)
    }

    pub fn decompose_calls(&self) -> u64 {
        self.decompose_calls.load(Ordering::Relaxed)
    }

    pub fn score_calls(&self) -> u64 {
        self.score_calls.load(Ordering::Relaxed)
    }
}
