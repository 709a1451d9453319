//! Per-task store of successful rollouts and K-nearest demonstration
//! retrieval.

mod metric;
mod persist;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metric::{
    grid_features, image_distance, resize_bilinear, GridFeatureMetric, PerceptualMetric,
    CELL, FEATURE_DIM, GRID_SIDE,
};

use crate::codec::CodecError;
use crate::image::{Image, ImageError};
use crate::rng;
use crate::sim::{SimError, Simulator};
use crate::types::{SeedId, TaskId};
use crate::{InitialState, Trajectory};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("archive holds no entries for task `{0}`")]
    EmptyArchiveForTask(TaskId),
    #[error("retrieval count must be at least 1")]
    InvalidK,
    #[error("trajectory for {task} seed {seed} does not verify in its environment")]
    Unverified { task: TaskId, seed: SeedId },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("archive io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("archive metadata: {0}")]
    Metadata(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RetrievalMode {
    Similarity,
    Random { rng_seed: u64 },
    Fixed,
}

impl RetrievalMode {
    pub fn label(&self) -> &'static str {
        match self {
            RetrievalMode::Similarity => "SIMILARITY",
            RetrievalMode::Random { .. } => "RANDOM",
            RetrievalMode::Fixed => "FIXED",
        }
    }
}

/// A verified successful rollout: initial observation, the trajectory and the
/// keypoint state it was proposed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub observation: Image,
    pub trajectory: Trajectory,
    pub initial: InitialState,
    pub task: TaskId,
    pub seed: SeedId,
    /// Set by the archive on insertion.
    pub inserted_at: u64,
    /// Part of the initial demonstration set.
    pub demonstration: bool,
}

impl ArchiveEntry {
    pub fn new(
        observation: Image,
        trajectory: Trajectory,
        initial: InitialState,
        task: TaskId,
        seed: SeedId,
        demonstration: bool,
    ) -> Self {
        Self {
            observation,
            trajectory,
            initial,
            task,
            seed,
            inserted_at: 0,
            demonstration,
        }
    }
}

#[derive(Debug, Clone)]
struct Stored {
    entry: Arc<ArchiveEntry>,
    features: Arc<Vec<f64>>,
}

/// One retrieved demonstration with its perceptual distance to the query.
#[derive(Debug, Clone)]
pub struct Retrieved {
    pub entry: Arc<ArchiveEntry>,
    pub distance: f64,
}

/// Retrieval draws are keyed, not sequential: the same key always yields the
/// same RANDOM sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DrawKey {
    pub seed: u64,
    pub attempt: u64,
}

pub struct Archive {
    metric: Arc<dyn PerceptualMetric>,
    verifier: Simulator,
    tasks: BTreeMap<TaskId, Vec<Stored>>,
    counter: u64,
}

impl Clone for Archive {
    fn clone(&self) -> Self {
        Self {
            metric: Arc::clone(&self.metric),
            verifier: self.verifier.clone(),
            tasks: self.tasks.clone(),
            counter: self.counter,
        }
    }
}

impl std::fmt::Debug for Archive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Archive")
            .field("len", &self.len())
            .field("counter", &self.counter)
            .finish()
    }
}

impl Default for Archive {
    fn default() -> Self {
        Self::new(Arc::new(GridFeatureMetric))
    }
}

impl Archive {
    pub fn new(metric: Arc<dyn PerceptualMetric>) -> Self {
        Self {
            metric,
            verifier: Simulator::default(),
            tasks: BTreeMap::new(),
            counter: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.tasks.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len_for(&self, task: &TaskId) -> usize {
        self.tasks.get(task).map_or(0, Vec::len)
    }

    /// Entries of `task` in insertion order.
    pub fn entries(&self, task: &TaskId) -> impl Iterator<Item = &Arc<ArchiveEntry>> {
        self.tasks.get(task).into_iter().flatten().map(|s| &s.entry)
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &Arc<ArchiveEntry>> {
        self.tasks.values().flatten().map(|s| &s.entry)
    }

    /// Inserts `entry`, replacing any previous entry for the same
    /// `(task, seed)`. The trajectory is replayed on its own seed first and
    /// rejected if it does not verify.
    pub fn insert(&mut self, entry: ArchiveEntry) -> Result<u64, ArchiveError> {
        let state = self.verifier.spawn(&entry.task, entry.seed)?;
        if !self.verifier.execute(&state, &entry.trajectory).verified_success {
            return Err(ArchiveError::Unverified {
                task: entry.task,
                seed: entry.seed,
            });
        }
        Ok(self.insert_verified(entry))
    }

    fn insert_verified(&mut self, mut entry: ArchiveEntry) -> u64 {
        self.counter += 1;
        entry.inserted_at = self.counter;
        let features = Arc::new(self.metric.embed(&entry.observation));
        let list = self.tasks.entry(entry.task.clone()).or_default();
        list.retain(|s| s.entry.seed != entry.seed);
        list.push(Stored {
            entry: Arc::new(entry),
            features,
        });
        self.counter
    }

    /// Drops every entry that is not an initial demonstration.
    pub fn reset_to_demonstrations(&mut self) {
        for list in self.tasks.values_mut() {
            list.retain(|s| s.entry.demonstration);
        }
    }

    pub fn distance(&self, a: &Image, b: &Image) -> Result<f64, ArchiveError> {
        self.metric.distance(a, b)
    }

    /// Up to `k` demonstrations for `task`, chosen by `mode`.
    pub fn retrieve(
        &self,
        obs: &Image,
        k: usize,
        mode: RetrievalMode,
        task: &TaskId,
        key: DrawKey,
    ) -> Result<Vec<Retrieved>, ArchiveError> {
        if k == 0 {
            return Err(ArchiveError::InvalidK);
        }
        let list = match self.tasks.get(task) {
            Some(l) if !l.is_empty() => l,
            _ => return Err(ArchiveError::EmptyArchiveForTask(task.clone())),
        };
        for s in list {
            metric::check_dims(obs, &s.entry.observation)?;
        }
        let query = self.metric.embed(obs);
        let scored = |s: &Stored| Retrieved {
            entry: Arc::clone(&s.entry),
            distance: self.metric.feature_distance(&query, &s.features),
        };
        Ok(match mode {
            RetrievalMode::Similarity => {
                // Stored lists are in insertion order, and the sort is stable.
                let mut all: Vec<Retrieved> = list.iter().map(scored).collect();
                all.sort_by(|a, b| a.distance.total_cmp(&b.distance));
                all.truncate(k);
                all
            }
            RetrievalMode::Random { rng_seed } => {
                let mut r = rng::stream(&[
                    rng_seed,
                    rng::hash_str(task.as_str()),
                    key.seed,
                    key.attempt,
                    rng::PURPOSE_RETRIEVAL,
                ]);
                index::sample(&mut r, list.len(), k.min(list.len()))
                    .into_iter()
                    .map(|i| scored(&list[i]))
                    .collect()
            }
            RetrievalMode::Fixed => {
                let demos: Vec<Retrieved> = list
                    .iter()
                    .filter(|s| s.entry.demonstration)
                    .take(k)
                    .map(scored)
                    .collect();
                if demos.is_empty() {
                    return Err(ArchiveError::EmptyArchiveForTask(task.clone()));
                }
                demos
            }
        })
    }
}
