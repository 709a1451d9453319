//! Experiment configuration (JSON).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sail_core::archive::RetrievalMode;
use sail_core::feedback::FeedbackMode;
use sail_core::policy::{NoiseConfig, RemoteConfig};
use sail_core::search::Strategy;
use sail_core::sim::TaskSpec;
use sail_core::TaskId;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Retrieval {
    Similarity,
    Random,
    Fixed,
}

impl Retrieval {
    pub fn mode(self, rng_seed: u64) -> RetrievalMode {
        match self {
            Retrieval::Similarity => RetrievalMode::Similarity,
            Retrieval::Random => RetrievalMode::Random { rng_seed },
            Retrieval::Fixed => RetrievalMode::Fixed,
        }
    }

    pub fn label(self) -> &'static str {
        self.mode(0).label()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Scripted {
        #[serde(default)]
        noise: NoiseConfig,
    },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.start..self.start + self.count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tasks: Vec<String>,
    pub seeds: SeedRange,
    /// Demonstration seeds; each gets the golden template trajectory.
    pub demo_seeds: Vec<u64>,
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<usize>,
    /// Budget of every `ablate` cell.
    pub ablation_budget: usize,
    pub branching: usize,
    pub k: usize,
    pub c_pucb: f64,
    pub retrieval_modes: Vec<Retrieval>,
    pub feedback_modes: Vec<FeedbackMode>,
    pub early_stop: bool,
    pub best_ancestor_feedback: bool,
    pub backend: Backend,
    /// Sampled frames per rollout for scoring.
    pub frames: usize,
    /// Keypoint detection noise (m).
    pub keypoint_noise: f64,
    pub output_dir: PathBuf,
    pub rng_seed: u64,
    /// Record wall-clock seconds per seed. Off by default so outputs are
    /// byte-reproducible.
    pub record_wall_time: bool,
    pub write_tree_log: bool,
    /// Run grid cells on a thread pool.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tasks: TaskSpec::all().into_iter().map(|t| t.id.as_str().to_string()).collect(),
            seeds: SeedRange { start: 0, count: 100 },
            demo_seeds: vec![10_000],
            strategies: vec![Strategy::Mcts],
            budgets: vec![1, 6, 15, 30, 45],
            ablation_budget: 15,
            branching: 3,
            k: 1,
            c_pucb: 1.0,
            retrieval_modes: vec![Retrieval::Similarity],
            feedback_modes: vec![FeedbackMode::StepLevel],
            early_stop: true,
            best_ancestor_feedback: false,
            backend: Backend::Scripted {
                noise: NoiseConfig::default(),
            },
            frames: 50,
            keypoint_noise: 0.0,
            output_dir: PathBuf::from("sail-out"),
            rng_seed: 0,
            record_wall_time: false,
            write_tree_log: true,
            parallel: true,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn task_ids(&self) -> Vec<TaskId> {
        self.tasks.iter().map(|t| TaskId::new(t.as_str())).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return Err(invalid("at least one task is required"));
        }
        for t in self.task_ids() {
            TaskSpec::lookup(&t).map_err(|e| invalid(e.to_string()))?;
        }
        if self.seeds.count == 0 {
            return Err(invalid("seed count must be positive"));
        }
        if self.demo_seeds.is_empty() {
            return Err(invalid("at least one demonstration seed is required"));
        }
        let demos: BTreeSet<u64> = self.demo_seeds.iter().copied().collect();
        if let Some(s) = self.seeds.seeds().find(|s| demos.contains(s)) {
            return Err(invalid(format!(
                "evaluation seed {s} is also a demonstration seed"
            )));
        }
        if self.strategies.is_empty() || self.budgets.is_empty() {
            return Err(invalid("strategies and budgets must be non-empty"));
        }
        if self.budgets.contains(&0) || self.ablation_budget == 0 {
            return Err(invalid("budgets must be >= 1"));
        }
        if self.branching == 0 || self.k == 0 || self.frames == 0 {
            return Err(invalid("branching, k and frames must be >= 1"));
        }
        if !(self.c_pucb > 0.0 && self.c_pucb.is_finite()) {
            return Err(invalid("c_pucb must be positive"));
        }
        if self.retrieval_modes.is_empty() || self.feedback_modes.is_empty() {
            return Err(invalid("retrieval and feedback mode lists must be non-empty"));
        }
        if !(self.keypoint_noise >= 0.0 && self.keypoint_noise.is_finite()) {
            return Err(invalid("keypoint_noise must be non-negative"));
        }
        Ok(())
    }
}
