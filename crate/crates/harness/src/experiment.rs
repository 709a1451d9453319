//! Grid execution: one archive per cell, seeds in ascending order.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use sail_core::archive::{Archive, ArchiveEntry};
use sail_core::feedback::FeedbackMode;
use sail_core::policy::template::golden;
use sail_core::policy::{PolicyBackend, RemotePolicy, ScriptedPolicy};
use sail_core::rng;
use sail_core::scorer::ProgressScorer;
use sail_core::search::{run_strategy, SearchConfig, SearchEnv, Strategy, TreeRecord};
use sail_core::sim::{SimConfig, Simulator};
use sail_core::{SeedId, TaskId};

use crate::config::{Backend, ExperimentConfig, Retrieval};
use crate::results::ResultRow;
use crate::HarnessError;

/// One configuration of the grid, run over every evaluation seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub task: TaskId,
    pub strategy: Strategy,
    pub budget: usize,
    pub retrieval: Retrieval,
    pub feedback: FeedbackMode,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}",
            self.task,
            self.strategy.label(),
            self.budget,
            self.retrieval.label(),
            self.feedback.label()
        )
    }
}

/// Every task x strategy x budget x retrieval x feedback combination. The
/// single-rollout strategy only appears at budget 1.
pub fn scaling_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for task in cfg.task_ids() {
        for &strategy in &cfg.strategies {
            let budgets: Vec<usize> = if strategy == Strategy::Single {
                vec![1]
            } else {
                cfg.budgets.clone()
            };
            for budget in budgets {
                for &retrieval in &cfg.retrieval_modes {
                    for &feedback in &cfg.feedback_modes {
                        cells.push(Cell {
                            task: task.clone(),
                            strategy,
                            budget,
                            retrieval,
                            feedback,
                        });
                    }
                }
            }
        }
    }
    cells
}

/// MCTS at the ablation budget: each retrieval mode with step-level
/// feedback, then each feedback mode with similarity retrieval.
pub fn ablation_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    for task in cfg.task_ids() {
        let mut combos = vec![(Retrieval::Similarity, FeedbackMode::StepLevel)];
        combos.extend(cfg.retrieval_modes.iter().map(|&r| (r, FeedbackMode::StepLevel)));
        combos.extend(cfg.feedback_modes.iter().map(|&f| (Retrieval::Similarity, f)));
        for (retrieval, feedback) in combos {
            let cell = Cell {
                task: task.clone(),
                strategy: Strategy::Mcts,
                budget: cfg.ablation_budget,
                retrieval,
                feedback,
            };
            if !cells.contains(&cell) {
                cells.push(cell);
            }
        }
    }
    cells
}

pub fn build_policy(cfg: &ExperimentConfig) -> Result<Arc<dyn PolicyBackend>, HarnessError> {
    Ok(match &cfg.backend {
        Backend::Scripted { noise } => {
            let mut noise = *noise;
            noise.stream_seed = rng::mix(&[cfg.rng_seed, noise.stream_seed]);
            Arc::new(ScriptedPolicy::new(noise))
        }
        Backend::Remote(remote) => Arc::new(RemotePolicy::new(remote.clone())?),
    })
}

/// A fresh archive holding the golden demonstrations of `task`.
pub fn demo_archive(task: &TaskId, demo_seeds: &[u64]) -> Result<Archive, HarnessError> {
    let sim = Simulator::default();
    let mut archive = Archive::default();
    for &s in demo_seeds {
        let seed = SeedId(s);
        let (_, observation, initial) = sim.reset(task, seed)?;
        let trajectory = golden(task, seed)?;
        archive.insert(ArchiveEntry::new(
            observation,
            trajectory,
            initial,
            task.clone(),
            seed,
            true,
        ))?;
    }
    Ok(archive)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aborted {
    pub cell: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub tree_log: Vec<TreeRecord>,
    pub aborted: Vec<Aborted>,
    pub executions: usize,
    pub score_calls: usize,
}

impl RunOutput {
    fn extend(&mut self, other: RunOutput) {
        self.rows.extend(other.rows);
        self.tree_log.extend(other.tree_log);
        self.aborted.extend(other.aborted);
        self.executions += other.executions;
        self.score_calls += other.score_calls;
    }
}

pub fn search_config(cfg: &ExperimentConfig, cell: &Cell) -> SearchConfig {
    SearchConfig {
        budget: cell.budget,
        branching: cfg.branching,
        c_pucb: cfg.c_pucb,
        k: cfg.k,
        retrieval: cell.retrieval.mode(cfg.rng_seed),
        feedback: cell.feedback,
        early_stop: cfg.early_stop,
        best_ancestor_feedback: cfg.best_ancestor_feedback,
    }
}

/// Runs every evaluation seed of `cell` in ascending order against one
/// archive that starts from the demonstrations and grows with successes.
pub fn run_cell(
    cfg: &ExperimentConfig,
    cell: &Cell,
    policy: &dyn PolicyBackend,
    scorer: &ProgressScorer,
) -> Result<RunOutput, HarnessError> {
    let sim = Simulator::new(SimConfig {
        keypoint_noise: cfg.keypoint_noise,
    });
    let mut archive = demo_archive(&cell.task, &cfg.demo_seeds)?;
    let scfg = search_config(cfg, cell);
    let mut out = RunOutput::default();
    for seed in cfg.seeds.seeds() {
        let started = Instant::now();
        let mut env = SearchEnv {
            sim: &sim,
            policy,
            scorer,
            archive: &mut archive,
        };
        let result = run_strategy(cell.strategy, &mut env, &cell.task, SeedId(seed), &scfg);
        let wall = if cfg.record_wall_time {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let mut row = ResultRow {
            task: cell.task.as_str().to_string(),
            strategy: cell.strategy.label().to_string(),
            budget: cell.budget,
            retrieval: cell.retrieval.label().to_string(),
            feedback: cell.feedback.label().to_string(),
            seed,
            success: false,
            best_reward: 0.0,
            nodes_expanded: 0,
            wall_time_s: wall,
        };
        match result {
            Ok(r) => {
                row.success = r.success;
                row.best_reward = r.best_reward();
                row.nodes_expanded = r.nodes_expanded;
                out.executions += r.executions;
                out.score_calls += r.score_calls;
                if cfg.write_tree_log {
                    out.tree_log.extend(r.log);
                }
            }
            Err(e) => {
                log::error!("{cell} seed {seed} aborted: {e}");
                out.aborted.push(Aborted {
                    cell: cell.to_string(),
                    seed,
                    error: e.to_string(),
                });
            }
        }
        out.rows.push(row);
    }
    Ok(out)
}

/// Runs `cells` (in parallel when configured) and merges their outputs in
/// cell order.
pub fn run_cells(cfg: &ExperimentConfig, cells: &[Cell]) -> Result<RunOutput, HarnessError> {
    let policy = build_policy(cfg)?;
    let scorer = ProgressScorer::oracle(cfg.frames);
    let run = |cell: &Cell| {
        log::info!("running {cell}");
        run_cell(cfg, cell, policy.as_ref(), &scorer)
    };
    let parts: Vec<Result<RunOutput, HarnessError>> = if cfg.parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };
    let mut out = RunOutput::default();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
