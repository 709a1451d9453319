//! Test-time search over complete trajectories: MCTS with PUCB selection and
//! the single-rollout, breadth and depth baselines.
//!
//! Every node is one proposed trajectory that has been executed and scored.
//! The budget counts nodes; the last MCTS expansion is truncated to fit.

mod log;
mod pucb;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use log::{
    check_final_records, parse_json_lines, replay, replay_discrepancy, to_json_lines, Replayed,
    TreeRecord,
};
pub use pucb::{pucb_argmax, pucb_score, ChildStats};

use crate::archive::{Archive, ArchiveEntry, ArchiveError, DrawKey, RetrievalMode};
use crate::codec::{encode_initial_state_text, encode_trajectory_text};
use crate::feedback::{annotate, render_feedback, AnnotatedTrajectory, FeedbackBlock, FeedbackError, FeedbackMode};
use crate::image::Image;
use crate::policy::{DemoBlock, PolicyBackend, PolicyError, ProposalRequest};
use crate::scorer::{ProgressReport, ProgressScorer, ScorerError, SubtaskList};
use crate::sim::{SimError, SimState, Simulator, TaskSpec};
use crate::types::{SeedId, TaskId};
use crate::{InitialState, Trajectory};

pub const PRIOR_FLOOR: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("node {0} has no children")]
    NoChildren(usize),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Single,
    Breadth,
    Depth,
    Mcts,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Single => "single",
            Strategy::Breadth => "breadth",
            Strategy::Depth => "depth",
            Strategy::Mcts => "mcts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum number of proposed-and-executed trajectories.
    pub budget: usize,
    pub branching: usize,
    pub c_pucb: f64,
    pub k: usize,
    pub retrieval: RetrievalMode,
    pub feedback: FeedbackMode,
    pub early_stop: bool,
    /// Also show the best-reward ancestor's feedback, after the parent's.
    pub best_ancestor_feedback: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: 15,
            branching: 3,
            c_pucb: 1.0,
            k: 1,
            retrieval: RetrievalMode::Similarity,
            feedback: FeedbackMode::StepLevel,
            early_stop: true,
            best_ancestor_feedback: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.budget < 1 {
            return Err(SearchError::InvalidConfig("budget must be >= 1".into()));
        }
        if self.branching < 1 {
            return Err(SearchError::InvalidConfig("branching must be >= 1".into()));
        }
        if !(self.c_pucb > 0.0 && self.c_pucb.is_finite()) {
            return Err(SearchError::InvalidConfig("c_pucb must be positive".into()));
        }
        if self.k < 1 {
            return Err(SearchError::InvalidConfig("k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    /// Seeds of the demonstrations in the prompt.
    pub demos: Vec<SeedId>,
    /// Node whose feedback was in the prompt.
    pub feedback_from: Option<usize>,
    pub extra_feedback_from: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub trajectory: Trajectory,
    pub annotated: AnnotatedTrajectory,
    pub report: ProgressReport,
    pub feedback: FeedbackBlock,
    pub reward: f64,
    pub visits: u64,
    pub mean: f64,
    pub prior: f64,
    pub children: Vec<usize>,
    pub verified_success: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub task: TaskId,
    pub seed: SeedId,
    pub strategy: Strategy,
    pub best: usize,
    pub success: bool,
    pub nodes_expanded: usize,
    pub tree: Vec<SearchNode>,
    pub executions: usize,
    pub score_calls: usize,
    pub log: Vec<TreeRecord>,
}

impl SearchResult {
    pub fn best_node(&self) -> &SearchNode {
        &self.tree[self.best]
    }

    pub fn best_reward(&self) -> f64 {
        self.best_node().reward
    }
}

/// The pieces a search runs against.
pub struct SearchEnv<'a> {
    pub sim: &'a Simulator,
    pub policy: &'a dyn PolicyBackend,
    pub scorer: &'a ProgressScorer,
    pub archive: &'a mut Archive,
}

/// Index of the child of `node` chosen by PUCB.
pub fn pucb_select(tree: &[SearchNode], node: usize, c_pucb: f64) -> Result<usize, SearchError> {
    let n = &tree[node];
    let stats: Vec<ChildStats<f64>> = n
        .children
        .iter()
        .map(|&c| ChildStats {
            mean: tree[c].mean,
            prior: tree[c].prior,
            visits: tree[c].visits,
        })
        .collect();
    pucb_argmax(&stats, n.visits, c_pucb)
        .map(|i| n.children[i])
        .ok_or(SearchError::NoChildren(node))
}

/// Subtask list for `task`, decomposed once from the first archived
/// demonstration.
pub fn subtasks_for(
    scorer: &ProgressScorer,
    sim: &Simulator,
    archive: &Archive,
    spec: &TaskSpec,
) -> Result<SubtaskList, SearchError> {
    let entry = archive
        .entries(&spec.id)
        .find(|e| e.demonstration)
        .or_else(|| archive.entries(&spec.id).next())
        .ok_or_else(|| ArchiveError::EmptyArchiveForTask(spec.id.clone()))?;
    let state = sim.spawn(&entry.task, entry.seed)?;
    let demo = sim.execute(&state, &entry.trajectory);
    Ok(scorer.decompose_once(spec, &demo)?)
}

struct Search<'e, 'a> {
    env: &'e mut SearchEnv<'a>,
    cfg: SearchConfig,
    spec: TaskSpec,
    seed: SeedId,
    state: SimState,
    observation: Image,
    initial: InitialState,
    subtasks: SubtaskList,
    tree: Vec<SearchNode>,
    node_demos: Vec<Vec<DemoBlock>>,
    log: Vec<TreeRecord>,
    executions: usize,
    score_calls: usize,
}

impl<'e, 'a> Search<'e, 'a> {
    fn new(env: &'e mut SearchEnv<'a>, task: &TaskId, seed: SeedId, cfg: SearchConfig) -> Result<Self, SearchError> {
        cfg.validate()?;
        let spec = TaskSpec::lookup(task)?;
        let (state, observation, initial) = env.sim.reset(task, seed)?;
        let subtasks = subtasks_for(env.scorer, env.sim, env.archive, &spec)?;
        Ok(Self {
            env,
            cfg,
            spec,
            seed,
            state,
            observation,
            initial,
            subtasks,
            tree: Vec::new(),
            node_demos: Vec::new(),
            log: Vec::new(),
            executions: 0,
            score_calls: 0,
        })
    }

    fn demos(&self, attempt: u64) -> Result<Vec<DemoBlock>, SearchError> {
        let retrieved = self.env.archive.retrieve(
            &self.observation,
            self.cfg.k,
            self.cfg.retrieval,
            &self.spec.id,
            DrawKey {
                seed: self.seed.0,
                attempt,
            },
        )?;
        Ok(retrieved
            .into_iter()
            .map(|r| DemoBlock {
                task: r.entry.task.clone(),
                seed: r.entry.seed,
                trajectory_text: encode_trajectory_text(&r.entry.trajectory),
                initial_text: encode_initial_state_text(&r.entry.initial),
            })
            .collect())
    }


    /// Proposes, executes and scores one trajectory, adds it to the tree and
    /// backs its reward up to the root.
    fn evaluate(&mut self, parent: Option<usize>, child_index: usize) -> Result<usize, SearchError> {
        let id = self.tree.len();
        let attempt = id as u64;
        let demos = self.demos(attempt)?;
        let mut feedback = Vec::new();
        let mut provenance = Provenance {
            demos: demos.iter().map(|d| d.seed).collect(),
            ..Provenance::default()
        };
        if let Some(p) = parent {
            feedback.push(self.tree[p].feedback.clone());
            provenance.feedback_from = Some(p);
            if self.cfg.best_ancestor_feedback {
                if let Some(a) = self.best_ancestor_of_parent(p) {
                    feedback.push(self.tree[a].feedback.clone());
                    provenance.extra_feedback_from = Some(a);
                }
            }
        }
        let depth = parent.map_or(0, |p| self.tree[p].depth + 1);
        let req = ProposalRequest {
            task: self.spec.id.clone(),
            seed: self.seed,
            task_goal: self.spec.goal_text.clone(),
            initial: self.initial.clone(),
            demos: demos.clone(),
            feedback,
            parent_demos: parent.map_or_else(Vec::new, |p| self.node_demos[p].clone()),
            attempt_index: attempt,
            child_index,
            depth,
        };
        let trajectory = self.env.policy.propose(&req)?;
        let rollout = self.env.sim.execute(&self.state, &trajectory);
        self.executions += 1;
        let report = self.env.scorer.score(&rollout, &self.subtasks)?;
        self.score_calls += 1;
        let annotated = annotate(&trajectory, &report, &rollout)?;
        let block = render_feedback(&annotated, &rollout, self.cfg.feedback);
        let reward = report.reward;
        let node = SearchNode {
            id,
            parent,
            depth,
            trajectory,
            annotated,
            report,
            feedback: block,
            reward,
            visits: 0,
            mean: 0.0,
            prior: reward.clamp(PRIOR_FLOOR, 1.0),
            children: Vec::new(),
            verified_success: rollout.verified_success,
            provenance,
        };
        self.log.push(log::node_record(&self.spec.id, self.seed, &node));
        self.tree.push(node);
        self.node_demos.push(demos);
        if let Some(p) = parent {
            self.tree[p].children.push(id);
        }
        self.backup(id, reward);
        Ok(id)
    }

    fn best_ancestor_of_parent(&self, parent: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut cur = self.tree[parent].parent;
        while let Some(id) = cur {
            if best.is_none_or(|b| self.tree[id].reward > self.tree[b].reward) {
                best = Some(id);
            }
            cur = self.tree[id].parent;
        }
        best.filter(|&a| self.tree[a].reward > self.tree[parent].reward)
    }

    fn backup(&mut self, from: usize, reward: f64) {
        let mut cur = Some(from);
        while let Some(id) = cur {
            let n = &mut self.tree[id];
            n.visits += 1;
            n.mean += (reward - n.mean) / n.visits as f64;
            cur = n.parent;
        }
    }

    fn done(&self) -> bool {
        self.tree.len() >= self.cfg.budget
            || (self.cfg.early_stop && self.tree.iter().any(|n| n.verified_success))
    }

    fn finish(mut self, strategy: Strategy) -> Result<SearchResult, SearchError> {
        let verified = self.tree.iter().filter(|n| n.verified_success);
        let pool: Vec<&SearchNode> = if self.tree.iter().any(|n| n.verified_success) {
            verified.collect()
        } else {
            self.tree.iter().collect()
        };
        let best = pool
            .iter()
            .fold(None::<&SearchNode>, |b, n| match b {
                Some(b) if b.reward >= n.reward => Some(b),
                _ => Some(n),
            })
            .expect("search evaluates at least one node")
            .id;
        let success = self.tree[best].verified_success;
        if success {
            self.env.archive.insert(ArchiveEntry::new(
                self.observation.clone(),
                self.tree[best].trajectory.clone(),
                self.initial.clone(),
                self.spec.id.clone(),
                self.seed,
                false,
            ))?;
        }
        for n in &self.tree {
            self.log.push(TreeRecord::Final {
                task: self.spec.id.clone(),
                seed: self.seed,
                node: n.id,
                visits: n.visits,
                mean: n.mean,
            });
        }
        Ok(SearchResult {
            task: self.spec.id.clone(),
            seed: self.seed,
            strategy,
            best,
            success,
            nodes_expanded: self.tree.len(),
            tree: self.tree,
            executions: self.executions,
            score_calls: self.score_calls,
            log: self.log,
        })
    }
}

/// MCTS: evaluate a root proposal, then repeatedly descend by PUCB to a
/// childless node and expand it with up to `branching` refinements.
pub fn run_mcts(
    env: &mut SearchEnv<'_>,
    task: &TaskId,
    seed: SeedId,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    let mut s = Search::new(env, task, seed, *cfg)?;
    s.evaluate(None, 0)?;
    'search: while !s.done() {
        let mut leaf = 0;
        while !s.tree[leaf].children.is_empty() {
            leaf = pucb_select(&s.tree, leaf, cfg.c_pucb)?;
        }
        let width = cfg.branching.min(cfg.budget - s.tree.len());
        for c in 0..width {
            let id = s.evaluate(Some(leaf), c)?;
            if cfg.early_stop && s.tree[id].verified_success {
                break 'search;
            }
        }
    }
    let strategy = if cfg.budget == 1 { Strategy::Single } else { Strategy::Mcts };
    s.finish(strategy)
}

/// `budget` independent proposals from the root context, without feedback.
pub fn run_breadth(
    env: &mut SearchEnv<'_>,
    task: &TaskId,
    seed: SeedId,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    let mut s = Search::new(env, task, seed, *cfg)?;
    while !s.done() {
        let c = s.tree.len();
        s.evaluate(None, c)?;
    }
    s.finish(Strategy::Breadth)
}

/// A single refinement chain: each proposal sees the previous node's
/// feedback.
pub fn run_depth(
    env: &mut SearchEnv<'_>,
    task: &TaskId,
    seed: SeedId,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    let mut s = Search::new(env, task, seed, *cfg)?;
    s.evaluate(None, 0)?;
    while !s.done() {
        let last = s.tree.len() - 1;
        s.evaluate(Some(last), 0)?;
    }
    s.finish(Strategy::Depth)
}

/// A single proposal, equivalent to any strategy at budget 1.
pub fn run_single(
    env: &mut SearchEnv<'_>,
    task: &TaskId,
    seed: SeedId,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    let cfg = SearchConfig { budget: 1, ..*cfg };
    let mut s = Search::new(env, task, seed, cfg)?;
    s.evaluate(None, 0)?;
    s.finish(Strategy::Single)
}

pub fn run_strategy(
    strategy: Strategy,
    env: &mut SearchEnv<'_>,
    task: &TaskId,
    seed: SeedId,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    match strategy {
        Strategy::Single => run_single(env, task, seed, cfg),
        Strategy::Breadth => run_breadth(env, task, seed, cfg),
        Strategy::Depth => run_depth(env, task, seed, cfg),
        Strategy::Mcts => run_mcts(env, task, seed, cfg),
    }
}
