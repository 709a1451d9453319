//! Seeded stochastic proposer.
//!
//! Proposals are the task template plus Gaussian position noise split into
//! three parts: a scene bias fixed per (seed, demonstration), a per-proposal
//! offset shared by all waypoints and per-waypoint jitter. The overall scale
//! is `sigma0` times a gain that grows with the keypoint distance between the
//! scene and the closest retrieved demonstration.
//!
//! A refinement reads the parent trajectory back out of the feedback text.
//! Its offset mixes the parent's mean offset with a fresh draw; the fresh
//! share grows with the progress the feedback reports, so modes without a
//! score only carry the parent forward. Noise scales shrink with depth.
//! With step-level feedback the waypoints before the first one annotated with
//! the failing subtask are copied from the parent unchanged.

use std::sync::LazyLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::template::{quantize, template};
use super::{DemoBlock, PolicyBackend, PolicyError, ProposalRequest};
use crate::codec::{parse_initial_state_text, parse_trajectory_text};
use crate::feedback::{FeedbackBlock, FeedbackMode};
use crate::rng;
use crate::sim::TaskSpec;
use crate::{EndEffectorState, InitialState, Trajectory, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Per-axis position noise scale (m) at unit gain.
    pub sigma0: f64,
    /// Demonstration keypoint RMS distance (m) that maps to unit gain.
    pub mismatch_ref: f64,
    pub gain_min: f64,
    pub gain_max: f64,
    /// Variance shares of the three noise terms at depth 0.
    pub bias_share: f64,
    pub offset_share: f64,
    pub jitter_share: f64,
    /// Weight of the parent's mean offset in a refinement under step-level
    /// feedback when the parent reached full progress.
    pub step_anchor: f64,
    /// Same, under final-score feedback. Modes that report no score give the
    /// policy nothing to correct with.
    pub anchor: f64,
    /// Exponent on the parent's reported progress: a refinement replaces
    /// `explore + (1 - anchor) * progress^progress_power` of the parent's
    /// offset with a fresh draw.
    pub progress_power: f64,
    /// Share of the offset replaced by every refinement regardless of score.
    pub explore: f64,
    /// Variance share of a refinement's fresh offset draw.
    pub innovation_share: f64,
    /// How much of the bias change is adopted when a refinement is proposed
    /// with a different demonstration than its parent.
    pub demo_shift: f64,
    /// Per-depth sigma factor under step-level feedback.
    pub step_decay: f64,
    /// Per-depth sigma factor under the other feedback modes.
    pub decay: f64,
    pub sigma_floor: f64,
    /// Folded into every noise stream key.
    pub stream_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.03,
            mismatch_ref: 0.15,
            gain_min: 0.3,
            gain_max: 1.5,
            bias_share: 0.9,
            offset_share: 0.05,
            jitter_share: 0.05,
            step_anchor: 0.3,
            anchor: 0.6,
            progress_power: 2.0,
            explore: 0.0,
            innovation_share: 0.95,
            demo_shift: 0.3,
            step_decay: 0.9,
            decay: 0.9,
            sigma_floor: 0.002,
            stream_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    pub noise: NoiseConfig,
}

/// Waypoint annotations recovered from step-level feedback text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepAnnotations {
    /// `(score, subtask)` per waypoint line, in order.
    pub lines: Vec<Option<(f64, String)>>,
    pub failed_at: Option<String>,
}

static WAYPOINT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*W\s+\d+\s*:\s*pos=").unwrap());
static ANNOTATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"score=([0-9.]+)\s+subtask=(\S+)").unwrap());
static FINAL_SCORE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"final_score=([0-9.]+)").unwrap());
static FAILED_AT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*failed_at=(\S+)").unwrap());

impl StepAnnotations {
    pub fn parse(text: &str) -> Self {
        let mut out = Self::default();
        for line in text.lines() {
            if WAYPOINT_LINE.is_match(line) {
                out.lines.push(
                    ANNOTATION
                        .captures(line)
                        .and_then(|c| Some((c[1].parse().ok()?, c[2].to_string()))),
                );
            } else if let Some(c) = FAILED_AT.captures(line) {
                out.failed_at = Some(c[1].to_string());
            }
        }
        out
    }

    /// Highest waypoint score, if any line is annotated.
    pub fn max_score(&self) -> Option<f64> {
        self.lines
            .iter()
            .flatten()
            .map(|(s, _)| *s)
            .max_by(f64::total_cmp)
    }

    /// Number of leading waypoints to copy: everything before the first
    /// waypoint annotated with the failing subtask (the last subtask when
    /// nothing failed).
    pub fn keep_prefix(&self, last_subtask: &str) -> usize {
        let failing = self.failed_at.as_deref().unwrap_or(last_subtask);
        self.lines
            .iter()
            .position(|a| a.as_ref().is_some_and(|(_, s)| s == failing))
            .unwrap_or(0)
    }
}

fn gaussian3(r: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    let mut n = || r.sample::<f64, _>(StandardNormal) * sigma;
    Vec3::new(n(), n(), n())
}

impl ScriptedPolicy {
    pub fn new(noise: NoiseConfig) -> Self {
        Self { noise }
    }

    /// Keypoint RMS distance to the closest demonstration and that
    /// demonstration's seed.
    fn closest_demo(demos: &[DemoBlock], initial: &InitialState) -> Option<(f64, u64)> {
        demos
            .iter()
            .filter_map(|d| {
                let init: InitialState = parse_initial_state_text(&d.initial_text).ok()?;
                Some((init.keypoint_rms_distance(initial)?, d.seed.0))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    fn base_sigma(&self, mismatch: Option<f64>) -> f64 {
        let n = &self.noise;
        let gain = mismatch.map_or(n.gain_max, |m| {
            (m / n.mismatch_ref).clamp(n.gain_min, n.gain_max)
        });
        n.sigma0 * gain
    }

    fn scene_bias(&self, req: &ProposalRequest, demo_seed: Option<u64>, sigma: f64) -> Vec3 {
        let mut r = rng::stream(&[
            self.noise.stream_seed,
            rng::hash_str(req.task.as_str()),
            req.seed.0,
            demo_seed.map_or(u64::MAX, |s| s),
            rng::PURPOSE_PROPOSAL,
            0,
        ]);
        gaussian3(&mut r, sigma * self.noise.bias_share.sqrt())
    }

    fn parent(feedback: &[FeedbackBlock]) -> Option<(Trajectory, &FeedbackBlock)> {
        let block = feedback.first()?;
        let traj = parse_trajectory_text(&block.text).ok()?;
        Some((traj, block))
    }
}

impl PolicyBackend for ScriptedPolicy {
    fn propose(&self, req: &ProposalRequest) -> Result<Trajectory, PolicyError> {
        let n = &self.noise;
        let spec = TaskSpec::lookup(&req.task)?;
        let tmpl = template(&spec, &req.initial)?;
        let closest = Self::closest_demo(&req.demos, &req.initial);
        let sigma_r = self.base_sigma(closest.map(|c| c.0));
        let mut r = rng::stream(&[
            n.stream_seed,
            rng::hash_str(req.task.as_str()),
            req.seed.0,
            req.attempt_index,
            req.child_index as u64,
            rng::PURPOSE_PROPOSAL,
            1,
        ]);
        let bias = self.scene_bias(req, closest.map(|c| c.1), sigma_r);
        let t = tmpl.waypoints();
        let (offset, sigma, keep, parent) = match Self::parent(&req.feedback) {
            None => {
                let decay = if req.depth > 0 { n.decay.powi(req.depth as i32) } else { 1.0 };
                let sigma = (sigma_r * decay).max(n.sigma_floor);
                (bias + gaussian3(&mut r, sigma * n.offset_share.sqrt()), sigma, 0, None)
            }
            Some((parent, block)) => {
                let step = block.mode == FeedbackMode::StepLevel;
                let factor = if step { n.step_decay } else { n.decay };
                let sigma = (sigma_r * factor.powi(req.depth as i32)).max(n.sigma_floor);
                let p = parent.waypoints();
                let shared = p.len().min(t.len());
                let mean = (0..shared)
                    .fold(Vec3::zero(), |acc, i| acc + (p[i].position() - t[i].position()))
                    * (1.0 / shared as f64);
                // A different demonstration than the parent's swaps the
                // systematic error that came with it.
                let parent_demo = Self::closest_demo(&req.parent_demos, &req.initial);
                let shift = match parent_demo {
                    Some((m, seed)) if closest.map(|c| c.1) != Some(seed) => {
                        (bias - self.scene_bias(req, Some(seed), self.base_sigma(Some(m)))) * n.demo_shift
                    }
                    _ => Vec3::zero(),
                };
                let mean = mean + shift;
                let annotations = StepAnnotations::parse(&block.text);
                let (base, progress) = match block.mode {
                    FeedbackMode::StepLevel => (n.step_anchor, annotations.max_score().unwrap_or(0.0)),
                    FeedbackMode::FinalScore => (
                        n.anchor,
                        FINAL_SCORE
                            .captures(&block.text)
                            .and_then(|c| c[1].parse().ok())
                            .unwrap_or(0.0),
                    ),
                    _ => (1.0, 0.0),
                };
                let replaced = n.explore + (1.0 - base) * progress.clamp(0.0, 1.0).powf(n.progress_power);
                let a = 1.0 - replaced.clamp(0.0, 1.0);
                // The fresh draw is no larger than the error it replaces, so a
                // refinement never moves further from the target on average.
                let scale = (sigma * n.innovation_share.sqrt()).min(mean.norm() / 3f64.sqrt());
                let fresh = gaussian3(&mut r, scale);
                let offset = mean * a + fresh * (1.0 - a * a).sqrt();
                let keep = if step {
                    let last = spec.canonical_subtasks.last().map(String::as_str).unwrap_or("");
                    annotations.keep_prefix(last).min(shared)
                } else {
                    0
                };
                (offset, sigma, keep, Some(parent))
            }
        };
        let jitter = sigma * n.jitter_share.sqrt();
        let mut out = Vec::with_capacity(t.len());
        for (i, wp) in t.iter().enumerate() {
            if i < keep {
                let p = parent.as_ref().expect("keep implies parent").waypoints()[i];
                out.push(p);
                continue;
            }
            let pos = wp.position() + offset + gaussian3(&mut r, jitter);
            out.push(
                EndEffectorState::new(pos, wp.orientation(), wp.gripper())
                    .map_err(crate::sim::SimError::from)?,
            );
        }
        let traj = Trajectory::new(out).map_err(crate::sim::SimError::from)?;
        Ok(quantize(&traj))
    }
}
