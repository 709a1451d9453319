//! Trajectory proposal backends.
//!
//! A backend turns a [`ProposalRequest`] (initial keypoint state, retrieved
//! demonstrations and optional feedback on an earlier attempt) into a
//! complete trajectory. [`ScriptedPolicy`] is a seeded stochastic stand-in
//! for a policy model; [`RemotePolicy`] forwards the assembled prompt to an
//! HTTP endpoint.

mod remote;
mod scripted;
pub mod stub;
pub mod template;

use std::fmt::Write as _;

use thiserror::Error;

pub use remote::{RemoteConfig, RemotePolicy};
pub use scripted::{NoiseConfig, ScriptedPolicy, StepAnnotations};

use crate::codec::{encode_initial_state_text, CodecError};
use crate::feedback::FeedbackBlock;
use crate::image::{Image, ImageError};
use crate::sim::SimError;
use crate::types::{SeedId, TaskId};
use crate::{InitialState, Trajectory};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("initial state has no `{0}` keypoint")]
    MissingKeypoint(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend call timed out")]
    Timeout,
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
    #[error("no parseable trajectory after {attempts} attempts: {last_error}")]
    ParseExhausted {
        attempts: u32,
        last_error: CodecError,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// One in-context demonstration as it appears in a prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoBlock {
    pub task: TaskId,
    pub seed: SeedId,
    pub trajectory_text: String,
    pub initial_text: String,
}

#[derive(Debug, Clone)]
pub struct ProposalRequest {
    pub task: TaskId,
    pub seed: SeedId,
    pub task_goal: String,
    pub initial: InitialState,
    pub demos: Vec<DemoBlock>,
    /// Feedback on earlier attempts; the first block is the parent's.
    pub feedback: Vec<FeedbackBlock>,
    /// Demonstrations the parent was proposed with; empty at the root.
    pub parent_demos: Vec<DemoBlock>,
    /// Global index of this proposal within the seed's search.
    pub attempt_index: u64,
    /// Position among the siblings of one expansion.
    pub child_index: usize,
    /// Refinement depth (0 for proposals without a parent).
    pub depth: usize,
}

pub trait PolicyBackend: Send + Sync {
    fn propose(&self, req: &ProposalRequest) -> Result<Trajectory, PolicyError>;
}

pub const OUTPUT_INSTRUCTION: &str = "\
Respond with the complete trajectory, one waypoint per line, in the format
W <idx>: pos=[<x_mm>,<y_mm>,<z_mm>] quat=[<w>,<x>,<y>,<z>] grip=<OPEN|CLOSE>
Positions are integer millimeters in the workspace frame; quaternions are (w,x,y,z) with three decimals.";

/// The prompt text and attached images for `req`.
pub fn build_prompt(req: &ProposalRequest) -> (String, Vec<Image>) {
    let mut text = String::new();
    let _ = writeln!(text, "Task: {}", req.task_goal);
    let _ = writeln!(text, "\nInitial state:");
    text.push_str(&encode_initial_state_text(&req.initial));
    for (i, demo) in req.demos.iter().enumerate() {
        let _ = writeln!(text, "\nDemonstration {}:", i + 1);
        let _ = writeln!(text, "Initial state:");
        text.push_str(&demo.initial_text);
        let _ = writeln!(text, "Trajectory:");
        text.push_str(&demo.trajectory_text);
    }
    let mut images = Vec::new();
    for block in &req.feedback {
        let _ = writeln!(text, "\nFeedback:");
        text.push_str(&block.text);
        images.extend(block.images.iter().cloned());
    }
    let _ = writeln!(text, "\n{OUTPUT_INSTRUCTION}");
    (text, images)
}
