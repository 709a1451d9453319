//! Waypoint-aligned feedback: progress scores mapped back onto the waypoints
//! that produced them, and the prompt blocks for each feedback modality.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode_trajectory_text, encode_waypoint};
use crate::image::Image;
use crate::scorer::{sample_frames, ProgressReport};
use crate::sim::{render, Rollout};
use crate::Trajectory;

pub const KEEP_INSTRUCTION: &str =
    "Preserve the high-scoring waypoints and modify the low-scoring ones.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("report and rollout disagree: {0}")]
    MismatchedProvenance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeedbackMode {
    StepLevel,
    FinalScore,
    TrajectoryOnly,
    ImageOnly,
    ImageAndTrajectory,
}

impl FeedbackMode {
    pub const ALL: [FeedbackMode; 5] = [
        FeedbackMode::StepLevel,
        FeedbackMode::FinalScore,
        FeedbackMode::TrajectoryOnly,
        FeedbackMode::ImageOnly,
        FeedbackMode::ImageAndTrajectory,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FeedbackMode::StepLevel => "STEP_LEVEL",
            FeedbackMode::FinalScore => "FINAL_SCORE",
            FeedbackMode::TrajectoryOnly => "TRAJECTORY_ONLY",
            FeedbackMode::ImageOnly => "IMAGE_ONLY",
            FeedbackMode::ImageAndTrajectory => "IMAGE_AND_TRAJECTORY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub score: f64,
    pub subtask: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedTrajectory {
    pub trajectory: Trajectory,
    pub annotations: BTreeMap<usize, Annotation>,
    pub failed_at: Option<String>,
    pub final_reward: f64,
    /// Rollout frames the scores were sampled from.
    pub sampled_frames: Vec<usize>,
}

/// Attaches each sampled score to the waypoint its frame was executing; when
/// several frames land on one waypoint the latest wins.
pub fn annotate(
    traj: &Trajectory,
    report: &ProgressReport,
    rollout: &Rollout,
) -> Result<AnnotatedTrajectory, FeedbackError> {
    let n = report.frame_indices.len();
    if report.r.len() != n || report.subtask_index.len() != n || report.pct.len() != n {
        return Err(FeedbackError::MismatchedProvenance(
            "report columns have different lengths".into(),
        ));
    }
    if rollout.frame_waypoint.len() != rollout.frames.len()
        || rollout.frame_waypoint.last() != Some(&(traj.len() - 1))
    {
        return Err(FeedbackError::MismatchedProvenance(format!(
            "rollout does not end on waypoint {}",
            traj.len() - 1
        )));
    }
    let mut annotations = BTreeMap::new();
    for (i, &f) in report.frame_indices.iter().enumerate() {
        let wp = *rollout.frame_waypoint.get(f).ok_or_else(|| {
            FeedbackError::MismatchedProvenance(format!(
                "frame {f} beyond rollout of {} frames",
                rollout.len()
            ))
        })?;
        annotations.insert(
            wp,
            Annotation {
                score: report.r[i],
                subtask: report.label_at(i).to_string(),
            },
        );
    }
    Ok(AnnotatedTrajectory {
        trajectory: traj.clone(),
        annotations,
        failed_at: report.failed_label().map(str::to_string),
        final_reward: report.reward,
        sampled_frames: report.frame_indices.clone(),
    })
}

/// A rendered feedback section of a proposal prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackBlock {
    pub mode: FeedbackMode,
    pub text: String,
    pub images: Vec<Image>,
}

/// Fixed-point with ties rounded away from zero (the default float
/// formatter rounds ties to even).
pub fn fixed(x: f64, decimals: i32) -> String {
    let scale = 10f64.powi(decimals);
    format!("{:.*}", decimals as usize, (x * scale).round() / scale)
}

fn step_level_text(a: &AnnotatedTrajectory) -> String {
    let mut out = String::from("Previous attempt with per-waypoint progress:\n");
    for (i, wp) in a.trajectory.iter().enumerate() {
        out.push_str(&encode_waypoint(i, wp));
        if let Some(ann) = a.annotations.get(&i) {
            let _ = write!(out, " score={} subtask={}", fixed(ann.score, 2), ann.subtask);
        }
        out.push('\n');
    }
    if let Some(label) = &a.failed_at {
        let _ = writeln!(out, "failed_at={label}");
    }
    out.push_str(KEEP_INSTRUCTION);
    out.push('\n');
    out
}

fn frame_images(a: &AnnotatedTrajectory, rollout: &Rollout) -> Vec<Image> {
    let frames = &a.sampled_frames;
    if frames.is_empty() {
        return Vec::new();
    }
    let keep = sample_frames(frames.len(), frames.len().min(a.trajectory.len()))
        .expect("non-empty frame list");
    keep.into_iter()
        .filter_map(|i| rollout.frames.get(frames[i]).map(render))
        .collect()
}

pub fn render_feedback(
    annotated: &AnnotatedTrajectory,
    rollout: &Rollout,
    mode: FeedbackMode,
) -> FeedbackBlock {
    let trajectory_text = || {
        format!(
            "Previous attempt:\n{}",
            encode_trajectory_text(&annotated.trajectory)
        )
    };
    let (text, images) = match mode {
        FeedbackMode::StepLevel => (step_level_text(annotated), Vec::new()),
        FeedbackMode::FinalScore => (
            format!(
                "{}final_score={}\n",
                trajectory_text(),
                fixed(annotated.final_reward, 3)
            ),
            Vec::new(),
        ),
        FeedbackMode::TrajectoryOnly => (trajectory_text(), Vec::new()),
        FeedbackMode::ImageOnly => (
            "Frames from the previous attempt are attached.\n".to_string(),
            frame_images(annotated, rollout),
        ),
        FeedbackMode::ImageAndTrajectory => (
            format!(
                "{}Frames from the previous attempt are attached.\n",
                trajectory_text()
            ),
            frame_images(annotated, rollout),
        ),
    };
    FeedbackBlock { mode, text, images }
}
