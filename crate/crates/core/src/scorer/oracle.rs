//! Ground-truth completion estimates computed from simulator state.

use super::{ScorerBackend, ScorerError};
use crate::sim::{
    verify, Layout, Rollout, SimState, TaskKind, TaskSpec, GRASP_RADIUS, HANDOVER_TOLERANCE,
    DRAWER_SUCCESS_EXTENSION, LIFT_HEIGHT,
};

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

/// `100 * (1 - d/d0)`, rounded and capped below completion.
fn reduction_pct(d: f64, d0: f64) -> i32 {
    if d0 <= 1e-12 {
        return 0;
    }
    ((100.0 * (1.0 - d / d0)).round() as i32).clamp(0, 99)
}

pub fn oracle_completion_pct(
    label: &str,
    start: &SimState,
    current: &SimState,
    task: &TaskSpec,
) -> Result<i32, ScorerError> {
    if !task.canonical_subtasks.iter().any(|s| s == label) {
        return Err(ScorerError::UnknownSubtask(label.to_string()));
    }
    let name = task.manipulated_object();
    let obj_now = current
        .object(name)
        .ok_or_else(|| ScorerError::BackendFailure(format!("scene has no `{name}`")))?;
    let obj_start = start
        .object(name)
        .ok_or_else(|| ScorerError::BackendFailure(format!("scene has no `{name}`")))?;
    let held = current.is_held(name);
    let pct = match (task.kind, label) {
        (_, "reach") => {
            let d = current.ee().distance(&obj_now.position);
            if held || d <= GRASP_RADIUS {
                100
            } else {
                reduction_pct(d, start.ee().distance(&obj_start.position))
            }
        }
        (_, "grasp") => {
            if held {
                100
            } else {
                0
            }
        }
        (TaskKind::PickPlace, "transport") => {
            let bowl = current
                .object("bowl")
                .ok_or_else(|| ScorerError::BackendFailure("scene has no bowl".into()))?;
            let d = obj_now.position.distance_xy(&bowl.position);
            if d <= bowl.size && (held || verify(&task.id, current)?) {
                100
            } else if held {
                reduction_pct(d, obj_start.position.distance_xy(&bowl.position))
            } else {
                0
            }
        }
        (TaskKind::PickPlace, "release") => {
            if verify(&task.id, current)? {
                100
            } else {
                0
            }
        }
        (TaskKind::DrawerOpen, "pull") => {
            ((100.0 * current.drawer_extension / DRAWER_SUCCESS_EXTENSION).round() as i32)
                .clamp(0, 100)
        }
        (TaskKind::HandOver, "lift") => {
            if held {
                let gain = obj_now.position.z - obj_start.position.z;
                ((100.0 * gain / LIFT_HEIGHT).round() as i32).clamp(0, 100)
            } else {
                0
            }
        }
        (TaskKind::HandOver, "handover") => {
            let Layout::HandOver { target } = &current.layout else {
                return Err(ScorerError::BackendFailure("scene has no hand-over target".into()));
            };
            let d = obj_now.position.distance(target);
            if d <= HANDOVER_TOLERANCE {
                100
            } else {
                reduction_pct(d, obj_start.position.distance(target))
            }
        }
        _ => return Err(ScorerError::UnknownSubtask(label.to_string())),
    };
    Ok(pct)
}

impl ScorerBackend for OracleScorer {
    /// The canonical subtask list of the demo's task; the goal text is not
    /// needed since the task is known from the scene.
    fn decompose(&self, _goal_text: &str, demo: &Rollout) -> Result<Vec<String>, ScorerError> {
        Ok(TaskSpec::lookup(&demo.final_state.task)?.canonical_subtasks)
    }

    fn completion_pct(
        &self,
        label: &str,
        start: &SimState,
        current: &SimState,
    ) -> Result<i32, ScorerError> {
        let spec = TaskSpec::lookup(&current.task)?;
        oracle_completion_pct(label, start, current, &spec)
    }
}
