//! Task registry: spawn ranges, success predicates and canonical subtasks for
//! the three tabletop tasks.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::types::TaskId;

/// Axis-aligned spawn rectangle in the table plane (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnRect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl SpawnRect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x.0..=self.x.1).contains(&x) && (self.y.0..=self.y.1).contains(&y)
    }
}

pub const PICK_PLACE: &str = "pick_place";
pub const DRAWER_OPEN: &str = "drawer_open";
pub const HAND_OVER: &str = "hand_over";

pub const BLOCK_SPAWN: SpawnRect = SpawnRect {
    x: (-0.25, -0.05),
    y: (-0.20, 0.20),
};
pub const BOWL_SPAWN: SpawnRect = SpawnRect {
    x: (0.06, 0.25),
    y: (-0.20, 0.20),
};
pub const BOWL_RADIUS_RANGE: (f64, f64) = (0.05, 0.07);
pub const BOWL_RIM_HEIGHT: f64 = 0.05;
pub const BOWL_FLOOR: f64 = 0.005;
pub const BLOCK_HALF_SIZE: f64 = 0.02;

pub const HANDLE_SPAWN: SpawnRect = SpawnRect {
    x: (-0.15, 0.15),
    y: (0.12, 0.22),
};
pub const HANDLE_HEIGHT: f64 = 0.06;
pub const HANDLE_HALF_SIZE: f64 = 0.015;
/// Pull direction yaw range; the drawer opens roughly toward -y.
pub const DRAWER_YAW_RANGE: (f64, f64) = (-FRAC_PI_2 - 0.6, -FRAC_PI_2 + 0.6);
pub const DRAWER_MAX_EXTENSION: f64 = 0.20;
pub const DRAWER_SUCCESS_EXTENSION: f64 = 0.12;

pub const PEN_SPAWN: SpawnRect = SpawnRect {
    x: (-0.20, 0.20),
    y: (-0.25, -0.08),
};
pub const TARGET_SPAWN: SpawnRect = SpawnRect {
    x: (-0.15, 0.15),
    y: (0.08, 0.25),
};
pub const TARGET_HEIGHT_RANGE: (f64, f64) = (0.12, 0.20);
pub const HANDOVER_TOLERANCE: f64 = 0.03;
/// Height gain above the resting pose that counts as lifted.
pub const LIFT_HEIGHT: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    PickPlace,
    DrawerOpen,
    HandOver,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub kind: TaskKind,
    pub goal_text: String,
    /// Ordered subtask labels; single tokens so they embed in feedback lines.
    pub canonical_subtasks: Vec<String>,
}

impl TaskSpec {
    pub fn lookup(task: &TaskId) -> Result<Self, SimError> {
        let kind = match task.as_str() {
            PICK_PLACE => TaskKind::PickPlace,
            DRAWER_OPEN => TaskKind::DrawerOpen,
            HAND_OVER => TaskKind::HandOver,
            _ => return Err(SimError::UnknownTask(task.clone())),
        };
        Ok(Self::of_kind(kind))
    }

    pub fn of_kind(kind: TaskKind) -> Self {
        let (id, goal, subtasks): (&str, &str, &[&str]) = match kind {
            TaskKind::PickPlace => (
                PICK_PLACE,
                "Pick up the red block and place it inside the blue bowl.",
                &["reach", "grasp", "transport", "release"],
            ),
            TaskKind::DrawerOpen => (
                DRAWER_OPEN,
                "Grasp the drawer handle and pull the drawer open.",
                &["reach", "grasp", "pull"],
            ),
            TaskKind::HandOver => (
                HAND_OVER,
                "Pick up the pen and hold it at the hand-over point.",
                &["reach", "grasp", "lift", "handover"],
            ),
        };
        Self {
            id: TaskId::new(id),
            kind,
            goal_text: goal.to_string(),
            canonical_subtasks: subtasks.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn all() -> Vec<Self> {
        [TaskKind::PickPlace, TaskKind::DrawerOpen, TaskKind::HandOver]
            .into_iter()
            .map(Self::of_kind)
            .collect()
    }

    /// Label of the object the task manipulates.
    pub fn manipulated_object(&self) -> &'static str {
        match self.kind {
            TaskKind::PickPlace => "block",
            TaskKind::DrawerOpen => "handle",
            TaskKind::HandOver => "pen",
        }
    }

    /// Keypoint labels the initial state carries for this task.
    pub fn keypoint_labels(&self) -> &'static [&'static str] {
        match self.kind {
            TaskKind::PickPlace => &["block", "bowl"],
            TaskKind::DrawerOpen => &["handle", "drawer_axis"],
            TaskKind::HandOver => &["pen", "target"],
        }
    }
}
