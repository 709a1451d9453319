//! Noise-free keypoint-driven solutions for each task.

use super::PolicyError;
use crate::codec::{encode_trajectory_text, parse_trajectory_text};
use crate::sim::{SimError, Simulator, TaskKind, TaskSpec};
use crate::types::{Gripper, SeedId, TaskId};
use crate::{EndEffectorState, InitialState, Quaternion, Trajectory, Vec3};

pub const APPROACH_HEIGHT: f64 = 0.12;
pub const CARRY_HEIGHT: f64 = 0.15;
pub const BOWL_RELEASE_HEIGHT: f64 = 0.09;
pub const PULL_STEP: f64 = 0.08;

fn keypoint(initial: &InitialState, label: &str) -> Result<Vec3, PolicyError> {
    initial
        .keypoint(label)
        .ok_or_else(|| PolicyError::MissingKeypoint(label.to_string()))
}

fn at_height(p: Vec3, z: f64) -> Vec3 {
    Vec3::new(p.x, p.y, z)
}

/// The template trajectory for `task` built from the keypoints of `initial`.
pub fn template(task: &TaskSpec, initial: &InitialState) -> Result<Trajectory, PolicyError> {
    use Gripper::{Close, Open};
    let (q, poses): (Quaternion, Vec<(Vec3, Gripper)>) = match task.kind {
        TaskKind::PickPlace => {
            let block = keypoint(initial, "block")?;
            let bowl = keypoint(initial, "bowl")?;
            let release = at_height(bowl, BOWL_RELEASE_HEIGHT);
            (
                Quaternion::identity(),
                vec![
                    (at_height(block, APPROACH_HEIGHT), Open),
                    (block, Open),
                    (block, Close),
                    (at_height(block, CARRY_HEIGHT), Close),
                    (at_height(bowl, CARRY_HEIGHT), Close),
                    (release, Close),
                    (release, Open),
                    (at_height(bowl, CARRY_HEIGHT), Open),
                ],
            )
        }
        TaskKind::DrawerOpen => {
            let handle = keypoint(initial, "handle")?;
            let ahead = keypoint(initial, "drawer_axis")?;
            let d = Vec3::new(ahead.x - handle.x, ahead.y - handle.y, 0.0);
            let axis = if d.norm() > 1e-9 { d * (1.0 / d.norm()) } else { Vec3::new(0.0, -1.0, 0.0) };
            let above = Vec3::new(0.0, 0.0, PULL_STEP);
            let open = handle + axis * (2.0 * PULL_STEP);
            (
                Quaternion::from_yaw(axis.y.atan2(axis.x)),
                vec![
                    (handle + above, Open),
                    (handle, Open),
                    (handle, Close),
                    (handle + axis * PULL_STEP, Close),
                    (open, Close),
                    (open, Open),
                    (open + above, Open),
                ],
            )
        }
        TaskKind::HandOver => {
            let pen = keypoint(initial, "pen")?;
            let target = keypoint(initial, "target")?;
            (
                Quaternion::identity(),
                vec![
                    (at_height(pen, APPROACH_HEIGHT), Open),
                    (pen, Open),
                    (pen, Close),
                    (at_height(pen, CARRY_HEIGHT), Close),
                    (target, Close),
                ],
            )
        }
    };
    let waypoints = poses
        .into_iter()
        .map(|(p, g)| EndEffectorState::new(p, q, g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(SimError::from)?;
    Ok(Trajectory::new(waypoints).map_err(SimError::from)?)
}

/// Snaps a trajectory to the text encoding's resolution.
pub fn quantize(traj: &Trajectory) -> Trajectory {
    parse_trajectory_text(&encode_trajectory_text(traj)).expect("encoded text always parses")
}

/// The quantized template on the noise-free keypoints of `(task, seed)`.
pub fn golden(task: &TaskId, seed: SeedId) -> Result<Trajectory, PolicyError> {
    let spec = TaskSpec::lookup(task)?;
    let (_, _, initial) = Simulator::default().reset(task, seed)?;
    Ok(quantize(&template(&spec, &initial)?))
}
