//! Deterministic kinematic tabletop simulator.
//!
//! No dynamics and no contacts other than the table plane and the workspace
//! box. The end effector moves along straight segments in fixed 1 cm steps and
//! every step produces one frame, so a frame maps to exactly one waypoint.

mod render;
mod task;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use render::{pixel_of, render, CAMERA_CLEARANCE, IMAGE_SIZE, METERS_PER_PIXEL};
pub use task::*;

use crate::image::Image;
use crate::rng;
use crate::types::{Gripper, SeedId, TaskId, TypeError};
use crate::{EndEffectorState, InitialState, Trajectory, Vec3};

/// End-effector interpolation step (m).
pub const STEP_SIZE: f64 = 0.01;
/// A closing gripper attaches the nearest graspable object within this distance.
pub const GRASP_RADIUS: f64 = 0.02;
pub const WORKSPACE_MIN: [f64; 3] = [-0.32, -0.32, 0.0];
pub const WORKSPACE_MAX: [f64; 3] = [0.32, 0.32, 0.40];
pub const HOME: [f64; 3] = [0.0, 0.0, 0.35];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown task `{0}`")]
    UnknownTask(TaskId),
    #[error(transparent)]
    Invalid(#[from] TypeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Block,
    Container,
    Handle,
    Lid,
}

impl ObjectKind {
    pub fn graspable(&self) -> bool {
        !matches!(self, ObjectKind::Container)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub kind: ObjectKind,
    pub position: Vec3,
    pub held: bool,
    /// Half edge for blocks/handles, radius for containers and lids.
    pub size: f64,
    /// Full height (rim height for containers).
    pub height: f64,
}

/// Task-specific scene geometry that is not an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    PickPlace,
    Drawer {
        closed_handle: Vec3,
        axis: Vec3,
        max_extension: f64,
    },
    HandOver {
        target: Vec3,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub label: String,
    pub offset: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub task: TaskId,
    pub objects: BTreeMap<String, SimObject>,
    pub robot: EndEffectorState,
    pub grasp: Option<Grasp>,
    pub drawer_extension: f64,
    pub step_count: u64,
    pub layout: Layout,
}

impl SimState {
    pub fn object(&self, label: &str) -> Option<&SimObject> {
        self.objects.get(label)
    }

    pub fn ee(&self) -> Vec3 {
        self.robot.position()
    }

    pub fn is_held(&self, label: &str) -> bool {
        self.grasp.as_ref().is_some_and(|g| g.label == label)
    }

    /// Resting height for a released block whose center is at `(x, y)`.
    fn rest_height(&self, x: f64, y: f64, half: f64) -> f64 {
        let probe = Vec3::new(x, y, 0.0);
        let inside = self.objects.values().any(|o| {
            o.kind == ObjectKind::Container && o.position.distance_xy(&probe) <= o.size
        });
        if inside {
            BOWL_FLOOR + half
        } else {
            half
        }
    }

    fn move_ee(&mut self, target: Vec3) {
        let delta = target - self.ee();
        self.robot = self
            .robot
            .with_position(target)
            .expect("clamped positions are finite");
        let Some(grasp) = self.grasp.clone() else {
            return;
        };
        let obj = self.objects.get_mut(&grasp.label).expect("held object exists");
        match (obj.kind, &self.layout) {
            (
                ObjectKind::Handle,
                Layout::Drawer {
                    closed_handle,
                    axis,
                    max_extension,
                },
            ) => {
                let ext = (self.drawer_extension + delta.dot(axis)).clamp(0.0, *max_extension);
                self.drawer_extension = ext;
                obj.position = *closed_handle + *axis * ext;
            }
            _ => obj.position = target + grasp.offset,
        }
    }

    fn apply_gripper(&mut self, command: Gripper) {
        let previous = self.robot.gripper();
        self.robot = self.robot.with_gripper(command);
        match (previous, command) {
            (Gripper::Open, Gripper::Close) if self.grasp.is_none() => {
                let ee = self.ee();
                let nearest = self
                    .objects
                    .iter()
                    .filter(|(_, o)| o.kind.graspable())
                    .map(|(label, o)| (label, o.position.distance(&ee)))
                    .filter(|(_, d)| *d <= GRASP_RADIUS)
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((label, _)) = nearest {
                    let label = label.clone();
                    let obj = self.objects.get_mut(&label).unwrap();
                    obj.held = true;
                    self.grasp = Some(Grasp {
                        offset: obj.position - ee,
                        label,
                    });
                }
            }
            (_, Gripper::Open) => {
                if let Some(grasp) = self.grasp.take() {
                    let (kind, pos, half) = {
                        let o = &self.objects[&grasp.label];
                        (o.kind, o.position, o.height / 2.0)
                    };
                    let rest = match kind {
                        ObjectKind::Block | ObjectKind::Lid => {
                            Some(self.rest_height(pos.x, pos.y, half))
                        }
                        _ => None,
                    };
                    let obj = self.objects.get_mut(&grasp.label).unwrap();
                    obj.held = false;
                    if let Some(z) = rest {
                        obj.position = Vec3::new(pos.x, pos.y, z);
                    }
                }
            }
            _ => {}
        }
    }
}

/// Executed trajectory: one frame per interpolation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub frames: Vec<SimState>,
    /// Waypoint index being executed at each frame; non-decreasing.
    pub frame_waypoint: Vec<usize>,
    pub final_state: SimState,
    pub verified_success: bool,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Line-oriented log: `step waypoint ee=[..] grip=.. ext=.. label=[..][*] ...`
    /// with positions in meters; `*` marks a held object.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for (state, wp) in self.frames.iter().zip(&self.frame_waypoint) {
            let p = state.ee();
            let _ = write!(
                out,
                "{} {} ee=[{:.4},{:.4},{:.4}] grip={} ext={:.4}",
                state.step_count,
                wp,
                p.x,
                p.y,
                p.z,
                state.robot.gripper(),
                state.drawer_extension
            );
            for (label, o) in &state.objects {
                let _ = write!(
                    out,
                    " {label}=[{:.4},{:.4},{:.4}]{}",
                    o.position.x,
                    o.position.y,
                    o.position.z,
                    if o.held { "*" } else { "" }
                );
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimConfig {
    /// Per-axis standard deviation (m) of the keypoint detection noise.
    pub keypoint_noise: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Simulator {
    config: SimConfig,
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    range.0 + (range.1 - range.0) * rng.random::<f64>()
}

fn clamp_workspace(p: Vec3) -> Vec3 {
    Vec3::new(
        p.x.clamp(WORKSPACE_MIN[0], WORKSPACE_MAX[0]),
        p.y.clamp(WORKSPACE_MIN[1], WORKSPACE_MAX[1]),
        p.z.clamp(WORKSPACE_MIN[2], WORKSPACE_MAX[2]),
    )
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Scene for `(task, seed)` before any keypoint noise.
    pub fn spawn(&self, task: &TaskId, seed: SeedId) -> Result<SimState, SimError> {
        let spec = TaskSpec::lookup(task)?;
        let mut r = rng::stream(&[rng::hash_str(task.as_str()), seed.0, rng::PURPOSE_RESET]);
        let mut objects = BTreeMap::new();
        let layout = match spec.kind {
            TaskKind::PickPlace => {
                let block = Vec3::new(
                    uniform(&mut r, BLOCK_SPAWN.x),
                    uniform(&mut r, BLOCK_SPAWN.y),
                    BLOCK_HALF_SIZE,
                );
                let bowl = Vec3::new(uniform(&mut r, BOWL_SPAWN.x), uniform(&mut r, BOWL_SPAWN.y), 0.0);
                let radius = uniform(&mut r, BOWL_RADIUS_RANGE);
                objects.insert("block".into(), block_object(block));
                objects.insert(
                    "bowl".into(),
                    SimObject {
                        kind: ObjectKind::Container,
                        position: bowl,
                        held: false,
                        size: radius,
                        height: BOWL_RIM_HEIGHT,
                    },
                );
                Layout::PickPlace
            }
            TaskKind::DrawerOpen => {
                let handle = Vec3::new(
                    uniform(&mut r, HANDLE_SPAWN.x),
                    uniform(&mut r, HANDLE_SPAWN.y),
                    HANDLE_HEIGHT,
                );
                let yaw = uniform(&mut r, DRAWER_YAW_RANGE);
                objects.insert(
                    "handle".into(),
                    SimObject {
                        kind: ObjectKind::Handle,
                        position: handle,
                        held: false,
                        size: HANDLE_HALF_SIZE,
                        height: 0.0,
                    },
                );
                Layout::Drawer {
                    closed_handle: handle,
                    axis: Vec3::new(yaw.cos(), yaw.sin(), 0.0),
                    max_extension: DRAWER_MAX_EXTENSION,
                }
            }
            TaskKind::HandOver => {
                let pen = Vec3::new(
                    uniform(&mut r, PEN_SPAWN.x),
                    uniform(&mut r, PEN_SPAWN.y),
                    BLOCK_HALF_SIZE,
                );
                let target = Vec3::new(
                    uniform(&mut r, TARGET_SPAWN.x),
                    uniform(&mut r, TARGET_SPAWN.y),
                    uniform(&mut r, TARGET_HEIGHT_RANGE),
                );
                objects.insert("pen".into(), block_object(pen));
                Layout::HandOver { target }
            }
        };
        let robot = EndEffectorState::at(Vec3::new(HOME[0], HOME[1], HOME[2]), Gripper::Open)?;
        Ok(SimState {
            task: task.clone(),
            objects,
            robot,
            grasp: None,
            drawer_extension: 0.0,
            step_count: 0,
            layout,
        })
    }

    /// Ground-truth keypoints of a state, before detection noise.
    pub fn keypoints(state: &SimState) -> BTreeMap<String, Vec3> {
        let mut kp = BTreeMap::new();
        for (label, o) in &state.objects {
            kp.insert(label.clone(), o.position);
        }
        match &state.layout {
            Layout::Drawer {
                closed_handle,
                axis,
                ..
            } => {
                kp.insert("drawer_axis".into(), *closed_handle + *axis * 0.1);
            }
            Layout::HandOver { target } => {
                kp.insert("target".into(), *target);
            }
            Layout::PickPlace => {}
        }
        kp
    }

    /// Seeded reset: scene, rendered overhead observation and the (optionally
    /// noisy) keypoint initial state.
    pub fn reset(
        &self,
        task: &TaskId,
        seed: SeedId,
    ) -> Result<(SimState, Image, InitialState), SimError> {
        let state = self.spawn(task, seed)?;
        let image = render(&state);
        let mut keypoints = Self::keypoints(&state);
        if self.config.keypoint_noise > 0.0 {
            let normal = Normal::new(0.0, self.config.keypoint_noise)
                .expect("noise std is finite and positive");
            let mut r = rng::stream(&[
                rng::hash_str(task.as_str()),
                seed.0,
                rng::PURPOSE_KEYPOINT_NOISE,
            ]);
            for p in keypoints.values_mut() {
                *p = *p + Vec3::new(normal.sample(&mut r), normal.sample(&mut r), normal.sample(&mut r));
            }
        }
        let initial = InitialState::new(keypoints, state.robot)?;
        Ok((state, image, initial))
    }

    /// Executes `traj` from `state`. Infeasible targets are clamped into the
    /// workspace; nothing is rejected.
    pub fn execute(&self, state: &SimState, traj: &Trajectory) -> Rollout {
        let mut s = state.clone();
        let mut frames = Vec::new();
        let mut frame_waypoint = Vec::new();
        for (i, wp) in traj.iter().enumerate() {
            let target = clamp_workspace(wp.position());
            let start = s.ee();
            let dist = start.distance(&target);
            let steps = ((dist / STEP_SIZE) - 1e-9).ceil().max(1.0) as usize;
            for k in 1..=steps {
                let p = if k == steps {
                    target
                } else {
                    start.lerp(&target, k as f64 / steps as f64)
                };
                s.move_ee(p);
                if k == steps {
                    s.robot = EndEffectorState::new(target, wp.orientation(), s.robot.gripper())
                        .expect("waypoint orientation is unit");
                    s.apply_gripper(wp.gripper());
                }
                s.step_count += 1;
                frames.push(s.clone());
                frame_waypoint.push(i);
            }
        }
        let verified_success = verify_state(&s);
        Rollout {
            frames,
            frame_waypoint,
            final_state: s,
            verified_success,
        }
    }
}

fn block_object(position: Vec3) -> SimObject {
    SimObject {
        kind: ObjectKind::Block,
        position,
        held: false,
        size: BLOCK_HALF_SIZE,
        height: 2.0 * BLOCK_HALF_SIZE,
    }
}

/// Ground-truth success predicate for `task` evaluated on `state`.
pub fn verify(task: &TaskId, state: &SimState) -> Result<bool, SimError> {
    let spec = TaskSpec::lookup(task)?;
    Ok(match spec.kind {
        TaskKind::PickPlace => {
            match (state.object("block"), state.object("bowl")) {
                (Some(block), Some(bowl)) => {
                    !block.held
                        && block.position.distance_xy(&bowl.position) <= bowl.size
                        && block.position.z < bowl.height
                }
                _ => false,
            }
        }
        TaskKind::DrawerOpen => state.drawer_extension >= DRAWER_SUCCESS_EXTENSION,
        TaskKind::HandOver => match (state.object("pen"), &state.layout) {
            (Some(pen), Layout::HandOver { target }) => {
                pen.position.distance(target) <= HANDOVER_TOLERANCE
            }
            _ => false,
        },
    })
}

fn verify_state(state: &SimState) -> bool {
    verify(&state.task, state).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pick_place(seed: u64) -> SimState {
        Simulator::default()
            .spawn(&TaskId::new(PICK_PLACE), SeedId(seed))
            .unwrap()
    }

    fn traj(points: &[([f64; 3], Gripper)]) -> Trajectory {
        Trajectory::new(
            points
                .iter()
                .map(|(p, g)| EndEffectorState::at(Vec3::new(p[0], p[1], p[2]), *g).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn unknown_task() {
        let err = Simulator::default().reset(&TaskId::new("juggle"), SeedId(0));
        assert!(matches!(err, Err(SimError::UnknownTask(_))));
    }

    #[test]
    fn interpolation_frames_follow_step_size() {
        let s = pick_place(3);
        let home = s.ee();
        let t = traj(&[
            ([home.x, home.y, home.z], Gripper::Open),
            ([home.x + 0.05, home.y, home.z], Gripper::Open),
        ]);
        let r = Simulator::default().execute(&s, &t);
        assert_eq!(r.frame_waypoint, vec![0, 1, 1, 1, 1, 1]);
        assert_eq!(r.frames.len(), 6);
        assert_eq!(*r.frame_waypoint.last().unwrap(), 1);
    }

    #[test]
    fn grasp_radius_threshold() {
        for (offset, expect) in [(0.019, true), (0.021, false)] {
            let s = pick_place(5);
            let b = s.object("block").unwrap().position;
            let t = traj(&[
                ([b.x + offset, b.y, b.z], Gripper::Open),
                ([b.x + offset, b.y, b.z], Gripper::Close),
            ]);
            let r = Simulator::default().execute(&s, &t);
            assert_eq!(r.final_state.is_held("block"), expect, "offset {offset}");
            assert_eq!(r.final_state.object("block").unwrap().held, expect);
        }
    }

    #[test]
    fn closed_gripper_does_not_grasp() {
        let s = pick_place(5);
        let b = s.object("block").unwrap().position;
        let t = traj(&[
            ([b.x, b.y, 0.2], Gripper::Close),
            ([b.x, b.y, b.z], Gripper::Close),
        ]);
        let r = Simulator::default().execute(&s, &t);
        assert!(r.final_state.grasp.is_none());
    }

    #[test]
    fn released_block_falls_vertically_to_table() {
        let s = pick_place(8);
        let b = s.object("block").unwrap().position;
        let t = traj(&[
            ([b.x, b.y, b.z], Gripper::Open),
            ([b.x, b.y, b.z], Gripper::Close),
            ([b.x, b.y, 0.2], Gripper::Close),
            ([b.x, b.y, 0.2], Gripper::Open),
        ]);
        let r = Simulator::default().execute(&s, &t);
        let end = r.final_state.object("block").unwrap().position;
        assert!((end.z - BLOCK_HALF_SIZE).abs() < 1e-12);
        assert!((end.x - b.x).abs() < 1e-12 && (end.y - b.y).abs() < 1e-12);
        assert!(!r.verified_success);
    }

    #[test]
    fn block_dropped_over_bowl_lands_inside() {
        let s = pick_place(11);
        let b = s.object("block").unwrap().position;
        let c = s.object("bowl").unwrap().position;
        let t = traj(&[
            ([b.x, b.y, 0.12], Gripper::Open),
            ([b.x, b.y, b.z], Gripper::Open),
            ([b.x, b.y, b.z], Gripper::Close),
            ([b.x, b.y, 0.15], Gripper::Close),
            ([c.x, c.y, 0.15], Gripper::Close),
            ([c.x, c.y, 0.09], Gripper::Close),
            ([c.x, c.y, 0.09], Gripper::Open),
        ]);
        let r = Simulator::default().execute(&s, &t);
        let end = r.final_state.object("block").unwrap().position;
        assert!((end.z - (BOWL_FLOOR + BLOCK_HALF_SIZE)).abs() < 1e-12);
        assert!(r.verified_success);
    }

    #[test]
    fn motion_is_clamped_to_workspace() {
        let s = pick_place(1);
        let t = traj(&[([5.0, -5.0, -1.0], Gripper::Open)]);
        let r = Simulator::default().execute(&s, &t);
        let p = r.final_state.ee();
        assert_eq!([p.x, p.y, p.z], [WORKSPACE_MAX[0], WORKSPACE_MIN[1], WORKSPACE_MIN[2]]);
    }

    #[test]
    fn verify_boundaries() {
        let drawer = TaskId::new(DRAWER_OPEN);
        let mut s = Simulator::default().spawn(&drawer, SeedId(0)).unwrap();
        s.drawer_extension = 0.119;
        assert!(!verify(&drawer, &s).unwrap());
        s.drawer_extension = 0.120;
        assert!(verify(&drawer, &s).unwrap());

        let pp = TaskId::new(PICK_PLACE);
        let mut s = pick_place(2);
        let bowl = s.object("bowl").unwrap().position;
        s.objects.get_mut("block").unwrap().position =
            Vec3::new(bowl.x, bowl.y, BLOCK_HALF_SIZE);
        assert!(verify(&pp, &s).unwrap());
        assert!(matches!(
            verify(&TaskId::new("nope"), &s),
            Err(SimError::UnknownTask(_))
        ));
    }

    #[test]
    fn drawer_follows_pull_along_axis_only() {
        let task = TaskId::new(DRAWER_OPEN);
        let s = Simulator::default().spawn(&task, SeedId(4)).unwrap();
        let Layout::Drawer { axis, .. } = s.layout.clone() else {
            unreachable!()
        };
        let h = s.object("handle").unwrap().position;
        let side = Vec3::new(-axis.y, axis.x, 0.0);
        let pulled = h + axis * 0.15 + side * 0.05;
        let t = traj(&[
            ([h.x, h.y, h.z], Gripper::Open),
            ([h.x, h.y, h.z], Gripper::Close),
            ([pulled.x, pulled.y, pulled.z], Gripper::Close),
        ]);
        let r = Simulator::default().execute(&s, &t);
        assert!((r.final_state.drawer_extension - 0.15).abs() < 1e-9);
        assert!(r.verified_success);
    }
}
