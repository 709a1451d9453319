//! Trajectory data model: end-effector waypoints, trajectories and the
//! keypoint-based initial state a policy is conditioned on.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Quaternion, Vec3};
use crate::scalar::Real;

/// Tolerance on `|q| - 1` for a stored orientation.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("position has a non-finite component")]
    NonFinitePosition,
    #[error("quaternion norm {0} is not within 1e-6 of 1")]
    NonUnitQuaternion(f64),
    #[error("trajectory must contain at least one waypoint")]
    EmptyTrajectory,
    #[error("initial state must contain at least one keypoint")]
    NoKeypoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Gripper {
    Open,
    Close,
}

impl Gripper {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gripper::Open => "OPEN",
            Gripper::Close => "CLOSE",
        }
    }
}

impl fmt::Display for Gripper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One waypoint: position (m, workspace frame), orientation and gripper command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorState<T> {
    position: Vec3<T>,
    orientation: Quaternion<T>,
    gripper: Gripper,
}

impl<T: Real> EndEffectorState<T> {
    pub fn new(
        position: Vec3<T>,
        orientation: Quaternion<T>,
        gripper: Gripper,
    ) -> Result<Self, TypeError> {
        if !position.is_finite() {
            return Err(TypeError::NonFinitePosition);
        }
        let norm = orientation.norm().as_f64();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(TypeError::NonUnitQuaternion(norm));
        }
        Ok(Self {
            position,
            orientation,
            gripper,
        })
    }

    /// Identity orientation at `position`.
    pub fn at(position: Vec3<T>, gripper: Gripper) -> Result<Self, TypeError> {
        Self::new(position, Quaternion::identity(), gripper)
    }

    pub fn position(&self) -> Vec3<T> {
        self.position
    }

    pub fn orientation(&self) -> Quaternion<T> {
        self.orientation
    }

    pub fn gripper(&self) -> Gripper {
        self.gripper
    }

    pub fn with_position(&self, position: Vec3<T>) -> Result<Self, TypeError> {
        Self::new(position, self.orientation, self.gripper)
    }

    pub fn with_gripper(&self, gripper: Gripper) -> Self {
        Self { gripper, ..*self }
    }

    pub fn cast<U: Real>(&self) -> EndEffectorState<U> {
        EndEffectorState {
            position: self.position.cast(),
            orientation: self.orientation.cast::<U>().normalized(),
            gripper: self.gripper,
        }
    }
}

/// Non-empty ordered waypoint sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    waypoints: Vec<EndEffectorState<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(waypoints: Vec<EndEffectorState<T>>) -> Result<Self, TypeError> {
        if waypoints.is_empty() {
            return Err(TypeError::EmptyTrajectory);
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[EndEffectorState<T>] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EndEffectorState<T>> {
        self.waypoints.iter()
    }

    pub fn into_waypoints(self) -> Vec<EndEffectorState<T>> {
        self.waypoints
    }
}

impl<'a, T> IntoIterator for &'a Trajectory<T> {
    type Item = &'a EndEffectorState<T>;
    type IntoIter = std::slice::Iter<'a, EndEffectorState<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.waypoints.iter()
    }
}

/// Object keypoints plus the robot's starting pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState<T> {
    keypoints: BTreeMap<String, Vec3<T>>,
    robot: EndEffectorState<T>,
}

impl<T: Real> InitialState<T> {
    pub fn new(
        keypoints: BTreeMap<String, Vec3<T>>,
        robot: EndEffectorState<T>,
    ) -> Result<Self, TypeError> {
        if keypoints.is_empty() {
            return Err(TypeError::NoKeypoints);
        }
        if keypoints.values().any(|p| !p.is_finite()) {
            return Err(TypeError::NonFinitePosition);
        }
        Ok(Self { keypoints, robot })
    }

    pub fn keypoints(&self) -> &BTreeMap<String, Vec3<T>> {
        &self.keypoints
    }

    pub fn keypoint(&self, label: &str) -> Option<Vec3<T>> {
        self.keypoints.get(label).copied()
    }

    pub fn robot(&self) -> &EndEffectorState<T> {
        &self.robot
    }

    /// Root-mean-square displacement over the keypoint labels both states share.
    pub fn keypoint_rms_distance(&self, other: &Self) -> Option<T> {
        let mut sum = T::zero();
        let mut n = 0usize;
        for (label, p) in &self.keypoints {
            if let Some(q) = other.keypoints.get(label) {
                let d = p.distance(q);
                sum = sum + d * d;
                n += 1;
            }
        }
        (n > 0).then(|| (sum / T::of(n as f64)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SeedId(pub u64);

impl fmt::Display for SeedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
