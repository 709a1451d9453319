//! Test-time trajectory search for in-context robot imitation.
//!
//! Complete end-effector trajectories are proposed by a policy backend,
//! executed in a deterministic kinematic simulator, scored by a subtask
//! progress evaluator and refined by Monte Carlo tree search with
//! archive-retrieved demonstrations and waypoint-aligned feedback.
//!
//! Geometry and scoring math are generic over the scalar type (see
//! [`scalar::Real`]); the aliases below fix the `f64` instantiation the
//! simulator and search use.

pub mod archive;
pub mod codec;
pub mod feedback;
pub mod geometry;
pub mod image;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod scorer;
pub mod search;
pub mod sim;
pub mod types;

pub use codec::{encode_trajectory_text, parse_trajectory_text, CodecError};
pub use image::Image;
pub use types::{Gripper, SeedId, TaskId};

pub type Vec3 = geometry::Vec3<f64>;
pub type Quaternion = geometry::Quaternion<f64>;
pub type EndEffectorState = types::EndEffectorState<f64>;
pub type Trajectory = types::Trajectory<f64>;
pub type InitialState = types::InitialState<f64>;
