//! Line-oriented text encoding of trajectories and initial states.
//!
//! One waypoint per line:
//!
//! ```text
//! W <idx>: pos=[<x_mm>,<y_mm>,<z_mm>] quat=[<w>,<x>,<y>,<z>] grip=<OPEN|CLOSE>
//! ```
//!
//! Positions are signed integer millimeters (round half away from zero),
//! quaternion components carry three decimals with `w >= 0`. The parser picks
//! waypoint lines out of arbitrary surrounding text, so model output wrapped in
//! prose still decodes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::geometry::{Quaternion, Vec3};
use crate::scalar::Real;
use crate::types::{EndEffectorState, Gripper, InitialState, Trajectory, TypeError};

/// Accepted quaternion norm range before renormalization.
pub const QUATERNION_NORM_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("no waypoint lines found")]
    NoWaypointsFound,
    #[error("malformed waypoint on line {0}")]
    MalformedWaypoint(usize),
    #[error("degenerate quaternion on line {0}")]
    DegenerateQuaternion(usize),
    #[error("initial state has no robot line")]
    MissingRobotLine,
    #[error("malformed initial-state line {0}")]
    MalformedStateLine(usize),
    #[error(transparent)]
    Invalid(#[from] TypeError),
}

static WAYPOINT_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*W\s+\d+\s*:\s*pos=").unwrap());

static WAYPOINT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"^\s*W\s+(\d+)\s*:\s*",
        r"pos=\[\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\]\s*",
        r"quat=\[\s*([^,\]\s]+)\s*,\s*([^,\]\s]+)\s*,\s*([^,\]\s]+)\s*,\s*([^,\]\s]+)\s*\]\s*",
        r"grip=(OPEN|CLOSE)\b"
    ))
    .unwrap()
});

static KEYPOINT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*K\s+([A-Za-z0-9_]+)\s*:\s*pos=\[\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\]")
        .unwrap()
});

static ROBOT_PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*R\s*:\s*pos=").unwrap());

fn to_mm(v: f64) -> i64 {
    // f64::round rounds half away from zero.
    (v * 1000.0).round() as i64
}

/// Three-decimal digits of a unit quaternion that are stable under
/// parse-and-renormalize, so re-encoding parsed text reproduces it.
fn quaternion_digits(q: Quaternion<f64>) -> [i64; 4] {
    let q = q.normalized().canonical();
    let round = |q: Quaternion<f64>| q.components().map(|c| (c * 1000.0).round() as i64);
    let mut digits = round(q);
    for _ in 0..8 {
        let back = digits_to_quaternion(digits).normalized().canonical();
        let next = round(back);
        if next == digits {
            break;
        }
        digits = next;
    }
    digits
}

fn digits_to_quaternion(d: [i64; 4]) -> Quaternion<f64> {
    Quaternion::new(
        d[0] as f64 / 1000.0,
        d[1] as f64 / 1000.0,
        d[2] as f64 / 1000.0,
        d[3] as f64 / 1000.0,
    )
}

fn fmt_thousandths(out: &mut String, v: i64) {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    let _ = write!(out, "{sign}{}.{:03}", a / 1000, a % 1000);
}

fn write_pos(out: &mut String, p: Vec3<f64>) {
    let _ = write!(out, "pos=[{},{},{}]", to_mm(p.x), to_mm(p.y), to_mm(p.z));
}

fn write_pose<T: Real>(out: &mut String, wp: &EndEffectorState<T>) {
    write_pos(out, wp.position().cast());
    out.push_str(" quat=[");
    for (i, d) in quaternion_digits(wp.orientation().cast()).iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        fmt_thousandths(out, *d);
    }
    let _ = write!(out, "] grip={}", wp.gripper());
}

/// Encodes a single waypoint line (no trailing newline).
pub fn encode_waypoint<T: Real>(idx: usize, wp: &EndEffectorState<T>) -> String {
    let mut out = format!("W {idx}: ");
    write_pose(&mut out, wp);
    out
}

pub fn encode_trajectory_text<T: Real>(traj: &Trajectory<T>) -> String {
    let mut out = String::new();
    for (i, wp) in traj.iter().enumerate() {
        out.push_str(&encode_waypoint(i, wp));
        out.push('\n');
    }
    out
}

fn parse_mm(s: &str) -> Option<f64> {
    s.parse::<i64>().ok().map(|mm| mm as f64 / 1000.0)
}

fn parse_pose<T: Real>(
    caps: &regex::Captures<'_>,
    first: usize,
    line_no: usize,
) -> Result<EndEffectorState<T>, CodecError> {
    let malformed = || CodecError::MalformedWaypoint(line_no);
    let pos = [first, first + 1, first + 2]
        .map(|i| parse_mm(&caps[i]))
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(malformed)?;
    let quat = (first + 3..first + 7)
        .map(|i| caps[i].parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(malformed)?;
    let q = Quaternion::new(quat[0], quat[1], quat[2], quat[3]);
    let norm = q.norm();
    if !(QUATERNION_NORM_RANGE.0..=QUATERNION_NORM_RANGE.1).contains(&norm) {
        return Err(CodecError::DegenerateQuaternion(line_no));
    }
    let q = q.normalized().canonical();
    let gripper = match &caps[first + 7] {
        "OPEN" => Gripper::Open,
        _ => Gripper::Close,
    };
    let wp = EndEffectorState::new(Vec3::new(pos[0], pos[1], pos[2]), q, gripper)?;
    Ok(wp.cast())
}

/// Extracts every waypoint line from `text`, in order. Lines that do not start
/// like a waypoint are ignored.
pub fn parse_trajectory_text<T: Real>(text: &str) -> Result<Trajectory<T>, CodecError> {
    let mut waypoints = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if !WAYPOINT_PREFIX.is_match(line) {
            continue;
        }
        let caps = WAYPOINT
            .captures(line)
            .ok_or(CodecError::MalformedWaypoint(line_no))?;
        waypoints.push(parse_pose(&caps, 2, line_no)?);
    }
    if waypoints.is_empty() {
        return Err(CodecError::NoWaypointsFound);
    }
    Ok(Trajectory::new(waypoints)?)
}

/// Encodes keypoints (`K <label>: pos=[..]`) followed by the robot pose (`R: ..`).
pub fn encode_initial_state_text<T: Real>(state: &InitialState<T>) -> String {
    let mut out = String::new();
    for (label, p) in state.keypoints() {
        let _ = write!(out, "K {label}: ");
        write_pos(&mut out, p.cast());
        out.push('\n');
    }
    out.push_str("R: ");
    write_pose(&mut out, state.robot());
    out.push('\n');
    out
}

pub fn parse_initial_state_text<T: Real>(text: &str) -> Result<InitialState<T>, CodecError> {
    static ROBOT: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(concat!(
            r"^\s*R\s*:\s*",
            r"pos=\[\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\]\s*",
            r"quat=\[\s*([^,\]\s]+)\s*,\s*([^,\]\s]+)\s*,\s*([^,\]\s]+)\s*,\s*([^,\]\s]+)\s*\]\s*",
            r"grip=(OPEN|CLOSE)\b"
        ))
        .unwrap()
    });
    let mut keypoints = BTreeMap::new();
    let mut robot = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(caps) = KEYPOINT.captures(line) {
            let p = [2, 3, 4]
                .map(|j| parse_mm(&caps[j]))
                .into_iter()
                .collect::<Option<Vec<f64>>>()
                .ok_or(CodecError::MalformedStateLine(line_no))?;
            keypoints.insert(caps[1].to_string(), Vec3::new(p[0], p[1], p[2]).cast::<T>());
        } else if ROBOT_PREFIX.is_match(line) {
            let caps = ROBOT
                .captures(line)
                .ok_or(CodecError::MalformedStateLine(line_no))?;
            robot = Some(parse_pose::<T>(&caps, 1, line_no).map_err(|e| match e {
                CodecError::MalformedWaypoint(n) => CodecError::MalformedStateLine(n),
                other => other,
            })?);
        }
    }
    let robot = robot.ok_or(CodecError::MissingRobotLine)?;
    Ok(InitialState::new(keypoints, robot)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(x: f64, y: f64, z: f64, g: Gripper) -> EndEffectorState<f64> {
        EndEffectorState::at(Vec3::new(x, y, z), g).unwrap()
    }

    #[test]
    fn encodes_single_waypoint() {
        let t = Trajectory::new(vec![wp(0.1, 0.2, 0.05, Gripper::Open)]).unwrap();
        assert_eq!(
            encode_trajectory_text(&t),
            "W 0: pos=[100,200,50] quat=[1.000,0.000,0.000,0.000] grip=OPEN\n"
        );
    }

    #[test]
    fn rounds_millimeters_half_away_from_zero() {
        assert_eq!(to_mm(0.12345), 123);
        assert_eq!(to_mm(0.0125), 13);
        assert_eq!(to_mm(-0.0125), -13);
    }

    #[test]
    fn negative_w_is_canonicalized() {
        let q = Quaternion::new(-1.0, 0.0, 0.0, 0.0);
        let t = Trajectory::new(vec![
            EndEffectorState::new(Vec3::zero(), q, Gripper::Close).unwrap()
        ])
        .unwrap();
        assert!(encode_trajectory_text(&t).contains("quat=[1.000,0.000,0.000,0.000]"));
        let parsed: Trajectory<f64> =
            parse_trajectory_text("W 0: pos=[0,0,0] quat=[-1,0,0,0] grip=OPEN").unwrap();
        assert_eq!(parsed.waypoints()[0].orientation().w, 1.0);
    }

    #[test]
    fn parses_round_trip_of_example() {
        let t: Trajectory<f64> = parse_trajectory_text(
            "W 0: pos=[100,200,50] quat=[1.000,0.000,0.000,0.000] grip=OPEN",
        )
        .unwrap();
        let w = t.waypoints()[0];
        assert!((w.position().x - 0.1).abs() < 1e-12);
        assert!((w.position().z - 0.05).abs() < 1e-12);
        assert_eq!(w.gripper(), Gripper::Open);
    }

    #[test]
    fn tolerates_prose() {
        let text = "Sure! Here is the plan.\nI will reach first.\n\
                    W 0: pos=[1,2,3] quat=[1,0,0,0] grip=OPEN\n\
                    then\n  W 1: pos=[-4,5,6] quat=[0.707,0,0,0.707] grip=CLOSE  (grasp)\n";
        let t: Trajectory<f64> = parse_trajectory_text(text).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.waypoints()[1].gripper(), Gripper::Close);
        assert!((t.waypoints()[1].orientation().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_malformed_line() {
        let err = parse_trajectory_text::<f64>(
            "W 0: pos=[a,b,c] quat=[1,0,0,0] grip=OPEN",
        )
        .unwrap_err();
        assert_eq!(err, CodecError::MalformedWaypoint(1));
        let err = parse_trajectory_text::<f64>(
            "hello\nW 0: pos=[1,2,3] quat=[x,0,0,0] grip=OPEN",
        )
        .unwrap_err();
        assert_eq!(err, CodecError::MalformedWaypoint(2));
    }

    #[test]
    fn rejects_degenerate_quaternions() {
        for q in ["0.1,0,0,0", "2.5,0,0,0"] {
            let text = format!("W 0: pos=[0,0,0] quat=[{q}] grip=OPEN");
            assert_eq!(
                parse_trajectory_text::<f64>(&text).unwrap_err(),
                CodecError::DegenerateQuaternion(1)
            );
        }
    }

    #[test]
    fn no_waypoints() {
        assert_eq!(
            parse_trajectory_text::<f64>("nothing to see").unwrap_err(),
            CodecError::NoWaypointsFound
        );
    }

    #[test]
    fn initial_state_round_trip() {
        let robot = wp(0.0, 0.0, 0.35, Gripper::Open);
        let s = InitialState::new(
            [
                ("block".to_string(), Vec3::new(-0.1, 0.05, 0.02)),
                ("bowl".to_string(), Vec3::new(0.15, -0.1, 0.0)),
            ]
            .into(),
            robot,
        )
        .unwrap();
        let text = encode_initial_state_text(&s);
        assert_eq!(
            text,
            "K block: pos=[-100,50,20]\nK bowl: pos=[150,-100,0]\n\
             R: pos=[0,0,350] quat=[1.000,0.000,0.000,0.000] grip=OPEN\n"
        );
        let back: InitialState<f64> = parse_initial_state_text(&text).unwrap();
        assert_eq!(back, s);
    }
}
