use sail_core::feedback::{annotate, render_feedback, FeedbackError, FeedbackMode, KEEP_INSTRUCTION};
use sail_core::policy::template::golden;
use sail_core::scorer::{ProgressReport, ProgressScorer, SubtaskList};
use sail_core::sim::{Rollout, Simulator, TaskSpec, HAND_OVER, PICK_PLACE};
use sail_core::{encode_trajectory_text, parse_trajectory_text, SeedId, TaskId, Trajectory, Vec3};

fn scored(task: &str, seed: u64, traj: &Trajectory, frames: usize) -> (Rollout, ProgressReport) {
    let task = TaskId::new(task);
    let sim = Simulator::default();
    let state = sim.spawn(&task, SeedId(seed)).unwrap();
    let rollout = sim.execute(&state, traj);
    let spec = TaskSpec::lookup(&task).unwrap();
    let list = SubtaskList::new(task, spec.canonical_subtasks).unwrap();
    let report = ProgressScorer::oracle(frames).score(&rollout, &list).unwrap();
    (rollout, report)
}

/// Golden pick-and-place with the release point moved off the bowl.
fn missed_release(seed: u64) -> Trajectory {
    let g = golden(&TaskId::new(PICK_PLACE), SeedId(seed)).unwrap();
    let mut w = g.into_waypoints();
    let n = w.len();
    for wp in &mut w[n - 3..] {
        *wp = wp.with_position(wp.position() + Vec3::new(0.15, 0.0, 0.0)).unwrap();
    }
    Trajectory::new(w).unwrap()
}

#[test]
fn annotations_follow_the_executing_waypoint() {
    let traj = golden(&TaskId::new(PICK_PLACE), SeedId(2)).unwrap();
    let (rollout, report) = scored(PICK_PLACE, 2, &traj, 50);
    let a = annotate(&traj, &report, &rollout).unwrap();
    assert!(a.annotations.keys().all(|&k| k < traj.len()));
    assert_eq!(a.final_reward, report.reward);
    assert_eq!(a.failed_at, None);
    // The latest frame on each waypoint supplies its score.
    for (&wp, ann) in &a.annotations {
        let i = (0..report.frame_indices.len())
            .rev()
            .find(|&i| rollout.frame_waypoint[report.frame_indices[i]] == wp)
            .unwrap();
        assert_eq!(ann.score, report.r[i]);
        assert_eq!(ann.subtask, report.label_at(i));
    }
    let last = traj.len() - 1;
    assert_eq!(a.annotations[&last].score, 1.0);
}

#[test]
fn failure_label_is_carried() {
    let traj = missed_release(4);
    let (rollout, report) = scored(PICK_PLACE, 4, &traj, 50);
    assert!(!rollout.verified_success);
    let a = annotate(&traj, &report, &rollout).unwrap();
    assert_eq!(a.failed_at.as_deref(), report.failed_label());
    assert!(a.failed_at.is_some());
}

#[test]
fn mismatched_inputs_are_rejected() {
    let traj = golden(&TaskId::new(PICK_PLACE), SeedId(2)).unwrap();
    let (rollout, report) = scored(PICK_PLACE, 2, &traj, 20);
    let shorter = Trajectory::new(traj.waypoints()[..3].to_vec()).unwrap();
    assert!(matches!(
        annotate(&shorter, &report, &rollout),
        Err(FeedbackError::MismatchedProvenance(_))
    ));
    let mut bad = report.clone();
    bad.r.pop();
    assert!(annotate(&traj, &bad, &rollout).is_err());
    let mut beyond = report.clone();
    *beyond.frame_indices.last_mut().unwrap() = rollout.len() + 5;
    assert!(annotate(&traj, &beyond, &rollout).is_err());
}

#[test]
fn mode_texts() {
    let traj = missed_release(6);
    let (rollout, report) = scored(PICK_PLACE, 6, &traj, 50);
    let a = annotate(&traj, &report, &rollout).unwrap();
    let plain = encode_trajectory_text(&traj);

    let step = render_feedback(&a, &rollout, FeedbackMode::StepLevel);
    assert!(step.text.starts_with("Previous attempt with per-waypoint progress:\n"));
    assert!(step.text.contains(" score="));
    assert!(step.text.contains(&format!("failed_at={}\n", a.failed_at.as_ref().unwrap())));
    assert!(step.text.ends_with(&format!("{KEEP_INSTRUCTION}\n")));
    assert!(step.images.is_empty());
    let annotated_lines = step.text.lines().filter(|l| l.contains(" score=")).count();
    assert_eq!(annotated_lines, a.annotations.len());

    let fin = render_feedback(&a, &rollout, FeedbackMode::FinalScore);
    assert_eq!(
        fin.text,
        format!("Previous attempt:\n{plain}final_score={:.3}\n", (a.final_reward * 1000.0).round() / 1000.0)
    );

    let traj_only = render_feedback(&a, &rollout, FeedbackMode::TrajectoryOnly);
    assert_eq!(traj_only.text, format!("Previous attempt:\n{plain}"));
    assert!(traj_only.images.is_empty());

    let img = render_feedback(&a, &rollout, FeedbackMode::ImageOnly);
    assert!(parse_trajectory_text::<f64>(&img.text).is_err());
    assert!(!img.images.is_empty() && img.images.len() <= traj.len());

    let both = render_feedback(&a, &rollout, FeedbackMode::ImageAndTrajectory);
    assert!(both.text.starts_with(&traj_only.text));
    assert_eq!(both.images, img.images);

    for mode in FeedbackMode::ALL {
        assert_eq!(render_feedback(&a, &rollout, mode).mode, mode);
    }
}

#[test]
fn every_mode_but_images_recovers_the_trajectory() {
    let traj = golden(&TaskId::new(HAND_OVER), SeedId(3)).unwrap();
    let (rollout, report) = scored(HAND_OVER, 3, &traj, 50);
    let a = annotate(&traj, &report, &rollout).unwrap();
    for mode in [
        FeedbackMode::StepLevel,
        FeedbackMode::FinalScore,
        FeedbackMode::TrajectoryOnly,
        FeedbackMode::ImageAndTrajectory,
    ] {
        let text = render_feedback(&a, &rollout, mode).text;
        assert_eq!(parse_trajectory_text::<f64>(&text).unwrap(), traj, "{mode:?}");
    }
}
