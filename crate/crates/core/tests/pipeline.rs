mod common;

use std::path::Path;

use edgetrack::geometry::{exp_map, PoseSE3, Vec3, WireframeModel};
use edgetrack::harness::{
    count_frames, evaluate, frame_name, generate_sequence, read_poses, read_stats, run_tracking,
    HarnessError, OrbitSpec, PoseRecord, RunOptions, SynthOptions, TrajectorySpec,
    GROUND_TRUTH_FILE, POSES_FILE, STATS_FILE,
};
use edgetrack::pose_estimation::FrameStatus;
use edgetrack::Backend;
use proptest::prelude::*;

use common::*;

fn synth(dir: &Path, frames: usize, noise: f64, seed: u64) -> Vec<PoseSE3<f64>> {
    let cfg = desk_config();
    let traj = TrajectorySpec::Orbit {
        frames,
        orbit: cfg.orbit,
    };
    let opts = SynthOptions {
        noise_sigma: noise,
        seed,
        occluder: None,
    };
    generate_sequence(
        &WireframeModel::load(CUBE_MODEL).unwrap(),
        &cfg.intrinsics,
        &traj,
        &opts,
        dir,
    )
    .unwrap()
}

fn track(dir: &Path, init: &PoseSE3<f64>, backend: Backend) -> edgetrack::harness::TrackingRun {
    let cfg = desk_config();
    let model = WireframeModel::load(CUBE_MODEL).unwrap();
    run_tracking(
        dir,
        &model,
        &cfg.intrinsics,
        &cfg.tracker,
        init,
        backend,
        &RunOptions::default(),
    )
    .unwrap()
}

#[test]
fn sixty_frame_orbit_writes_frames_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let poses = synth(dir.path(), 60, 2.0, 5);
    assert_eq!(poses.len(), 60);
    assert_eq!(count_frames(dir.path()).unwrap(), 60);
    let truth = read_poses(&dir.path().join(GROUND_TRUTH_FILE)).unwrap();
    assert_eq!(truth.records.len(), 60);
    assert_eq!(truth.header_value("seed"), Some("5"));
    for (r, p) in truth.records.iter().zip(&poses) {
        assert_eq!(r.pose(), *p);
        assert!((p.camera_center().norm() - 150.0).abs() < 1e-9);
    }
}

#[test]
fn noiseless_first_frame_tracks_from_truth() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth(dir.path(), 1, 0.0, 0);
    let run = track(dir.path(), &truth[0], Backend::Float);
    assert_eq!(run.frames[0].status, FrameStatus::Tracked);
    let r = evaluate(&run.poses(), &truth).unwrap();
    assert!(r.mean_distance < 0.5, "{}", r.mean_distance);
}

#[test]
fn noiseless_sequence_float_and_q40_23() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth(dir.path(), 60, 0.0, 0);
    let float = track(dir.path(), &truth[0], Backend::Float);
    let fixed = track(dir.path(), &truth[0], Backend::Q40_23);
    assert_eq!(float.count(FrameStatus::Tracked), 60);
    assert_eq!(fixed.count(FrameStatus::Tracked), 60);
    let (ef, eq) = (
        evaluate(&float.poses(), &truth).unwrap(),
        evaluate(&fixed.poses(), &truth).unwrap(),
    );
    assert!(
        eq.mean_distance <= 2.0 * ef.mean_distance,
        "{} vs {}",
        eq.mean_distance,
        ef.mean_distance
    );
}

#[test]
fn gross_misalignment_is_lost_within_coast_window() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth(dir.path(), 8, 2.0, 0);
    // Pan the camera 90 degrees about its own vertical axis.
    let pan = exp_map(Vec3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0));
    let init = PoseSE3::from_rotation(&(pan * truth[0].rotation()), pan * truth[0].t);
    let run = track(dir.path(), &init, Backend::Float);
    let coast = desk_config().tracker.coast_frames as usize;
    assert_eq!(run.frames.len(), 8);
    assert_eq!(run.count(FrameStatus::Tracked), 0);
    assert!(run.frames[..coast]
        .iter()
        .all(|f| f.status == FrameStatus::Coasting));
    assert!(run.frames[coast..]
        .iter()
        .all(|f| f.status == FrameStatus::Lost));
}

#[test]
fn outputs_have_one_row_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth(dir.path(), 5, 2.0, 0);
    let out = dir.path().join("out");
    let mut init = truth[0];
    init.t.x += 500.0;
    track(dir.path(), &init, Backend::Q47_16)
        .write(&out)
        .unwrap();
    let poses = read_poses(&out.join(POSES_FILE)).unwrap();
    let stats = read_stats(&out.join(STATS_FILE)).unwrap();
    assert_eq!(poses.records.len(), 5);
    assert_eq!(stats.len(), 5);
    assert_eq!(stats.last().unwrap().status, "lost");
    let header = std::fs::read_to_string(out.join(STATS_FILE)).unwrap();
    assert!(header.starts_with(
        "frame,sampled,matched,err,iters,t_total_ms,t_visible_ms,t_gray_ms,t_me_ms,t_pose_ms,status"
    ));
}

#[test]
fn missing_frame_is_a_startup_error() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth(dir.path(), 4, 2.0, 0);
    std::fs::remove_file(dir.path().join(frame_name(2))).unwrap();
    let cfg = desk_config();
    let model = WireframeModel::load(CUBE_MODEL).unwrap();
    let err = run_tracking(
        dir.path(),
        &model,
        &cfg.intrinsics,
        &cfg.tracker,
        &truth[0],
        Backend::Float,
        &RunOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::MissingFrame(_)), "{err}");
    let err = run_tracking(
        &dir.path().join("nope"),
        &model,
        &cfg.intrinsics,
        &cfg.tracker,
        &truth[0],
        Backend::Float,
        &RunOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::MissingSequence(_)));
}

#[test]
fn buffers_are_dumped_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth(dir.path(), 2, 2.0, 0);
    let cfg = desk_config();
    let dump = dir.path().join("buffers");
    let opts = RunOptions {
        dump_buffers: Some(dump.clone()),
    };
    let model = WireframeModel::load(CUBE_MODEL).unwrap();
    run_tracking(
        dir.path(),
        &model,
        &cfg.intrinsics,
        &cfg.tracker,
        &truth[0],
        Backend::Float,
        &opts,
    )
    .unwrap();
    for f in 0..2 {
        assert!(dump.join(format!("frame_{f:06}_id.ppm")).is_file());
        assert!(dump.join(format!("frame_{f:06}_depth.pgm")).is_file());
    }
}

#[test]
fn key_pose_sequence_tracks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let a = edgetrack::harness::orbit_pose(&cfg.orbit, 0);
    let b = edgetrack::harness::orbit_pose(
        &OrbitSpec {
            elevation_deg: 10.0,
            ..cfg.orbit
        },
        20,
    );
    let traj = TrajectorySpec::KeyPoses {
        frames: 20,
        keys: vec![a, b],
    };
    let opts = SynthOptions {
        noise_sigma: 2.0,
        seed: 3,
        occluder: None,
    };
    let truth = generate_sequence(
        &WireframeModel::load(CUBE_MODEL).unwrap(),
        &cfg.intrinsics,
        &traj,
        &opts,
        dir.path(),
    )
    .unwrap();
    let run = track(dir.path(), &truth[0], Backend::Float);
    assert_eq!(run.count(FrameStatus::Tracked), 20);
    assert!(evaluate(&run.poses(), &truth).unwrap().mean_distance < 6.12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evaluate_of_identical_files_is_zero(params in prop::collection::vec(prop::array::uniform6(-100.0f64..100.0), 1..10)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let records: Vec<PoseRecord> = params
            .iter()
            .enumerate()
            .map(|(i, p)| PoseRecord::new(i, &PoseSE3::from_params([p[0] / 40.0, p[1] / 40.0, p[2] / 40.0, p[3], p[4], p[5]])))
            .collect();
        edgetrack::harness::write_poses(&path, &[], &records).unwrap();
        let r = edgetrack::harness::evaluate_files(&path, &path).unwrap();
        prop_assert_eq!(r.mean_distance, 0.0);
        prop_assert_eq!(r.mean_abs, [0.0; 3]);
    }

    #[test]
    fn generation_is_deterministic_for_a_seed(seed in any::<u64>()) {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        synth(a.path(), 2, 2.0, seed);
        synth(b.path(), 2, 2.0, seed);
        for name in [frame_name(0), frame_name(1), GROUND_TRUTH_FILE.to_string()] {
            prop_assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
        }
    }
}
