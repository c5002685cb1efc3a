//! Synthetic sequences, tracking runs, evaluation and profiling.

mod config;
mod io;
mod run;
mod synth;

use std::path::{Path, PathBuf};

pub use config::{OccluderSpec, OrbitSpec, RunConfig};
pub use io::{
    count_frames, frame_name, frame_path, read_poses, read_stats, write_poses, write_stats,
    PoseFile, PoseRecord, StatsRecord, GROUND_TRUTH_FILE, POSES_FILE, SEQUENCE_CONFIG_FILE,
    STATS_FILE,
};
pub use run::{
    evaluate, evaluate_files, profile, run_tracking, EvaluationReport, FrameResult, Profile,
    RunOptions, TrackingRun, REFERENCE_SHARES, STAGES,
};
pub use synth::{
    corner_occluder, draw_lines, generate_sequence, orbit_pose, quantize_with_noise, render_frame,
    visible_segments, OccluderRect, SynthOptions, TrajectorySpec,
};

use crate::geometry::{ModelError, PoseSE3};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("sequence directory not found: {0}")]
    MissingSequence(PathBuf),
    #[error("missing frame: {0}")]
    MissingFrame(PathBuf),
    #[error("pose file has {poses} frames, ground truth has {truth}")]
    FrameCountMismatch { poses: usize, truth: usize },
    #[error("no tracked frames to profile")]
    NoTrackedFrames,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Initial pose from either six comma-separated numbers `wx,wy,wz,tx,ty,tz`
/// or a pose CSV file, whose first row is used.
pub fn parse_init_pose(arg: &str) -> Result<PoseSE3<f64>, HarnessError> {
    let fields: Vec<&str> = arg.split(',').map(str::trim).collect();
    if fields.len() == 6 {
        if let Ok(v) = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
        {
            return Ok(PoseSE3::from_params([v[0], v[1], v[2], v[3], v[4], v[5]]));
        }
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return Err(HarnessError::InvalidPose(format!(
            "'{arg}' is neither six numbers nor a pose file"
        )));
    }
    let file = read_poses(path)?;
    file.records
        .first()
        .map(PoseRecord::pose)
        .ok_or_else(|| HarnessError::InvalidPose(format!("{arg}: no pose rows")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_pose_from_numbers() {
        let p = parse_init_pose("0.1, 0.2, 0.3, 1, 2, 150").unwrap();
        assert_eq!(p.params(), [0.1, 0.2, 0.3, 1.0, 2.0, 150.0]);
        assert!(parse_init_pose("1,2,3").is_err());
    }
}
