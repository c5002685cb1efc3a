//! Pose and stats CSV files, frame naming.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{PoseSE3, Vec3};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const POSES_FILE: &str = "poses.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const SEQUENCE_CONFIG_FILE: &str = "sequence.conf";

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(frame_name(index))
}

/// Number of consecutive frames `frame_000000.pgm, frame_000001.pgm, ...` in `dir`.
pub fn count_frames(dir: &Path) -> Result<usize, HarnessError> {
    if !dir.is_dir() {
        return Err(HarnessError::MissingSequence(dir.to_path_buf()));
    }
    let mut n = 0;
    while frame_path(dir, n).is_file() {
        n += 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame: usize,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl PoseRecord {
    pub fn new(frame: usize, pose: &PoseSE3<f64>) -> Self {
        let [wx, wy, wz, tx, ty, tz] = pose.params();
        Self {
            frame,
            wx,
            wy,
            wz,
            tx,
            ty,
            tz,
        }
    }

    pub fn pose(&self) -> PoseSE3<f64> {
        PoseSE3::new(
            Vec3::new(self.wx, self.wy, self.wz),
            Vec3::new(self.tx, self.ty, self.tz),
        )
    }
}

/// Pose file contents plus `# key=value` header comments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseFile {
    pub header: Vec<(String, String)>,
    pub records: Vec<PoseRecord>,
}

impl PoseFile {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_poses(
    path: &Path,
    header: &[(&str, String)],
    records: &[PoseRecord],
) -> Result<(), HarnessError> {
    let mut file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    for (k, v) in header {
        writeln!(file, "# {k}={v}").map_err(|e| HarnessError::io(path, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    w.write_record(["frame", "wx", "wy", "wz", "tx", "ty", "tz"])
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_poses(path: &Path) -> Result<PoseFile, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let header = text
        .lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim().split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let records = r
        .deserialize()
        .collect::<Result<Vec<PoseRecord>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok(PoseFile { header, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub frame: usize,
    pub sampled: usize,
    pub matched: usize,
    pub err: f64,
    pub iters: u32,
    pub t_total_ms: f64,
    pub t_visible_ms: f64,
    pub t_gray_ms: f64,
    pub t_me_ms: f64,
    pub t_pose_ms: f64,
    pub status: String,
}

pub const STATS_COLUMNS: [&str; 11] = [
    "frame",
    "sampled",
    "matched",
    "err",
    "iters",
    "t_total_ms",
    "t_visible_ms",
    "t_gray_ms",
    "t_me_ms",
    "t_pose_ms",
    "status",
];

pub fn write_stats(path: &Path, records: &[StatsRecord]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    // Written explicitly so an empty run still gets a header row.
    w.write_record(STATS_COLUMNS)
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_stats(path: &Path) -> Result<Vec<StatsRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))
}
