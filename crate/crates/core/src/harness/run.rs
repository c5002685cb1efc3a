//! Tracking runs over a sequence directory, accuracy evaluation and the
//! per-stage timing profile.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use super::io::{
    count_frames, frame_path, read_poses, write_poses, write_stats, PoseRecord, StatsRecord,
    GROUND_TRUTH_FILE, POSES_FILE, STATS_FILE,
};
use super::HarnessError;
use crate::error::TrackError;
use crate::geometry::{CameraIntrinsics, PoseSE3, WireframeModel};
use crate::imaging::{
    encode_pgm, encode_ppm, load_image, rgb888_to_rgb565, to_gray, ColorImage, ColorPixels,
    GrayImage, Image,
};
use crate::pose_estimation::{FrameStatus, Tracker};
use crate::rasterizer::render_id_buffer;
use crate::realmath::{Backend, Real, Q40_23, Q47_16};
use crate::tracking::TrackerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub pose: PoseSE3<f64>,
    pub stats: StatsRecord,
    pub status: FrameStatus,
    pub error: Option<TrackError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub backend: Backend,
    pub frames: Vec<FrameResult>,
}

impl TrackingRun {
    pub fn poses(&self) -> Vec<PoseSE3<f64>> {
        self.frames.iter().map(|f| f.pose).collect()
    }

    pub fn stats(&self) -> Vec<StatsRecord> {
        self.frames.iter().map(|f| f.stats.clone()).collect()
    }

    pub fn count(&self, status: FrameStatus) -> usize {
        self.frames.iter().filter(|f| f.status == status).count()
    }

    /// Frames that failed on a fixed-point overflow or other numeric fault.
    pub fn numeric_faults(&self) -> usize {
        self.frames
            .iter()
            .filter(|f| matches!(f.error, Some(TrackError::Numeric(_))))
            .count()
    }

    pub fn mean_sampled(&self) -> f64 {
        mean(self.frames.iter().map(|f| f.stats.sampled as f64))
    }

    pub fn mean_iterations(&self) -> f64 {
        mean(self.frames.iter().map(|f| f.stats.iters as f64))
    }

    pub fn mean_err(&self) -> f64 {
        mean(self.frames.iter().map(|f| f.stats.err))
    }

    /// Writes `poses.csv` and `stats.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let records: Vec<PoseRecord> = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| PoseRecord::new(i, &f.pose))
            .collect();
        write_poses(
            &dir.join(POSES_FILE),
            &[("backend", self.backend.to_string())],
            &records,
        )?;
        write_stats(&dir.join(STATS_FILE), &self.stats())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Frames arrive as RGB565, like a handheld camera's preview buffer; the
/// gray conversion is timed as its own stage.
fn as_camera_frame(img: Image) -> ColorImage {
    match img {
        Image::Color(c) => c,
        Image::Gray(g) => {
            let px = g
                .data()
                .iter()
                .map(|&v| rgb888_to_rgb565([v, v, v]))
                .collect();
            ColorImage::new(g.width(), g.height(), ColorPixels::Rgb565(px))
                .expect("same dimensions")
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write the ID and depth buffers rendered at each frame's start pose here.
    pub dump_buffers: Option<std::path::PathBuf>,
}

/// Tracks every frame of `sequence_dir` starting from `init`.
pub fn run_tracking(
    sequence_dir: &Path,
    model: &WireframeModel,
    intrinsics: &CameraIntrinsics,
    cfg: &TrackerConfig,
    init: &PoseSE3<f64>,
    backend: Backend,
    opts: &RunOptions,
) -> Result<TrackingRun, HarnessError> {
    cfg.validate().map_err(HarnessError::Config)?;
    let frames = expected_frames(sequence_dir)?;
    let results = match backend {
        Backend::Float => {
            run_with::<f64>(sequence_dir, frames, model, intrinsics, cfg, init, opts)?
        }
        Backend::Q40_23 => {
            run_with::<Q40_23>(sequence_dir, frames, model, intrinsics, cfg, init, opts)?
        }
        Backend::Q47_16 => {
            run_with::<Q47_16>(sequence_dir, frames, model, intrinsics, cfg, init, opts)?
        }
    };
    Ok(TrackingRun {
        backend,
        frames: results,
    })
}

/// Frame count from the ground-truth file when present, so that a gap in the
/// numbering is reported instead of silently truncating the run.
fn expected_frames(dir: &Path) -> Result<usize, HarnessError> {
    let on_disk = count_frames(dir)?;
    let truth = dir.join(GROUND_TRUTH_FILE);
    if !truth.is_file() {
        return Ok(on_disk);
    }
    let expected = read_poses(&truth)?.records.len();
    if on_disk < expected {
        return Err(HarnessError::MissingFrame(frame_path(dir, on_disk)));
    }
    Ok(expected)
}

fn run_with<R: Real>(
    dir: &Path,
    frames: usize,
    model: &WireframeModel,
    k: &CameraIntrinsics,
    cfg: &TrackerConfig,
    init: &PoseSE3<f64>,
    opts: &RunOptions,
) -> Result<Vec<FrameResult>, HarnessError> {
    if let Some(dump) = &opts.dump_buffers {
        std::fs::create_dir_all(dump).map_err(|e| HarnessError::io(dump, e))?;
    }
    let mut tracker = Tracker::<R>::new(model.clone(), *k, cfg.clone(), init.cast());
    let mut out = Vec::with_capacity(frames);
    for i in 0..frames {
        let path = frame_path(dir, i);
        let img = load_image(&path).map_err(|e| HarnessError::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if (img_width(&img), img_height(&img)) != (k.width, k.height) {
            return Err(HarnessError::Image {
                path,
                message: "frame size does not match the camera".into(),
            });
        }
        let camera_frame = as_camera_frame(img);

        if let Some(dump) = &opts.dump_buffers {
            dump_buffers(dump, i, model, &tracker.pose().cast(), k)?;
        }

        let t0 = Instant::now();
        let gray: GrayImage = to_gray(&camera_frame);
        let t_gray = t0.elapsed();
        let report = tracker.process(&gray);
        let s = &report.stats;
        out.push(FrameResult {
            pose: report.pose.cast(),
            stats: StatsRecord {
                frame: i,
                sampled: s.sampled,
                matched: s.matched,
                err: s.err,
                iters: s.iterations,
                t_total_ms: ms(s.t_total + t_gray),
                t_visible_ms: ms(s.t_visible),
                t_gray_ms: ms(t_gray),
                t_me_ms: ms(s.t_me),
                t_pose_ms: ms(s.t_pose),
                status: report.status.as_str().to_string(),
            },
            status: report.status,
            error: report.error,
        });
    }
    Ok(out)
}

fn img_width(img: &Image) -> u32 {
    match img {
        Image::Gray(g) => g.width(),
        Image::Color(c) => c.width(),
    }
}

fn img_height(img: &Image) -> u32 {
    match img {
        Image::Gray(g) => g.height(),
        Image::Color(c) => c.height(),
    }
}

fn dump_buffers(
    dir: &Path,
    frame: usize,
    model: &WireframeModel,
    pose: &PoseSE3<f64>,
    k: &CameraIntrinsics,
) -> Result<(), HarnessError> {
    let (ids, depth) = render_id_buffer(model, pose, k);
    let id_path = dir.join(format!("frame_{frame:06}_id.ppm"));
    std::fs::write(&id_path, encode_ppm(&ids.to_image()))
        .map_err(|e| HarnessError::io(&id_path, e))?;
    let depth_path = dir.join(format!("frame_{frame:06}_depth.pgm"));
    std::fs::write(&depth_path, encode_pgm(&depth.to_image()))
        .map_err(|e| HarnessError::io(&depth_path, e))
}

/// Camera-centre accuracy of a pose sequence against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// Estimated minus true camera centre, per frame (mm).
    pub errors: Vec<[f64; 3]>,
    pub mean_abs: [f64; 3],
    pub mean_distance: f64,
}

impl EvaluationReport {
    pub fn distances(&self) -> Vec<f64> {
        self.errors
            .iter()
            .map(|e| (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,dx,dy,dz,distance\n");
        for (i, (e, d)) in self.errors.iter().zip(self.distances()).enumerate() {
            let _ = writeln!(s, "{i},{},{},{},{d}", e[0], e[1], e[2]);
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "frames: {}\nmean abs error x: {:.3} mm\nmean abs error y: {:.3} mm\nmean abs error z: {:.3} mm\nmean distance: {:.3} mm",
            self.errors.len(),
            self.mean_abs[0],
            self.mean_abs[1],
            self.mean_abs[2],
            self.mean_distance
        )
    }
}

pub fn evaluate(
    poses: &[PoseSE3<f64>],
    truth: &[PoseSE3<f64>],
) -> Result<EvaluationReport, HarnessError> {
    if poses.len() != truth.len() {
        return Err(HarnessError::FrameCountMismatch {
            poses: poses.len(),
            truth: truth.len(),
        });
    }
    let errors: Vec<[f64; 3]> = poses
        .iter()
        .zip(truth)
        .map(|(p, t)| (p.camera_center() - t.camera_center()).to_array())
        .collect();
    let mean_abs = std::array::from_fn(|a| mean(errors.iter().map(|e| e[a].abs())));
    let mean_distance = mean(
        errors
            .iter()
            .map(|e| (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()),
    );
    Ok(EvaluationReport {
        errors,
        mean_abs,
        mean_distance,
    })
}

pub fn evaluate_files(poses: &Path, truth: &Path) -> Result<EvaluationReport, HarnessError> {
    let p: Vec<_> = read_poses(poses)?
        .records
        .iter()
        .map(PoseRecord::pose)
        .collect();
    let t: Vec<_> = read_poses(truth)?
        .records
        .iter()
        .map(PoseRecord::pose)
        .collect();
    evaluate(&p, &t)
}

pub const STAGES: [&str; 4] = [
    "visible edges detection",
    "image gray scaling",
    "ME",
    "pose calculation",
];

/// Reference per-stage shares (percent), printed next to the measured ones.
pub const REFERENCE_SHARES: [f64; 4] = [28.0, 19.0, 37.0, 16.0];

/// Mean per-frame time and stage shares over the tracked frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub frames: usize,
    pub mean_total_ms: f64,
    /// Percent of total time per stage, in [`STAGES`] order.
    pub shares: [f64; 4],
    pub overhead: f64,
}

impl Profile {
    pub fn table(&self) -> String {
        let mut s = format!(
            "frames: {}\nmean time per frame: {:.3} ms\n",
            self.frames, self.mean_total_ms
        );
        let _ = writeln!(s, "{:<26} {:>8} {:>10}", "step", "share %", "reference %");
        for ((name, share), reference) in STAGES.iter().zip(self.shares).zip(REFERENCE_SHARES) {
            let _ = writeln!(s, "{name:<26} {share:>8.1} {reference:>10.0}");
        }
        let _ = write!(s, "{:<26} {:>8.1}", "overhead", self.overhead);
        s
    }
}

pub fn profile(stats: &[StatsRecord]) -> Result<Profile, HarnessError> {
    let tracked: Vec<&StatsRecord> = stats
        .iter()
        .filter(|s| s.status == FrameStatus::Tracked.as_str())
        .collect();
    if tracked.is_empty() {
        return Err(HarnessError::NoTrackedFrames);
    }
    let total: f64 = tracked.iter().map(|s| s.t_total_ms).sum();
    let stage_sum = |f: fn(&StatsRecord) -> f64| tracked.iter().map(|s| f(s)).sum::<f64>();
    let stages = [
        stage_sum(|s| s.t_visible_ms),
        stage_sum(|s| s.t_gray_ms),
        stage_sum(|s| s.t_me_ms),
        stage_sum(|s| s.t_pose_ms),
    ];
    let shares = stages.map(|v| if total > 0.0 { 100.0 * v / total } else { 0.0 });
    let overhead = (100.0 - shares.iter().sum::<f64>()).max(0.0);
    Ok(Profile {
        frames: tracked.len(),
        mean_total_ms: total / tracked.len() as f64,
        shares,
        overhead,
    })
}
