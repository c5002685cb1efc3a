//! Synthetic sequences: ground-truth trajectories and rendered line images.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{OccluderSpec, OrbitSpec};
use super::io::{frame_path, write_poses, PoseRecord, GROUND_TRUTH_FILE};
use super::HarnessError;
use crate::geometry::{
    exp_map, log_map, project, CameraIntrinsics, PoseSE3, Vec2, Vec3, WireframeModel,
};
use crate::imaging::{encode_pgm, GrayImage};
use crate::rasterizer::{visibility_oracle, NEAR_PLANE};

/// Ground-truth camera path.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Orbit {
        frames: usize,
        orbit: OrbitSpec,
    },
    /// Frames spread evenly over the key poses, interpolated geodesically in
    /// rotation and linearly in camera centre.
    KeyPoses {
        frames: usize,
        keys: Vec<PoseSE3<f64>>,
    },
}

impl TrajectorySpec {
    pub fn frames(&self) -> usize {
        match self {
            TrajectorySpec::Orbit { frames, .. } | TrajectorySpec::KeyPoses { frames, .. } => {
                *frames
            }
        }
    }

    pub fn pose(&self, frame: usize) -> PoseSE3<f64> {
        match self {
            TrajectorySpec::Orbit { orbit, .. } => orbit_pose(orbit, frame),
            TrajectorySpec::KeyPoses { frames, keys } => {
                if keys.len() == 1 || *frames <= 1 {
                    return keys[0];
                }
                let u = frame as f64 / (*frames - 1) as f64 * (keys.len() - 1) as f64;
                let i = (u.floor() as usize).min(keys.len() - 2);
                interpolate(&keys[i], &keys[i + 1], u - i as f64)
            }
        }
    }

    pub fn poses(&self) -> Vec<PoseSE3<f64>> {
        (0..self.frames()).map(|i| self.pose(i)).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let TrajectorySpec::KeyPoses { keys, .. } = self {
            if keys.is_empty() {
                return Err(HarnessError::Config(
                    "key-pose trajectory needs at least one pose".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Camera on a circle around the origin, looking at it, image up along world -y.
pub fn orbit_pose(orbit: &OrbitSpec, frame: usize) -> PoseSE3<f64> {
    let az = (orbit.start_azimuth_deg + orbit.rate_deg_per_frame * frame as f64).to_radians();
    let el = orbit.elevation_deg.to_radians();
    let r = orbit.radius;
    let eye = [
        r * el.cos() * az.sin(),
        -r * el.sin(),
        -r * el.cos() * az.cos(),
    ];
    PoseSE3::look_at(eye, [0.0; 3], [0.0, -1.0, 0.0])
}

fn interpolate(a: &PoseSE3<f64>, b: &PoseSE3<f64>, s: f64) -> PoseSE3<f64> {
    let (ra, rb) = (a.rotation(), b.rotation());
    let delta = log_map(&(rb * ra.transpose()));
    let rot = exp_map(delta.scale(s)) * ra;
    let centre = a.camera_center().scale(1.0 - s) + b.camera_center().scale(s);
    PoseSE3::from_rotation(&rot, -(rot * centre))
}

/// Visible 2D pieces of the model's edges, found by ray-casting sub-segment
/// midpoints against the faces.
pub fn visible_segments(
    model: &WireframeModel,
    pose: &PoseSE3<f64>,
    k: &CameraIntrinsics,
) -> Vec<[Vec2<f64>; 2]> {
    let rot = pose.rotation();
    let mut out = Vec::new();
    for e in &model.edges {
        let (a, b) = (
            Vec3::from_array(model.vertices[e[0]]),
            Vec3::from_array(model.vertices[e[1]]),
        );
        let (ca, cb) = (rot * a + pose.t, rot * b + pose.t);
        // Clip to the near plane in camera space.
        let (mut s0, mut s1) = (0.0, 1.0);
        if ca.z < NEAR_PLANE && cb.z < NEAR_PLANE {
            continue;
        } else if ca.z < NEAR_PLANE {
            s0 = (NEAR_PLANE - ca.z) / (cb.z - ca.z);
        } else if cb.z < NEAR_PLANE {
            s1 = (NEAR_PLANE - ca.z) / (cb.z - ca.z);
        }
        if s1 <= s0 {
            continue;
        }
        let at = |s: f64| a + (b - a).scale(s);
        let px = |x: Vec3<f64>| project(x, pose, k).map(|p| p.pixel).ok();
        let (Some(p0), Some(p1)) = (px(at(s0)), px(at(s1))) else {
            continue;
        };
        let pieces = (((p1 - p0).norm() / 0.5).ceil() as usize).max(8);
        let mut run_start: Option<f64> = None;
        for i in 0..=pieces {
            let s = s0 + (s1 - s0) * i as f64 / pieces as f64;
            let visible = i < pieces && {
                let mid = s0 + (s1 - s0) * (i as f64 + 0.5) / pieces as f64;
                visibility_oracle(model, pose, k, at(mid).to_array())
            };
            match (visible, run_start) {
                (true, None) => run_start = Some(s),
                (false, Some(start)) => {
                    if let (Some(q0), Some(q1)) = (px(at(start)), px(at(s))) {
                        out.push([q0, q1]);
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    out
}

fn point_segment_distance(p: Vec2<f64>, a: Vec2<f64>, b: Vec2<f64>) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let s = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d.scale(s))).norm()
}

/// Anti-aliased dark lines (2 px wide) on white.
pub fn draw_lines(width: u32, height: u32, segments: &[[Vec2<f64>; 2]]) -> Vec<f64> {
    const HALF_WIDTH: f64 = 1.0;
    let mut coverage = vec![0.0f64; width as usize * height as usize];
    for &[a, b] in segments {
        let pad = HALF_WIDTH + 1.0;
        let x0 = (a.x.min(b.x) - pad).floor().max(0.0) as u32;
        let y0 = (a.y.min(b.y) - pad).floor().max(0.0) as u32;
        let x1 = ((a.x.max(b.x) + pad).ceil().max(0.0) as u32).min(width - 1);
        let y1 = ((a.y.max(b.y) + pad).ceil().max(0.0) as u32).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = point_segment_distance(Vec2::new(x as f64, y as f64), a, b);
                let c = (HALF_WIDTH + 0.5 - d).clamp(0.0, 1.0);
                let slot = &mut coverage[(y * width + x) as usize];
                *slot = slot.max(c);
            }
        }
    }
    coverage.into_iter().map(|c| 255.0 * (1.0 - c)).collect()
}

/// Axis-aligned occluding rectangle, inclusive bounds in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccluderRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl OccluderRect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Length of the segments' parts inside the rectangle.
    pub fn covered_length(&self, segments: &[[Vec2<f64>; 2]]) -> f64 {
        segments
            .iter()
            .map(|&[a, b]| {
                let d = b - a;
                let (mut t0, mut t1) = (0.0f64, 1.0f64);
                for (p, dp, lo, hi) in [(a.x, d.x, self.x0, self.x1), (a.y, d.y, self.y0, self.y1)]
                {
                    if dp.abs() < 1e-12 {
                        if p < lo || p > hi {
                            return 0.0;
                        }
                        continue;
                    }
                    let (u, v) = ((lo - p) / dp, (hi - p) / dp);
                    t0 = t0.max(u.min(v));
                    t1 = t1.min(u.max(v));
                }
                (t1 - t0).max(0.0) * d.norm()
            })
            .sum()
    }
}

/// Square block growing from just outside the bottom-left corner of the
/// segments' bounding box until it covers `fraction` of their total length.
/// Its inner sides cross the model outline instead of running along it.
pub fn corner_occluder(segments: &[[Vec2<f64>; 2]], fraction: f64) -> OccluderRect {
    let total: f64 = segments.iter().map(|[a, b]| (*b - *a).norm()).sum();
    let x_min = segments
        .iter()
        .map(|[a, b]| a.x.min(b.x))
        .fold(f64::INFINITY, f64::min);
    let y_max = segments
        .iter()
        .map(|[a, b]| a.y.max(b.y))
        .fold(f64::NEG_INFINITY, f64::max);
    // The outer sides stay well clear of the outline, beyond any search range.
    const MARGIN: f64 = 20.0;
    let rect = |side: f64| OccluderRect {
        x0: x_min - MARGIN,
        y0: y_max + MARGIN - side,
        x1: x_min - MARGIN + side,
        y1: y_max + MARGIN,
    };
    if segments.is_empty() {
        return rect(0.0);
    }
    let (mut lo, mut hi) = (0.0, 8192.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if rect(mid).covered_length(segments) < fraction * total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rect(hi)
}

/// Noise-free rendering of one frame, as floating-point intensities.
pub fn render_frame(
    model: &WireframeModel,
    pose: &PoseSE3<f64>,
    k: &CameraIntrinsics,
    occluder: Option<OccluderSpec>,
) -> Vec<f64> {
    let segments = visible_segments(model, pose, k);
    let mut img = draw_lines(k.width, k.height, &segments);
    if let Some(occ) = occluder {
        let rect = corner_occluder(&segments, occ.fraction);
        for y in 0..k.height {
            for x in 0..k.width {
                if rect.contains(x as f64, y as f64) {
                    img[(y * k.width + x) as usize] = occ.intensity as f64;
                }
            }
        }
    }
    img
}

/// Adds seeded Gaussian noise and quantizes to 8 bits. Each frame draws from
/// its own stream, so output does not depend on generation order.
pub fn quantize_with_noise(
    width: u32,
    height: u32,
    intensities: &[f64],
    sigma: f64,
    seed: u64,
    frame: usize,
) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let data = intensities
        .iter()
        .map(|&v| {
            let n = normal.map_or(0.0, |d| d.sample(&mut rng));
            (v + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, data).expect("buffer matches dimensions")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub noise_sigma: f64,
    pub seed: u64,
    pub occluder: Option<OccluderSpec>,
}

/// Renders every frame of `traj` into `out_dir` and writes the ground-truth
/// pose file. Returns the ground-truth poses.
pub fn generate_sequence(
    model: &WireframeModel,
    k: &CameraIntrinsics,
    traj: &TrajectorySpec,
    opts: &SynthOptions,
    out_dir: &Path,
) -> Result<Vec<PoseSE3<f64>>, HarnessError> {
    traj.validate()?;
    if !(opts.noise_sigma >= 0.0 && opts.noise_sigma.is_finite()) {
        return Err(HarnessError::Config(
            "noise must be a finite value >= 0".into(),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let poses = traj.poses();
    let mut records = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let clean = render_frame(model, pose, k, opts.occluder);
        let img = quantize_with_noise(k.width, k.height, &clean, opts.noise_sigma, opts.seed, i);
        let path = frame_path(out_dir, i);
        std::fs::write(&path, encode_pgm(&img)).map_err(|e| HarnessError::io(&path, e))?;
        records.push(PoseRecord::new(i, pose));
    }
    let header = [
        ("seed", opts.seed.to_string()),
        ("noise", opts.noise_sigma.to_string()),
    ];
    write_poses(&out_dir.join(GROUND_TRUTH_FILE), &header, &records)?;
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_keeps_radius_and_faces_origin() {
        let orbit = OrbitSpec::default();
        for f in [0, 30, 59] {
            let pose = orbit_pose(&orbit, f);
            assert!((pose.camera_center().norm() - 150.0).abs() < 1e-9);
            let p = project(Vec3::zero(), &pose, &CameraIntrinsics::qvga()).unwrap();
            assert!((p.pixel.x - 160.0).abs() < 1e-9 && (p.pixel.y - 120.0).abs() < 1e-9);
        }
    }

    #[test]
    fn key_poses_hit_their_endpoints() {
        let a = PoseSE3::look_at([0.0, 0.0, -150.0], [0.0; 3], [0.0, -1.0, 0.0]);
        let b = PoseSE3::look_at([100.0, -20.0, -120.0], [0.0; 3], [0.0, -1.0, 0.0]);
        let traj = TrajectorySpec::KeyPoses {
            frames: 11,
            keys: vec![a, b],
        };
        let close = |p: PoseSE3<f64>, q: PoseSE3<f64>| {
            p.params()
                .iter()
                .zip(q.params())
                .all(|(x, y)| (x - y).abs() < 1e-9)
        };
        assert!(close(traj.pose(0), a));
        assert!(close(traj.pose(10), b));
        let mid = traj.pose(5).camera_center();
        let expect = (a.camera_center() + b.camera_center()).scale(0.5);
        assert!((mid - expect).norm() < 1e-9);
    }

    #[test]
    fn line_profile_is_dark_on_white() {
        let seg = [Vec2::new(10.0, 20.0), Vec2::new(50.0, 20.0)];
        let img = draw_lines(64, 40, &[seg]);
        let at = |x: usize, y: usize| img[y * 64 + x];
        assert_eq!(at(30, 20), 0.0);
        assert_eq!(at(30, 19), 127.5);
        assert_eq!(at(30, 21), 127.5);
        assert_eq!(at(30, 22), 255.0);
        assert_eq!(at(30, 5), 255.0);
    }

    #[test]
    fn face_on_cube_shows_front_square_only() {
        let pose = PoseSE3::look_at([0.0, 0.0, -400.0], [0.0; 3], [0.0, -1.0, 0.0]);
        let segs = visible_segments(
            &WireframeModel::cube(60.0),
            &pose,
            &CameraIntrinsics::qvga(),
        );
        let total: f64 = segs.iter().map(|[a, b]| (*b - *a).norm()).sum();
        // Front face: 4 sides of 60 mm at 370 mm depth.
        let expect = 4.0 * 60.0 * 500.0 / 370.0;
        assert!((total - expect).abs() < 2.0, "{total} vs {expect}");
    }

    #[test]
    fn occluder_covers_requested_share() {
        // Unit-square outline scaled to 100 px: the block grows from (0, 100).
        let p = |x: f64, y: f64| Vec2::new(x, y);
        let segs = vec![
            [p(0.0, 0.0), p(100.0, 0.0)],
            [p(100.0, 0.0), p(100.0, 100.0)],
            [p(100.0, 100.0), p(0.0, 100.0)],
            [p(0.0, 100.0), p(0.0, 0.0)],
        ];
        let rect = corner_occluder(&segs, 0.2);
        // The block covers 40 px of the bottom side and 40 px of the left side.
        assert!(
            (rect.x1 - 40.0).abs() < 1e-9 && (rect.y0 - 60.0).abs() < 1e-9,
            "{rect:?}"
        );
        assert!((rect.covered_length(&segs) - 80.0).abs() < 1e-9);
        assert!(rect.contains(10.0, 99.0) && !rect.contains(50.0, 99.0));
    }

    #[test]
    fn noise_is_seeded_per_frame() {
        let clean = vec![128.0; 100];
        let a = quantize_with_noise(10, 10, &clean, 2.0, 7, 3);
        let b = quantize_with_noise(10, 10, &clean, 2.0, 7, 3);
        let c = quantize_with_noise(10, 10, &clean, 2.0, 7, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(quantize_with_noise(10, 10, &clean, 0.0, 7, 3)
            .data()
            .iter()
            .all(|&v| v == 128));
    }

    #[test]
    fn zero_frames_write_only_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let traj = TrajectorySpec::Orbit {
            frames: 0,
            orbit: OrbitSpec::default(),
        };
        let opts = SynthOptions {
            noise_sigma: 2.0,
            seed: 1,
            occluder: None,
        };
        let poses = generate_sequence(
            &WireframeModel::cube(60.0),
            &CameraIntrinsics::qvga(),
            &traj,
            &opts,
            dir.path(),
        )
        .unwrap();
        assert!(poses.is_empty());
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
