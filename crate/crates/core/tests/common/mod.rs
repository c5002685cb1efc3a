#![allow(dead_code)]

use std::path::Path;

use edgetrack::geometry::{project, CameraIntrinsics, PoseSE3, Vec3, WireframeModel};
use edgetrack::harness::{generate_sequence, RunConfig, SynthOptions, TrajectorySpec};
use rand::Rng;

pub const CUBE_MODEL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/cube60.model");
pub const DESK_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.conf");
pub const STANDARD_FRAMES: usize = 60;
pub const STANDARD_SEED: u64 = 1;

pub fn desk_config() -> RunConfig {
    RunConfig::load(DESK_CONFIG).expect("desk config parses")
}

/// Renders the desk sequence (optionally with the 20% occluder) into `dir`.
pub fn standard_sequence(dir: &Path, occluded: bool, seed: u64) -> Vec<PoseSE3<f64>> {
    let cfg = desk_config();
    let model = WireframeModel::load(CUBE_MODEL).unwrap();
    let traj = TrajectorySpec::Orbit {
        frames: STANDARD_FRAMES,
        orbit: cfg.orbit,
    };
    let occluder = occluded.then_some(edgetrack::harness::OccluderSpec {
        fraction: 0.2,
        intensity: 200,
    });
    let opts = SynthOptions {
        noise_sigma: cfg.noise_sigma,
        seed,
        occluder,
    };
    generate_sequence(&model, &cfg.intrinsics, &traj, &opts, dir).unwrap()
}

pub fn unit_vector(rng: &mut impl Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

/// Convex hull of points in general position, by brute force over triples.
/// Faces are wound counter-clockwise seen from outside.
pub fn convex_hull(points: &[[f64; 3]]) -> Vec<[usize; 3]> {
    let p: Vec<Vec3<f64>> = points.iter().map(|&a| Vec3::from_array(a)).collect();
    let n = p.len();
    let mut faces = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let normal = (p[j] - p[i]).cross(p[k] - p[i]);
                let side = |m: usize| normal.dot(p[m] - p[i]);
                let others = (0..n).filter(|&m| m != i && m != j && m != k);
                if others.clone().all(|m| side(m) < 0.0) {
                    faces.push([i, j, k]);
                } else if others.clone().all(|m| side(m) > 0.0) {
                    faces.push([i, k, j]);
                }
            }
        }
    }
    faces
}

/// Random convex polyhedron: hull of `count` points on a sphere of `radius`.
pub fn random_polyhedron(rng: &mut impl Rng, count: usize, radius: f64) -> WireframeModel {
    let points: Vec<[f64; 3]> = (0..count)
        .map(|_| unit_vector(rng).scale(radius).to_array())
        .collect();
    let faces = convex_hull(&points);
    WireframeModel::new(points, faces, None).unwrap()
}

/// Camera looking roughly at the origin from `distance`, with a random roll
/// and a small aim offset.
pub fn random_view(rng: &mut impl Rng, distance: f64) -> PoseSE3<f64> {
    let eye = unit_vector(rng).scale(distance);
    let target = unit_vector(rng).scale(rng.random_range(0.0..10.0));
    loop {
        let up = unit_vector(rng);
        let forward = (target - eye).scale(1.0 / (target - eye).norm());
        if up.cross(forward).norm() > 0.2 {
            return PoseSE3::look_at(eye.to_array(), target.to_array(), up.to_array());
        }
    }
}

/// True when every vertex projects inside the image in front of the camera.
pub fn fully_in_view(model: &WireframeModel, pose: &PoseSE3<f64>, k: &CameraIntrinsics) -> bool {
    model
        .vertices
        .iter()
        .all(|&v| match project(Vec3::from_array(v), pose, k) {
            Ok(p) => {
                p.pixel.x >= 0.0
                    && p.pixel.y >= 0.0
                    && p.pixel.x <= (k.width - 1) as f64
                    && p.pixel.y <= (k.height - 1) as f64
            }
            Err(_) => false,
        })
}
