//! Camera model, SE(3) pose with exponential-map rotation, and the wireframe model.
//!
//! Conventions: poses are camera-from-world (`x_cam = R * X + t`), image
//! coordinates grow rightward in `u` and downward in `v`, model units are mm.

mod linalg;
mod model;

pub use linalg::{Mat3, Vec2, Vec3};
pub use model::{ModelError, WireframeModel, MAX_EDGES};

use thiserror::Error;

use crate::realmath::Real;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// Below this rotation angle the Rodrigues formula switches to its Taylor expansion.
pub const SMALL_ANGLE: f64 = 1e-6;

fn small_angle<R: Real>() -> R {
    // Fixed-point formats need a few ulps of headroom so theta/2 stays nonzero.
    R::from_f64(SMALL_ANGLE.max(64.0 * R::resolution()))
}

/// Rotation matrix for an axis-angle vector (Rodrigues).
pub fn exp_map<R: Real>(omega: Vec3<R>) -> Mat3<R> {
    let k = omega.hat();
    let k2 = k * k;
    let theta = omega.norm();
    let half = R::from_f64(0.5);
    if theta <= small_angle::<R>() {
        return Mat3::identity() + k + k2.scale(half);
    }
    let a = theta.sin() / theta;
    // (1 - cos t) / t^2 written with the half angle; stays accurate in fixed point.
    let half_theta = theta * half;
    let sinc_half = half_theta.sin() / half_theta;
    let b = half * sinc_half * sinc_half;
    Mat3::identity() + k.scale(a) + k2.scale(b)
}

/// Axis-angle vector of a rotation matrix, canonicalized so `|omega|` is in `[0, pi]`.
pub fn log_map<R: Real>(rot: &Mat3<R>) -> Vec3<R> {
    let m = &rot.m;
    let half = R::from_f64(0.5);
    let v = Vec3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]).scale(half);
    let cos_theta = ((rot.trace() - R::one()) * half)
        .max(-R::one())
        .min(R::one());
    let sin_theta = v.norm();
    let theta = sin_theta.atan2(cos_theta);

    if sin_theta <= small_angle::<R>() && cos_theta > R::zero() {
        return v;
    }
    if cos_theta < R::zero() && sin_theta < R::from_f64(0.1) {
        // Near pi the antisymmetric part vanishes; read the axis from the
        // symmetric part instead: (R + R^T)/2 - cos(t) I = (1 - cos t) a a^T.
        let one_minus_cos = R::one() - cos_theta;
        let sym = |i: usize, j: usize| (m[i][j] + m[j][i]) * half;
        let diag = [
            sym(0, 0) - cos_theta,
            sym(1, 1) - cos_theta,
            sym(2, 2) - cos_theta,
        ];
        let k = (0..3)
            .max_by(|&a, &b| diag[a].total_cmp(&diag[b]))
            .unwrap_or(0);
        let mut col = Vec3::new(sym(0, k), sym(1, k), sym(2, k));
        col[k] = diag[k];
        let mut axis = col.scale(R::one() / (diag[k].max(R::zero()) * one_minus_cos).sqrt());
        if axis.dot(v) < R::zero() {
            axis = -axis;
        }
        return axis.scale(theta);
    }
    v.scale(theta / sin_theta)
}

/// Camera-from-world pose: exponential-map rotation plus translation (mm).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseSE3<R> {
    pub omega: Vec3<R>,
    pub t: Vec3<R>,
}

impl<R: Real> PoseSE3<R> {
    pub fn new(omega: Vec3<R>, t: Vec3<R>) -> Self {
        Self { omega, t }
    }

    pub fn identity() -> Self {
        Self {
            omega: Vec3::zero(),
            t: Vec3::zero(),
        }
    }

    pub fn from_params(p: [f64; 6]) -> Self {
        Self {
            omega: Vec3::from_array([p[0], p[1], p[2]]),
            t: Vec3::from_array([p[3], p[4], p[5]]),
        }
    }

    pub fn params(&self) -> [f64; 6] {
        let (w, t) = (self.omega.to_array(), self.t.to_array());
        [w[0], w[1], w[2], t[0], t[1], t[2]]
    }

    /// Builds a pose from a rotation matrix, re-extracting the canonical exp-map vector.
    pub fn from_rotation(rot: &Mat3<R>, t: Vec3<R>) -> Self {
        Self {
            omega: log_map(rot),
            t,
        }
    }

    pub fn rotation(&self) -> Mat3<R> {
        exp_map(self.omega)
    }

    pub fn transform(&self, x: Vec3<R>) -> Vec3<R> {
        self.rotation() * x + self.t
    }

    /// Camera center in world coordinates, `-R^T t`.
    pub fn camera_center(&self) -> Vec3<R> {
        -(self.rotation().transpose() * self.t)
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let r = self.rotation();
        Self::from_rotation(&(r * other.rotation()), r * other.t + self.t)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        Self::from_rotation(&rt, -(rt * self.t))
    }

    pub fn cast<S: Real>(&self) -> PoseSE3<S> {
        PoseSE3 {
            omega: self.omega.cast(),
            t: self.t.cast(),
        }
    }
}

impl PoseSE3<f64> {
    /// Camera at `eye` looking at `target`, with image-up roughly along `up`.
    pub fn look_at(eye: [f64; 3], target: [f64; 3], up: [f64; 3]) -> Self {
        let eye = Vec3::from_array(eye);
        let forward = Vec3::from_array(target) - eye;
        let z = forward.scale(1.0 / forward.norm());
        // Image v grows downward, so the camera y axis points along -up.
        let down = -Vec3::from_array(up);
        let x = down.cross(z);
        let x = x.scale(1.0 / x.norm());
        let y = z.cross(x);
        let rot = Mat3::from_rows(x, y, z);
        Self::from_rotation(&rot, -(rot * eye))
    }
}

/// Pinhole intrinsics, no distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(
                "focal lengths must be positive",
            ));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point outside the image",
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// QVGA camera used by the desk-scale sequences.
    pub fn qvga() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
        }
    }

    /// Pixel coordinates of a camera-space point (no depth check).
    pub fn pixel<R: Real>(&self, x_cam: Vec3<R>) -> Vec2<R> {
        let inv_z = R::one() / x_cam.z;
        Vec2::new(
            R::from_f64(self.fx) * x_cam.x * inv_z + R::from_f64(self.cx),
            R::from_f64(self.fy) * x_cam.y * inv_z + R::from_f64(self.cy),
        )
    }

    /// Camera-space point at `depth` along the ray through pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> [f64; 3] {
        [
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<R> {
    pub pixel: Vec2<R>,
    pub depth: R,
}

/// Projects a world point; fails when it is not strictly in front of the camera.
pub fn project<R: Real>(
    point: Vec3<R>,
    pose: &PoseSE3<R>,
    intrinsics: &CameraIntrinsics,
) -> Result<Projection<R>, GeometryError> {
    project_with(point, &pose.rotation(), &pose.t, intrinsics)
}

/// [`project`] with a precomputed rotation matrix.
pub fn project_with<R: Real>(
    point: Vec3<R>,
    rot: &Mat3<R>,
    t: &Vec3<R>,
    intrinsics: &CameraIntrinsics,
) -> Result<Projection<R>, GeometryError> {
    let x_cam = *rot * point + *t;
    if x_cam.z <= R::zero() {
        return Err(GeometryError::BehindCamera {
            depth: x_cam.z.to_f64(),
        });
    }
    Ok(Projection {
        pixel: intrinsics.pixel(x_cam),
        depth: x_cam.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realmath::Q40_23;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    /// Independent rotation via unit quaternion.
    fn quat_rotation(w: [f64; 3]) -> [[f64; 3]; 3] {
        let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
        let (qw, qx, qy, qz) = (c, s * w[0] / theta, s * w[1] / theta, s * w[2] / theta);
        [
            [
                1.0 - 2.0 * (qy * qy + qz * qz),
                2.0 * (qx * qy - qz * qw),
                2.0 * (qx * qz + qy * qw),
            ],
            [
                2.0 * (qx * qy + qz * qw),
                1.0 - 2.0 * (qx * qx + qz * qz),
                2.0 * (qy * qz - qx * qw),
            ],
            [
                2.0 * (qx * qz - qy * qw),
                2.0 * (qy * qz + qx * qw),
                1.0 - 2.0 * (qx * qx + qy * qy),
            ],
        ]
    }

    fn orthonormality_error<R: Real>(r: &Mat3<R>) -> (f64, f64) {
        let rrt = *r * r.transpose();
        (
            rrt.max_abs_diff(&Mat3::identity()),
            (r.determinant().to_f64() - 1.0).abs(),
        )
    }

    #[test]
    fn exp_map_identity_and_quarter_turn() {
        assert_eq!(exp_map(Vec3::<f64>::zero()), Mat3::identity());
        let r = exp_map(v(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let p = r * v(1.0, 0.0, 0.0);
        assert!((p - v(0.0, 1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn exp_map_matches_quaternion() {
        let w = [0.1, 0.2, 0.3];
        let r = exp_map(Vec3::from_array(w));
        let q = Mat3 {
            m: quat_rotation(w),
        };
        assert!(r.max_abs_diff(&q) < 1e-12);
        let (orth, det) = orthonormality_error(&r);
        assert!(orth < 1e-6 && det < 1e-6);
    }

    #[test]
    fn exp_map_small_angle_branch() {
        let w = v(3e-7, -2e-7, 1e-7);
        let r = exp_map(w);
        let q = Mat3 {
            m: quat_rotation(w.to_array()),
        };
        assert!(r.max_abs_diff(&q) < 1e-15);
    }

    #[test]
    fn fixed_exp_map_is_orthonormal() {
        let r = exp_map(Vec3::<Q40_23>::from_array([0.4, -1.1, 0.7]));
        let (orth, det) = orthonormality_error(&r);
        assert!(orth < 1e-3 && det < 1e-3, "{orth} {det}");
    }

    #[test]
    fn log_map_near_pi() {
        let axis = v(1.0, 2.0, -2.0).scale(1.0 / 3.0);
        for theta in [std::f64::consts::PI, std::f64::consts::PI - 1e-4, 3.0] {
            let w = axis.scale(theta);
            let back = log_map(&exp_map(w));
            assert!(exp_map(back).max_abs_diff(&exp_map(w)) < 1e-9);
            assert!(back.norm() <= std::f64::consts::PI + 1e-12);
        }
    }

    #[test]
    fn project_examples() {
        let k = CameraIntrinsics::qvga();
        let id = PoseSE3::<f64>::identity();
        let p = project(v(0.0, 0.0, 150.0), &id, &k).unwrap();
        assert_eq!((p.pixel.x, p.pixel.y, p.depth), (160.0, 120.0, 150.0));
        let p = project(v(30.0, 0.0, 150.0), &id, &k).unwrap();
        assert!((p.pixel.x - 260.0).abs() < 1e-12 && (p.pixel.y - 120.0).abs() < 1e-12);
        assert!(matches!(
            project(v(0.0, 0.0, -10.0), &id, &k),
            Err(GeometryError::BehindCamera { .. })
        ));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 160.0, 120.0, 320, 240).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 320.0, 120.0, 320, 240).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 160.0, 120.0, 320, 240).is_ok());
    }

    #[test]
    fn look_at_points_camera_at_target() {
        let pose = PoseSE3::look_at([100.0, -20.0, -110.0], [0.0, 0.0, 0.0], [0.0, -1.0, 0.0]);
        let c = pose.camera_center();
        assert!((c - v(100.0, -20.0, -110.0)).norm() < 1e-9);
        let p = project(Vec3::zero(), &pose, &CameraIntrinsics::qvga()).unwrap();
        assert!((p.pixel.x - 160.0).abs() < 1e-9 && (p.pixel.y - 120.0).abs() < 1e-9);
    }

    fn omega_strategy() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(-1.8f64..1.8)
    }

    proptest! {
        #[test]
        fn exp_map_orthonormal(w in omega_strategy()) {
            let (orth, det) = orthonormality_error(&exp_map(Vec3::<f64>::from_array(w)));
            prop_assert!(orth < 1e-6 && det < 1e-6);
            let (orth, det) = orthonormality_error(&exp_map(Vec3::<Q40_23>::from_array(w)));
            prop_assert!(orth < 1e-3 && det < 1e-3);
        }

        #[test]
        fn exp_map_inverse(w in omega_strategy()) {
            let w = Vec3::<f64>::from_array(w);
            let prod = exp_map(w) * exp_map(-w);
            prop_assert!(prod.max_abs_diff(&Mat3::identity()) < 1e-9);
        }

        #[test]
        fn log_exp_round_trip(w in omega_strategy()) {
            let w = Vec3::<f64>::from_array(w);
            let back = log_map(&exp_map(w));
            if w.norm() <= std::f64::consts::PI {
                prop_assert!((back - w).norm() < 1e-9);
            }
            prop_assert!(back.norm() <= std::f64::consts::PI + 1e-12);
        }

        #[test]
        fn project_unproject(
            x in -80.0f64..80.0, y in -80.0f64..80.0, z in 20.0f64..400.0,
            w in omega_strategy(), t in prop::array::uniform3(-50.0f64..50.0),
        ) {
            let k = CameraIntrinsics::qvga();
            let pose = PoseSE3::new(Vec3::from_array(w), Vec3::from_array(t));
            let world = pose.inverse().transform(v(x, y, z));
            let p = project(world, &pose, &k).unwrap();
            let cam = k.unproject(p.pixel.x, p.pixel.y, p.depth);
            let back = pose.inverse().transform(Vec3::from_array(cam));
            prop_assert!((back - world).norm() < 1e-6);
        }
    }
}
