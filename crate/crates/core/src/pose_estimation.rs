//! Point-to-line reprojection residuals and Levenberg-Marquardt pose refinement.
//!
//! Each measurement ties a model point `X` to an image point `q` found along
//! the projected edge normal `n`. The signed residual is `r = (q - p(X)) . n`,
//! the distance from the projection `p` to the image line through `q`. The
//! solver minimizes `sum r^2`; `sum |r|` is reported as the frame error.
//!
//! Rotation updates are left-multiplied increments, `R <- exp(d) R`, so the
//! Jacobian is taken with respect to `d` at `d = 0`.

use std::time::{Duration, Instant};

use crate::error::TrackError;
use crate::geometry::{exp_map, CameraIntrinsics, Mat3, PoseSE3, Vec2, Vec3, WireframeModel};
use crate::imaging::GrayImage;
use crate::rasterizer::render_id_buffer;
use crate::realmath::{self, Backend, Real};
use crate::tracking::{collect_measurements, ControlPoint, TrackerConfig, MIN_MEASUREMENTS};

/// One point-to-line constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<R> {
    pub model_point: Vec3<R>,
    pub observed: Vec2<R>,
    pub normal: Vec2<R>,
}

impl<R: Real> Measurement<R> {
    pub fn from_control_point(cp: &ControlPoint<R>) -> Option<Self> {
        cp.matched.map(|q| Self {
            model_point: cp.model_point,
            observed: q,
            normal: cp.normal,
        })
    }
}

fn unit_tolerance<R: Real>() -> f64 {
    1e-6 + 64.0 * R::resolution()
}

fn check_unit<R: Real>(n: Vec2<R>) -> Result<(), TrackError> {
    let norm = n.norm().to_f64();
    if (norm - 1.0).abs() > unit_tolerance::<R>() {
        return Err(TrackError::NonUnitNormal { norm });
    }
    Ok(())
}

/// Signed point-to-line distance `(q - p) . n`; its absolute value is the
/// per-point reprojection error.
pub fn residual<R: Real>(p: Vec2<R>, q: Vec2<R>, n: Vec2<R>) -> Result<R, TrackError> {
    check_unit(n)?;
    Ok((q - p).dot(n))
}

/// Gradient of the residual with respect to `(d_omega, d_t)`.
pub fn residual_jacobian<R: Real>(
    point: Vec3<R>,
    pose: &PoseSE3<R>,
    intrinsics: &CameraIntrinsics,
    normal: Vec2<R>,
) -> Result<[R; 6], TrackError> {
    check_unit(normal)?;
    jacobian_row(point, &pose.rotation(), &pose.t, intrinsics, normal)
}

fn jacobian_row<R: Real>(
    point: Vec3<R>,
    rot: &Mat3<R>,
    t: &Vec3<R>,
    k: &CameraIntrinsics,
    n: Vec2<R>,
) -> Result<[R; 6], TrackError> {
    let rotated = *rot * point;
    let cam = rotated + *t;
    if cam.z <= R::zero() {
        return Err(crate::geometry::GeometryError::BehindCamera {
            depth: cam.z.to_f64(),
        }
        .into());
    }
    let inv_z = R::one() / cam.z;
    let fu = R::from_f64(k.fx) * n.x;
    let fv = R::from_f64(k.fy) * n.y;
    // g = n^T dp/dx_cam
    let g = Vec3::new(
        fu * inv_z,
        fv * inv_z,
        -(fu * cam.x + fv * cam.y) * inv_z * inv_z,
    );
    let d_omega = g.cross(rotated);
    Ok([d_omega.x, d_omega.y, d_omega.z, -g.x, -g.y, -g.z])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSettings {
    pub lambda0: f64,
    pub lambda_factor: f64,
    pub max_iterations: u32,
    /// Consecutive rejected steps before the solver stops at the current pose.
    pub max_rejections: u32,
    /// Overrides the backend default for the relative cost-decrease stop.
    pub relative_tolerance: Option<f64>,
    /// Overrides the backend default for the step-norm stop.
    pub step_tolerance: Option<f64>,
    /// Overrides the backend default for the smallest admissible pivot of the
    /// scaled normal matrix.
    pub degeneracy_tolerance: Option<f64>,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_factor: 10.0,
            max_iterations: 50,
            max_rejections: 10,
            relative_tolerance: None,
            step_tolerance: None,
            degeneracy_tolerance: None,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda0 > 0.0) || !(self.lambda_factor > 1.0) {
            return Err("lm_lambda0 must be > 0 and the damping factor > 1".into());
        }
        if self.max_iterations == 0 {
            return Err("lm_max_iter must be >= 1".into());
        }
        Ok(())
    }

    /// `(relative decrease, step norm, pivot)` thresholds for a backend.
    pub fn tolerances(&self, backend: Backend) -> (f64, f64, f64) {
        let (rel, step, pivot) = match backend {
            Backend::Float => (1e-6, 1e-8, 1e-10),
            Backend::Q40_23 | Backend::Q47_16 => (1e-4, 1e-5, 1e-4),
        };
        (
            self.relative_tolerance.unwrap_or(rel),
            self.step_tolerance.unwrap_or(step),
            self.degeneracy_tolerance.unwrap_or(pivot),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome<R> {
    pub pose: PoseSE3<R>,
    /// Sum of absolute residuals at the returned pose.
    pub err: f64,
    /// Sum of squared residuals at the returned pose.
    pub cost: f64,
    pub iterations: u32,
    pub accepted_steps: u32,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

type Mat6<R> = [[R; 6]; 6];

struct Linearization<R> {
    jtj: Mat6<R>,
    jtr: [R; 6],
}

fn residuals<R: Real>(
    ms: &[Measurement<R>],
    rot: &Mat3<R>,
    t: &Vec3<R>,
    k: &CameraIntrinsics,
) -> Result<Vec<R>, TrackError> {
    ms.iter()
        .map(|m| {
            let p = crate::geometry::project_with(m.model_point, rot, t, k)?;
            Ok((m.observed - p.pixel).dot(m.normal))
        })
        .collect()
}

fn sum_squares<R: Real>(r: &[R]) -> R {
    r.iter().fold(R::zero(), |acc, &v| acc + v * v)
}

fn linearize<R: Real>(
    ms: &[Measurement<R>],
    r: &[R],
    rot: &Mat3<R>,
    t: &Vec3<R>,
    k: &CameraIntrinsics,
) -> Result<Linearization<R>, TrackError> {
    let mut jtj = [[R::zero(); 6]; 6];
    let mut jtr = [R::zero(); 6];
    for (m, &ri) in ms.iter().zip(r) {
        let row = jacobian_row(m.model_point, rot, t, k, m.normal)?;
        for i in 0..6 {
            jtr[i] += row[i] * ri;
            for j in i..6 {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..6 {
        for j in 0..i {
            jtj[i][j] = jtj[j][i];
        }
    }
    Ok(Linearization { jtj, jtr })
}

enum SolveFailure {
    /// A diagonal entry of J^T J vanished: some parameter is unconstrained.
    ZeroColumn,
    /// Cholesky pivot below the threshold.
    SmallPivot,
}

/// Solves `(A + lambda diag(A)) x = -b` in Jacobi-scaled form, which keeps
/// every entry of the factored matrix in `[-1, 1]` for the fixed-point backends.
fn solve_damped<R: Real>(
    a: &Mat6<R>,
    b: &[R; 6],
    lambda: R,
    min_pivot: R,
) -> Result<[R; 6], SolveFailure> {
    let mut scale = [R::zero(); 6];
    for i in 0..6 {
        if a[i][i] <= R::zero() {
            return Err(SolveFailure::ZeroColumn);
        }
        scale[i] = R::one() / a[i][i].sqrt();
    }
    let mut m = [[R::zero(); 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            m[i][j] = a[i][j] * scale[i] * scale[j];
        }
        m[i][i] = R::one() + lambda;
    }
    // Cholesky, lower triangle in place.
    for j in 0..6 {
        let mut d = m[j][j];
        for k in 0..j {
            d -= m[j][k] * m[j][k];
        }
        if d <= min_pivot {
            return Err(SolveFailure::SmallPivot);
        }
        let l = d.sqrt();
        m[j][j] = l;
        for i in (j + 1)..6 {
            let mut s = m[i][j];
            for k in 0..j {
                s -= m[i][k] * m[j][k];
            }
            m[i][j] = s / l;
        }
    }
    let mut y = [R::zero(); 6];
    for i in 0..6 {
        let mut s = -(b[i] * scale[i]);
        for k in 0..i {
            s -= m[i][k] * y[k];
        }
        y[i] = s / m[i][i];
    }
    let mut x = [R::zero(); 6];
    for i in (0..6).rev() {
        let mut s = y[i];
        for k in (i + 1)..6 {
            s -= m[k][i] * x[k];
        }
        x[i] = s / m[i][i];
    }
    Ok(std::array::from_fn(|i| x[i] * scale[i]))
}

fn apply_step<R: Real>(rot: &Mat3<R>, t: &Vec3<R>, step: &[R; 6]) -> (Mat3<R>, Vec3<R>) {
    let d_rot = exp_map(Vec3::new(step[0], step[1], step[2]));
    (d_rot * *rot, *t + Vec3::new(step[3], step[4], step[5]))
}

/// Levenberg-Marquardt refinement of `initial` against point-to-line measurements.
pub fn solve_lm<R: Real>(
    measurements: &[Measurement<R>],
    initial: &PoseSE3<R>,
    intrinsics: &CameraIntrinsics,
    settings: &LmSettings,
) -> Result<LmOutcome<R>, TrackError> {
    if measurements.len() < MIN_MEASUREMENTS {
        return Err(TrackError::InsufficientMeasurements {
            found: measurements.len(),
            required: MIN_MEASUREMENTS,
        });
    }
    for m in measurements {
        check_unit(m.normal)?;
    }
    let (rel_tol, step_tol, pivot_tol) = settings.tolerances(R::BACKEND);
    let min_pivot = R::from_f64(pivot_tol);
    let factor = R::from_f64(settings.lambda_factor);

    let mut rot = initial.rotation();
    let mut t = initial.t;
    let mut r = residuals(measurements, &rot, &t, intrinsics)?;
    let mut cost = sum_squares(&r);
    let mut history = vec![cost.to_f64()];
    let mut lambda = R::from_f64(settings.lambda0);
    let mut iterations = 0;
    let mut accepted = 0;

    if cost > R::zero() {
        // Observability check on the undamped system.
        let lin = linearize(measurements, &r, &rot, &t, intrinsics)?;
        if solve_damped(&lin.jtj, &lin.jtr, R::zero(), min_pivot).is_err() {
            return Err(TrackError::DegenerateGeometry);
        }
    }

    while cost > R::zero() && iterations < settings.max_iterations {
        iterations += 1;
        let lin = linearize(measurements, &r, &rot, &t, intrinsics)?;
        let mut rejections = 0;
        let mut improved = None;
        while rejections < settings.max_rejections {
            let step = match solve_damped(&lin.jtj, &lin.jtr, lambda, R::zero()) {
                Ok(step) => step,
                Err(SolveFailure::ZeroColumn) => return Err(TrackError::DegenerateGeometry),
                Err(SolveFailure::SmallPivot) => {
                    lambda *= factor;
                    rejections += 1;
                    continue;
                }
            };
            let (new_rot, new_t) = apply_step(&rot, &t, &step);
            let candidate = residuals(measurements, &new_rot, &new_t, intrinsics)
                .ok()
                .map(|nr| (sum_squares(&nr), nr))
                .filter(|(c, _)| *c < cost);
            match candidate {
                Some((new_cost, new_r)) => {
                    lambda /= factor;
                    improved = Some((step, new_rot, new_t, new_cost, new_r));
                    break;
                }
                None => {
                    lambda *= factor;
                    rejections += 1;
                }
            }
        }
        let Some((step, new_rot, new_t, new_cost, new_r)) = improved else {
            break;
        };
        let decrease = ((cost - new_cost) / cost).to_f64();
        let step_norm = step
            .iter()
            .map(|v| v.to_f64() * v.to_f64())
            .sum::<f64>()
            .sqrt();
        (rot, t, cost, r) = (new_rot, new_t, new_cost, new_r);
        accepted += 1;
        history.push(cost.to_f64());
        if decrease < rel_tol || step_norm < step_tol {
            break;
        }
    }

    Ok(LmOutcome {
        pose: if accepted == 0 {
            *initial
        } else {
            PoseSE3::from_rotation(&rot, t)
        },
        err: r.iter().map(|v| v.abs().to_f64()).sum(),
        cost: cost.to_f64(),
        iterations,
        accepted_steps: accepted,
        cost_history: history,
    })
}

/// Per-frame counters and stage timings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStats {
    pub sampled: usize,
    pub matched: usize,
    pub err: f64,
    pub iterations: u32,
    pub t_visible: Duration,
    pub t_gray: Duration,
    pub t_me: Duration,
    pub t_pose: Duration,
    pub t_total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame<R> {
    pub pose: PoseSE3<R>,
    pub stats: FrameStats,
}

/// A failed frame keeps whatever stats were gathered before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct TrackFailure {
    #[source]
    pub error: TrackError,
    pub stats: FrameStats,
}

/// Visible-edge rendering, measurement collection and pose refinement for one
/// frame, starting from the previous pose.
#[allow(clippy::result_large_err)]
pub fn track_frame<R: Real>(
    prev_pose: &PoseSE3<R>,
    gray: &GrayImage,
    model: &WireframeModel,
    intrinsics: &CameraIntrinsics,
    cfg: &TrackerConfig,
) -> Result<TrackedFrame<R>, TrackFailure> {
    let mut stats = FrameStats::default();
    let start = Instant::now();
    realmath::clear_fault();
    let fail = |error: TrackError, mut stats: FrameStats| {
        stats.t_total = start.elapsed();
        realmath::clear_fault();
        TrackFailure { error, stats }
    };

    let t0 = Instant::now();
    let (ids, _) = render_id_buffer(model, &prev_pose.cast::<f64>(), intrinsics);
    stats.t_visible = t0.elapsed();

    let t0 = Instant::now();
    let collected = collect_measurements(model, prev_pose, intrinsics, gray, &ids, cfg);
    stats.t_me = t0.elapsed();
    let set = match collected {
        Ok(set) => set,
        Err(e) => {
            if let TrackError::InsufficientMeasurements { found, .. } = e {
                stats.matched = found;
            }
            return Err(fail(e, stats));
        }
    };
    stats.sampled = set.sampled;
    stats.matched = set.matched.len();
    if let Some(fault) = realmath::take_fault() {
        return Err(fail(fault.into(), stats));
    }

    let t0 = Instant::now();
    let measurements: Vec<Measurement<R>> = set
        .matched
        .iter()
        .filter_map(Measurement::from_control_point)
        .collect();
    let solved = solve_lm(&measurements, prev_pose, intrinsics, &cfg.lm);
    stats.t_pose = t0.elapsed();
    let outcome = match solved {
        Ok(o) => o,
        Err(e) => return Err(fail(e, stats)),
    };
    if let Some(fault) = realmath::take_fault() {
        return Err(fail(fault.into(), stats));
    }
    stats.err = outcome.err;
    stats.iterations = outcome.iterations;
    stats.t_total = start.elapsed();
    Ok(TrackedFrame {
        pose: outcome.pose,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Tracked,
    /// Frame failed; the previous pose is carried forward.
    Coasting,
    /// More consecutive failures than the coast budget allows.
    Lost,
}

impl FrameStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameStatus::Tracked => "ok",
            FrameStatus::Coasting => "coast",
            FrameStatus::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport<R> {
    pub pose: PoseSE3<R>,
    pub stats: FrameStats,
    pub status: FrameStatus,
    pub error: Option<TrackError>,
}

/// Sequential tracker: carries the pose from frame to frame and applies the
/// coast-then-lose failure policy.
#[derive(Debug, Clone)]
pub struct Tracker<R> {
    model: WireframeModel,
    intrinsics: CameraIntrinsics,
    cfg: TrackerConfig,
    pose: PoseSE3<R>,
    failures: u32,
}

impl<R: Real> Tracker<R> {
    pub fn new(
        model: WireframeModel,
        intrinsics: CameraIntrinsics,
        cfg: TrackerConfig,
        initial: PoseSE3<R>,
    ) -> Self {
        Self {
            model,
            intrinsics,
            cfg,
            pose: initial,
            failures: 0,
        }
    }

    pub fn pose(&self) -> &PoseSE3<R> {
        &self.pose
    }

    pub fn process(&mut self, gray: &GrayImage) -> FrameReport<R> {
        match track_frame(&self.pose, gray, &self.model, &self.intrinsics, &self.cfg) {
            Ok(frame) => {
                self.pose = frame.pose;
                self.failures = 0;
                FrameReport {
                    pose: frame.pose,
                    stats: frame.stats,
                    status: FrameStatus::Tracked,
                    error: None,
                }
            }
            Err(failure) => {
                self.failures += 1;
                let status = if self.failures > self.cfg.coast_frames {
                    FrameStatus::Lost
                } else {
                    FrameStatus::Coasting
                };
                FrameReport {
                    pose: self.pose,
                    stats: failure.stats,
                    status,
                    error: Some(failure.error),
                }
            }
        }
    }
}
