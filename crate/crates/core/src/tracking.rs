//! Control-point sampling along visible projected edges and the Moving-Edges
//! search for each point's image correspondence.

use crate::error::TrackError;
use crate::geometry::{CameraIntrinsics, Mat3, PoseSE3, Vec2, Vec3, WireframeModel};
use crate::imaging::GrayImage;
use crate::pose_estimation::LmSettings;
use crate::rasterizer::{is_point_visible, IdBuffer, VisibilityMode, NEAR_PLANE};
use crate::realmath::Real;

/// Six pose parameters need at least six scalar constraints.
pub const MIN_MEASUREMENTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Spacing between control points along a projected edge (px).
    pub sampling_step: f64,
    /// Half-length of the search segment along the edge normal (px).
    pub search_range: u32,
    /// Minimum gradient (gray levels) for a match.
    pub gradient_threshold: f64,
    pub visibility: VisibilityMode,
    pub lm: LmSettings,
    /// Failed frames tolerated on the previous pose before tracking is lost.
    pub coast_frames: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sampling_step: 10.0,
            search_range: 8,
            gradient_threshold: 10.0,
            visibility: VisibilityMode::Tolerant,
            lm: LmSettings::default(),
            coast_frames: 3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sampling_step >= 2.0) {
            return Err(format!(
                "sampling_step must be >= 2 (got {})",
                self.sampling_step
            ));
        }
        if self.search_range < 1 {
            return Err("search_range must be >= 1".into());
        }
        if !(self.gradient_threshold >= 0.0) {
            return Err(format!(
                "gradient_threshold must be >= 0 (got {})",
                self.gradient_threshold
            ));
        }
        self.lm.validate()
    }
}

/// A measurement site on a projected model edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint<R> {
    pub edge_index: usize,
    /// Projected position (sub-pixel).
    pub position: Vec2<R>,
    /// Unit normal of the projected edge.
    pub normal: Vec2<R>,
    /// World point on the model edge that projects to `position`.
    pub model_point: Vec3<R>,
    /// Image correspondence found by the search, on `position + s * normal`.
    pub matched: Option<Vec2<R>>,
    /// Gradient magnitude at the match.
    pub likelihood: R,
}

/// The on-screen part of a projected model edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSegment<R> {
    pub start: Vec2<R>,
    pub end: Vec2<R>,
    pub start_model: Vec3<R>,
    pub end_model: Vec3<R>,
    /// Camera-space depths of the two endpoints.
    pub start_depth: R,
    pub end_depth: R,
}

impl<R: Real> ProjectedSegment<R> {
    /// Segment whose endpoints sit at equal depth (screen and model
    /// parameterizations then coincide).
    pub fn flat(start: Vec2<R>, end: Vec2<R>) -> Self {
        let lift = |p: Vec2<R>| Vec3::new(p.x, p.y, R::zero());
        Self {
            start,
            end,
            start_model: lift(start),
            end_model: lift(end),
            start_depth: R::one(),
            end_depth: R::one(),
        }
    }

    pub fn length(&self) -> R {
        (self.end - self.start).norm()
    }

    /// Model point at screen parameter `t`, using perspective-correct interpolation.
    pub fn model_point_at(&self, t: R) -> Vec3<R> {
        let one = R::one();
        let s = t * self.start_depth / ((one - t) * self.end_depth + t * self.start_depth);
        self.start_model + (self.end_model - self.start_model).scale(s)
    }

    fn sub_segment(&self, t0: R, t1: R) -> Self {
        let one = R::one();
        let screen = |t: R| self.start + (self.end - self.start).scale(t);
        let depth = |t: R| one / ((one - t) / self.start_depth + t / self.end_depth);
        Self {
            start: screen(t0),
            end: screen(t1),
            start_model: self.model_point_at(t0),
            end_model: self.model_point_at(t1),
            start_depth: depth(t0),
            end_depth: depth(t1),
        }
    }
}

/// Liang-Barsky clip against `[lo, hi]` on both axes.
fn clip_rect<R: Real>(p: Vec2<R>, q: Vec2<R>, lo: Vec2<R>, hi: Vec2<R>) -> Option<(R, R)> {
    let (mut t0, mut t1) = (R::zero(), R::one());
    let d = q - p;
    for (pp, dd, l, h) in [(p.x, d.x, lo.x, hi.x), (p.y, d.y, lo.y, hi.y)] {
        for (num, den) in [(pp - l, -dd), (h - pp, dd)] {
            if den == R::zero() {
                if num < R::zero() {
                    return None;
                }
            } else {
                let t = num / den;
                if den < R::zero() {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Projects edge `edge` and clips it to the near plane and the image.
pub fn project_edge<R: Real>(
    model: &WireframeModel,
    edge: usize,
    rot: &Mat3<R>,
    t: &Vec3<R>,
    intrinsics: &CameraIntrinsics,
) -> Option<ProjectedSegment<R>> {
    let [ia, ib] = model.edges[edge];
    let (mut a, mut b) = (
        Vec3::from_array(model.vertices[ia]),
        Vec3::from_array(model.vertices[ib]),
    );
    let (mut ca, mut cb) = (*rot * a + *t, *rot * b + *t);
    let near = R::from_f64(NEAR_PLANE);
    match (ca.z >= near, cb.z >= near) {
        (false, false) => return None,
        (true, true) => {}
        (a_in, _) => {
            let s = (near - ca.z) / (cb.z - ca.z);
            let (cut_cam, cut_model) = (ca + (cb - ca).scale(s), a + (b - a).scale(s));
            if a_in {
                (cb, b) = (cut_cam, cut_model);
            } else {
                (ca, a) = (cut_cam, cut_model);
            }
        }
    }
    let full = ProjectedSegment {
        start: intrinsics.pixel(ca),
        end: intrinsics.pixel(cb),
        start_model: a,
        end_model: b,
        start_depth: ca.z,
        end_depth: cb.z,
    };
    let lo = Vec2::new(R::zero(), R::zero());
    let hi = Vec2::from_f64(
        intrinsics.width as f64 - 1.0,
        intrinsics.height as f64 - 1.0,
    );
    let (t0, t1) = clip_rect(full.start, full.end, lo, hi)?;
    Some(full.sub_segment(t0, t1))
}

/// Evenly spaced control points on a segment: `floor(length / step)` of them
/// (one for edges at least half a step long), each centred in its cell.
pub fn sample_control_points<R: Real>(
    segment: &ProjectedSegment<R>,
    edge_index: usize,
    cfg: &TrackerConfig,
) -> Vec<ControlPoint<R>> {
    let length = segment.length();
    let step = R::from_f64(cfg.sampling_step);
    let mut count = (length / step).floor_to_int().max(0) as usize;
    if count == 0 && length >= step * R::from_f64(0.5) && length > R::zero() {
        count = 1;
    }
    if count == 0 {
        return Vec::new();
    }
    let dir = segment.end - segment.start;
    let perp = dir.perp();
    let normal = Vec2::new(perp.x / length, perp.y / length);
    let n = R::from_i64(count as i64);
    let half = R::from_f64(0.5);
    (0..count)
        .map(|k| {
            let t = (R::from_i64(k as i64) + half) / n;
            ControlPoint {
                edge_index,
                position: segment.start + dir.scale(t),
                normal,
                model_point: segment.model_point_at(t),
                matched: None,
                likelihood: R::zero(),
            }
        })
        .collect()
}

/// Single-hypothesis Moving-Edges search along the control point's normal.
///
/// Samples the image at integer offsets `s` in `[-range, range]`, scores each
/// by the central-difference gradient `|I(s+1) - I(s-1)| / 2`, and keeps the
/// best site at or above the threshold. Ties go to the smallest `|s|`, then
/// to the negative side. Sites whose taps leave the image are skipped.
pub fn search_correspondence<R: Real>(
    gray: &GrayImage,
    cp: &ControlPoint<R>,
    cfg: &TrackerConfig,
) -> ControlPoint<R> {
    let range = cfg.search_range as i64;
    let intensity = |s: i64| {
        let p = cp.position + cp.normal.scale(R::from_i64(s));
        gray.sample_bilinear(p.x, p.y)
    };
    let profile: Vec<Option<R>> = (-range - 1..=range + 1).map(intensity).collect();
    let at = |s: i64| profile[(s + range + 1) as usize];
    let half = R::from_f64(0.5);

    let mut best: Option<(i64, R)> = None;
    let order = std::iter::once(0).chain((1..=range).flat_map(|d| [-d, d]));
    for s in order {
        let (Some(lo), Some(hi)) = (at(s - 1), at(s + 1)) else {
            continue;
        };
        let score = (hi - lo).abs() * half;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((s, score));
        }
    }

    let mut out = *cp;
    out.matched = None;
    out.likelihood = R::zero();
    if let Some((s, score)) = best {
        if score >= R::from_f64(cfg.gradient_threshold) {
            out.matched = Some(cp.position + cp.normal.scale(R::from_i64(s)));
            out.likelihood = score;
        }
    }
    out
}

/// Control points of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet<R> {
    /// Visible control points sampled on the projected edges.
    pub sampled: usize,
    /// Points with a correspondence.
    pub matched: Vec<ControlPoint<R>>,
}

/// Samples, visibility-filters and matches control points for every model edge.
pub fn collect_measurements<R: Real>(
    model: &WireframeModel,
    pose: &PoseSE3<R>,
    intrinsics: &CameraIntrinsics,
    gray: &GrayImage,
    ids: &IdBuffer,
    cfg: &TrackerConfig,
) -> Result<MeasurementSet<R>, TrackError> {
    let rot = pose.rotation();
    let mut sampled = 0;
    let mut matched = Vec::new();
    for edge in 0..model.edges.len() {
        let Some(segment) = project_edge(model, edge, &rot, &pose.t, intrinsics) else {
            continue;
        };
        for cp in sample_control_points(&segment, edge, cfg) {
            if !is_point_visible(cp.position.to_f64(), edge, ids, cfg.visibility) {
                continue;
            }
            sampled += 1;
            let found = search_correspondence(gray, &cp, cfg);
            if found.matched.is_some() {
                matched.push(found);
            }
        }
    }
    if matched.len() < MIN_MEASUREMENTS {
        return Err(TrackError::InsufficientMeasurements {
            found: matched.len(),
            required: MIN_MEASUREMENTS,
        });
    }
    Ok(MeasurementSet { sampled, matched })
}
