//! Software hidden-line rendering and Edge-ID visibility testing.
//!
//! Every model edge is drawn in a colour that encodes its index. After the
//! faces have filled a depth buffer, only unoccluded edge pixels keep their
//! colour, so a control point sampled on edge `i` is visible when the colour
//! under it decodes back to `i`.
//!
//! Pixel `(x, y)` covers `[x - 0.5, x + 0.5) x [y - 0.5, y + 0.5)`: its centre
//! is at integer coordinates, matching the projection in [`crate::geometry`].

use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Mat3, PoseSE3, Vec3, WireframeModel, MAX_EDGES};
use crate::imaging::{ColorImage, ColorPixels, GrayImage};

/// Camera-space near clipping plane (mm).
pub const NEAR_PLANE: f64 = 1.0;
/// Relative depth tolerance when testing edge pixels against the face depth.
pub const DEPTH_BIAS: f64 = 1e-3;

const NO_FACE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("edge index {0} exceeds the Edge-ID capacity (max {max})", max = MAX_EDGES - 1)]
pub struct CapacityError(pub usize);

/// Colour for edge `index`: channel values step in multiples of 8.
pub fn encode_edge_id(index: usize) -> Result<[u8; 3], CapacityError> {
    if index >= MAX_EDGES {
        return Err(CapacityError(index));
    }
    let b_code = (index + 1) * 8;
    let g_code = (b_code / 256) * 8;
    let r_code = (g_code / 256) * 8;
    Ok([
        (r_code % 256) as u8,
        (g_code % 256) as u8,
        (b_code % 256) as u8,
    ])
}

/// Inverse of [`encode_edge_id`]; `None` for the black background.
///
/// Any colour decodes to something, but only encoder outputs are guaranteed to
/// round-trip.
pub fn decode_edge_id(rgb: [u8; 3]) -> Option<usize> {
    if rgb == [0, 0, 0] {
        return None;
    }
    let [r, g, b] = rgb.map(usize::from);
    let rg = (r / 8) * 256 + g;
    let rgb_decode = (rg / 8) * 256 + b;
    (rgb_decode / 8).checked_sub(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdBuffer {
    width: u32,
    height: u32,
    rgb: Vec<[u8; 3]>,
}

impl IdBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            rgb: vec![[0; 3]; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn color(&self, x: u32, y: u32) -> [u8; 3] {
        self.rgb[(y * self.width + x) as usize]
    }

    pub fn edge_at(&self, x: i64, y: i64) -> Option<usize> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        decode_edge_id(self.color(x as u32, y as u32))
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        self.rgb[(y * self.width + x) as usize] = rgb;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.rgb
    }

    /// Edge indices present anywhere in the buffer, sorted.
    pub fn edges_present(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.rgb.iter().filter_map(|&c| decode_edge_id(c)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn to_image(&self) -> ColorImage {
        ColorImage::new(
            self.width,
            self.height,
            ColorPixels::Rgb888(self.rgb.clone()),
        )
        .expect("buffer dimensions are consistent")
    }
}

/// Per-pixel nearest camera-space depth (mm) and the face that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    width: u32,
    height: u32,
    depth: Vec<f64>,
    face: Vec<u32>,
}

impl DepthBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            face: vec![NO_FACE; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depth(&self, x: u32, y: u32) -> f64 {
        self.depth[(y * self.width + x) as usize]
    }

    pub fn face(&self, x: u32, y: u32) -> Option<usize> {
        match self.face[(y * self.width + x) as usize] {
            NO_FACE => None,
            f => Some(f as usize),
        }
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    fn write(&mut self, x: u32, y: u32, z: f64, face: usize) {
        let i = (y * self.width + x) as usize;
        if z < self.depth[i] {
            self.depth[i] = z;
            self.face[i] = face as u32;
        }
    }

    /// Grayscale visualisation: near is dark, far is light, background white.
    pub fn to_image(&self) -> GrayImage {
        let finite = self.depth.iter().copied().filter(|d| d.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
        let span = (hi - lo).max(1e-9);
        let data = self
            .depth
            .iter()
            .map(|&d| {
                if d.is_finite() {
                    (32.0 + 190.0 * (d - lo) / span) as u8
                } else {
                    255
                }
            })
            .collect();
        GrayImage::new(self.width, self.height, data).expect("buffer dimensions are consistent")
    }
}

fn to_camera(rot: &Mat3<f64>, t: &Vec3<f64>, p: [f64; 3]) -> Vec3<f64> {
    *rot * Vec3::from_array(p) + *t
}

fn screen(k: &CameraIntrinsics, p: Vec3<f64>) -> [f64; 2] {
    [k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy]
}

/// Sutherland-Hodgman against `z >= NEAR_PLANE`.
fn clip_polygon_near(poly: &[Vec3<f64>]) -> Vec<Vec3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            out.push(a + (b - a).scale(s));
        }
    }
    out
}

/// Clips a camera-space segment to the near plane; returns the kept parameter range.
pub(crate) fn clip_segment_near(a: Vec3<f64>, b: Vec3<f64>) -> Option<(f64, f64)> {
    match (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE) {
        (true, true) => Some((0.0, 1.0)),
        (false, false) => None,
        (true, false) => Some((0.0, (NEAR_PLANE - a.z) / (b.z - a.z))),
        (false, true) => Some(((NEAR_PLANE - a.z) / (b.z - a.z), 1.0)),
    }
}

/// Liang-Barsky clip of a 2D segment to `[lo, hi]` per axis; returns `(t0, t1)`.
pub(crate) fn clip_segment_rect(
    p: [f64; 2],
    q: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..2 {
        let d = q[axis] - p[axis];
        for (num, den) in [(p[axis] - lo[axis], -d), (hi[axis] - p[axis], d)] {
            if den == 0.0 {
                if num < 0.0 {
                    return None;
                }
            } else {
                let t = num / den;
                if den < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

fn fill_triangle(buf: &mut DepthBuffer, k: &CameraIntrinsics, tri: [Vec3<f64>; 3], face: usize) {
    let s = tri.map(|p| screen(k, p));
    let inv_z = tri.map(|p| 1.0 / p.z);
    let area =
        (s[1][0] - s[0][0]) * (s[2][1] - s[0][1]) - (s[1][1] - s[0][1]) * (s[2][0] - s[0][0]);
    if area.abs() < 1e-12 {
        return;
    }
    let min_x = s
        .iter()
        .map(|p| p[0])
        .fold(f64::INFINITY, f64::min)
        .ceil()
        .max(0.0);
    let max_x = s
        .iter()
        .map(|p| p[0])
        .fold(f64::NEG_INFINITY, f64::max)
        .floor()
        .min(buf.width as f64 - 1.0);
    let min_y = s
        .iter()
        .map(|p| p[1])
        .fold(f64::INFINITY, f64::min)
        .ceil()
        .max(0.0);
    let max_y = s
        .iter()
        .map(|p| p[1])
        .fold(f64::NEG_INFINITY, f64::max)
        .floor()
        .min(buf.height as f64 - 1.0);
    if min_x > max_x || min_y > max_y {
        return;
    }
    let edge = |a: [f64; 2], b: [f64; 2], x: f64, y: f64| {
        (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
    };
    for y in (min_y as u32)..=(max_y as u32) {
        for x in (min_x as u32)..=(max_x as u32) {
            let (px, py) = (x as f64, y as f64);
            let w0 = edge(s[1], s[2], px, py) / area;
            let w1 = edge(s[2], s[0], px, py) / area;
            let w2 = edge(s[0], s[1], px, py) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            // 1/z is affine in screen space for a planar triangle.
            let z = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
            buf.write(x, y, z, face);
        }
    }
}

/// Screen-space pixels along a camera-space segment, with interpolated depth.
/// The segment is clipped to the near plane and the image; `visit` receives
/// `(x, y, depth)` for each stepped pixel.
pub(crate) fn step_line(
    k: &CameraIntrinsics,
    a: Vec3<f64>,
    b: Vec3<f64>,
    mut visit: impl FnMut(u32, u32, f64),
) {
    let Some((n0, n1)) = clip_segment_near(a, b) else {
        return;
    };
    let (a, b) = (a + (b - a).scale(n0), a + (b - a).scale(n1));
    let (pa, pb) = (screen(k, a), screen(k, b));
    let hi = [k.width as f64 - 0.5 - 1e-9, k.height as f64 - 0.5 - 1e-9];
    let Some((t0, t1)) = clip_segment_rect(pa, pb, [-0.5, -0.5], hi) else {
        return;
    };
    let lerp = |t: f64| [pa[0] + (pb[0] - pa[0]) * t, pa[1] + (pb[1] - pa[1]) * t];
    let (p0, p1) = (lerp(t0), lerp(t1));
    let (iz_a, iz_b) = (1.0 / a.z, 1.0 / b.z);
    let steps = (p1[0] - p0[0])
        .abs()
        .max((p1[1] - p0[1]).abs())
        .ceil()
        .max(1.0) as usize;
    for i in 0..=steps {
        let t = t0 + (t1 - t0) * (i as f64 / steps as f64);
        let p = lerp(t);
        let (x, y) = (p[0].round(), p[1].round());
        if x < 0.0 || y < 0.0 || x >= k.width as f64 || y >= k.height as f64 {
            continue;
        }
        let depth = 1.0 / (iz_a + (iz_b - iz_a) * t);
        visit(x as u32, y as u32, depth);
    }
}

/// Renders the Edge-ID buffer with hidden-line removal.
///
/// Pass 1 fills every face into the depth buffer. Pass 2 steps along each
/// edge and writes its colour where the edge is not behind the stored depth
/// (within [`DEPTH_BIAS`]) or where the nearest face is one of the edge's own
/// faces, which would otherwise shadow the edge through rasterization error.
pub fn render_id_buffer(
    model: &WireframeModel,
    pose: &PoseSE3<f64>,
    intrinsics: &CameraIntrinsics,
) -> (IdBuffer, DepthBuffer) {
    let rot = pose.rotation();
    let cam: Vec<Vec3<f64>> = model
        .vertices
        .iter()
        .map(|&v| to_camera(&rot, &pose.t, v))
        .collect();
    let mut depth = DepthBuffer::new(intrinsics.width, intrinsics.height);
    let mut ids = IdBuffer::new(intrinsics.width, intrinsics.height);

    for (fi, f) in model.faces.iter().enumerate() {
        let poly = clip_polygon_near(&[cam[f[0]], cam[f[1]], cam[f[2]]]);
        for i in 1..poly.len().saturating_sub(1) {
            fill_triangle(&mut depth, intrinsics, [poly[0], poly[i], poly[i + 1]], fi);
        }
    }

    for (ei, e) in model.edges.iter().enumerate() {
        let code = encode_edge_id(ei).expect("model edge count is validated");
        let own: Vec<usize> = model.faces_of_edge(ei).collect();
        step_line(intrinsics, cam[e[0]], cam[e[1]], |x, y, z| {
            let stored = depth.depth(x, y);
            let own_face = depth.face(x, y).is_some_and(|f| own.contains(&f));
            if own_face || z <= stored * (1.0 + DEPTH_BIAS) {
                ids.set(x, y, code);
            }
        });
    }
    (ids, depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisibilityMode {
    /// Only the pixel under the point.
    Strict,
    /// The 3x3 neighbourhood of the pixel under the point.
    #[default]
    Tolerant,
}

/// Whether a control point on edge `edge` is visible in the Edge-ID buffer.
pub fn is_point_visible(p: [f64; 2], edge: usize, ids: &IdBuffer, mode: VisibilityMode) -> bool {
    let (w, h) = (ids.width() as f64, ids.height() as f64);
    if !(p[0] >= -0.5 && p[1] >= -0.5 && p[0] < w - 0.5 && p[1] < h - 0.5) {
        return false;
    }
    let (x, y) = (p[0].round() as i64, p[1].round() as i64);
    match mode {
        VisibilityMode::Strict => ids.edge_at(x, y) == Some(edge),
        VisibilityMode::Tolerant => {
            (-1..=1).any(|dy| (-1..=1).any(|dx| ids.edge_at(x + dx, y + dy) == Some(edge)))
        }
    }
}

/// Moller-Trumbore; returns the ray parameter of the hit.
fn ray_triangle(origin: Vec3<f64>, dir: Vec3<f64>, tri: [Vec3<f64>; 3]) -> Option<f64> {
    const EPS: f64 = 1e-12;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < EPS {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(q) * inv)
}

fn point_triangle_distance(p: Vec3<f64>, tri: [Vec3<f64>; 3]) -> f64 {
    // Closest point via region tests (Ericson, Real-Time Collision Detection 5.1.5).
    let [a, b, c] = tri;
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(ap), ac.dot(ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(bp), ac.dot(bp));
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (p - (a + ab.scale(d1 / (d1 - d3)))).norm();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(cp), ac.dot(cp));
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (p - (a + ac.scale(d2 / (d2 - d6)))).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b).scale(w))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let closest = a + ab.scale(vb * denom) + ac.scale(vc * denom);
    (p - closest).norm()
}

/// Ray-casting visibility of a 3D point on the model surface.
///
/// The point is visible when the segment from the camera centre to it crosses
/// no face at a strictly smaller depth. Faces that contain the point (within
/// 1e-6 mm) are ignored.
pub fn visibility_oracle(
    model: &WireframeModel,
    pose: &PoseSE3<f64>,
    _intrinsics: &CameraIntrinsics,
    point: [f64; 3],
) -> bool {
    const CONTAIN_TOL: f64 = 1e-6;
    let rot = pose.rotation();
    let target = to_camera(&rot, &pose.t, point);
    if target.z <= 0.0 {
        return false;
    }
    let origin = Vec3::zero();
    for f in &model.faces {
        let tri = f.map(|i| to_camera(&rot, &pose.t, model.vertices[i]));
        if point_triangle_distance(target, tri) < CONTAIN_TOL {
            continue;
        }
        if let Some(s) = ray_triangle(origin, target, tri) {
            if s > 0.0 && s < 1.0 - 1e-9 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_edge_id(0), Ok([0, 0, 8]));
        assert_eq!(encode_edge_id(31), Ok([0, 8, 0]));
        assert_eq!(encode_edge_id(100), Ok([0, 24, 40]));
        assert_eq!(encode_edge_id(32766), Ok([248, 248, 248]));
        assert_eq!(encode_edge_id(32767), Err(CapacityError(32767)));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_edge_id([0, 0, 8]), Some(0));
        assert_eq!(decode_edge_id([0, 0, 0]), None);
        assert_eq!(decode_edge_id([248, 248, 248]), Some(32766));
        assert_eq!(decode_edge_id([0, 0, 7]), None);
    }

    #[test]
    fn codec_exhaustive() {
        for i in 0..MAX_EDGES {
            let c = encode_edge_id(i).unwrap();
            assert!(c.iter().all(|v| v % 8 == 0), "{i} -> {c:?}");
            assert_ne!(c, [0, 0, 0]);
            assert_eq!(decode_edge_id(c), Some(i));
        }
    }

    fn face_on_pose(distance: f64) -> PoseSE3<f64> {
        PoseSE3::from_params([0.0, 0.0, 0.0, 0.0, 0.0, distance])
    }

    #[test]
    fn single_triangle_shows_all_edges() {
        let m = WireframeModel::new(
            vec![[-20.0, -15.0, 0.0], [25.0, -10.0, 0.0], [0.0, 20.0, 0.0]],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap();
        let (ids, _) = render_id_buffer(&m, &face_on_pose(150.0), &CameraIntrinsics::qvga());
        assert_eq!(ids.edges_present(), vec![0, 1, 2]);
    }

    #[test]
    fn model_behind_camera_renders_nothing() {
        let (ids, depth) = render_id_buffer(
            &WireframeModel::cube(60.0),
            &face_on_pose(-200.0),
            &CameraIntrinsics::qvga(),
        );
        assert!(ids.edges_present().is_empty());
        assert!(depth.depths().iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn face_on_cube_hides_rear_edges() {
        let k = CameraIntrinsics::qvga();
        let cube = WireframeModel::cube(60.0);
        // Far enough that the whole front face is in frame.
        let pose = face_on_pose(400.0);
        let (ids, _) = render_id_buffer(&cube, &pose, &k);
        // Front face (z = -30) edges are 0..4; the rear ring is 4..8.
        let present = ids.edges_present();
        for e in 0..4 {
            assert!(present.contains(&e), "front edge {e} missing: {present:?}");
        }
        for e in 4..8 {
            assert!(!present.contains(&e), "rear edge {e} drawn: {present:?}");
        }
        for (ei, e) in cube.edges.iter().enumerate() {
            let a = cube.vertices[e[0]];
            let b = cube.vertices[e[1]];
            let mid = [
                (a[0] + b[0]) / 2.0,
                (a[1] + b[1]) / 2.0,
                (a[2] + b[2]) / 2.0,
            ];
            let expect_visible = ei < 4;
            if ei < 8 {
                assert_eq!(
                    visibility_oracle(&cube, &pose, &k, mid),
                    expect_visible,
                    "edge {ei}"
                );
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let k = CameraIntrinsics::qvga();
        let pose = PoseSE3::look_at([90.0, -40.0, -110.0], [0.0; 3], [0.0, -1.0, 0.0]);
        let a = render_id_buffer(&WireframeModel::cube(60.0), &pose, &k);
        let b = render_id_buffer(&WireframeModel::cube(60.0), &pose, &k);
        assert_eq!(a, b);
    }

    #[test]
    fn visibility_lookup() {
        let mut ids = IdBuffer::new(10, 10);
        ids.set(5, 5, encode_edge_id(3).unwrap());
        assert!(is_point_visible(
            [5.2, 4.9],
            3,
            &ids,
            VisibilityMode::Strict
        ));
        assert!(!is_point_visible(
            [6.2, 4.9],
            3,
            &ids,
            VisibilityMode::Strict
        ));
        assert!(is_point_visible(
            [6.2, 4.9],
            3,
            &ids,
            VisibilityMode::Tolerant
        ));
        assert!(!is_point_visible(
            [5.0, 5.0],
            2,
            &ids,
            VisibilityMode::Tolerant
        ));
        assert!(!is_point_visible(
            [1.0, 1.0],
            3,
            &ids,
            VisibilityMode::Tolerant
        ));
        assert!(!is_point_visible(
            [-3.0, 5.0],
            3,
            &ids,
            VisibilityMode::Tolerant
        ));
    }

    /// Two parallel squares; the nearer one hides the far one's centre band.
    #[test]
    fn occluding_plane_hides_edge_point() {
        let k = CameraIntrinsics::qvga();
        let vertices = vec![
            // Near square at z=0, spanning x,y in [-20, 20].
            [-20.0, -20.0, 0.0],
            [20.0, -20.0, 0.0],
            [20.0, 20.0, 0.0],
            [-20.0, 20.0, 0.0],
            // Far horizontal bar at z=40, wider than the near square.
            [-60.0, -2.0, 40.0],
            [60.0, -2.0, 40.0],
            [60.0, 2.0, 40.0],
            [-60.0, 2.0, 40.0],
        ];
        let faces = vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]];
        let edges = vec![[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [6, 7]];
        let m = WireframeModel::new(vertices, faces, Some(edges)).unwrap();
        let pose = face_on_pose(200.0);
        let (ids, _) = render_id_buffer(&m, &pose, &k);
        let project = |p: [f64; 3]| {
            let q = crate::geometry::project(Vec3::from_array(p), &pose, &k).unwrap();
            [q.pixel.x, q.pixel.y]
        };
        // Bar edge behind the square's centre: hidden by both methods.
        let hidden = [0.0, -2.0, 40.0];
        assert!(!visibility_oracle(&m, &pose, &k, hidden));
        assert!(!is_point_visible(
            project(hidden),
            4,
            &ids,
            VisibilityMode::Tolerant
        ));
        // Same edge far outside the square: visible by both.
        let shown = [-50.0, -2.0, 40.0];
        assert!(visibility_oracle(&m, &pose, &k, shown));
        assert!(is_point_visible(
            project(shown),
            4,
            &ids,
            VisibilityMode::Tolerant
        ));
    }

    #[test]
    fn depth_dump_is_gray() {
        let (_, depth) = render_id_buffer(
            &WireframeModel::cube(60.0),
            &face_on_pose(200.0),
            &CameraIntrinsics::qvga(),
        );
        let img = depth.to_image();
        assert_eq!(img.get(0, 0), 255);
        assert!(img.get(160, 120) < 255);
    }
}
