//! Facial landmark tracks (iBUG 68-point layout) and the video validity gate.
//!
//! A driving video is usable when a single, front-facing person is visible
//! for almost the whole clip and the head pose does not swing. All of the
//! gates below are computed from landmarks alone.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of points in the iBUG 68-point layout.
pub const POINT_COUNT: usize = 68;
/// Outer and inner lip contour.
pub const MOUTH: core::ops::Range<usize> = 48..68;
/// Image-left eye (the subject's right eye).
pub const LEFT_EYE: core::ops::Range<usize> = 36..42;
/// Image-right eye.
pub const RIGHT_EYE: core::ops::Range<usize> = 42..48;
pub const NOSE_TIP: usize = 30;
/// Brows, nose bridge and eyes: points that do not move when the mouth opens.
pub const RIGID: core::ops::Range<usize> = 17..48;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }
}

pub(crate) fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// The 68 landmark points of one detected face.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    points: Vec<Point>,
}

impl Face {
    /// Builds a face, checking the point count and that every coordinate is finite and non-negative.
    pub fn new(points: Vec<Point>) -> Result<Self, LandmarkError> {
        if points.len() != POINT_COUNT {
            return Err(LandmarkError::PointCount(points.len()));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite()) || p.x < 0.0 || p.y < 0.0) {
            return Err(LandmarkError::BadCoordinate);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn mouth(&self) -> &[Point] {
        &self.points[MOUTH]
    }

    pub fn left_eye_center(&self) -> Point {
        centroid(&self.points[LEFT_EYE])
    }

    pub fn right_eye_center(&self) -> Point {
        centroid(&self.points[RIGHT_EYE])
    }

    pub fn inter_ocular_distance(&self) -> f64 {
        self.left_eye_center().distance(self.right_eye_center())
    }

    pub fn mouth_centroid(&self) -> Point {
        centroid(self.mouth())
    }

    /// Centroid of the points that stay put while the mouth moves.
    pub fn rigid_centroid(&self) -> Point {
        centroid(&self.points[RIGID])
    }

    /// Left-eye-to-nose-tip distance over right-eye-to-nose-tip distance.
    /// Close to 1 for a frontal face; drifts away from 1 as the head turns.
    pub fn yaw_proxy(&self) -> f64 {
        let nose = self.points[NOSE_TIP];
        let right = self.right_eye_center().distance(nose);
        if right <= 0.0 {
            return f64::INFINITY;
        }
        self.left_eye_center().distance(nose) / right
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub face_id: Option<u32>,
    /// `None` when no face was detected in this frame.
    pub face: Option<Face>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    pub video_id: String,
    pub fps: f64,
    pub duration_s: f64,
    pub frames: Vec<LandmarkFrame>,
}

impl LandmarkTrack {
    pub fn face_frames(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.frames.iter().enumerate().filter_map(|(i, f)| f.face.as_ref().map(|face| (i, face)))
    }

    /// `frames.len()` is within one frame of `fps * duration_s`.
    pub fn frame_count_consistent(&self) -> bool {
        libm::fabs(self.frames.len() as f64 - self.fps * self.duration_s) <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandmarkError {
    #[error("expected {POINT_COUNT} landmark points, got {0}")]
    PointCount(usize),
    #[error("landmark coordinates must be finite and non-negative")]
    BadCoordinate,
    #[error("track contains no frames")]
    EmptyTrack,
}

/// Thresholds for [`validate_video`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    /// Minimum fraction of frames with a detected face.
    pub min_face_coverage: f64,
    /// Largest allowed mouth-centroid jump between consecutive face frames, as a fraction of the inter-ocular distance.
    pub max_identity_jump_iod: f64,
    /// Allowed yaw proxy band for a front-facing head.
    pub yaw_min: f64,
    pub yaw_max: f64,
    /// Largest allowed yaw proxy change between consecutive face frames.
    pub max_yaw_delta: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { min_face_coverage: 0.95, max_identity_jump_iod: 0.1, yaw_min: 0.6, yaw_max: 1.6, max_yaw_delta: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityReason {
    LowFaceCoverage,
    /// More than one face id appears in the track.
    MultipleIdentities,
    /// The face jumps between frames further than one person plausibly moves.
    IdentityJump,
    /// The head leaves the front-facing yaw band or turns too quickly.
    PoseChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub video_id: String,
    pub valid: bool,
    pub face_coverage: f64,
    /// Largest mouth-centroid jump between consecutive face frames, in pixels.
    pub max_identity_jump: f64,
    /// Same jump relative to the inter-ocular distance; this is what the gate checks.
    pub max_identity_jump_iod: f64,
    pub yaw_proxy_range: (f64, f64),
    pub max_yaw_delta: f64,
    pub reasons: Vec<ValidityReason>,
}

/// Measures every gate on `track` and reports which ones fail.
///
/// Frames without a face count towards the coverage denominator but are
/// skipped for the motion and pose measurements.
pub fn validate_video(track: &LandmarkTrack, gates: &GateConfig) -> Result<ValidityReport, LandmarkError> {
    if track.frames.is_empty() {
        return Err(LandmarkError::EmptyTrack);
    }
    let faces: Vec<&LandmarkFrame> = track.frames.iter().filter(|f| f.face.is_some()).collect();
    let face_coverage = faces.len() as f64 / track.frames.len() as f64;

    let ids: BTreeSet<u32> = faces.iter().filter_map(|f| f.face_id).collect();

    let mut max_jump = 0.0f64;
    let mut max_jump_iod = 0.0f64;
    let mut max_yaw_delta = 0.0f64;
    let mut yaw_lo = f64::INFINITY;
    let mut yaw_hi = f64::NEG_INFINITY;
    let mut prev: Option<&Face> = None;
    for frame in &faces {
        let face = frame.face.as_ref().expect("filtered on face");
        let yaw = face.yaw_proxy();
        yaw_lo = yaw_lo.min(yaw);
        yaw_hi = yaw_hi.max(yaw);
        if let Some(p) = prev {
            let jump = face.mouth_centroid().distance(p.mouth_centroid());
            let iod = 0.5 * (face.inter_ocular_distance() + p.inter_ocular_distance());
            max_jump = max_jump.max(jump);
            let rel = if iod > 0.0 { jump / iod } else { f64::INFINITY };
            max_jump_iod = max_jump_iod.max(rel);
            max_yaw_delta = max_yaw_delta.max(libm::fabs(yaw - p.yaw_proxy()));
        }
        prev = Some(face);
    }
    if faces.is_empty() {
        yaw_lo = 0.0;
        yaw_hi = 0.0;
    }

    let mut reasons = Vec::new();
    if face_coverage < gates.min_face_coverage {
        reasons.push(ValidityReason::LowFaceCoverage);
    }
    if ids.len() > 1 {
        reasons.push(ValidityReason::MultipleIdentities);
    }
    if max_jump_iod > gates.max_identity_jump_iod {
        reasons.push(ValidityReason::IdentityJump);
    }
    let out_of_band = !faces.is_empty() && (yaw_lo < gates.yaw_min || yaw_hi > gates.yaw_max);
    if out_of_band || max_yaw_delta > gates.max_yaw_delta {
        reasons.push(ValidityReason::PoseChange);
    }

    Ok(ValidityReport {
        video_id: track.video_id.clone(),
        valid: reasons.is_empty(),
        face_coverage,
        max_identity_jump: max_jump,
        max_identity_jump_iod: max_jump_iod,
        yaw_proxy_range: (yaw_lo, yaw_hi),
        max_yaw_delta,
        reasons,
    })
}

/// Synthetic frontal faces for tests and demos.
pub mod synthetic {
    use super::*;

    /// Parameters for one synthetic frame.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct FacePose {
        /// Position of the nose tip.
        pub center: Point,
        /// Inter-ocular distance in pixels.
        pub scale: f64,
        /// Desired yaw proxy (1.0 = frontal).
        pub yaw: f64,
        /// Lip separation in pixels.
        pub mouth_open: f64,
    }

    impl Default for FacePose {
        fn default() -> Self {
            Self { center: Point::new(320.0, 240.0), scale: 100.0, yaw: 1.0, mouth_open: 0.0 }
        }
    }

    /// A plausible 68-point face whose eye/nose geometry yields the requested yaw proxy.
    pub fn face(pose: FacePose) -> Face {
        let s = pose.scale;
        let c = pose.center;
        // Eye centres sit at (±s/2, -0.2 s) from the nose tip; the nose tip is shifted
        // horizontally so that |L - N| / |R - N| equals `yaw`.
        let h = 0.2 * s;
        let half = 0.5 * s;
        let nose_dx = solve_nose_offset(half, h, pose.yaw);
        let nose = c;
        let left_eye = Point::new(c.x - half - nose_dx, c.y - h);
        let right_eye = Point::new(c.x + half - nose_dx, c.y - h);
        let mut pts = alloc::vec![Point::default(); POINT_COUNT];

        // Jaw 0..17
        for (i, p) in pts[0..17].iter_mut().enumerate() {
            let a = core::f64::consts::PI * (i as f64 / 16.0);
            *p = Point::new(c.x - nose_dx - libm::cos(a) * 0.9 * s, c.y + libm::sin(a) * 0.8 * s - 0.2 * s);
        }
        // Brows 17..27
        for (k, p) in pts[17..27].iter_mut().enumerate() {
            let x = -0.9 + 1.8 * (k as f64 / 9.0);
            *p = Point::new(c.x - nose_dx + x * s * 0.8, c.y - 0.65 * s);
        }
        // Nose bridge 27..31 ends at the tip (30), nostrils 31..36
        for (k, p) in pts[27..31].iter_mut().enumerate() {
            let t = k as f64 / 3.0;
            *p = Point::new(nose.x - nose_dx * (1.0 - t), c.y - h * (1.0 - t));
        }
        for (k, p) in pts[31..36].iter_mut().enumerate() {
            *p = Point::new(nose.x + (k as f64 - 2.0) * 0.08 * s, c.y + 0.08 * s);
        }
        // Eyes: six points on a small ellipse around each centre
        for (k, p) in pts[LEFT_EYE].iter_mut().enumerate() {
            *p = eye_point(left_eye, s, k);
        }
        for (k, p) in pts[RIGHT_EYE].iter_mut().enumerate() {
            *p = eye_point(right_eye, s, k);
        }
        // Mouth: outer contour 48..60, inner 60..68
        let mouth_c = Point::new(c.x - nose_dx, c.y + 0.45 * s);
        let open = pose.mouth_open;
        for (k, p) in pts[48..60].iter_mut().enumerate() {
            let a = core::f64::consts::TAU * (k as f64 / 12.0);
            let dy = libm::sin(a) * (0.12 * s + 0.5 * open);
            *p = Point::new(mouth_c.x - libm::cos(a) * 0.35 * s, mouth_c.y + dy);
        }
        for (k, p) in pts[60..68].iter_mut().enumerate() {
            let a = core::f64::consts::TAU * (k as f64 / 8.0);
            let dy = libm::sin(a) * (0.02 * s + 0.5 * open);
            *p = Point::new(mouth_c.x - libm::cos(a) * 0.22 * s, mouth_c.y + dy);
        }
        Face::new(pts).expect("synthetic face stays in the positive quadrant")
    }

    fn eye_point(center: Point, s: f64, k: usize) -> Point {
        let a = core::f64::consts::TAU * (k as f64 / 6.0);
        Point::new(center.x + libm::cos(a) * 0.12 * s, center.y + libm::sin(a) * 0.04 * s)
    }

    // Nose at the origin, eyes at (-half - d, -h) and (half - d, -h).
    // Find d with sqrt((half + d)^2 + h^2) / sqrt((half - d)^2 + h^2) = yaw.
    fn solve_nose_offset(half: f64, h: f64, yaw: f64) -> f64 {
        let ratio = |d: f64| libm::hypot(half + d, h) / libm::hypot(half - d, h);
        if (yaw - 1.0).abs() < 1e-15 {
            return 0.0;
        }
        // ratio is monotone increasing in d on [-r, r], r = |eye - nose| at d = 0,
        // reaching about 5.2 (and 1/5.2) at the ends for this geometry.
        let r = libm::hypot(half, h);
        let (mut lo, mut hi) = (-r, r);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) < yaw {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// A track at `fps` with one frame per pose; `None` poses are face-less frames.
    pub fn track(video_id: &str, fps: f64, poses: &[Option<FacePose>]) -> LandmarkTrack {
        let frames = poses
            .iter()
            .enumerate()
            .map(|(i, pose)| LandmarkFrame {
                frame_index: i as u64,
                timestamp_s: i as f64 / fps,
                face_id: pose.map(|_| 0),
                face: pose.map(face),
            })
            .collect();
        LandmarkTrack { video_id: video_id.into(), fps, duration_s: poses.len() as f64 / fps, frames }
    }
}
