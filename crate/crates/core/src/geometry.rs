//! World frame, per-view calibration and the orthographic AP/LP projections.
//!
//! World coordinates are millimetres: `x` anteroposterior (seen only in the
//! lateral view), `y` mediolateral (seen only in the AP view) and `z`
//! craniocaudal, increasing caudally and shared by both views. Each view maps
//! its two visible axes to pixels with an axis-aligned affine calibration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planning::Screw3D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("screw projects to a single point in the {0} view")]
    DegenerateProjection(ViewKind),
}

/// A point in world millimetres. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn scale(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    /// Distance from `self` to the closed segment `[a, b]`.
    pub fn distance_to_segment(self, a: Point3, b: Point3) -> f64 {
        let ab = b - a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return self.distance(a);
        }
        let t = ((self - a).dot(ab) / len2).clamp(0.0, 1.0);
        self.distance(a + ab.scale(t))
    }

    pub fn midpoint(self, o: Point3) -> Point3 {
        Point3::new(
            (self.x + o.x) / 2.0,
            (self.y + o.y) / 2.0,
            (self.z + o.z) / 2.0,
        )
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;

    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;

    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// A pixel position: `u` grows rightward, `v` grows downward. Serialized as `[u, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self.u - o.u).hypot(self.v - o.v)
    }

    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new((self.u + o.u) / 2.0, (self.v + o.v) / 2.0)
    }

    /// Distance from `self` to the closed segment `[a, b]`.
    pub fn distance_to_segment(self, a: Point2, b: Point2) -> f64 {
        let (du, dv) = (b.u - a.u, b.v - a.v);
        let len2 = du * du + dv * dv;
        if len2 == 0.0 {
            return self.distance(a);
        }
        let t = (((self.u - a.u) * du + (self.v - a.v) * dv) / len2).clamp(0.0, 1.0);
        self.distance(Point2::new(a.u + t * du, a.v + t * dv))
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.u, p.v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewKind {
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "LP")]
    Lp,
}

impl ViewKind {
    pub const BOTH: [ViewKind; 2] = [ViewKind::Ap, ViewKind::Lp];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Ap => "AP",
            ViewKind::Lp => "LP",
        }
    }

    /// The world axis this view cannot see.
    pub fn hidden_axis(self) -> Axis {
        match self {
            ViewKind::Ap => Axis::X,
            ViewKind::Lp => Axis::Y,
        }
    }

    /// The world axis drawn along the image `u` direction.
    pub fn horizontal_axis(self) -> Axis {
        match self {
            ViewKind::Ap => Axis::Y,
            ViewKind::Lp => Axis::X,
        }
    }
}

impl std::fmt::Display for ViewKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ViewKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AP" | "ap" => Ok(ViewKind::Ap),
            "LP" | "lp" => Ok(ViewKind::Lp),
            other => Err(format!("unknown view `{other}` (expected AP or LP)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn get(self, p: &Point3) -> f64 {
        match self {
            Axis::X => p.x,
            Axis::Y => p.y,
            Axis::Z => p.z,
        }
    }

    pub fn set(self, p: &mut Point3, value: f64) {
        match self {
            Axis::X => p.x = value,
            Axis::Y => p.y = value,
            Axis::Z => p.z = value,
        }
    }
}

/// Which image side the anterior edge of the lateral view sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnteriorAt {
    #[default]
    Left,
    Right,
}

/// Axis-aligned affine map between world millimetres and one view's pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewCalibration {
    pub view: ViewKind,
    pub mm_per_px_u: f64,
    pub mm_per_px_v: f64,
    pub origin_px: Point2,
    pub image_size_px: [u32; 2],
    /// Only meaningful for the lateral view.
    #[serde(default)]
    pub anterior_at: AnteriorAt,
}

impl ViewCalibration {
    /// Unit scales, zero origin, anterior on the left.
    pub fn identity(view: ViewKind, image_size_px: [u32; 2]) -> Self {
        Self {
            view,
            mm_per_px_u: 1.0,
            mm_per_px_v: 1.0,
            origin_px: Point2::new(0.0, 0.0),
            image_size_px,
            anterior_at: AnteriorAt::Left,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, s) in [("mm_per_px_u", self.mm_per_px_u), ("mm_per_px_v", self.mm_per_px_v)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(GeometryError::InvalidCalibration(format!(
                    "{name} must be finite and positive, got {s}"
                )));
            }
        }
        if !self.origin_px.is_finite() {
            return Err(GeometryError::InvalidCalibration("origin_px must be finite".into()));
        }
        if self.image_size_px[0] == 0 || self.image_size_px[1] == 0 {
            return Err(GeometryError::InvalidCalibration(
                "image_size_px must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        f64::from(self.image_size_px[0])
    }

    fn mirrored(&self) -> bool {
        self.view == ViewKind::Lp && self.anterior_at == AnteriorAt::Right
    }

    /// World coordinate along this view's horizontal axis -> pixel `u`.
    pub fn world_to_u(&self, w: f64) -> f64 {
        let u = self.origin_px.u + w / self.mm_per_px_u;
        if self.mirrored() {
            self.width() - u
        } else {
            u
        }
    }

    pub fn u_to_world(&self, u: f64) -> f64 {
        let u = if self.mirrored() { self.width() - u } else { u };
        (u - self.origin_px.u) * self.mm_per_px_u
    }

    pub fn world_to_v(&self, z: f64) -> f64 {
        self.origin_px.v + z / self.mm_per_px_v
    }

    pub fn v_to_world(&self, v: f64) -> f64 {
        (v - self.origin_px.v) * self.mm_per_px_v
    }

    /// World displacement along the horizontal axis for a `du` pixel drag.
    pub fn du_to_world(&self, du: f64) -> f64 {
        if self.mirrored() {
            -du * self.mm_per_px_u
        } else {
            du * self.mm_per_px_u
        }
    }

    pub fn dv_to_world(&self, dv: f64) -> f64 {
        dv * self.mm_per_px_v
    }
}

pub fn project_point(p: Point3, calib: &ViewCalibration) -> Point2 {
    let horizontal = calib.view.horizontal_axis().get(&p);
    Point2::new(calib.world_to_u(horizontal), calib.world_to_v(p.z))
}

/// Inverse of [`project_point`] given the value of the axis the view cannot see.
pub fn backproject_point(q: Point2, calib: &ViewCalibration, hidden: f64) -> Point3 {
    let mut p = Point3::new(0.0, 0.0, calib.v_to_world(q.v));
    calib.view.horizontal_axis().set(&mut p, calib.u_to_world(q.u));
    calib.view.hidden_axis().set(&mut p, hidden);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrewProjection2D {
    pub view: ViewKind,
    pub target_px: Point2,
    pub entry_px: Point2,
    pub radius_px: f64,
}

impl ScrewProjection2D {
    /// Largest coordinate difference to `other`, in pixels.
    pub fn max_deviation(&self, other: &ScrewProjection2D) -> f64 {
        [
            self.target_px.u - other.target_px.u,
            self.target_px.v - other.target_px.v,
            self.entry_px.u - other.entry_px.u,
            self.entry_px.v - other.entry_px.v,
            self.radius_px - other.radius_px,
        ]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
    }
}

pub fn project_screw(
    screw: &Screw3D,
    calib: &ViewCalibration,
) -> Result<ScrewProjection2D, GeometryError> {
    let target_px = project_point(screw.target_c1, calib);
    let entry_px = project_point(screw.entry_c2, calib);
    if target_px == entry_px {
        return Err(GeometryError::DegenerateProjection(calib.view));
    }
    Ok(ScrewProjection2D {
        view: calib.view,
        target_px,
        entry_px,
        radius_px: screw.radius / calib.mm_per_px_u,
    })
}

/// A screw's overlay in both views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewProjections {
    pub ap: ScrewProjection2D,
    pub lp: ScrewProjection2D,
}

impl ViewProjections {
    pub fn of(screw: &Screw3D, calibs: &CalibrationPair) -> Result<Self, GeometryError> {
        Ok(Self { ap: project_screw(screw, &calibs.ap)?, lp: project_screw(screw, &calibs.lp)? })
    }

    pub fn get(&self, view: ViewKind) -> &ScrewProjection2D {
        match view {
            ViewKind::Ap => &self.ap,
            ViewKind::Lp => &self.lp,
        }
    }

    /// Largest coordinate difference to `other`, in pixels.
    pub fn max_deviation(&self, other: &ViewProjections) -> f64 {
        self.ap.max_deviation(&other.ap).max(self.lp.max_deviation(&other.lp))
    }
}

/// Calibrations for both views of a case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub ap: ViewCalibration,
    pub lp: ViewCalibration,
}

impl CalibrationPair {
    pub fn get(&self, view: ViewKind) -> &ViewCalibration {
        match view {
            ViewKind::Ap => &self.ap,
            ViewKind::Lp => &self.lp,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.ap.view != ViewKind::Ap || self.lp.view != ViewKind::Lp {
            return Err(GeometryError::InvalidCalibration(
                "calibration views must be AP and LP respectively".into(),
            ));
        }
        self.ap.validate()?;
        self.lp.validate()
    }
}
