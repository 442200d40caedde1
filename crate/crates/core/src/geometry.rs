//! Vehicle footprint, SE(2) frame transforms and point-obstacle collision checks.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-plane tolerance for point-in-footprint tests, in meters.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Planar pose of the rear-axle center. `theta` stays in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Maps a point from the parent frame into this pose's frame.
    pub fn inverse_transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Composes `self ∘ local`: `local` is expressed in this pose's frame.
    pub fn compose(&self, local: &Pose2D) -> Pose2D {
        let p = self.transform_point(local.position());
        Pose2D::new(p.x, p.y, self.theta + local.theta)
    }

    /// Expresses `other` in this pose's frame.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let p = self.inverse_transform_point(other.position());
        Pose2D::new(p.x, p.y, other.theta - self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

impl From<[f64; 3]> for Pose2D {
    fn from([x, y, theta]: [f64; 3]) -> Self {
        Pose2D::new(x, y, theta)
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.theta]
    }
}

/// Transforms a world-frame point into the ego frame.
pub fn world_to_ego_point(ego: &Pose2D, p: Point2) -> Point2 {
    ego.inverse_transform_point(p)
}

/// Transforms a world-frame pose into the ego frame.
pub fn world_to_ego(ego: &Pose2D, p: &Pose2D) -> Pose2D {
    ego.relative(p)
}

/// Transforms an ego-frame pose back to the world frame.
pub fn ego_to_world(ego: &Pose2D, p: &Pose2D) -> Pose2D {
    ego.compose(p)
}

/// Physical vehicle parameters. Lengths in meters, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleSpec {
    pub wheelbase: f64,
    pub width: f64,
    pub length: f64,
    pub rear_overhang: f64,
    pub front_overhang: f64,
    pub max_steer: f64,
    pub crop_l: f64,
    pub crop_w: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            wheelbase: 3.0,
            width: 2.0,
            length: 4.95,
            rear_overhang: 1.025,
            front_overhang: 3.925,
            max_steer: 32f64.to_radians(),
            crop_l: 0.3,
            crop_w: 0.2,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.wheelbase,
            self.width,
            self.length,
            self.rear_overhang,
            self.front_overhang,
            self.max_steer,
            self.crop_l,
            self.crop_w,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("vehicle spec has non-finite fields".into()));
        }
        if self.wheelbase <= 0.0 || self.width <= 0.0 || self.rear_overhang <= 0.0 {
            return Err(Error::Config(
                "wheelbase, width and rear overhang must be positive".into(),
            ));
        }
        if (self.rear_overhang + self.front_overhang - self.length).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "rear_overhang + front_overhang = {} but length = {}",
                self.rear_overhang + self.front_overhang,
                self.length
            )));
        }
        if !(self.crop_l > 0.0 && self.crop_l < self.front_overhang) {
            return Err(Error::Config("crop_l must lie in (0, front_overhang)".into()));
        }
        // Two crops must fit along the rear overhang as well, otherwise the
        // chamfered polygon folds over itself.
        if 2.0 * self.crop_l >= self.length {
            return Err(Error::Config("crop_l too large for vehicle length".into()));
        }
        if !(self.crop_w > 0.0 && self.crop_w < self.width / 2.0) {
            return Err(Error::Config("crop_w must lie in (0, width/2)".into()));
        }
        if !(self.max_steer > 0.0 && self.max_steer < PI / 2.0) {
            return Err(Error::Config("max_steer must lie in (0, pi/2)".into()));
        }
        Ok(())
    }

    /// Longitudinal offset of the geometric center ahead of the rear axle.
    pub fn center_offset(&self) -> f64 {
        (self.front_overhang - self.rear_overhang) / 2.0
    }

    pub fn geometric_center(&self, pose: &Pose2D) -> Point2 {
        pose.transform_point(Point2::new(self.center_offset(), 0.0))
    }

    pub fn min_turning_radius(&self) -> f64 {
        self.wheelbase / self.max_steer.tan()
    }

    /// Radius of the circle around the geometric center that encloses the body.
    pub fn bounding_radius(&self) -> f64 {
        (self.length / 2.0).hypot(self.width / 2.0)
    }
}

/// Chamfered 8-vertex vehicle outline in the rear-axle frame, counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub vertices: [Point2; 8],
}

impl Footprint {
    pub fn new(spec: &VehicleSpec) -> Result<Self> {
        spec.validate()?;
        let lb = spec.rear_overhang;
        let lf = spec.front_overhang;
        let hw = spec.width / 2.0;
        let (cl, cw) = (spec.crop_l, spec.crop_w);
        Ok(Self {
            vertices: [
                Point2::new(-lb + cl, -hw),
                Point2::new(lf - cl, -hw),
                Point2::new(lf, -hw + cw),
                Point2::new(lf, hw - cw),
                Point2::new(lf - cl, hw),
                Point2::new(-lb + cl, hw),
                Point2::new(-lb, hw - cw),
                Point2::new(-lb, -hw + cw),
            ],
        })
    }

    pub fn area(&self) -> f64 {
        shoelace_area(&self.vertices)
    }

    /// Closed containment test in the vehicle frame (boundary counts as inside).
    pub fn contains_local(&self, p: Point2) -> bool {
        let v = &self.vertices;
        for i in 0..v.len() {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            let ex = b.x - a.x;
            let ey = b.y - a.y;
            let cross = ex * (p.y - a.y) - ey * (p.x - a.x);
            if cross < -CONTAINMENT_TOL * ex.hypot(ey) {
                return false;
            }
        }
        true
    }

    pub fn to_world(&self, pose: &Pose2D) -> [Point2; 8] {
        self.vertices.map(|v| pose.transform_point(v))
    }
}

/// Builds the default-ordered 8-vertex polygon for `spec`.
pub fn footprint_polygon(spec: &VehicleSpec) -> Result<Footprint> {
    Footprint::new(spec)
}

/// Places the footprint at `pose` in the world frame.
pub fn to_world(footprint: &Footprint, pose: &Pose2D) -> [Point2; 8] {
    footprint.to_world(pose)
}

pub fn shoelace_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

/// True iff any obstacle point lies inside or on the footprint placed at `pose`.
pub fn collides(pose: &Pose2D, spec: &VehicleSpec, obstacles: &[Point2]) -> Result<bool> {
    let fp = Footprint::new(spec)?;
    Ok(obstacles
        .iter()
        .any(|&p| fp.contains_local(pose.inverse_transform_point(p))))
}

/// Uniform-grid bucket index over obstacle points for fast footprint queries.
#[derive(Debug, Clone)]
pub struct ObstacleIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<Point2>>,
    len: usize,
}

impl ObstacleIndex {
    pub fn new(points: &[Point2], cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut buckets: HashMap<(i64, i64), Vec<Point2>> = HashMap::new();
        for &p in points {
            buckets
                .entry(Self::key(p, cell))
                .or_default()
                .push(p);
        }
        Self {
            cell,
            buckets,
            len: points.len(),
        }
    }

    fn key(p: Point2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Visits every point within the square that bounds the circle `(center, radius)`.
    pub fn for_each_near(&self, center: Point2, radius: f64, mut f: impl FnMut(Point2) -> bool) {
        let (x0, y0) = Self::key(Point2::new(center.x - radius, center.y - radius), self.cell);
        let (x1, y1) = Self::key(Point2::new(center.x + radius, center.y + radius), self.cell);
        for ix in x0..=x1 {
            for iy in y0..=y1 {
                if let Some(b) = self.buckets.get(&(ix, iy)) {
                    for &p in b {
                        if !f(p) {
                            return;
                        }
                    }
                }
            }
        }
    }

    pub fn within(&self, center: Point2, radius: f64) -> Vec<Point2> {
        let mut out = Vec::new();
        self.for_each_near(center, radius, |p| {
            if p.distance(center) <= radius {
                out.push(p);
            }
            true
        });
        out
    }
}

/// Footprint plus obstacle index: the collision checker used by the planner and env.
#[derive(Debug, Clone)]
pub struct CollisionChecker {
    spec: VehicleSpec,
    footprint: Footprint,
    index: ObstacleIndex,
}

impl CollisionChecker {
    pub fn new(spec: &VehicleSpec, obstacles: &[Point2]) -> Result<Self> {
        Ok(Self {
            spec: *spec,
            footprint: Footprint::new(spec)?,
            index: ObstacleIndex::new(obstacles, 1.0),
        })
    }

    pub fn spec(&self) -> &VehicleSpec {
        &self.spec
    }

    pub fn footprint(&self) -> &Footprint {
        &self.footprint
    }

    pub fn index(&self) -> &ObstacleIndex {
        &self.index
    }

    pub fn collides(&self, pose: &Pose2D) -> bool {
        let center = self.spec.geometric_center(pose);
        let r = self.spec.bounding_radius() + CONTAINMENT_TOL;
        let lb = self.spec.rear_overhang + CONTAINMENT_TOL;
        let lf = self.spec.front_overhang + CONTAINMENT_TOL;
        let hw = self.spec.width / 2.0 + CONTAINMENT_TOL;
        let mut hit = false;
        self.index.for_each_near(center, r, |p| {
            let q = pose.inverse_transform_point(p);
            if q.x >= -lb && q.x <= lf && q.y.abs() <= hw && self.footprint.contains_local(q) {
                hit = true;
                return false;
            }
            true
        });
        hit
    }
}
