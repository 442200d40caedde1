//! Scenario data model, JSON persistence, synthetic layouts and the
//! rollout-from-target initial pose sampler.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, CollisionChecker, Point2, Pose2D, VehicleSpec};
use crate::kinematics::{self, VehicleState};

/// Loader bound on obstacle points per scenario.
pub const DEFAULT_MAX_OBSTACLES: usize = 100_000;
/// Contour sampling spacing used by the synthetic generator, meters.
pub const CONTOUR_SPACING: f64 = 0.1;

/// One benchmark case: logged start, parking target and obstacle contour points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub initial_pose: Pose2D,
    pub target_pose: Pose2D,
    #[serde(default)]
    pub obstacles: Vec<Point2>,
}

impl Scenario {
    /// Checks finiteness, the obstacle bound and that the target is collision-free.
    pub fn validate(&self, spec: &VehicleSpec, max_obstacles: usize) -> Result<()> {
        if self.obstacles.len() > max_obstacles {
            return Err(Error::Invariant(format!(
                "scenario {} has {} obstacle points (limit {})",
                self.id,
                self.obstacles.len(),
                max_obstacles
            )));
        }
        if !self.initial_pose.is_finite()
            || !self.target_pose.is_finite()
            || self.obstacles.iter().any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::Invariant(format!(
                "scenario {} has non-finite coordinates",
                self.id
            )));
        }
        let checker = CollisionChecker::new(spec, &self.obstacles)?;
        if checker.collides(&self.target_pose) {
            return Err(Error::Invariant(format!(
                "scenario {}: target pose collides with obstacles",
                self.id
            )));
        }
        Ok(())
    }

    pub fn checker(&self, spec: &VehicleSpec) -> Result<CollisionChecker> {
        CollisionChecker::new(spec, &self.obstacles)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub max_obstacles: usize,
    pub spec: VehicleSpec,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            max_obstacles: DEFAULT_MAX_OBSTACLES,
            spec: VehicleSpec::default(),
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_scenario_with(path, &LoadOptions::default())
}

pub fn load_scenario_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let scenario = parse_scenario(&text)?;
    scenario.validate(&opts.spec, opts.max_obstacles)?;
    Ok(scenario)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(scenario)
        .map_err(|e| Error::Malformed(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every `*.json` scenario in `dir`, sorted by file name.
pub fn load_scenario_dir(dir: impl AsRef<Path>) -> Result<Vec<Scenario>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(load_scenario).collect()
}

/// Imports a layout exported by the public benchmark tooling.
///
/// The exporter's field names are not fixed, so this accepts the common
/// aliases: `start`/`ego`/`init_pose` for the initial pose, `goal`/`target`
/// for the target, and obstacles either as `[[x, y], ...]`, as a flat
/// `[x1, y1, x2, y2, ...]` list or as nested contours `[[[x, y], ...], ...]`.
/// Poses may be arrays `[x, y, yaw]` or objects `{x, y, yaw|theta|heading}`.
/// An `"angle_unit": "deg"` field switches headings to degrees.
pub fn import_layout(text: &str, fallback_id: &str) -> Result<Scenario> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::Malformed("layout root must be an object".into()))?;
    let degrees = obj
        .get("angle_unit")
        .and_then(Value::as_str)
        .is_some_and(|u| u.starts_with("deg"));
    let field = |names: &[&str]| names.iter().find_map(|n| obj.get(*n));
    let pose = |names: &[&str]| -> Result<Pose2D> {
        let v = field(names)
            .ok_or_else(|| Error::Malformed(format!("missing pose field (one of {names:?})")))?;
        let (x, y, th) = match v {
            Value::Array(a) if a.len() == 3 => (num(&a[0])?, num(&a[1])?, num(&a[2])?),
            Value::Object(o) => {
                let get = |keys: &[&str]| -> Result<f64> {
                    keys.iter()
                        .find_map(|k| o.get(*k))
                        .ok_or_else(|| Error::Malformed(format!("pose missing {keys:?}")))
                        .and_then(num)
                };
                (get(&["x"])?, get(&["y"])?, get(&["yaw", "theta", "heading"])?)
            }
            _ => return Err(Error::Malformed("pose must be [x, y, yaw] or an object".into())),
        };
        let th = if degrees { th.to_radians() } else { th };
        Ok(Pose2D::new(x, y, th))
    };
    let id = field(&["id", "name"])
        .and_then(Value::as_str)
        .unwrap_or(fallback_id)
        .to_string();
    let initial_pose = pose(&["initial_pose", "start", "ego", "init_pose", "start_pose"])?;
    let target_pose = pose(&["target_pose", "goal", "target", "goal_pose"])?;
    let mut obstacles = Vec::new();
    if let Some(v) = field(&["obstacles", "obstacle_points", "obstacle_contours", "contours"]) {
        flatten_points(v, &mut obstacles)?;
    }
    Ok(Scenario {
        id,
        initial_pose,
        target_pose,
        obstacles,
    })
}

fn num(v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Malformed(format!("expected a number, found {v}")))
}

fn flatten_points(v: &Value, out: &mut Vec<Point2>) -> Result<()> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Malformed("obstacles must be an array".into()))?;
    if arr.iter().all(Value::is_number) {
        if arr.len() % 2 != 0 {
            return Err(Error::Malformed("flat obstacle list has odd length".into()));
        }
        for pair in arr.chunks(2) {
            out.push(Point2::new(num(&pair[0])?, num(&pair[1])?));
        }
        return Ok(());
    }
    for item in arr {
        match item {
            Value::Array(inner) if inner.len() == 2 && inner.iter().all(Value::is_number) => {
                out.push(Point2::new(num(&inner[0])?, num(&inner[1])?));
            }
            Value::Array(_) => flatten_points(item, out)?,
            _ => return Err(Error::Malformed("unrecognized obstacle entry".into())),
        }
    }
    Ok(())
}

/// Keeps points within `radius` (inclusive) of `center`, preserving order.
pub fn filter_obstacles(points: &[Point2], center: Point2, radius: f64) -> Vec<Point2> {
    points
        .iter()
        .copied()
        .filter(|p| p.distance(center) <= radius)
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic layouts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    DeadEnd,
    Corridor,
    PerpendicularBay,
}

impl LayoutKind {
    pub fn name(self) -> &'static str {
        match self {
            LayoutKind::DeadEnd => "dead_end",
            LayoutKind::Corridor => "corridor",
            LayoutKind::PerpendicularBay => "perpendicular_bay",
        }
    }
}

/// Geometry of a rear-in bay opening onto an aisle.
///
/// The bay occupies `x ∈ [-bay_width/2, bay_width/2]`, `y ∈ [0, bay_depth]`
/// and opens toward `+y`; the aisle runs along `x` above it. The target faces
/// out of the bay (`theta = pi/2`) with its geometric center at the bay center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub bay_width: f64,
    pub bay_depth: f64,
    /// Aisle width between the bay mouth and the opposite wall (corridor and dead-end).
    pub aisle_width: f64,
    /// Aisle walls span `x ∈ [-aisle_half_length, aisle_half_length]`.
    pub aisle_half_length: f64,
    /// Dead-end only: distance from the bay's right side wall to the end wall.
    pub end_gap: f64,
    /// Place parked-car outlines on both sides of the bay.
    pub neighbor_cars: bool,
    /// Logged start pose.
    pub start: Pose2D,
}

impl SynthParams {
    pub fn default_for(kind: LayoutKind) -> Self {
        match kind {
            LayoutKind::PerpendicularBay => Self {
                bay_width: 2.6,
                bay_depth: 5.5,
                aisle_width: 7.0,
                aisle_half_length: 12.0,
                end_gap: 0.0,
                neighbor_cars: false,
                start: Pose2D::new(-6.0, 9.0, 0.0),
            },
            LayoutKind::Corridor => Self {
                bay_width: 2.8,
                bay_depth: 5.5,
                aisle_width: 6.0,
                aisle_half_length: 15.0,
                end_gap: 0.0,
                neighbor_cars: true,
                start: Pose2D::new(-9.0, 8.5, 0.0),
            },
            LayoutKind::DeadEnd => Self {
                bay_width: 2.8,
                bay_depth: 5.5,
                aisle_width: 6.5,
                aisle_half_length: 14.0,
                end_gap: 2.5,
                neighbor_cars: false,
                start: Pose2D::new(-9.0, 8.75, 0.0),
            },
        }
    }
}

fn sample_segment(a: Point2, b: Point2, out: &mut Vec<Point2>) {
    let n = (a.distance(b) / CONTOUR_SPACING).ceil().max(1.0) as usize;
    for k in 0..=n {
        let t = k as f64 / n as f64;
        out.push(Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
    }
}

fn sample_polyline(pts: &[Point2], closed: bool, out: &mut Vec<Point2>) {
    for w in pts.windows(2) {
        sample_segment(w[0], w[1], out);
    }
    if closed && pts.len() > 2 {
        sample_segment(pts[pts.len() - 1], pts[0], out);
    }
}

/// Outline of a parked car (4.8 m x 1.9 m) centered at `c` with heading `theta`.
fn parked_car(c: Point2, theta: f64, out: &mut Vec<Point2>) {
    let pose = Pose2D::new(c.x, c.y, theta);
    let (hl, hw) = (2.4, 0.95);
    let corners = [
        Point2::new(-hl, -hw),
        Point2::new(hl, -hw),
        Point2::new(hl, hw),
        Point2::new(-hl, hw),
    ]
    .map(|p| pose.transform_point(p));
    sample_polyline(&corners, true, out);
}

fn dedup_points(points: &mut Vec<Point2>) {
    let mut seen = std::collections::HashSet::new();
    points.retain(|p| seen.insert((p.x.to_bits(), p.y.to_bits())));
}

/// Generates a synthetic layout of the given archetype.
pub fn synth_scenario(
    kind: LayoutKind,
    params: &SynthParams,
    spec: &VehicleSpec,
    id: &str,
) -> Result<Scenario> {
    let p = params;
    for (name, v) in [
        ("bay_width", p.bay_width),
        ("bay_depth", p.bay_depth),
        ("aisle_width", p.aisle_width),
        ("aisle_half_length", p.aisle_half_length),
    ] {
        if !(v > 0.0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
    }
    if p.bay_width <= spec.width {
        return Err(Error::InfeasibleGeometry(format!(
            "bay width {} m does not exceed vehicle width {} m",
            p.bay_width, spec.width
        )));
    }
    if p.bay_depth <= spec.length {
        return Err(Error::InfeasibleGeometry(format!(
            "bay depth {} m does not exceed vehicle length {} m",
            p.bay_depth, spec.length
        )));
    }
    let hw = p.bay_width / 2.0;
    let d = p.bay_depth;
    let far_y = d + p.aisle_width;
    let mut obstacles = Vec::new();

    // Bay: back wall and two side walls.
    sample_polyline(
        &[
            Point2::new(-hw, d),
            Point2::new(-hw, 0.0),
            Point2::new(hw, 0.0),
            Point2::new(hw, d),
        ],
        false,
        &mut obstacles,
    );

    if p.neighbor_cars {
        // Parked cars in the adjacent slots, nose out.
        let slot = 2.6;
        for side in [-1.0, 1.0] {
            let cx = side * (hw + 0.15 + slot / 2.0);
            parked_car(Point2::new(cx, d / 2.0), FRAC_PI_2, &mut obstacles);
        }
    }

    let x_min = -p.aisle_half_length;
    let mut x_max = p.aisle_half_length;
    match kind {
        LayoutKind::PerpendicularBay => {}
        LayoutKind::Corridor | LayoutKind::DeadEnd => {
            if kind == LayoutKind::DeadEnd {
                if p.end_gap < 0.0 {
                    return Err(Error::Config("end_gap must be nonnegative".into()));
                }
                x_max = hw + p.end_gap;
                sample_segment(Point2::new(x_max, d), Point2::new(x_max, far_y), &mut obstacles);
            }
            // Near wall with the bay mouth cut out; a parked row replaces it.
            if !p.neighbor_cars {
                sample_segment(Point2::new(x_min, d), Point2::new(-hw, d), &mut obstacles);
                if x_max > hw {
                    sample_segment(Point2::new(hw, d), Point2::new(x_max, d), &mut obstacles);
                }
            }
            sample_segment(Point2::new(x_min, far_y), Point2::new(x_max, far_y), &mut obstacles);
        }
    }
    dedup_points(&mut obstacles);

    let target = Pose2D::new(0.0, d / 2.0 - spec.center_offset(), FRAC_PI_2);
    let scenario = Scenario {
        id: id.to_string(),
        initial_pose: p.start,
        target_pose: target,
        obstacles,
    };
    scenario.validate(spec, DEFAULT_MAX_OBSTACLES)?;
    if scenario.checker(spec)?.collides(&scenario.initial_pose) {
        return Err(Error::InfeasibleGeometry(format!(
            "start pose of {id} collides with the generated layout"
        )));
    }
    Ok(scenario)
}

/// The bundled synthetic pack: four variants of each archetype.
pub fn synthetic_pack(spec: &VehicleSpec) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    let bay = LayoutKind::PerpendicularBay;
    let base = SynthParams::default_for(bay);
    let variants = [
        base,
        SynthParams {
            bay_width: 3.0,
            start: Pose2D::new(7.0, 10.0, std::f64::consts::PI),
            ..base
        },
        SynthParams {
            neighbor_cars: true,
            start: Pose2D::new(-2.0, 14.0, 0.0),
            ..base
        },
        SynthParams {
            bay_width: 2.4,
            bay_depth: 5.8,
            start: Pose2D::new(0.0, 14.0, FRAC_PI_2),
            ..base
        },
    ];
    for (i, v) in variants.iter().enumerate() {
        out.push(synth_scenario(bay, v, spec, &format!("perpendicular_bay_{i:02}"))?);
    }

    let kind = LayoutKind::Corridor;
    let base = SynthParams::default_for(kind);
    let variants = [
        base,
        SynthParams {
            aisle_width: 7.0,
            start: Pose2D::new(10.0, 9.0, std::f64::consts::PI),
            ..base
        },
        SynthParams {
            bay_width: 3.0,
            neighbor_cars: false,
            start: Pose2D::new(-12.0, 8.5, 0.0),
            ..base
        },
        SynthParams {
            aisle_width: 6.5,
            bay_width: 2.6,
            start: Pose2D::new(-8.0, 9.0, 0.0),
            ..base
        },
    ];
    for (i, v) in variants.iter().enumerate() {
        out.push(synth_scenario(kind, v, spec, &format!("corridor_{i:02}"))?);
    }

    let kind = LayoutKind::DeadEnd;
    let base = SynthParams::default_for(kind);
    let variants = [
        base,
        SynthParams {
            end_gap: 4.0,
            ..base
        },
        SynthParams {
            aisle_width: 7.5,
            start: Pose2D::new(-11.0, 9.5, 0.0),
            ..base
        },
        SynthParams {
            bay_width: 3.0,
            neighbor_cars: true,
            end_gap: 3.0,
            start: Pose2D::new(-10.0, 8.75, 0.0),
            ..base
        },
    ];
    for (i, v) in variants.iter().enumerate() {
        out.push(synth_scenario(kind, v, spec, &format!("dead_end_{i:02}"))?);
    }
    Ok(out)
}

/// Open layout with a distant wall ring: used for curriculum statistics.
pub fn open_scenario(spec: &VehicleSpec) -> Result<Scenario> {
    let mut obstacles = Vec::new();
    let r = 40.0;
    sample_polyline(
        &[
            Point2::new(-r, -r),
            Point2::new(r, -r),
            Point2::new(r, r),
            Point2::new(-r, r),
        ],
        true,
        &mut obstacles,
    );
    dedup_points(&mut obstacles);
    let s = Scenario {
        id: "open_space".into(),
        initial_pose: Pose2D::new(-10.0, 5.0, 0.0),
        target_pose: Pose2D::new(0.0, 0.0, FRAC_PI_2),
        obstacles,
    };
    s.validate(spec, DEFAULT_MAX_OBSTACLES)?;
    Ok(s)
}

// ---------------------------------------------------------------------------
// Rollout-from-target initial poses

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingMode {
    Inherit,
    Resample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutParams {
    pub steps: usize,
    pub heading_mode: HeadingMode,
    /// Offset interval (radians) added to the rollout heading when resampling.
    pub heading_range: (f64, f64),
}

/// Candidate steering draws per rollout step before the rollout stops early.
const ROLLOUT_STEP_ATTEMPTS: usize = 10;
/// Heading rejection-sampling budget.
pub const HEADING_ATTEMPTS: usize = 100;

/// Drives forward out of the target with randomized steering, then optionally
/// resamples the heading. Returns a collision-free pose.
pub fn rollout_initial_pose<R: Rng + ?Sized>(
    scenario: &Scenario,
    spec: &VehicleSpec,
    params: &RolloutParams,
    rng: &mut R,
) -> Result<Pose2D> {
    let checker = scenario.checker(spec)?;
    rollout_with_checker(&checker, &scenario.target_pose, params, rng)
}

pub fn rollout_with_checker<R: Rng + ?Sized>(
    checker: &CollisionChecker,
    target: &Pose2D,
    params: &RolloutParams,
    rng: &mut R,
) -> Result<Pose2D> {
    let spec = *checker.spec();
    if checker.collides(target) {
        return Err(Error::Input("rollout target pose collides".into()));
    }
    let (lo, hi) = params.heading_range;
    if params.heading_mode == HeadingMode::Resample && !(lo <= hi) {
        return Err(Error::Config("heading_range must be an ordered interval".into()));
    }
    let half_increment = kinematics::STEER_INCREMENT_DEG.to_radians() / 2.0;
    let mut state = VehicleState::from_pose(target, 0.0);
    'steps: for _ in 0..params.steps {
        for _ in 0..ROLLOUT_STEP_ATTEMPTS {
            let steer_target = rng.gen_range(-spec.max_steer..=spec.max_steer);
            // Forward primitives: 0 = right, 1 = straight, 2 = left.
            let index = if steer_target > state.delta + half_increment {
                2
            } else if steer_target < state.delta - half_increment {
                0
            } else {
                1
            };
            let action = kinematics::action(index).expect("valid index");
            let next = kinematics::step(&state, &action, &spec);
            if !checker.collides(&next.pose()) {
                state = next;
                continue 'steps;
            }
        }
        break;
    }
    let pose = state.pose();
    match params.heading_mode {
        HeadingMode::Inherit => Ok(pose),
        HeadingMode::Resample => {
            for _ in 0..HEADING_ATTEMPTS {
                let offset = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
                let candidate = Pose2D::new(pose.x, pose.y, wrap_angle(pose.theta + offset));
                if !checker.collides(&candidate) {
                    return Ok(candidate);
                }
            }
            Err(Error::SamplingExhausted {
                attempts: HEADING_ATTEMPTS,
            })
        }
    }
}
