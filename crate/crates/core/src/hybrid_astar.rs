//! Hybrid A* over `(x, y, theta, direction)` with arc motion primitives,
//! a holonomic obstacle-aware heuristic and Reeds–Shepp analytic expansion.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, PlanFailureCause, Result};
use crate::geometry::{wrap_angle, CollisionChecker, Point2, Pose2D, VehicleSpec};
use crate::reeds_shepp::{self, RsPath, SegmentKind};
use crate::scenario::{filter_obstacles, Scenario};

/// Spacing of collision checks along arcs and analytic paths, meters.
pub const COLLISION_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub xy_resolution: f64,
    pub theta_resolution: f64,
    pub motion_resolution: f64,
    pub n_steer: usize,
    pub switch_back_cost: f64,
    pub backward_cost: f64,
    pub steer_angle_cost: f64,
    pub steer_change_cost: f64,
    pub heuristic_weight: f64,
    pub obstacle_radius: f64,
    /// Wall-clock budget per query, seconds.
    pub time_budget: f64,
    /// Free space added around the obstacle/start/goal bounding box, meters.
    pub grid_margin: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            xy_resolution: 0.5,
            theta_resolution: 5f64.to_radians(),
            motion_resolution: 1.0,
            n_steer: 20,
            switch_back_cost: 2.0,
            backward_cost: 1.3,
            steer_angle_cost: 0.2,
            steer_change_cost: 0.1,
            heuristic_weight: 1.0,
            obstacle_radius: 25.0,
            time_budget: 10.0,
            grid_margin: 5.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("xy_resolution", self.xy_resolution),
            ("theta_resolution", self.theta_resolution),
            ("motion_resolution", self.motion_resolution),
            ("obstacle_radius", self.obstacle_radius),
            ("time_budget", self.time_budget),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let nonneg = [
            ("switch_back_cost", self.switch_back_cost),
            ("backward_cost", self.backward_cost),
            ("steer_angle_cost", self.steer_angle_cost),
            ("steer_change_cost", self.steer_change_cost),
            ("heuristic_weight", self.heuristic_weight),
            ("grid_margin", self.grid_margin),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative")));
            }
        }
        if self.n_steer < 2 {
            return Err(Error::Config("n_steer must be at least 2".into()));
        }
        Ok(())
    }

    /// Steering set: `n_steer` values evenly spanning `[-max, max]`, plus zero.
    pub fn steering_values(&self, max_steer: f64) -> Vec<f64> {
        let n = self.n_steer;
        let mut v: Vec<f64> = (0..n)
            .map(|i| -max_steer + 2.0 * max_steer * i as f64 / (n - 1) as f64)
            .collect();
        if !v.iter().any(|s| *s == 0.0) {
            v.push(0.0);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentSource {
    Search,
    Analytic,
}

/// A constant-steering piece of a planned path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub direction: i8,
    pub steer: f64,
    /// Arc length, meters.
    pub length: f64,
    pub source: SegmentSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub poses: Vec<Pose2D>,
    /// Motion sign arriving at each pose; the first entry repeats the first motion.
    pub directions: Vec<i8>,
    pub segments: Vec<PathSegment>,
    pub cost: f64,
    pub planning_time: f64,
    pub nodes_expanded: usize,
}

impl PlannedPath {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }
}

/// Cost of appending `seg` after a segment with `(prev_dir, prev_steer)`.
/// A zero `prev_dir` marks the start of the path (no switch-back charge).
pub fn segment_cost(cfg: &PlannerConfig, prev_dir: i8, prev_steer: f64, seg: &PathSegment) -> f64 {
    let mut cost = seg.length * if seg.direction < 0 { cfg.backward_cost } else { 1.0 };
    if prev_dir != 0 && prev_dir != seg.direction {
        cost += cfg.switch_back_cost;
    }
    cost += cfg.steer_angle_cost * seg.steer.abs();
    cost += cfg.steer_change_cost * (seg.steer - prev_steer).abs();
    cost
}

/// Total cost of a segment sequence, accumulated left to right.
pub fn path_cost(cfg: &PlannerConfig, segments: &[PathSegment]) -> f64 {
    let mut cost = 0.0;
    let (mut dir, mut steer) = (0i8, 0.0);
    for s in segments {
        cost += segment_cost(cfg, dir, steer, s);
        dir = s.direction;
        steer = s.steer;
    }
    cost
}

/// Pose after travelling signed arc length `s` with constant steering.
pub fn arc_pose(start: &Pose2D, steer: f64, s: f64, wheelbase: f64) -> Pose2D {
    if steer == 0.0 {
        reeds_shepp::advance(start, SegmentKind::Straight, s, 1.0)
    } else {
        let kind = if steer > 0.0 { SegmentKind::Left } else { SegmentKind::Right };
        reeds_shepp::advance(start, kind, s, wheelbase / steer.abs().tan())
    }
}

// ---------------------------------------------------------------------------
// Holonomic heuristic

/// Axis-aligned grid whose cell centers include the goal position.
#[derive(Debug, Clone)]
pub struct Grid {
    pub origin: Point2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Grid covering `[lo, hi]` with resolution `res`, aligned so that `anchor`
    /// is exactly a cell center.
    pub fn aligned(lo: Point2, hi: Point2, anchor: Point2, res: f64) -> Self {
        let cells_below = |a: f64, l: f64| ((a - l) / res).ceil().max(0.0);
        let ox = anchor.x - (cells_below(anchor.x, lo.x) + 0.5) * res;
        let oy = anchor.y - (cells_below(anchor.y, lo.y) + 0.5) * res;
        let nx = ((hi.x - ox) / res).ceil().max(1.0) as usize;
        let ny = ((hi.y - oy) / res).ceil().max(1.0) as usize;
        Self {
            origin: Point2::new(ox, oy),
            resolution: res,
            nx,
            ny,
        }
    }

    pub fn cell(&self, p: Point2) -> Option<(usize, usize)> {
        let ix = ((p.x - self.origin.x) / self.resolution).floor();
        let iy = ((p.y - self.origin.y) / self.resolution).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.nx as f64 || iy >= self.ny as f64 {
            None
        } else {
            Some((ix as usize, iy as usize))
        }
    }

    pub fn center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    fn flat(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

/// Shortest 8-connected distance to the goal cell for every grid cell.
#[derive(Debug, Clone)]
pub struct HeuristicMap {
    pub grid: Grid,
    pub cost: Vec<f64>,
    pub blocked: Vec<bool>,
}

impl HeuristicMap {
    pub fn at(&self, p: Point2) -> f64 {
        match self.grid.cell(p) {
            Some((ix, iy)) => self.cost[self.grid.flat(ix, iy)],
            None => f64::INFINITY,
        }
    }

    pub fn at_cell(&self, ix: usize, iy: usize) -> f64 {
        self.cost[self.grid.flat(ix, iy)]
    }
}

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Dijkstra from the goal cell over cells not within `inflate` of any obstacle.
pub fn holonomic_heuristic(
    obstacles: &[Point2],
    goal: Point2,
    grid: Grid,
    inflate: f64,
) -> Result<HeuristicMap> {
    let n = grid.nx * grid.ny;
    let mut blocked = vec![false; n];
    let res = grid.resolution;
    let reach = (inflate / res).ceil() as i64 + 1;
    for p in obstacles {
        let cx = ((p.x - grid.origin.x) / res).floor() as i64;
        let cy = ((p.y - grid.origin.y) / res).floor() as i64;
        for ix in (cx - reach)..=(cx + reach) {
            for iy in (cy - reach)..=(cy + reach) {
                if ix < 0 || iy < 0 || ix >= grid.nx as i64 || iy >= grid.ny as i64 {
                    continue;
                }
                let (ix, iy) = (ix as usize, iy as usize);
                if grid.center(ix, iy).distance(*p) <= inflate {
                    blocked[grid.flat(ix, iy)] = true;
                }
            }
        }
    }
    let (gx, gy) = grid
        .cell(goal)
        .ok_or_else(|| Error::Input("goal lies outside the heuristic grid".into()))?;
    if blocked[grid.flat(gx, gy)] {
        return Err(Error::Input("goal cell is blocked by inflated obstacles".into()));
    }
    let mut cost = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    cost[grid.flat(gx, gy)] = 0.0;
    heap.push(Reverse((Dist(0.0), gx, gy)));
    let diag = res * std::f64::consts::SQRT_2;
    while let Some(Reverse((Dist(d), ix, iy))) = heap.pop() {
        if d > cost[grid.flat(ix, iy)] {
            continue;
        }
        for (dx, dy) in [(-1i64, -1i64), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let jx = ix as i64 + dx;
            let jy = iy as i64 + dy;
            if jx < 0 || jy < 0 || jx >= grid.nx as i64 || jy >= grid.ny as i64 {
                continue;
            }
            let (jx, jy) = (jx as usize, jy as usize);
            let j = grid.flat(jx, jy);
            if blocked[j] {
                continue;
            }
            let nd = d + if dx != 0 && dy != 0 { diag } else { res };
            if nd < cost[j] {
                cost[j] = nd;
                heap.push(Reverse((Dist(nd), jx, jy)));
            }
        }
    }
    Ok(HeuristicMap {
        grid,
        cost,
        blocked,
    })
}

// ---------------------------------------------------------------------------
// Analytic expansion

/// Collision-free Reeds–Shepp connection sampled at [`COLLISION_STEP`].
#[derive(Debug, Clone)]
pub struct AnalyticSuffix {
    pub path: RsPath,
    pub poses: Vec<Pose2D>,
    pub directions: Vec<i8>,
    pub segments: Vec<PathSegment>,
}

/// Tries the minimum-radius Reeds–Shepp path from `pose` to `goal`; returns it
/// when every sample is collision-free.
pub fn analytic_expansion(
    pose: &Pose2D,
    goal: &Pose2D,
    checker: &CollisionChecker,
) -> Option<AnalyticSuffix> {
    let spec = checker.spec();
    let path = reeds_shepp::rs_shortest(pose, goal, spec.min_turning_radius());
    let samples = reeds_shepp::sample_rs(&path, pose, COLLISION_STEP);
    if samples.iter().skip(1).any(|s| checker.collides(&s.pose)) {
        return None;
    }
    let segments = path
        .segments
        .iter()
        .map(|s| PathSegment {
            direction: s.direction,
            steer: s.kind.turn_sign() * spec.max_steer,
            length: s.length * path.radius,
            source: SegmentSource::Analytic,
        })
        .collect();
    let mut poses: Vec<Pose2D> = samples.iter().skip(1).map(|s| s.pose).collect();
    let mut directions: Vec<i8> = samples.iter().skip(1).map(|s| s.direction).collect();
    if let Some(last) = poses.last_mut() {
        // Land exactly on the goal; the sampled endpoint differs only by rounding.
        *last = *goal;
    }
    directions.shrink_to_fit();
    Some(AnalyticSuffix {
        path,
        poses,
        directions,
        segments,
    })
}

// ---------------------------------------------------------------------------
// Search

type NodeKey = (i64, i64, i64, i8);

struct Node {
    pose: Pose2D,
    direction: i8,
    steer: f64,
    g: f64,
    parent: Option<usize>,
    /// Sub-step poses of the arc that reached this node (excluding the parent pose).
    arc: Vec<Pose2D>,
    segment: Option<PathSegment>,
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    seq: u64,
    node: usize,
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Min-heap on f, then on insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Plans from the scenario's initial pose to its target.
pub fn plan(scenario: &Scenario, spec: &VehicleSpec, cfg: &PlannerConfig) -> Result<PlannedPath> {
    plan_between(
        &scenario.initial_pose,
        &scenario.target_pose,
        &scenario.obstacles,
        spec,
        cfg,
    )
}

pub fn plan_between(
    start: &Pose2D,
    goal: &Pose2D,
    obstacles: &[Point2],
    spec: &VehicleSpec,
    cfg: &PlannerConfig,
) -> Result<PlannedPath> {
    let started = Instant::now();
    cfg.validate()?;
    spec.validate()?;
    let obstacles = filter_obstacles(obstacles, start.position(), cfg.obstacle_radius);
    let checker = CollisionChecker::new(spec, &obstacles)?;
    if checker.collides(start) {
        return Err(Error::Input("start pose collides with obstacles".into()));
    }
    if checker.collides(goal) {
        return Err(Error::Input("goal pose collides with obstacles".into()));
    }

    let mut lo = Point2::new(start.x.min(goal.x), start.y.min(goal.y));
    let mut hi = Point2::new(start.x.max(goal.x), start.y.max(goal.y));
    for p in &obstacles {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let m = cfg.grid_margin;
    let grid = Grid::aligned(
        Point2::new(lo.x - m, lo.y - m),
        Point2::new(hi.x + m, hi.y + m),
        goal.position(),
        cfg.xy_resolution,
    );
    let heuristic = holonomic_heuristic(&obstacles, goal.position(), grid, spec.width / 2.0)?;
    let radius = spec.min_turning_radius();
    let h = |pose: &Pose2D| -> f64 {
        let holo = heuristic.at(pose.position());
        if !holo.is_finite() {
            return f64::INFINITY;
        }
        let rs = reeds_shepp::rs_shortest(pose, goal, radius).total_length;
        cfg.heuristic_weight * holo.max(rs)
    };
    let key = |pose: &Pose2D, dir: i8| -> Option<NodeKey> {
        let (ix, iy) = heuristic.grid.cell(pose.position())?;
        let it = (wrap_angle(pose.theta) / cfg.theta_resolution).round() as i64;
        Some((ix as i64, iy as i64, it, dir))
    };

    let steers = cfg.steering_values(spec.max_steer);
    let sub_steps = (cfg.motion_resolution / COLLISION_STEP).ceil().max(1.0) as usize;

    let mut nodes = vec![Node {
        pose: *start,
        direction: 0,
        steer: 0.0,
        g: 0.0,
        parent: None,
        arc: Vec::new(),
        segment: None,
    }];
    let mut best_g: HashMap<NodeKey, f64> = HashMap::new();
    let mut closed: HashMap<NodeKey, usize> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    let start_key = key(start, 0).ok_or_else(|| Error::Input("start outside grid".into()))?;
    best_g.insert(start_key, 0.0);
    open.push(Entry {
        f: h(start),
        seq,
        node: 0,
    });
    let mut expanded = 0usize;

    while let Some(Entry { node: idx, .. }) = open.pop() {
        let (pose, dir, steer, g) = {
            let n = &nodes[idx];
            (n.pose, n.direction, n.steer, n.g)
        };
        let k = key(&pose, dir).expect("queued nodes lie in the grid");
        if closed.contains_key(&k) {
            continue;
        }
        closed.insert(k, idx);
        expanded += 1;

        if let Some(suffix) = analytic_expansion(&pose, goal, &checker) {
            let mut path = reconstruct(&nodes, idx);
            let (mut pd, mut ps) = (dir, steer);
            let mut cost = g;
            for s in &suffix.segments {
                cost += segment_cost(cfg, pd, ps, s);
                pd = s.direction;
                ps = s.steer;
            }
            path.poses.extend_from_slice(&suffix.poses);
            path.directions.extend_from_slice(&suffix.directions);
            path.segments.extend_from_slice(&suffix.segments);
            if let Some(&first) = path.directions.get(1) {
                path.directions[0] = first;
            }
            path.cost = cost;
            path.nodes_expanded = expanded;
            path.planning_time = started.elapsed().as_secs_f64();
            return Ok(path);
        }

        if started.elapsed().as_secs_f64() > cfg.time_budget {
            return Err(Error::PlanningFailed {
                cause: PlanFailureCause::TimedOut,
                nodes_expanded: expanded,
            });
        }

        for &next_dir in &[1i8, -1i8] {
            'steer: for &next_steer in &steers {
                let seg = PathSegment {
                    direction: next_dir,
                    steer: next_steer,
                    length: cfg.motion_resolution,
                    source: SegmentSource::Search,
                };
                let mut arc = Vec::with_capacity(sub_steps);
                for i in 1..=sub_steps {
                    let s = next_dir as f64 * cfg.motion_resolution * i as f64 / sub_steps as f64;
                    let p = arc_pose(&pose, next_steer, s, spec.wheelbase);
                    if checker.collides(&p) {
                        continue 'steer;
                    }
                    arc.push(p);
                }
                let end = *arc.last().expect("at least one sub-step");
                let Some(nk) = key(&end, next_dir) else { continue };
                if closed.contains_key(&nk) {
                    continue;
                }
                let ng = g + segment_cost(cfg, dir, steer, &seg);
                if best_g.get(&nk).is_some_and(|&b| b <= ng) {
                    continue;
                }
                let hv = h(&end);
                if !hv.is_finite() {
                    continue;
                }
                best_g.insert(nk, ng);
                nodes.push(Node {
                    pose: end,
                    direction: next_dir,
                    steer: next_steer,
                    g: ng,
                    parent: Some(idx),
                    arc,
                    segment: Some(seg),
                });
                seq += 1;
                open.push(Entry {
                    f: ng + hv,
                    seq,
                    node: nodes.len() - 1,
                });
            }
        }
    }
    Err(Error::PlanningFailed {
        cause: PlanFailureCause::Exhausted,
        nodes_expanded: expanded,
    })
}

fn reconstruct(nodes: &[Node], idx: usize) -> PlannedPath {
    let mut chain = Vec::new();
    let mut cur = Some(idx);
    while let Some(i) = cur {
        chain.push(i);
        cur = nodes[i].parent;
    }
    chain.reverse();
    let mut poses = vec![nodes[chain[0]].pose];
    let mut directions = vec![0i8];
    let mut segments = Vec::new();
    for &i in &chain[1..] {
        let n = &nodes[i];
        poses.extend_from_slice(&n.arc);
        directions.extend(std::iter::repeat_n(n.direction, n.arc.len()));
        segments.push(n.segment.expect("non-root nodes carry their arc"));
    }
    PlannedPath {
        poses,
        directions,
        segments,
        cost: 0.0,
        planning_time: 0.0,
        nodes_expanded: 0,
    }
}
