//! Closed-loop parking environment: reset/step, ego-centric observations,
//! the sparse reward, termination rules and the action-chunk wrapper.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, CollisionChecker, Point2, Pose2D, VehicleSpec};
use crate::kinematics::{self, VehicleState, NUM_ACTIONS};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub goal: f64,
    pub collision: f64,
    pub out_of_bounds: f64,
    pub gear_change: f64,
    pub idle: f64,
    pub time: f64,
    /// Geometric-center distance tolerance, meters.
    pub goal_pos_tol: f64,
    /// Heading tolerance, radians.
    pub goal_heading_tol: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal: 3.0,
            collision: -3.0,
            out_of_bounds: -3.0,
            gear_change: -0.01,
            idle: -0.2,
            time: -0.01,
            goal_pos_tol: 0.2,
            goal_heading_tol: 3f64.to_radians(),
        }
    }
}

impl RewardConfig {
    /// Sparse reward for one primitive given its event flags.
    pub fn reward(&self, info: &StepInfo) -> f64 {
        let mut r = 0.0;
        if info.goal_reached {
            r += self.goal;
        }
        if info.collided {
            r += self.collision;
        }
        if info.out_of_bounds {
            r += self.out_of_bounds;
        }
        if info.direction_change {
            r += self.gear_change;
        }
        if info.idle {
            r += self.idle;
        }
        r + self.time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub reward: RewardConfig,
    /// Observation horizon R, meters.
    pub horizon: f64,
    /// Number of obstacle token slots K.
    pub max_tokens: usize,
    /// Margin added to the obstacle bounding box for the out-of-bounds rule, meters.
    pub bounds_margin: f64,
    /// Maximum geometric-center distance from the target, meters.
    pub max_target_distance: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reward: RewardConfig::default(),
            horizon: 15.0,
            max_tokens: 256,
            bounds_margin: 5.0,
            max_target_distance: 30.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be at least 1".into()));
        }
        if !(self.bounds_margin >= 0.0) || !(self.max_target_distance > 0.0) {
            return Err(Error::Config("bounds must be positive".into()));
        }
        let r = &self.reward;
        if !(r.goal_pos_tol >= 0.0) || !(r.goal_heading_tol >= 0.0) {
            return Err(Error::Config("goal tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Ego-centric network input. Positions are divided by the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Steering angle over its limit.
    pub ego_steer: f64,
    /// Goal `(x/R, y/R, sin, cos)` in the ego frame, positions clipped to [-1, 1].
    pub goal: [f64; 4],
    pub tokens: Vec<[f64; 2]>,
    pub mask: Vec<bool>,
    /// Last nonzero motion sign, 0 before the first move.
    pub gear: f64,
}

impl Observation {
    pub const QUERY_DIM: usize = 6;

    /// Features of the ego/goal query token.
    pub fn query(&self) -> [f64; Self::QUERY_DIM] {
        [
            self.ego_steer,
            self.gear,
            self.goal[0],
            self.goal[1],
            self.goal[2],
            self.goal[3],
        ]
    }

    pub fn num_valid(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Event flags of one primitive, or merged over a chunk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    pub goal_reached: bool,
    pub collided: bool,
    pub out_of_bounds: bool,
    pub truncated: bool,
    pub idle: bool,
    pub direction_change: bool,
    /// Primitive steps since reset.
    pub steps_elapsed: usize,
    /// Primitives executed by this call (1 for a single step).
    pub primitives_executed: usize,
}

impl StepInfo {
    fn merge(&mut self, other: &StepInfo) {
        self.goal_reached |= other.goal_reached;
        self.collided |= other.collided;
        self.out_of_bounds |= other.out_of_bounds;
        self.truncated |= other.truncated;
        self.idle |= other.idle;
        self.direction_change |= other.direction_change;
        self.steps_elapsed = other.steps_elapsed;
        self.primitives_executed += other.primitives_executed;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// True iff geometric centers are within the position tolerance and headings
/// within the heading tolerance.
pub fn check_goal(state: &VehicleState, goal: &Pose2D, spec: &VehicleSpec, cfg: &RewardConfig) -> bool {
    let c = spec.geometric_center(&state.pose());
    let g = spec.geometric_center(goal);
    c.distance(g) <= cfg.goal_pos_tol && wrap_angle(state.theta - goal.theta).abs() <= cfg.goal_heading_tol
}

/// Builds the observation: nearest `max_tokens` obstacle points within the
/// horizon (ties broken by index), padded and masked.
pub fn build_observation(
    state: &VehicleState,
    gear: i8,
    goal: &Pose2D,
    obstacles: &[Point2],
    spec: &VehicleSpec,
    horizon: f64,
    max_tokens: usize,
) -> Observation {
    let ego = state.pose();
    let mut near: Vec<(f64, usize, Point2)> = obstacles
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let q = ego.inverse_transform_point(*p);
            let d = q.norm();
            (d <= horizon).then_some((d, i, q))
        })
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(max_tokens);
    let mut tokens = vec![[0.0; 2]; max_tokens];
    let mut mask = vec![false; max_tokens];
    for (slot, (_, _, q)) in near.iter().enumerate() {
        tokens[slot] = [
            (q.x / horizon).clamp(-1.0, 1.0),
            (q.y / horizon).clamp(-1.0, 1.0),
        ];
        mask[slot] = true;
    }
    let rel = ego.relative(goal);
    let (s, c) = rel.theta.sin_cos();
    Observation {
        ego_steer: state.delta / spec.max_steer,
        goal: [
            (rel.x / horizon).clamp(-1.0, 1.0),
            (rel.y / horizon).clamp(-1.0, 1.0),
            s,
            c,
        ],
        tokens,
        mask,
        gear: gear as f64,
    }
}

/// Action sequence sufficient to replay an episode deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayLog {
    pub scenario_id: String,
    pub seed: u64,
    pub initial_pose: Pose2D,
    pub max_episode_len: usize,
    pub actions: Vec<usize>,
}

impl ReplayLog {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
    }
}

/// One environment instance. Single-threaded; independent instances share nothing.
#[derive(Debug, Clone)]
pub struct ParkingEnv {
    scenario: Scenario,
    spec: VehicleSpec,
    cfg: EnvConfig,
    checker: CollisionChecker,
    bounds: (Point2, Point2),
    target_center: Point2,
    state: VehicleState,
    gear: i8,
    steps: usize,
    max_len: usize,
    active: bool,
    initial_pose: Pose2D,
    actions: Vec<usize>,
    trajectory: Vec<(Pose2D, i8)>,
}

impl ParkingEnv {
    pub fn new(scenario: Scenario, spec: VehicleSpec, cfg: EnvConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let checker = scenario.checker(&spec)?;
        let target_center = spec.geometric_center(&scenario.target_pose);
        let mut lo = target_center;
        let mut hi = target_center;
        for p in &scenario.obstacles {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let m = cfg.bounds_margin;
        let bounds = (Point2::new(lo.x - m, lo.y - m), Point2::new(hi.x + m, hi.y + m));
        let initial_pose = scenario.initial_pose;
        Ok(Self {
            scenario,
            spec,
            cfg,
            checker,
            bounds,
            target_center,
            state: VehicleState::from_pose(&initial_pose, 0.0),
            gear: 0,
            steps: 0,
            max_len: 0,
            active: false,
            initial_pose,
            actions: Vec::new(),
            trajectory: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn spec(&self) -> &VehicleSpec {
        &self.spec
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn checker(&self) -> &CollisionChecker {
        &self.checker
    }

    pub fn state(&self) -> VehicleState {
        self.state
    }

    pub fn gear(&self) -> i8 {
        self.gear
    }

    pub fn steps_elapsed(&self) -> usize {
        self.steps
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Actions executed since the last reset.
    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Rear-axle poses visited since reset, each with the motion sign that reached it.
    pub fn trajectory(&self) -> &[(Pose2D, i8)] {
        &self.trajectory
    }

    pub fn replay_log(&self, seed: u64) -> ReplayLog {
        ReplayLog {
            scenario_id: self.scenario.id.clone(),
            seed,
            initial_pose: self.initial_pose,
            max_episode_len: self.max_len,
            actions: self.actions.clone(),
        }
    }

    pub fn reset(&mut self, init_pose: Pose2D, max_episode_len: usize) -> Result<Observation> {
        if !init_pose.is_finite() {
            return Err(Error::ResetRejected("initial pose is not finite".into()));
        }
        if self.checker.collides(&init_pose) {
            return Err(Error::ResetRejected(format!(
                "initial pose ({:.3}, {:.3}, {:.3}) collides with obstacles",
                init_pose.x, init_pose.y, init_pose.theta
            )));
        }
        if max_episode_len == 0 {
            return Err(Error::Config("max_episode_len must be at least 1".into()));
        }
        self.state = VehicleState::from_pose(&init_pose, 0.0);
        self.gear = 0;
        self.steps = 0;
        self.max_len = max_episode_len;
        self.active = true;
        self.initial_pose = init_pose;
        self.actions.clear();
        self.trajectory.clear();
        self.trajectory.push((init_pose, 0));
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        build_observation(
            &self.state,
            self.gear,
            &self.scenario.target_pose,
            &self.scenario.obstacles,
            &self.spec,
            self.cfg.horizon,
            self.cfg.max_tokens,
        )
    }

    fn out_of_bounds(&self, pose: &Pose2D) -> bool {
        let c = self.spec.geometric_center(pose);
        let (lo, hi) = self.bounds;
        c.x < lo.x || c.y < lo.y || c.x > hi.x || c.y > hi.y || c.distance(self.target_center) > self.cfg.max_target_distance
    }

    /// Applies one primitive without building an observation.
    fn advance(&mut self, index: usize) -> Result<(f64, bool, StepInfo)> {
        if !self.active {
            return Err(Error::Protocol("step called on a finished or unreset episode".into()));
        }
        let action = kinematics::action(index)
            .ok_or_else(|| Error::Input(format!("action index {index} outside 0..{NUM_ACTIONS}")))?;
        self.state = kinematics::step(&self.state, &action, &self.spec);
        self.steps += 1;
        self.actions.push(index);
        let dir = action.direction();
        self.trajectory.push((self.state.pose(), dir));

        let mut info = StepInfo {
            idle: action.is_idle(),
            direction_change: dir != 0 && (dir as i32) * (self.gear as i32) == -1,
            steps_elapsed: self.steps,
            primitives_executed: 1,
            ..Default::default()
        };
        if dir != 0 {
            self.gear = dir;
        }
        let pose = self.state.pose();
        if self.checker.collides(&pose) {
            info.collided = true;
        } else if check_goal(&self.state, &self.scenario.target_pose, &self.spec, &self.cfg.reward) {
            info.goal_reached = true;
        } else if self.out_of_bounds(&pose) {
            info.out_of_bounds = true;
        } else if self.steps >= self.max_len {
            info.truncated = true;
        }
        let done = info.collided || info.goal_reached || info.out_of_bounds || info.truncated;
        if done {
            self.active = false;
        }
        Ok((self.cfg.reward.reward(&info), done, info))
    }

    pub fn step_primitive(&mut self, index: usize) -> Result<StepOutcome> {
        let (reward, done, info) = self.advance(index)?;
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done,
            info,
        })
    }

    /// Executes the chunk in order, summing rewards and stopping on the first
    /// primitive that ends the episode.
    pub fn chunk_step(&mut self, chunk: &[usize]) -> Result<StepOutcome> {
        if chunk.is_empty() {
            return Err(Error::Input("empty action chunk".into()));
        }
        if let Some(bad) = chunk.iter().find(|&&a| a >= NUM_ACTIONS) {
            return Err(Error::Input(format!("action index {bad} outside 0..{NUM_ACTIONS}")));
        }
        let mut total = 0.0;
        let mut merged = StepInfo::default();
        let mut done = false;
        for &a in chunk {
            let (r, d, info) = self.advance(a)?;
            total += r;
            merged.merge(&info);
            if d {
                done = true;
                break;
            }
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward: total,
            done,
            info: merged,
        })
    }

    /// Resets to the log's initial pose and re-executes its actions.
    pub fn replay(&mut self, log: &ReplayLog) -> Result<Vec<StepOutcome>> {
        self.reset(log.initial_pose, log.max_episode_len)?;
        log.actions.iter().map(|&a| self.step_primitive(a)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_env() -> ParkingEnv {
        let s = Scenario {
            id: "empty".into(),
            initial_pose: Pose2D::default(),
            target_pose: Pose2D::new(0.0, 0.0, 0.0),
            obstacles: vec![],
        };
        ParkingEnv::new(s, VehicleSpec::default(), EnvConfig::default()).unwrap()
    }

    #[test]
    fn reset_at_target() {
        let mut env = empty_env();
        let obs = env.reset(Pose2D::default(), 10).unwrap();
        assert_eq!(obs.goal, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(obs.num_valid(), 0);
        assert!(obs.tokens.iter().all(|t| *t == [0.0, 0.0]));
    }

    #[test]
    fn goal_five_meters_ahead() {
        let mut env = empty_env();
        let obs = env.reset(Pose2D::new(-5.0, 0.0, 0.0), 10).unwrap();
        assert!((obs.goal[0] - 5.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn step_rewards() {
        let mut env = empty_env();
        env.reset(Pose2D::new(-2.0, 0.0, 0.0), 100).unwrap();
        assert_eq!(env.step_primitive(1).unwrap().reward, -0.01);
        assert_eq!(env.step_primitive(7).unwrap().reward, -0.2 + -0.01);
        assert_eq!(env.step_primitive(4).unwrap().reward, -0.01 + -0.01);
    }

    #[test]
    fn goal_check_geometry() {
        let spec = VehicleSpec::default();
        let cfg = RewardConfig::default();
        let g = Pose2D::new(1.0, 2.0, 0.4);
        assert!(check_goal(&VehicleState::from_pose(&g, 0.0), &g, &spec, &cfg));
        let shifted = Pose2D::new(1.0 + 0.19 * 0.4f64.cos(), 2.0 + 0.19 * 0.4f64.sin(), 0.4);
        assert!(check_goal(&VehicleState::from_pose(&shifted, 0.0), &g, &spec, &cfg));
        let turned = Pose2D::new(1.0, 2.0, 0.4 + 3.5f64.to_radians());
        assert!(!check_goal(&VehicleState::from_pose(&turned, 0.0), &g, &spec, &cfg));
    }

    #[test]
    fn horizon_boundary_token_is_kept() {
        let obs = build_observation(
            &VehicleState::default(),
            0,
            &Pose2D::default(),
            &[Point2::new(15.0, 0.0), Point2::new(15.0 + 1e-9, 0.0)],
            &VehicleSpec::default(),
            15.0,
            4,
        );
        assert_eq!(obs.mask, vec![true, false, false, false]);
        assert_eq!(obs.tokens[0], [1.0, 0.0]);
    }

    #[test]
    fn protocol_errors() {
        let mut env = empty_env();
        assert!(matches!(env.step_primitive(1), Err(Error::Protocol(_))));
        env.reset(Pose2D::new(-2.0, 0.0, 0.0), 1).unwrap();
        let out = env.step_primitive(1).unwrap();
        assert!(out.done && out.info.truncated);
        assert!(matches!(env.step_primitive(1), Err(Error::Protocol(_))));
        env.reset(Pose2D::default(), 5).unwrap();
        assert!(matches!(env.step_primitive(8), Err(Error::Input(_))));
    }

    #[test]
    fn colliding_reset_rejected() {
        let s = Scenario {
            id: "wall".into(),
            initial_pose: Pose2D::default(),
            target_pose: Pose2D::new(-10.0, 0.0, 0.0),
            obstacles: vec![Point2::new(1.0, 0.0)],
        };
        let mut env = ParkingEnv::new(s, VehicleSpec::default(), EnvConfig::default()).unwrap();
        assert!(matches!(env.reset(Pose2D::default(), 10), Err(Error::ResetRejected(_))));
    }
}
