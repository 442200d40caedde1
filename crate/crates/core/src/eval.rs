//! Evaluation harness: success, planning time, travel distance and pivot
//! points for the learned policy and the Hybrid A* baseline.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{check_goal, EnvConfig, ParkingEnv};
use crate::error::{Error, Result};
use crate::geometry::VehicleSpec;
use crate::hybrid_astar::{self, PlannerConfig};
use crate::kinematics::{self, VehicleState};
use crate::policy::PolicyNet;
use crate::scenario::Scenario;

/// Statement of how aggregates and timings are computed; written into every report.
pub const REPORT_NOTE: &str = "success rate over all scenarios; time, distance and pivots averaged over successful scenarios only; \
rl time = sum of policy forward-pass wall times per episode; hybrid-astar time = wall time of the planning query";

/// Number of direction changes; zero entries are skipped.
pub fn pivot_count(directions: &[i8]) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for &d in directions {
        if d == 0 {
            continue;
        }
        if last != 0 && d != last {
            count += 1;
        }
        last = d;
    }
    count
}

/// Sum of absolute displacements, accumulated in order.
pub fn travel_distance(displacements: &[f64]) -> f64 {
    displacements.iter().fold(0.0, |acc, d| acc + d.abs())
}

/// Signed displacement of each executed primitive.
pub fn action_displacements(actions: &[usize]) -> Result<Vec<f64>> {
    actions
        .iter()
        .map(|&a| {
            kinematics::action(a)
                .map(|p| p.displacement())
                .ok_or_else(|| Error::Input(format!("action index {a} outside 0..{}", kinematics::NUM_ACTIONS)))
        })
        .collect()
}

/// Motion sign of each executed primitive (0 for pre-steer).
pub fn action_directions(actions: &[usize]) -> Result<Vec<i8>> {
    actions
        .iter()
        .map(|&a| {
            kinematics::action(a)
                .map(|p| p.direction())
                .ok_or_else(|| Error::Input(format!("action index {a} outside 0..{}", kinematics::NUM_ACTIONS)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RlPolicy,
    HybridAstar,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RlPolicy => "rl-policy",
            Method::HybridAstar => "hybrid-astar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub method: String,
    pub success: bool,
    pub planning_time_s: f64,
    pub travel_distance_m: f64,
    pub pivot_points: usize,
    pub failure_cause: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub scenarios: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_time_s: f64,
    pub mean_distance_m: f64,
    pub mean_pivots: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn summary(&self) -> EvalSummary {
        let ok: Vec<&EvalRow> = self.rows.iter().filter(|r| r.success).collect();
        let n = ok.len();
        let mean = |f: &dyn Fn(&EvalRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        EvalSummary {
            scenarios: self.rows.len(),
            successes: n,
            success_rate: if self.rows.is_empty() { 0.0 } else { n as f64 / self.rows.len() as f64 },
            mean_time_s: mean(&|r| r.planning_time_s),
            mean_distance_m: mean(&|r| r.travel_distance_m),
            mean_pivots: mean(&|r| r.pivot_points as f64),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Malformed(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn summary_text(&self) -> String {
        let s = self.summary();
        let mut out = String::new();
        let _ = writeln!(out, "# {REPORT_NOTE}");
        let methods: Vec<&str> = {
            let mut m: Vec<&str> = self.rows.iter().map(|r| r.method.as_str()).collect();
            m.dedup();
            m
        };
        let _ = writeln!(out, "method:        {}", methods.join(", "));
        let _ = writeln!(out, "scenarios:     {}", s.scenarios);
        let _ = writeln!(out, "success rate:  {:.1}% ({}/{})", 100.0 * s.success_rate, s.successes, s.scenarios);
        let _ = writeln!(out, "mean time:     {:.3} s", s.mean_time_s);
        let _ = writeln!(out, "mean distance: {:.2} m", s.mean_distance_m);
        let _ = writeln!(out, "mean pivots:   {:.2}", s.mean_pivots);
        out
    }

    /// Writes `report.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("report.csv");
        fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        let txt = dir.join("summary.txt");
        fs::write(&txt, self.summary_text()).map_err(|e| Error::io(&txt, e))
    }
}

/// Outcome of one greedy closed-loop episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub success: bool,
    pub failure_cause: String,
    pub actions: Vec<usize>,
    /// Total forward-pass wall time, seconds.
    pub inference_time: f64,
    pub travel_distance: f64,
    pub pivots: usize,
}

/// Runs the policy greedily (argmax) from the environment's current scenario
/// and `init_pose` until the episode ends.
pub fn run_greedy_episode(
    policy: &PolicyNet,
    env: &mut ParkingEnv,
    init_pose: crate::geometry::Pose2D,
    max_episode_len: usize,
) -> Result<Episode> {
    let state = VehicleState::from_pose(&init_pose, 0.0);
    if check_goal(&state, &env.scenario().target_pose, env.spec(), &env.config().reward) {
        return Ok(Episode {
            success: true,
            failure_cause: String::new(),
            actions: Vec::new(),
            inference_time: 0.0,
            travel_distance: 0.0,
            pivots: 0,
        });
    }
    let mut obs = env.reset(init_pose, max_episode_len)?;
    let mut inference_time = 0.0;
    let info = loop {
        let t0 = Instant::now();
        let (dist, _) = policy.forward(&obs)?;
        inference_time += t0.elapsed().as_secs_f64();
        let chunk = policy.config.chunk(&dist.argmax());
        let out = env.chunk_step(&chunk)?;
        if out.done {
            break out.info;
        }
        obs = out.observation;
    };
    let actions = env.actions().to_vec();
    let failure_cause = if info.goal_reached {
        ""
    } else if info.collided {
        "collision"
    } else if info.out_of_bounds {
        "out_of_bounds"
    } else {
        "step_limit"
    };
    Ok(Episode {
        success: info.goal_reached,
        failure_cause: failure_cause.into(),
        travel_distance: travel_distance(&action_displacements(&actions)?),
        pivots: pivot_count(&action_directions(&actions)?),
        actions,
        inference_time,
    })
}

/// Greedy policy rollouts from each scenario's logged initial pose.
pub fn evaluate_policy(
    policy: &PolicyNet,
    scenarios: &[Scenario],
    spec: &VehicleSpec,
    env_cfg: &EnvConfig,
    max_episode_len: usize,
) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let row = match ParkingEnv::new(sc.clone(), *spec, *env_cfg)
            .and_then(|mut env| run_greedy_episode(policy, &mut env, sc.initial_pose, max_episode_len))
        {
            Ok(ep) => EvalRow {
                id: sc.id.clone(),
                method: Method::RlPolicy.name().into(),
                success: ep.success,
                planning_time_s: ep.inference_time,
                travel_distance_m: ep.travel_distance,
                pivot_points: ep.pivots,
                failure_cause: ep.failure_cause,
            },
            Err(e) => failed_row(sc, Method::RlPolicy, &e),
        };
        rows.push(row);
    }
    Ok(EvalReport { rows })
}

/// One Hybrid A* query per scenario.
pub fn evaluate_planner(scenarios: &[Scenario], spec: &VehicleSpec, cfg: &PlannerConfig) -> EvalReport {
    let rows = scenarios
        .iter()
        .map(|sc| {
            let t0 = Instant::now();
            match hybrid_astar::plan(sc, spec, cfg) {
                Ok(path) => EvalRow {
                    id: sc.id.clone(),
                    method: Method::HybridAstar.name().into(),
                    success: true,
                    planning_time_s: t0.elapsed().as_secs_f64(),
                    travel_distance_m: travel_distance(&path.segments.iter().map(|s| s.length).collect::<Vec<_>>()),
                    pivot_points: pivot_count(&path.segments.iter().map(|s| s.direction).collect::<Vec<_>>()),
                    failure_cause: String::new(),
                },
                Err(e) => failed_row(sc, Method::HybridAstar, &e),
            }
        })
        .collect();
    EvalReport { rows }
}

fn failed_row(sc: &Scenario, method: Method, e: &Error) -> EvalRow {
    EvalRow {
        id: sc.id.clone(),
        method: method.name().into(),
        success: false,
        planning_time_s: 0.0,
        travel_distance_m: 0.0,
        pivot_points: 0,
        failure_cause: e.to_string(),
    }
}
