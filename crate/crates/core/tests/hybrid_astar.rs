mod common;

use common::oracles;
use parking_planner::geometry::{CollisionChecker, Point2, Pose2D, VehicleSpec};
use parking_planner::hybrid_astar::{
    analytic_expansion, holonomic_heuristic, path_cost, plan_between, Grid, PlannerConfig,
};
use parking_planner::reeds_shepp::rs_shortest;
use parking_planner::error::PlanFailureCause;
use parking_planner::Error;

fn wall(x: f64, y0: f64, y1: f64) -> Vec<Point2> {
    let n = ((y1 - y0) / 0.1).round() as usize;
    (0..=n).map(|i| Point2::new(x, y0 + 0.1 * i as f64)).collect()
}

#[test]
fn straight_ahead_in_open_space() {
    let spec = VehicleSpec::default();
    let path = plan_between(
        &Pose2D::default(),
        &Pose2D::new(10.0, 0.0, 0.0),
        &[],
        &spec,
        &PlannerConfig::default(),
    )
    .unwrap();
    assert!((path.length() - 10.0).abs() <= 1.0, "length {}", path.length());
    assert!(path.directions.iter().all(|&d| d >= 0));
}

#[test]
fn zero_penalties_stay_near_reeds_shepp_length() {
    let spec = VehicleSpec::default();
    let cfg = PlannerConfig {
        switch_back_cost: 0.0,
        backward_cost: 1.0,
        steer_angle_cost: 0.0,
        steer_change_cost: 0.0,
        ..PlannerConfig::default()
    };
    for (start, goal) in [
        (Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(6.0, 4.0, 1.2)),
        (Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(-3.0, 5.0, -2.0)),
    ] {
        let path = plan_between(&start, &goal, &[], &spec, &cfg).unwrap();
        let rs = rs_shortest(&start, &goal, spec.min_turning_radius()).total_length;
        assert!(path.length() <= rs + 2.0 * cfg.motion_resolution, "{} vs {rs}", path.length());
    }
}

#[test]
fn path_around_a_wall_is_clean_and_cost_is_exact() {
    let spec = VehicleSpec::default();
    let cfg = PlannerConfig::default();
    let obstacles = wall(6.0, -3.0, 3.0);
    let start = Pose2D::default();
    let goal = Pose2D::new(12.0, 0.0, 0.0);
    let path = plan_between(&start, &goal, &obstacles, &spec, &cfg).unwrap();
    let pts: Vec<(f64, f64)> = obstacles.iter().map(|p| (p.x, p.y)).collect();
    for w in path.poses.windows(2) {
        assert!(w[0].position().distance(w[1].position()) <= 0.1 + 1e-9);
    }
    for p in &path.poses {
        assert!(!oracles::collides_brute(p.x, p.y, p.theta, &pts), "{p:?}");
    }
    let segs: Vec<(i8, f64, f64)> = path.segments.iter().map(|s| (s.direction, s.steer, s.length)).collect();
    let expected = oracles::path_cost(&segs, cfg.switch_back_cost, cfg.backward_cost, cfg.steer_angle_cost, cfg.steer_change_cost);
    assert_eq!(path.cost, expected);
    assert_eq!(path_cost(&cfg, &path.segments), expected);
}

#[test]
fn planning_is_deterministic() {
    let spec = VehicleSpec::default();
    let cfg = PlannerConfig::default();
    let obstacles = wall(6.0, -3.0, 3.0);
    let a = plan_between(&Pose2D::default(), &Pose2D::new(12.0, 0.0, 0.0), &obstacles, &spec, &cfg).unwrap();
    let b = plan_between(&Pose2D::default(), &Pose2D::new(12.0, 0.0, 0.0), &obstacles, &spec, &cfg).unwrap();
    assert_eq!(a.poses, b.poses);
    assert_eq!(a.cost, b.cost);
    assert_eq!(a.nodes_expanded, b.nodes_expanded);
}

#[test]
fn analytic_expansion_accepts_free_and_rejects_blocked() {
    let spec = VehicleSpec::default();
    let free = CollisionChecker::new(&spec, &[]).unwrap();
    let goal = Pose2D::new(10.0, 2.0, 0.5);
    let sfx = analytic_expansion(&Pose2D::default(), &goal, &free).unwrap();
    assert_eq!(*sfx.poses.last().unwrap(), goal);
    let blocked = CollisionChecker::new(&spec, &wall(6.0, -10.0, 10.0)).unwrap();
    assert!(analytic_expansion(&Pose2D::default(), &goal, &blocked).is_none());
}

#[test]
fn boxed_in_start_exhausts() {
    let spec = VehicleSpec::default();
    let mut obstacles = wall(-1.2, -1.2, 1.2);
    obstacles.extend(wall(4.1, -1.2, 1.2));
    for i in 0..=53 {
        let x = -1.2 + 0.1 * i as f64;
        obstacles.push(Point2::new(x, -1.2));
        obstacles.push(Point2::new(x, 1.2));
    }
    let err = plan_between(&Pose2D::default(), &Pose2D::new(15.0, 0.0, 0.0), &obstacles, &spec, &PlannerConfig::default())
        .unwrap_err();
    assert!(matches!(err, Error::PlanningFailed { cause: PlanFailureCause::Exhausted, .. }), "{err}");
}

#[test]
fn colliding_goal_is_rejected() {
    let spec = VehicleSpec::default();
    let err = plan_between(&Pose2D::default(), &Pose2D::new(10.0, 0.0, 0.0), &[Point2::new(11.0, 0.0)], &spec, &PlannerConfig::default())
        .unwrap_err();
    assert!(matches!(err, Error::Input(_)));
}

#[test]
fn holonomic_heuristic_is_admissible_in_free_space() {
    let grid = Grid::aligned(Point2::new(-10.0, -10.0), Point2::new(10.0, 10.0), Point2::new(0.0, 0.0), 0.5);
    let h = holonomic_heuristic(&[], Point2::new(0.0, 0.0), grid, 1.0).unwrap();
    assert_eq!(h.at(Point2::new(0.0, 0.0)), 0.0);
    for p in [Point2::new(5.0, 3.0), Point2::new(-7.5, 8.0), Point2::new(9.0, -9.0)] {
        let d = p.norm();
        assert!(h.at(p) >= d - 0.5 && h.at(p) <= d * 1.1 + 0.5, "{p:?}: {} vs {d}", h.at(p));
    }
}
