mod common;

use std::f64::consts::PI;

use common::oracles;
use parking_planner::geometry::{
    ego_to_world, footprint_polygon, shoelace_area, world_to_ego, CollisionChecker, Point2, Pose2D, VehicleSpec,
};
use parking_planner::kinematics::{self, turning_radius, VehicleState};
use parking_planner::scenario::{
    filter_obstacles, import_layout, load_scenario, parse_scenario, save_scenario, synthetic_pack, Scenario,
};
use parking_planner::Error;
use proptest::prelude::*;

#[test]
fn footprint_area_matches_chamfered_rectangle() {
    let spec = VehicleSpec::default();
    let fp = footprint_polygon(&spec).unwrap();
    let expected = 4.95 * 2.0 - 4.0 * 0.5 * 0.3 * 0.2;
    assert!((fp.area() - expected).abs() < 1e-12);
    let world: Vec<Point2> = fp.to_world(&Pose2D::new(3.0, -2.0, 1.1)).to_vec();
    assert!((shoelace_area(&world).abs() - expected).abs() < 1e-9);
}

#[test]
fn min_turning_radius_and_center_offset() {
    let spec = VehicleSpec::default();
    assert!((spec.min_turning_radius() - 3.0 / (32f64.to_radians()).tan()).abs() < 1e-12);
    assert!((spec.min_turning_radius() - 4.8010).abs() < 1e-3);
    assert!((spec.center_offset() - 1.45).abs() < 1e-12);
    assert_eq!(turning_radius(&spec, 0.0), None);
}

#[test]
fn points_on_the_chamfer_are_outside() {
    let spec = VehicleSpec::default();
    let checker = CollisionChecker::new(&spec, &[Point2::new(3.9, 0.97)]).unwrap();
    assert!(!checker.collides(&Pose2D::default()));
    let checker = CollisionChecker::new(&spec, &[Point2::new(3.5, 0.5)]).unwrap();
    assert!(checker.collides(&Pose2D::default()));
}

#[test]
fn idle_actions_only_change_steering() {
    let spec = VehicleSpec::default();
    let s = VehicleState { x: 1.0, y: 2.0, theta: 0.3, delta: 0.0 };
    for a in [6, 7] {
        let n = kinematics::step(&s, &kinematics::action(a).unwrap(), &spec);
        assert_eq!((n.x, n.y, n.theta), (s.x, s.y, s.theta));
        assert!((n.delta.abs() - 8f64.to_radians()).abs() < 1e-15);
    }
}

#[test]
fn steering_saturates() {
    let spec = VehicleSpec::default();
    let mut s = VehicleState::default();
    for _ in 0..10 {
        s = kinematics::step(&s, &kinematics::action(7).unwrap(), &spec);
    }
    assert_eq!(s.delta, spec.max_steer);
    assert!(kinematics::action(8).is_none());
}

proptest! {
    #[test]
    fn step_matches_oracle(x in -30.0..30.0f64, y in -30.0..30.0f64, th in -PI..PI, d in -0.55..0.55f64, a in 0usize..8) {
        let spec = VehicleSpec::default();
        let n = kinematics::step(&VehicleState { x, y, theta: th, delta: d }, &kinematics::action(a).unwrap(), &spec);
        let o = oracles::bicycle_step((x, y, th, d), a);
        prop_assert!((n.x - o.0).abs() < 1e-12 && (n.y - o.1).abs() < 1e-12);
        prop_assert!((n.delta - o.3).abs() < 1e-15);
        prop_assert!(n.theta > -PI && n.theta <= PI);
    }

    #[test]
    fn ego_transform_round_trips(ex in -20.0..20.0f64, ey in -20.0..20.0f64, et in -PI..PI,
                                 px in -20.0..20.0f64, py in -20.0..20.0f64, pt in -PI..PI) {
        let ego = Pose2D::new(ex, ey, et);
        let p = Pose2D::new(px, py, pt);
        let back = ego_to_world(&ego, &world_to_ego(&ego, &p));
        prop_assert!((back.x - p.x).abs() < 1e-9 && (back.y - p.y).abs() < 1e-9);
        prop_assert!(parking_planner::geometry::wrap_angle(back.theta - p.theta).abs() < 1e-12);
    }

    #[test]
    fn collision_matches_ray_casting(x in -3.0..3.0f64, y in -3.0..3.0f64, th in -PI..PI,
                                     px in -6.0..6.0f64, py in -6.0..6.0f64) {
        let checker = CollisionChecker::new(&VehicleSpec::default(), &[Point2::new(px, py)]).unwrap();
        prop_assert_eq!(checker.collides(&Pose2D::new(x, y, th)), oracles::collides_brute(x, y, th, &[(px, py)]));
    }
}

#[test]
fn scenario_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let pack = synthetic_pack(&VehicleSpec::default()).unwrap();
    let path = dir.path().join("s.json");
    save_scenario(&pack[0], &path).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), pack[0]);

    assert!(matches!(load_scenario(dir.path().join("missing.json")), Err(Error::MissingFile(_))));
    assert!(matches!(parse_scenario("{not json"), Err(Error::Malformed(_))));

    let blocked = Scenario {
        id: "blocked".into(),
        initial_pose: Pose2D::new(-10.0, 0.0, 0.0),
        target_pose: Pose2D::default(),
        obstacles: vec![Point2::new(1.0, 0.0)],
    };
    let path = dir.path().join("blocked.json");
    save_scenario(&blocked, &path).unwrap();
    assert!(load_scenario(&path).is_err());
}

#[test]
fn synthetic_pack_targets_are_free() {
    let spec = VehicleSpec::default();
    for s in synthetic_pack(&spec).unwrap() {
        let checker = s.checker(&spec).unwrap();
        assert!(!checker.collides(&s.target_pose), "{}", s.id);
        assert!(!checker.collides(&s.initial_pose), "{}", s.id);
    }
}

#[test]
fn layout_import_accepts_flat_and_degree_headings() {
    let text = r#"{"id": "x", "angle_unit": "deg", "start": [-10, 0, 90],
                   "target": {"x": 0, "y": 0, "yaw": 0}, "obstacles": [20, 0, 20, 1]}"#;
    let s = import_layout(text, "fallback").unwrap();
    assert!((s.initial_pose.theta - PI / 2.0).abs() < 1e-12);
    assert_eq!(s.obstacles.len(), 2);
}

#[test]
fn filter_keeps_points_within_radius() {
    let pts: Vec<Point2> = (0..50).map(|i| Point2::new(i as f64, 0.0)).collect();
    let kept = filter_obstacles(&pts, Point2::new(0.0, 0.0), 25.0);
    assert_eq!(kept.len(), 26);
}
