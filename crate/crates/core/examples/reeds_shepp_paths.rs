//! Shortest Reeds–Shepp connections from the origin to a handful of goals.

use std::f64::consts::PI;

use parking_planner::geometry::{Pose2D, VehicleSpec};
use parking_planner::reeds_shepp::{rs_all, rs_shortest};

fn main() {
    let radius = VehicleSpec::default().min_turning_radius();
    let start = Pose2D::default();
    for goal in [
        Pose2D::new(10.0, 0.0, 0.0),
        Pose2D::new(0.0, 5.0, PI),
        Pose2D::new(-4.0, 3.0, PI / 2.0),
        Pose2D::new(2.0, -1.0, 0.0),
    ] {
        let best = rs_shortest(&start, &goal, radius);
        let end = best.endpoint(&start);
        println!(
            "goal ({:5.1}, {:5.1}, {:5.2}) -> {:<10} {:7.3} m  ({} candidates, endpoint error {:.1e})",
            goal.x,
            goal.y,
            goal.theta,
            best.word(),
            best.total_length,
            rs_all(&start, &goal, radius).len(),
            end.position().distance(goal.position())
        );
    }
}
