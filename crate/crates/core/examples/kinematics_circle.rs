//! Drives a full-lock circle with the discrete primitives and reports how
//! close the car comes back to where it started.

use std::f64::consts::PI;

use parking_planner::geometry::VehicleSpec;
use parking_planner::kinematics::{self, VehicleState};

fn main() -> anyhow::Result<()> {
    let spec = VehicleSpec::default();
    let left = kinematics::action(2).ok_or_else(|| anyhow::anyhow!("no action 2"))?;
    let radius = spec.min_turning_radius();
    let steps = (2.0 * PI * radius / left.displacement().abs()).round() as usize;

    let mut s = VehicleState { delta: spec.max_steer, ..Default::default() };
    for i in 1..=steps {
        s = kinematics::step(&s, &left, &spec);
        if i % (steps / 4) == 0 {
            println!("step {i:4}: x {:7.3} y {:7.3} theta {:7.3}", s.x, s.y, s.theta);
        }
    }
    println!("radius {radius:.4} m, {steps} steps, closure error {:.4} m", s.x.hypot(s.y));
    Ok(())
}
