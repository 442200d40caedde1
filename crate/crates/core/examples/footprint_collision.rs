//! Prints the chamfered footprint and checks a few probe points against it.

use parking_planner::geometry::{footprint_polygon, CollisionChecker, Point2, Pose2D, VehicleSpec};

fn main() -> anyhow::Result<()> {
    let spec = VehicleSpec::default();
    let fp = footprint_polygon(&spec)?;
    let pose = Pose2D::default();
    println!("footprint area {:.4} m^2", fp.area());
    for v in fp.to_world(&pose) {
        println!("  ({:6.3}, {:6.3})", v.x, v.y);
    }

    for p in [Point2::new(3.9, 0.97), Point2::new(3.5, 0.5), Point2::new(-1.0, -0.85), Point2::new(4.0, 0.0)] {
        let hit = CollisionChecker::new(&spec, &[p])?.collides(&pose);
        println!("obstacle at ({:5.2}, {:5.2}): {}", p.x, p.y, if hit { "collision" } else { "free" });
    }
    Ok(())
}
