//! Evaluates Hybrid A* on the bundled scenario pack and writes the report.
//!
//! Usage: `cargo run --release --example evaluate_pack -- [out_dir]`

use std::path::PathBuf;

use parking_planner::eval::evaluate_planner;
use parking_planner::geometry::VehicleSpec;
use parking_planner::hybrid_astar::PlannerConfig;
use parking_planner::scenario::load_scenario_dir;

fn main() -> anyhow::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/eval_pack".into()));
    let pack = load_scenario_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios"))?;
    let report = evaluate_planner(&pack, &VehicleSpec::default(), &PlannerConfig::default());
    for r in &report.rows {
        println!(
            "{:<22} {:<5} {:6.3}s {:6.2} m {:2} pivots {}",
            r.id,
            if r.success { "ok" } else { "fail" },
            r.planning_time_s,
            r.travel_distance_m,
            r.pivot_points,
            r.failure_cause
        );
    }
    print!("{}", report.summary_text());
    report.write(&out)?;
    Ok(())
}
