use parking_planner::geometry::VehicleSpec;
use parking_planner::hybrid_astar::{plan, PlannerConfig};
use parking_planner::scenario::synthetic_pack;

fn main() -> anyhow::Result<()> {
    let spec = VehicleSpec::default();
    let cfg = PlannerConfig::default();
    for sc in synthetic_pack(&spec)? {
        match plan(&sc, &spec, &cfg) {
            Ok(p) => println!(
                "{:<20} ok    len {:6.2} cost {:7.3} pivots {} nodes {:5} {:.3}s",
                sc.id,
                p.length(),
                p.cost,
                p.segments.windows(2).filter(|w| w[0].direction != w[1].direction).count(),
                p.nodes_expanded,
                p.planning_time
            ),
            Err(e) => println!("{:<20} FAIL  {e}", sc.id),
        }
    }
    Ok(())
}
