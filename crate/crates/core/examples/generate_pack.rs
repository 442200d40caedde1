//! Writes the synthetic scenario pack as JSON files.
//!
//! `cargo run --example generate_pack -- data/scenarios`

use std::path::PathBuf;

use parking_planner::geometry::VehicleSpec;
use parking_planner::scenario::{save_scenario, synthetic_pack};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&dir)?;
    let spec = VehicleSpec::default();
    for sc in synthetic_pack(&spec)? {
        let path = dir.join(format!("{}.json", sc.id));
        save_scenario(&sc, &path)?;
        println!("{} ({} obstacle points)", path.display(), sc.obstacles.len());
    }
    Ok(())
}
