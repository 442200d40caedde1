//! Samples initial poses for every curriculum stage on one bundled scenario
//! and writes an SVG per stage.
//!
//! Usage: `cargo run --example curriculum_rollouts -- [out_dir] [seed]`

use std::fs;
use std::path::PathBuf;

use parking_planner::curriculum::{default_stages, sample_init};
use parking_planner::geometry::VehicleSpec;
use parking_planner::scenario::synthetic_pack;
use parking_planner::svg::{render_svg, RenderOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/curriculum".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    fs::create_dir_all(&out)?;

    let spec = VehicleSpec::default();
    let scenario = synthetic_pack(&spec)?.remove(0);
    let checker = scenario.checker(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for stage in default_stages() {
        let poses = (0..20)
            .map(|_| sample_init(&stage, &scenario, &checker, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = poses.iter().map(|p| p.position().distance(scenario.target_pose.position())).sum::<f64>() / 20.0;
        let opts = RenderOptions { extra_starts: poses, ..RenderOptions::default() };
        let path = out.join(format!("stage_{}.svg", stage.index));
        fs::write(&path, render_svg(&scenario, &spec, &[], None, &opts))?;
        println!("stage {}: mean distance to target {mean:5.2} m -> {}", stage.index, path.display());
    }
    Ok(())
}
