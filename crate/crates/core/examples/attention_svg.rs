//! Renders where a policy attends in the first observation of a scenario.
//!
//! Usage: `cargo run --example attention_svg -- [checkpoint.json] [out.svg]`
//! Without a checkpoint a freshly initialized network is used.

use parking_planner::env::{EnvConfig, ParkingEnv};
use parking_planner::geometry::{Point2, VehicleSpec};
use parking_planner::policy::{PolicyConfig, PolicyNet};
use parking_planner::scenario::synthetic_pack;
use parking_planner::svg::{render_svg, AttentionSnapshot, RenderOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let checkpoint = args.next().filter(|a| a != "-");
    let out = args.next().unwrap_or_else(|| "out/attention.svg".into());

    let policy = match checkpoint {
        Some(p) => PolicyNet::load(p)?,
        None => PolicyNet::new(PolicyConfig::default(), 0)?,
    };
    let spec = VehicleSpec::default();
    let cfg = EnvConfig::default();
    let scenario = synthetic_pack(&spec)?.remove(0);
    let mut env = ParkingEnv::new(scenario.clone(), spec, cfg)?;
    let obs = env.reset(scenario.initial_pose, 100)?;

    let heads = policy.attention_weights(&obs)?;
    let weights: Vec<f64> = (0..obs.tokens.len())
        .map(|k| heads.iter().map(|h| h[k]).sum::<f64>() / heads.len() as f64)
        .collect();
    let ego = env.state().pose();
    let points = obs
        .tokens
        .iter()
        .map(|t| ego.transform_point(Point2::new(t[0] * cfg.horizon, t[1] * cfg.horizon)))
        .collect();
    let snap = AttentionSnapshot { points, weights, mask: obs.mask.clone() };
    println!("{} valid tokens, top slots {:?}", obs.num_valid(), &snap.top()[..5.min(snap.top().len())]);

    if let Some(dir) = std::path::Path::new(&out).parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&out, render_svg(&scenario, &spec, &[], Some(&snap), &RenderOptions::default()))?;
    println!("wrote {out}");
    Ok(())
}
