//! Steps the environment with fixed action chunks and prints the reward
//! and event flags of each macro-step.

use parking_planner::env::{EnvConfig, ParkingEnv};
use parking_planner::geometry::VehicleSpec;
use parking_planner::scenario::synthetic_pack;

fn main() -> anyhow::Result<()> {
    let spec = VehicleSpec::default();
    let scenario = synthetic_pack(&spec)?.remove(0);
    let start = scenario.initial_pose;
    let mut env = ParkingEnv::new(scenario, spec, EnvConfig::default())?;
    let obs = env.reset(start, 200)?;
    println!("reset: {} obstacle tokens in view", obs.num_valid());

    // Forward, steer left while rolling, then reverse.
    let script: [&[usize]; 5] = [&[1, 1, 1, 1], &[7, 7, 2, 2], &[4, 4, 4, 4], &[4, 4, 4, 4], &[6, 6, 3, 3]];
    for chunk in script {
        if !env.is_active() {
            break;
        }
        let out = env.chunk_step(chunk)?;
        let i = out.info;
        println!(
            "chunk {chunk:?}: reward {:+.3} executed {} gear change {} idle {} done {}",
            out.reward, i.primitives_executed, i.direction_change, i.idle, out.done
        );
    }
    let p = env.state().pose();
    println!("pose after {} primitives: ({:.2}, {:.2}, {:.2})", env.steps_elapsed(), p.x, p.y, p.theta);
    Ok(())
}
