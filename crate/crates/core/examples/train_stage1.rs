//! Trains a policy on stage 1 of the curriculum for one perpendicular bay and
//! reports greedy success on held-out initial poses as training proceeds.
//!
//! `cargo run --release --example train_stage1 -- [seed] [max_primitive_steps]`

use std::time::Instant;

use parking_planner::curriculum::sample_init;
use parking_planner::env::ParkingEnv;
use parking_planner::geometry::Pose2D;
use parking_planner::policy::PolicyNet;
use parking_planner::ppo::{train_with, OutputDir, TrainConfig};
use parking_planner::scenario::synthetic_pack;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn greedy_success(policy: &PolicyNet, env: &mut ParkingEnv, poses: &[Pose2D], max_len: usize) -> f64 {
    let mut ok = 0;
    for p in poses {
        let mut obs = env.reset(*p, max_len).expect("collision-free start");
        loop {
            let (dist, _) = policy.forward(&obs).expect("valid observation");
            let chunk = policy.config.chunk(&dist.argmax());
            let out = env.chunk_step(&chunk).expect("active episode");
            if out.done {
                ok += usize::from(out.info.goal_reached);
                break;
            }
            obs = out.observation;
        }
    }
    ok as f64 / poses.len() as f64
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let budget: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2_000_000);

    let mut cfg = TrainConfig {
        seed,
        stage_override: Some(1),
        total_steps: budget / 4,
        ..TrainConfig::default()
    };
    cfg.policy.chunk_length = 4;
    let scenario = synthetic_pack(&cfg.spec)?.into_iter().next().expect("pack is non-empty");
    let stage = cfg.stages[0];
    let mut env = ParkingEnv::new(scenario.clone(), cfg.spec, cfg.env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
    let poses: Vec<Pose2D> = (0..50)
        .map(|_| sample_init(&stage, &scenario, env.checker(), &mut rng))
        .collect::<Result<_, _>>()?;

    let started = Instant::now();
    let outcome = train_with(&cfg, &[scenario], &OutputDir(None), |policy, row| {
        let success = if row.update % 5 == 4 {
            greedy_success(policy, &mut env, &poses, stage.max_episode_len)
        } else {
            f64::NAN
        };
        println!(
            "update {:4} prim {:8} ret {:7.3} train-succ {:.2} coll {:.2} ent {:.3} kl {:.4} greedy {:.2} {:6.1}s",
            row.update,
            row.primitive_steps,
            row.mean_return,
            row.success_rate,
            row.collision_rate,
            row.entropy,
            row.approx_kl,
            success,
            started.elapsed().as_secs_f64()
        );
        !(success >= 0.9)
    })?;
    println!("primitive steps used: {}", outcome.primitive_steps);
    Ok(())
}
