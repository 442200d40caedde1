use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parking_planner::config::AppConfig;
use parking_planner::curriculum::sample_init_with_fallback;
use parking_planner::env::{build_observation, ParkingEnv, ReplayLog};
use parking_planner::eval::{evaluate_planner, evaluate_policy, EvalReport};
use parking_planner::geometry::{Point2, Pose2D};
use parking_planner::hybrid_astar::{plan, PlannerConfig};
use parking_planner::kinematics::{self, VehicleState};
use parking_planner::policy::PolicyNet;
use parking_planner::ppo::{train, OutputDir};
use parking_planner::scenario::{load_scenario, load_scenario_dir, synthetic_pack, Scenario};
use parking_planner::svg::{render_svg, AttentionSnapshot, RenderOptions};
use parking_planner::Error;

#[derive(Parser)]
#[command(name = "parkctl", version, about = "Parking planner: plan, train, evaluate and visualize")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rl,
    Astar,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario with Hybrid A*; writes path.json and path.svg.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out/plan")]
        out: PathBuf,
    },
    /// Train the policy with curriculum and action chunking.
    Train {
        /// Directory of scenario JSON files; the bundled synthetic pack if omitted.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Train on a single curriculum stage.
        #[arg(long)]
        stage: Option<usize>,
        /// Training budget in macro-steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out/train")]
        out: PathBuf,
    },
    /// Evaluate a method over a scenario set; writes report.csv and summary.txt.
    Eval {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Policy checkpoint (required for --method rl).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "1000")]
        max_episode_len: usize,
        #[arg(long, default_value = "out/eval")]
        out: PathBuf,
    },
    /// Sample curriculum initial poses and draw them.
    RolloutInit {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "3")]
        stage: usize,
        #[arg(long, default_value = "20")]
        count: usize,
        #[arg(long, default_value = "out/rollout_init.svg")]
        out: PathBuf,
    },
    /// Run the Hybrid A* hyperparameter grid over a scenario set.
    AblateAstar {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value = "out/ablation.csv")]
        out: PathBuf,
    },
    /// Render a replay log, optionally with the policy's attention at a step.
    Viz {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        replay: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Primitive step whose observation is used for the attention overlay.
        #[arg(long, default_value = "0")]
        attention_step: usize,
        #[arg(long, default_value = "out/replay.svg")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<AppConfig> {
    match path {
        Some(p) => Ok(AppConfig::load(p)?),
        None => Ok(AppConfig::default()),
    }
}

fn load_set(dir: Option<&Path>, cfg: &AppConfig) -> anyhow::Result<Vec<Scenario>> {
    let set = match dir {
        Some(d) => load_scenario_dir(d)?,
        None => synthetic_pack(&cfg.vehicle)?,
    };
    if set.is_empty() {
        return Err(Error::Input("scenario set is empty".into()).into());
    }
    Ok(set)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let spec = cfg.vehicle;
    match cli.command {
        Command::Plan { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let path = plan(&sc, &spec, &cfg.planner)?;
            fs::create_dir_all(&out)?;
            write(&out.join("path.json"), &serde_json::to_string_pretty(&path)?)?;
            let svg = render_svg(&sc, &spec, &path.poses, None, &RenderOptions::default());
            write(&out.join("path.svg"), &svg)?;
            println!(
                "{}: length {:.2} m, cost {:.3}, {} segments, {} nodes, {:.3} s",
                sc.id,
                path.length(),
                path.cost,
                path.segments.len(),
                path.nodes_expanded,
                path.planning_time
            );
        }
        Command::Train { scenarios, stage, steps, out } => {
            let set = load_set(scenarios.as_deref(), &cfg)?;
            let mut tc = cfg.train_config();
            if let Some(s) = cli.seed {
                tc.seed = s;
            }
            if stage.is_some() {
                tc.stage_override = stage;
            }
            if let Some(n) = steps {
                tc.total_steps = n;
            }
            let mut used = cfg.clone();
            used.train = tc.clone();
            write(&out.join("config.toml"), &used.to_toml()?)?;
            let outcome = train(&tc, &set, &OutputDir(Some(out.clone())))?;
            println!(
                "trained {} updates, {} macro-steps, {} primitive steps; checkpoints in {}",
                outcome.log.len(),
                outcome.macro_steps,
                outcome.primitive_steps,
                out.display()
            );
        }
        Command::Eval { method, scenarios, checkpoint, max_episode_len, out } => {
            let set = load_set(scenarios.as_deref(), &cfg)?;
            let report: EvalReport = match method {
                MethodArg::Astar => evaluate_planner(&set, &spec, &cfg.planner),
                MethodArg::Rl => {
                    let Some(ck) = checkpoint else {
                        bail!(Error::Input("--checkpoint is required for --method rl".into()));
                    };
                    let policy = PolicyNet::load(&ck)?;
                    evaluate_policy(&policy, &set, &spec, &cfg.env, max_episode_len)?
                }
            };
            report.write(&out)?;
            print!("{}", report.summary_text());
        }
        Command::RolloutInit { scenario, stage, count, out } => {
            let sc = load_scenario(&scenario)?;
            let checker = sc.checker(&spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(cfg.train.seed));
            let mut poses = Vec::with_capacity(count);
            for _ in 0..count {
                let (p, _) = sample_init_with_fallback(stage, &cfg.curriculum, &sc, &checker, &mut rng)?;
                poses.push(p);
            }
            let opts = RenderOptions {
                extra_starts: poses,
                ..RenderOptions::default()
            };
            write(&out, &render_svg(&sc, &spec, &[], None, &opts))?;
            println!("{count} stage-{stage} initial poses written to {}", out.display());
        }
        Command::AblateAstar { scenarios, out } => {
            let set = load_set(scenarios.as_deref(), &cfg)?;
            let mut csv_out = String::from(
                "costs,xy_resolution,theta_deg,motion_resolution,n_steer,success_rate,mean_time_s,mean_distance_m,mean_pivots\n",
            );
            for (label, row) in ablation_grid(&cfg.planner) {
                let s = evaluate_planner(&set, &spec, &row).summary();
                let line = format!(
                    "{label},{},{:.0},{},{},{:.3},{:.3},{:.2},{:.2}\n",
                    row.xy_resolution,
                    row.theta_resolution.to_degrees(),
                    row.motion_resolution,
                    row.n_steer,
                    s.success_rate,
                    s.mean_time_s,
                    s.mean_distance_m,
                    s.mean_pivots
                );
                print!("{line}");
                csv_out.push_str(&line);
            }
            write(&out, &csv_out)?;
        }
        Command::Viz { scenario, replay, checkpoint, attention_step, out } => {
            let sc = load_scenario(&scenario)?;
            let log = ReplayLog::load(&replay)?;
            let mut env = ParkingEnv::new(sc.clone(), spec, cfg.env)?;
            env.replay(&log)?;
            let poses: Vec<Pose2D> = env.trajectory().iter().map(|(p, _)| *p).collect();
            let attention = match checkpoint {
                Some(ck) => {
                    let policy = PolicyNet::load(&ck)?;
                    Some(attention_at(&policy, &sc, &log, attention_step, &cfg)?)
                }
                None => None,
            };
            write(&out, &render_svg(&sc, &spec, &poses, attention.as_ref(), &RenderOptions::default()))?;
            println!("{} steps rendered to {}", log.actions.len(), out.display());
        }
    }
    Ok(())
}

/// Table rows of the Hybrid A* ablation under both cost settings.
fn ablation_grid(base: &PlannerConfig) -> Vec<(&'static str, PlannerConfig)> {
    // Costs of the public reference implementation the baseline builds on.
    let reference = PlannerConfig {
        switch_back_cost: 100.0,
        backward_cost: 5.0,
        steer_angle_cost: 1.0,
        steer_change_cost: 5.0,
        heuristic_weight: 5.0,
        ..*base
    };
    let tuned = PlannerConfig {
        switch_back_cost: 2.0,
        backward_cost: 1.3,
        steer_angle_cost: 0.2,
        steer_change_cost: 0.1,
        heuristic_weight: 1.0,
        ..*base
    };
    let grid = |c: PlannerConfig, rows: &[(f64, f64, f64, usize)]| -> Vec<PlannerConfig> {
        rows.iter()
            .map(|&(xy, th, mr, ns)| PlannerConfig {
                xy_resolution: xy,
                theta_resolution: th.to_radians(),
                motion_resolution: mr,
                n_steer: ns,
                ..c
            })
            .collect()
    };
    let reference_rows = [
        (0.1, 8.0, 1.0, 9),
        (0.32, 8.0, 1.0, 9),
        (0.5, 8.0, 1.0, 9),
        (0.5, 8.0, 0.5, 9),
        (0.5, 8.0, 2.0, 9),
        (0.5, 5.0, 1.0, 20),
        (1.0, 5.0, 1.0, 20),
    ];
    let tuned_rows = [
        (0.1, 8.0, 1.0, 9),
        (0.32, 8.0, 1.0, 9),
        (0.5, 8.0, 1.0, 9),
        (0.5, 8.0, 2.0, 9),
        (0.5, 8.0, 0.5, 9),
        (0.5, 5.0, 1.0, 20),
    ];
    let mut out: Vec<(&'static str, PlannerConfig)> =
        grid(reference, &reference_rows).into_iter().map(|c| ("reference", c)).collect();
    out.extend(grid(tuned, &tuned_rows).into_iter().map(|c| ("tuned", c)));
    out
}

/// Attention of the policy on the observation after `step` primitives of the replay.
fn attention_at(
    policy: &PolicyNet,
    sc: &Scenario,
    log: &ReplayLog,
    step: usize,
    cfg: &AppConfig,
) -> anyhow::Result<AttentionSnapshot> {
    let spec = cfg.vehicle;
    let mut state = VehicleState::from_pose(&log.initial_pose, 0.0);
    let mut gear = 0i8;
    for &a in log.actions.iter().take(step) {
        let action = kinematics::action(a).ok_or_else(|| Error::Input(format!("bad action {a} in replay")))?;
        state = kinematics::step(&state, &action, &spec);
        if action.direction() != 0 {
            gear = action.direction();
        }
    }
    let obs = build_observation(&state, gear, &sc.target_pose, &sc.obstacles, &spec, cfg.env.horizon, cfg.env.max_tokens);
    let heads = policy.attention_weights(&obs)?;
    let k = obs.tokens.len();
    let weights: Vec<f64> = (0..k).map(|i| heads.iter().map(|h| h[i]).sum::<f64>() / heads.len() as f64).collect();
    let ego = state.pose();
    let points = obs
        .tokens
        .iter()
        .map(|t| ego.transform_point(Point2::new(t[0] * cfg.env.horizon, t[1] * cfg.env.horizon)))
        .collect();
    Ok(AttentionSnapshot {
        points,
        weights,
        mask: obs.mask,
    })
}

/// Exit code and label for a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => (2, "config"),
        Some(Error::Input(_)) | Some(Error::ResetRejected(_)) => (2, "input"),
        Some(Error::MissingFile(_)) => (3, "missing-file"),
        Some(Error::Malformed(_)) | Some(Error::Invariant(_)) => (3, "bad-data"),
        Some(Error::PlanningFailed { .. }) => (4, "planning-failed"),
        Some(Error::Numeric(_)) => (5, "numeric"),
        Some(_) => (1, "runtime"),
        None => (1, "io"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, label) = classify(&e);
            eprintln!("error [{label}]: {e:#}");
            ExitCode::from(code)
        }
    }
}
