//! PPO with action chunking and curriculum: rollout collection, GAE,
//! clipped-surrogate updates and the training loop.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::{self, CurriculumStage};
use crate::env::{EnvConfig, Observation, ParkingEnv};
use crate::error::{Error, Result};
use crate::geometry::VehicleSpec;
use crate::policy::{PolicyConfig, PolicyNet};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Minibatch size for gradient steps.
    pub batch_size: usize,
    /// Transitions (macro-actions) collected per update.
    pub buffer_size: usize,
    pub ppo_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub clip_range: f64,
    pub max_grad_norm: f64,
    pub adam_eps: f64,
    /// Training budget in macro-steps.
    pub total_steps: usize,
    pub n_envs: usize,
    pub seed: u64,
    /// Train on this single stage (1-based) instead of the full schedule.
    pub stage_override: Option<usize>,
    // The sections below live at the top level of the config file.
    #[serde(skip)]
    pub stages: Vec<CurriculumStage>,
    #[serde(skip)]
    pub env: EnvConfig,
    #[serde(skip)]
    pub policy: PolicyConfig,
    #[serde(skip)]
    pub spec: VehicleSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            buffer_size: 1024,
            ppo_epochs: 10,
            gamma: 1.0,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            entropy_coef: 0.001,
            value_coef: 0.5,
            clip_range: 0.2,
            max_grad_norm: 0.5,
            adam_eps: 1e-5,
            total_steps: 1_000_000,
            n_envs: 8,
            seed: 0,
            stage_override: None,
            stages: curriculum::default_stages(),
            env: EnvConfig::default(),
            policy: PolicyConfig::default(),
            spec: VehicleSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.buffer_size == 0 || self.n_envs == 0 {
            return Err(Error::Config("batch_size, buffer_size and n_envs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_range > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("learning_rate, clip_range and max_grad_norm must be positive".into()));
        }
        curriculum::validate_stages(&self.stages)?;
        if let Some(s) = self.stage_override {
            if s == 0 || s > self.stages.len() {
                return Err(Error::Config(format!("stage_override {s} is not a defined stage")));
            }
        }
        self.env.validate()?;
        self.policy.validate()?;
        self.spec.validate()
    }

    pub fn num_updates(&self) -> usize {
        self.total_steps / self.buffer_size
    }
}

/// One macro-step of experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    /// Per-group action choices.
    pub choices: Vec<usize>,
    /// Summed chunk reward as emitted by the environment.
    pub reward: f64,
    /// Episode ended in a terminal state (goal, collision, out of bounds).
    pub terminal: bool,
    /// Episode was cut by its step limit.
    pub truncated: bool,
    pub log_prob: f64,
    pub value: f64,
    /// Value of the following observation where the trajectory is cut without
    /// a terminal state (truncation or end of buffer).
    pub bootstrap: Option<f64>,
    pub worker: usize,
    pub primitives: usize,
}

/// Episode statistics gathered while collecting.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeStats {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub return_sum: f64,
}

/// A rollout worker: one environment per scenario plus its own RNG stream.
#[derive(Debug, Clone)]
pub struct Worker {
    pub id: usize,
    envs: Vec<ParkingEnv>,
    current: usize,
    rng: ChaCha8Rng,
    obs: Option<Observation>,
    episode_return: f64,
}

impl Worker {
    pub fn new(id: usize, scenarios: &[Scenario], spec: &VehicleSpec, env_cfg: &EnvConfig, seed: u64) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Input("no training scenarios".into()));
        }
        let envs = scenarios
            .iter()
            .map(|s| ParkingEnv::new(s.clone(), *spec, *env_cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id,
            envs,
            current: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            obs: None,
            episode_return: 0.0,
        })
    }

    fn start_episode(&mut self, stage: &CurriculumStage, stages: &[CurriculumStage]) -> Result<()> {
        self.current = self.rng.gen_range(0..self.envs.len());
        let env = &mut self.envs[self.current];
        let (pose, used) = curriculum::sample_init_with_fallback(
            stage.index,
            stages,
            &env.scenario().clone(),
            env.checker(),
            &mut self.rng,
        )?;
        let len = stages[used - 1].max_episode_len;
        self.obs = Some(env.reset(pose, len)?);
        self.episode_return = 0.0;
        Ok(())
    }
}

pub fn make_workers(cfg: &TrainConfig, scenarios: &[Scenario]) -> Result<Vec<Worker>> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_envs)
        .map(|i| Worker::new(i, scenarios, &cfg.spec, &cfg.env, master.gen()))
        .collect()
}

/// Steps all workers in lockstep until `buffer_size` transitions are stored.
pub fn collect_rollouts(
    workers: &mut [Worker],
    policy: &PolicyNet,
    stage: &CurriculumStage,
    stages: &[CurriculumStage],
    buffer_size: usize,
) -> Result<(Vec<Transition>, EpisodeStats)> {
    let mut buffer = Vec::with_capacity(buffer_size);
    let mut stats = EpisodeStats::default();
    let wrap = |id: usize| move |e: Error| Error::Worker { worker: id, source: Box::new(e) };
    'outer: loop {
        for w in workers.iter_mut() {
            if buffer.len() >= buffer_size {
                break 'outer;
            }
            if w.obs.is_none() {
                w.start_episode(stage, stages).map_err(wrap(w.id))?;
            }
            let obs = w.obs.take().expect("episode started");
            let (dist, value) = policy.forward(&obs).map_err(wrap(w.id))?;
            let choices = dist.sample(&mut w.rng);
            let (log_prob, _) = dist.log_prob_and_entropy(&choices)?;
            let chunk = policy.config.chunk(&choices);
            let out = w.envs[w.current].chunk_step(&chunk).map_err(wrap(w.id))?;
            let terminal = out.info.goal_reached || out.info.collided || out.info.out_of_bounds;
            let truncated = out.info.truncated;
            let bootstrap = if truncated {
                Some(policy.forward(&out.observation).map_err(wrap(w.id))?.1)
            } else {
                None
            };
            w.episode_return += out.reward;
            buffer.push(Transition {
                obs,
                choices,
                reward: out.reward,
                terminal,
                truncated,
                log_prob,
                value,
                bootstrap,
                worker: w.id,
                primitives: out.info.primitives_executed,
            });
            if out.done {
                stats.episodes += 1;
                stats.successes += usize::from(out.info.goal_reached);
                stats.collisions += usize::from(out.info.collided);
                stats.return_sum += w.episode_return;
            } else {
                w.obs = Some(out.observation);
            }
        }
    }
    // Bootstrap trajectories that continue past the end of the buffer.
    for w in workers.iter() {
        if let Some(obs) = &w.obs {
            if let Some(t) = buffer.iter_mut().rev().find(|t| t.worker == w.id) {
                if !t.terminal && !t.truncated {
                    t.bootstrap = Some(policy.forward(obs)?.1);
                }
            }
        }
    }
    Ok((buffer, stats))
}

/// Input of the GAE recursion for one step of a single worker's stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeStep {
    pub reward: f64,
    pub value: f64,
    pub terminal: bool,
    /// Value after this step when the trajectory is cut here without a terminal state.
    pub bootstrap: Option<f64>,
}

/// GAE(lambda) over one worker's ordered steps. Returns `(advantages, returns)`.
pub fn gae(steps: &[GaeStep], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = steps.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for i in (0..n).rev() {
        let s = &steps[i];
        let a = if s.terminal {
            s.reward - s.value
        } else if let Some(b) = s.bootstrap {
            s.reward + gamma * b - s.value
        } else if i + 1 < n {
            s.reward + gamma * steps[i + 1].value - s.value + gamma * lambda * next_adv
        } else {
            // Unterminated stream end without a bootstrap: treat the future as zero.
            s.reward - s.value
        };
        adv[i] = a;
        next_adv = a;
    }
    let ret = adv.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    (adv, ret)
}

/// Advantages and returns for an interleaved multi-worker buffer.
pub fn compute_advantages(buffer: &[Transition], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut adv = vec![0.0; buffer.len()];
    let mut ret = vec![0.0; buffer.len()];
    let mut workers: Vec<usize> = buffer.iter().map(|t| t.worker).collect();
    workers.sort_unstable();
    workers.dedup();
    for w in workers {
        let idx: Vec<usize> = (0..buffer.len()).filter(|&i| buffer[i].worker == w).collect();
        let steps: Vec<GaeStep> = idx
            .iter()
            .map(|&i| {
                let t = &buffer[i];
                GaeStep {
                    reward: t.reward,
                    value: t.value,
                    terminal: t.terminal,
                    bootstrap: t.bootstrap,
                }
            })
            .collect();
        let (a, r) = gae(&steps, gamma, lambda);
        for (k, &i) in idx.iter().enumerate() {
            adv[i] = a[k];
            ret[i] = r[k];
        }
    }
    (adv, ret)
}

/// Rescales to zero mean and unit standard deviation.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Surrogate loss of the very first minibatch, before any parameter change.
    pub first_surrogate: f64,
    pub minibatches: usize,
}

/// Loss terms and logit/value gradients of one sample.
struct SampleLoss {
    surrogate: f64,
    value_loss: f64,
    entropy: f64,
    ratio: f64,
    log_ratio: f64,
    dlogits: Vec<f64>,
    dvalue: f64,
}

fn sample_loss(
    cfg: &TrainConfig,
    dist: &crate::policy::ActionDistribution,
    value: f64,
    t: &Transition,
    adv: f64,
    ret: f64,
    scale: f64,
) -> Result<SampleLoss> {
    let (lp, ent) = dist.log_prob_and_entropy(&t.choices)?;
    let log_ratio = lp - t.log_prob;
    let ratio = log_ratio.exp();
    let clipped = ratio.clamp(1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
    let unclipped_obj = ratio * adv;
    let clipped_obj = clipped * adv;
    let surrogate = -unclipped_obj.min(clipped_obj);
    // The clipped branch is constant in the parameters.
    let dlp = if unclipped_obj <= clipped_obj { -adv * ratio } else { 0.0 };
    let dlogits = dist.logit_grad(&t.choices, dlp * scale, -cfg.entropy_coef * scale);
    let verr = value - ret;
    Ok(SampleLoss {
        surrogate,
        value_loss: verr * verr,
        entropy: ent,
        ratio,
        log_ratio,
        dlogits,
        dvalue: cfg.value_coef * 2.0 * verr * scale,
    })
}

/// `ppo_epochs` passes of shuffled minibatch clipped-surrogate updates.
/// `advantages` are used as given (normalize beforehand).
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut PolicyNet,
    opt: &mut Adam,
    buffer: &[Transition],
    advantages: &[f64],
    returns: &[f64],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let n = buffer.len();
    let mut stats = UpdateStats::default();
    if n == 0 {
        return Ok(stats);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = vec![0.0; policy.num_params()];
    let mut first = true;
    let mut counted = 0usize;
    for _ in 0..cfg.ppo_epochs {
        order.shuffle(rng);
        for mb in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / mb.len() as f64;
            let (mut pl, mut vl, mut en, mut kl, mut cf) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &i in mb {
                let t = &buffer[i];
                let cache = policy.forward_cached(&t.obs)?;
                let dist = crate::policy::ActionDistribution::new(cache.logits.clone(), policy.config.groups());
                let s = sample_loss(cfg, &dist, cache.value, t, advantages[i], returns[i], scale)?;
                pl += s.surrogate;
                vl += s.value_loss;
                en += s.entropy;
                kl += (s.ratio - 1.0) - s.log_ratio;
                cf += f64::from(u8::from((s.ratio - 1.0).abs() > cfg.clip_range));
                policy.backward(&cache, &s.dlogits, s.dvalue, &mut grads);
            }
            let loss = (pl + cfg.value_coef * vl - cfg.entropy_coef * en) * scale;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite PPO loss {loss} (policy {pl}, value {vl}, entropy {en})"
                )));
            }
            if first {
                stats.first_surrogate = pl * scale;
                first = false;
            }
            let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.max_grad_norm {
                let k = cfg.max_grad_norm / norm;
                grads.iter_mut().for_each(|g| *g *= k);
            }
            opt.step(&mut policy.params, &grads);
            stats.policy_loss += pl;
            stats.value_loss += vl;
            stats.entropy += en;
            stats.approx_kl += kl;
            stats.clip_fraction += cf;
            counted += mb.len();
            stats.minibatches += 1;
        }
    }
    let c = counted as f64;
    stats.policy_loss /= c;
    stats.value_loss /= c;
    stats.entropy /= c;
    stats.approx_kl /= c;
    stats.clip_fraction /= c;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub update: usize,
    pub macro_steps: usize,
    pub primitive_steps: usize,
    pub stage: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: PolicyNet,
    pub log: Vec<LogRow>,
    pub macro_steps: usize,
    pub primitive_steps: usize,
    /// Checkpoints written, one per completed stage plus the final one.
    pub checkpoints: Vec<PathBuf>,
}

/// Where training artifacts go; `None` keeps everything in memory.
#[derive(Debug, Clone, Default)]
pub struct OutputDir(pub Option<PathBuf>);

fn checkpoint_meta(cfg: &TrainConfig, row: Option<&LogRow>) -> serde_json::Value {
    serde_json::json!({
        "train_seed": cfg.seed,
        "chunk_length": cfg.policy.chunk_length,
        "env": cfg.env,
        "last_log": row,
    })
}

/// Runs the training loop. `on_update` sees the policy after each update and
/// may return `false` to stop early.
pub fn train_with<F>(cfg: &TrainConfig, scenarios: &[Scenario], out: &OutputDir, mut on_update: F) -> Result<TrainOutcome>
where
    F: FnMut(&PolicyNet, &LogRow) -> bool,
{
    cfg.validate()?;
    let mut policy = PolicyNet::new(cfg.policy, cfg.seed)?;
    let updates = cfg.num_updates();
    let mut outcome = TrainOutcome {
        policy: policy.clone(),
        log: Vec::new(),
        macro_steps: 0,
        primitive_steps: 0,
        checkpoints: Vec::new(),
    };
    if updates == 0 {
        return Ok(outcome);
    }
    let schedule = match cfg.stage_override {
        Some(s) => vec![(0..updates, cfg.stages[s - 1])],
        None => curriculum::stage_schedule(updates, &cfg.stages)?,
    };
    let mut log_file = match &out.0 {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("train_log.csv");
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            writeln!(
                f,
                "update,macro_steps,primitive_steps,stage,episodes,mean_return,success_rate,collision_rate,policy_loss,value_loss,entropy,approx_kl,clip_fraction"
            )
            .map_err(|e| Error::io(&path, e))?;
            Some((path, f))
        }
        None => None,
    };
    let mut workers = make_workers(cfg, scenarios)?;
    let mut opt = Adam::new(policy.num_params(), cfg.learning_rate, cfg.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));

    'stages: for (range, stage) in &schedule {
        for update in range.clone() {
            let (buffer, ep) = collect_rollouts(&mut workers, &policy, stage, &cfg.stages, cfg.buffer_size)?;
            outcome.macro_steps += buffer.len();
            outcome.primitive_steps += buffer.iter().map(|t| t.primitives).sum::<usize>();
            let (mut adv, ret) = compute_advantages(&buffer, cfg.gamma, cfg.gae_lambda);
            normalize(&mut adv);
            let st = ppo_update(&mut policy, &mut opt, &buffer, &adv, &ret, cfg, &mut rng)?;
            let eps = ep.episodes.max(1) as f64;
            let row = LogRow {
                update,
                macro_steps: outcome.macro_steps,
                primitive_steps: outcome.primitive_steps,
                stage: stage.index,
                episodes: ep.episodes,
                mean_return: ep.return_sum / eps,
                success_rate: ep.successes as f64 / eps,
                collision_rate: ep.collisions as f64 / eps,
                policy_loss: st.policy_loss,
                value_loss: st.value_loss,
                entropy: st.entropy,
                approx_kl: st.approx_kl,
                clip_fraction: st.clip_fraction,
            };
            if let Some((path, f)) = &mut log_file {
                writeln!(
                    f,
                    "{},{},{},{},{},{:.6},{:.4},{:.4},{:.6},{:.6},{:.6},{:.6},{:.4}",
                    row.update,
                    row.macro_steps,
                    row.primitive_steps,
                    row.stage,
                    row.episodes,
                    row.mean_return,
                    row.success_rate,
                    row.collision_rate,
                    row.policy_loss,
                    row.value_loss,
                    row.entropy,
                    row.approx_kl,
                    row.clip_fraction
                )
                .map_err(|e| Error::io(path.as_path(), e))?;
            }
            let keep_going = on_update(&policy, &row);
            outcome.log.push(row);
            if !keep_going {
                break 'stages;
            }
        }
        if let Some(dir) = &out.0 {
            let path = dir.join(format!("stage_{}.json", stage.index));
            policy.save(&path, checkpoint_meta(cfg, outcome.log.last()))?;
            outcome.checkpoints.push(path);
        }
    }
    if let Some(dir) = &out.0 {
        let path = dir.join("final.json");
        policy.save(&path, checkpoint_meta(cfg, outcome.log.last()))?;
        outcome.checkpoints.push(path);
    }
    outcome.policy = policy;
    Ok(outcome)
}

pub fn train(cfg: &TrainConfig, scenarios: &[Scenario], out: &OutputDir) -> Result<TrainOutcome> {
    train_with(cfg, scenarios, out, |_, _| true)
}
