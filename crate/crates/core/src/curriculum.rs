//! Eight-stage curriculum: stage schedule over training iterations and
//! initial-pose sampling per stage.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CollisionChecker, Pose2D};
use crate::scenario::{rollout_with_checker, HeadingMode, RolloutParams, Scenario};

pub const NUM_STAGES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageHeading {
    Inherit,
    Resample,
    /// Start from the scenario's logged initial pose.
    Logged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    /// 1-based stage number.
    pub index: usize,
    pub rollout_steps: usize,
    pub heading_mode: StageHeading,
    /// Heading offset interval in radians (resample stages only).
    pub heading_range: (f64, f64),
    pub max_episode_len: usize,
}

impl CurriculumStage {
    pub fn rollout_params(&self) -> Option<RolloutParams> {
        let heading_mode = match self.heading_mode {
            StageHeading::Inherit => HeadingMode::Inherit,
            StageHeading::Resample => HeadingMode::Resample,
            StageHeading::Logged => return None,
        };
        Some(RolloutParams {
            steps: self.rollout_steps,
            heading_mode,
            heading_range: self.heading_range,
        })
    }
}

/// The default stage table.
pub fn default_stages() -> Vec<CurriculumStage> {
    let steps = [12, 25, 50, 75, 100, 150, 200, 0];
    let lens = [100, 200, 400, 400, 800, 800, 800, 1000];
    let heading_deg = [0.0, 0.0, 5.0, 10.0, 20.0, 30.0, 45.0, 0.0];
    (0..NUM_STAGES)
        .map(|i| {
            let heading_mode = match i {
                0 | 1 => StageHeading::Inherit,
                7 => StageHeading::Logged,
                _ => StageHeading::Resample,
            };
            let h = f64::to_radians(heading_deg[i]);
            CurriculumStage {
                index: i + 1,
                rollout_steps: steps[i],
                heading_mode,
                heading_range: (-h, h),
                max_episode_len: lens[i],
            }
        })
        .collect()
}

pub fn validate_stages(stages: &[CurriculumStage]) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::Config("curriculum has no stages".into()));
    }
    for (i, s) in stages.iter().enumerate() {
        if s.index != i + 1 {
            return Err(Error::Config(format!("stage {} listed at position {}", s.index, i + 1)));
        }
        if s.max_episode_len == 0 {
            return Err(Error::Config(format!("stage {} has zero episode length", s.index)));
        }
        if !(s.heading_range.0 <= s.heading_range.1) {
            return Err(Error::Config(format!("stage {} heading range is not ordered", s.index)));
        }
    }
    Ok(())
}

/// Splits `0..total_iterations` into one contiguous block per stage, the
/// remainder going to the earliest stages.
pub fn stage_schedule(
    total_iterations: usize,
    stages: &[CurriculumStage],
) -> Result<Vec<(Range<usize>, CurriculumStage)>> {
    validate_stages(stages)?;
    let n = stages.len();
    if total_iterations < n {
        return Err(Error::Config(format!(
            "need at least {n} iterations for {n} stages, got {total_iterations}"
        )));
    }
    let base = total_iterations / n;
    let extra = total_iterations % n;
    let mut start = 0;
    Ok(stages
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            (r, *s)
        })
        .collect())
}

/// Stage active at `iteration` under an equal split.
pub fn stage_at(iteration: usize, total_iterations: usize, stages: &[CurriculumStage]) -> Result<CurriculumStage> {
    let schedule = stage_schedule(total_iterations, stages)?;
    schedule
        .iter()
        .find(|(r, _)| r.contains(&iteration))
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::Input(format!("iteration {iteration} outside 0..{total_iterations}")))
}

/// Draws an initial pose for `stage`.
pub fn sample_init<R: Rng + ?Sized>(
    stage: &CurriculumStage,
    scenario: &Scenario,
    checker: &CollisionChecker,
    rng: &mut R,
) -> Result<Pose2D> {
    match stage.rollout_params() {
        None => Ok(scenario.initial_pose),
        Some(p) => rollout_with_checker(checker, &scenario.target_pose, &p, rng),
    }
}

/// Like [`sample_init`], but on sampling exhaustion retries with each earlier
/// stage's parameters in turn. Returns the pose and the stage index used.
pub fn sample_init_with_fallback<R: Rng + ?Sized>(
    stage_index: usize,
    stages: &[CurriculumStage],
    scenario: &Scenario,
    checker: &CollisionChecker,
    rng: &mut R,
) -> Result<(Pose2D, usize)> {
    let mut i = stage_index;
    loop {
        let stage = stages
            .iter()
            .find(|s| s.index == i)
            .ok_or_else(|| Error::Config(format!("no stage {i}")))?;
        match sample_init(stage, scenario, checker, rng) {
            Ok(p) => return Ok((p, i)),
            Err(Error::SamplingExhausted { .. }) if i > 1 => i -= 1,
            Err(e) => return Err(e),
        }
    }
}
