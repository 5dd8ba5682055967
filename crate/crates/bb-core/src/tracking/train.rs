//! Base-policy training on the full dataset and per-cluster expert
//! fine-tuning.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::env::{EnvConfig, TrackingEnv};
use super::obs::{CRITIC_OBS_DIM, EXPERT_OBS_DIM};
use crate::motions::MotionDataset;
use crate::rl::{collect_rollouts, ppo_update, ActorCritic, PpoConfig, PpoError};
use crate::sim::{RobotModel, VariantSpec, NUM_JOINTS};
use crate::util::{derive_seed, seeded_rng};

/// Curriculum endpoints for the deviation threshold during training.
pub const CURRICULUM_START: f64 = 0.8;
pub const CURRICULUM_END: f64 = 0.3;
/// Fraction of training spent interpolating the curriculum.
pub const CURRICULUM_SPAN: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub updates: usize,
    pub hidden_desk: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { updates: 120, hidden_desk: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub update: usize,
    pub mean_reward_per_env: f64,
    pub surrogate_loss: f64,
    pub value_loss: f64,
    pub episodes: usize,
    pub success_fraction: f64,
    pub threshold: f64,
}

/// Linear curriculum over the first 80% of updates, then constant.
pub fn curriculum_threshold(update: usize, total_updates: usize) -> f64 {
    let span = (total_updates as f64 * CURRICULUM_SPAN).max(1.0);
    let u = (update as f64 / span).min(1.0);
    CURRICULUM_START + (CURRICULUM_END - CURRICULUM_START) * u
}

/// Fresh actor-critic with the expert observation space.
pub fn new_tracking_policy(seed: u64, desk: bool) -> ActorCritic {
    let mut rng = seeded_rng(seed, "tracking-policy-init");
    let hidden = if desk {
        crate::net::NetConfig::desk_hidden()
    } else {
        crate::net::NetConfig::paper_hidden()
    };
    let mut policy = ActorCritic::create(
        EXPERT_OBS_DIM,
        CRITIC_OBS_DIM,
        NUM_JOINTS,
        &hidden,
        &[128, 128],
        &mut rng,
    );
    // offsets start at zero: the initial policy is pure PD toward the
    // reference plus exploration noise
    policy.actor.zero_final_layer(&mut policy.store);
    policy
}

/// PPO training over a clip set, optionally warm-starting from an
/// existing policy. Returns the trained policy and per-update logs.
pub fn train_tracking(
    model: &RobotModel,
    dataset: &Arc<MotionDataset>,
    clip_ids: &[u32],
    init: Option<&ActorCritic>,
    ppo: &PpoConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(ActorCritic, Vec<TrainLog>), PpoError> {
    let mut policy = match init {
        Some(p) => p.clone(),
        None => new_tracking_policy(seed, train.hidden_desk),
    };
    let ids = Arc::new(clip_ids.to_vec());
    let mut envs: Vec<TrackingEnv> = (0..ppo.num_envs)
        .map(|e| {
            TrackingEnv::new(
                model.clone(),
                dataset.clone(),
                ids.clone(),
                EnvConfig::train(VariantSpec::nominal()),
                None,
                derive_seed(seed, &format!("train-env-{e}")),
            )
        })
        .collect();

    let mut logs = Vec::with_capacity(train.updates);
    for update in 0..train.updates {
        let threshold = curriculum_threshold(update, train.updates);
        for env in &mut envs {
            env.cfg.deviation_threshold = threshold;
        }
        let mut buf = collect_rollouts(
            &mut envs,
            &policy,
            ppo.horizon,
            derive_seed(seed, &format!("rollout-{update}")),
        );
        let stats = ppo_update(
            &mut policy,
            &mut buf,
            ppo,
            derive_seed(seed, &format!("update-{update}")),
        )?;
        logs.push(TrainLog {
            update,
            mean_reward_per_env: stats.mean_return,
            surrogate_loss: stats.surrogate_loss,
            value_loss: stats.value_loss,
            episodes: buf.episodes,
            success_fraction: if buf.episodes > 0 {
                buf.successes as f64 / buf.episodes as f64
            } else {
                0.0
            },
            threshold,
        });
    }
    Ok((policy, logs))
}

/// Train the base tracking policy on the full dataset.
pub fn train_base(
    model: &RobotModel,
    dataset: &Arc<MotionDataset>,
    ppo: &PpoConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(ActorCritic, Vec<TrainLog>), PpoError> {
    let all: Vec<u32> = (0..dataset.len() as u32).collect();
    train_tracking(model, dataset, &all, None, ppo, train, seed)
}

/// Fine-tune an expert from the base policy on one cluster's clips.
pub fn finetune_expert(
    model: &RobotModel,
    dataset: &Arc<MotionDataset>,
    base: &ActorCritic,
    cluster_clips: &[u32],
    ppo: &PpoConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(ActorCritic, Vec<TrainLog>), PpoError> {
    assert!(!cluster_clips.is_empty(), "cluster must be non-empty");
    train_tracking(model, dataset, cluster_clips, Some(base), ppo, train, seed)
}
