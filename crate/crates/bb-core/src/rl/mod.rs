//! PPO with generalized advantage estimation, clipped surrogate,
//! entropy bonus, and deterministic parallel rollout collection.

pub mod policy;
pub mod ppo;
pub mod rollout;

pub use policy::ActorCritic;
pub use ppo::{ppo_update, PpoError, UpdateStats};
pub use rollout::{collect_rollouts, RlEnv, StepOutcome};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub learning_rate: f32,
    pub gamma: f32,
    pub clip: f32,
    pub entropy_coef: f32,
    pub max_grad_norm: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub value_coef: f32,
    pub gae_lambda: f32,
    pub num_envs: usize,
    pub horizon: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        // the desk preset: 64 envs x 64 steps = a 4096-transition batch
        Self {
            learning_rate: 1e-4,
            gamma: 0.99,
            clip: 0.2,
            entropy_coef: 0.001,
            max_grad_norm: 1.0,
            epochs: 5,
            minibatches: 4,
            value_coef: 1.0,
            gae_lambda: 0.95,
            num_envs: 64,
            horizon: 64,
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.num_envs * self.horizon
    }
}

/// Flat storage for one rollout: `num_envs * horizon` transitions in
/// env-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub horizon: usize,
    pub obs: Vec<Vec<f32>>,
    pub critic_obs: Vec<Vec<f32>>,
    pub actions: Vec<Vec<f32>>,
    pub log_probs: Vec<f32>,
    pub rewards: Vec<f32>,
    pub values: Vec<f32>,
    pub dones: Vec<bool>,
    /// Bootstrap value per env for the state after the last step.
    pub last_values: Vec<f32>,
    pub advantages: Vec<f32>,
    pub returns: Vec<f32>,
    /// Simulation faults observed during collection (per env counts).
    pub faults: Vec<usize>,
    /// Episodes finished during collection, with success flag.
    pub episodes: usize,
    pub successes: usize,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn idx(&self, env: usize, t: usize) -> usize {
        env * self.horizon + t
    }

    /// Backward GAE recursion with bootstrap and done masking; fills
    /// advantages and returns.
    pub fn compute_gae(&mut self, gamma: f32, lambda: f32) {
        assert_eq!(self.rewards.len(), self.num_envs * self.horizon, "buffer must be full");
        self.advantages = vec![0.0; self.rewards.len()];
        self.returns = vec![0.0; self.rewards.len()];
        for e in 0..self.num_envs {
            let mut acc = 0.0f32;
            for t in (0..self.horizon).rev() {
                let i = self.idx(e, t);
                let not_done = if self.dones[i] { 0.0 } else { 1.0 };
                let next_value =
                    if t + 1 < self.horizon { self.values[self.idx(e, t + 1)] } else { self.last_values[e] };
                let delta = self.rewards[i] + gamma * next_value * not_done - self.values[i];
                acc = delta + gamma * lambda * not_done * acc;
                self.advantages[i] = acc;
                self.returns[i] = acc + self.values[i];
            }
        }
    }
}

/// Normalize advantages in place to zero mean, unit std.
pub fn normalize_advantages(adv: &mut [f32]) {
    let n = adv.len() as f64;
    let mean = adv.iter().map(|&a| a as f64).sum::<f64>() / n;
    let var = adv.iter().map(|&a| (a as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv {
        *a = ((*a as f64 - mean) / std) as f32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_buffer(num_envs: usize, horizon: usize) -> RolloutBuffer {
        let n = num_envs * horizon;
        RolloutBuffer {
            num_envs,
            horizon,
            obs: vec![vec![]; n],
            critic_obs: vec![vec![]; n],
            actions: vec![vec![]; n],
            log_probs: vec![0.0; n],
            rewards: vec![0.0; n],
            values: vec![0.0; n],
            dones: vec![false; n],
            last_values: vec![0.0; num_envs],
            advantages: vec![],
            returns: vec![],
            faults: vec![0; num_envs],
            episodes: 0,
            successes: 0,
        }
    }

    #[test]
    fn zero_rewards_zero_values_give_zero_advantages() {
        let mut b = empty_buffer(2, 5);
        b.compute_gae(0.99, 0.95);
        assert!(b.advantages.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn single_step_advantage_hand_computed() {
        // r=1, gamma=0.99, V=0.5, V'=1, not done: A = 1 + 0.99 - 0.5
        let mut b = empty_buffer(1, 1);
        b.rewards[0] = 1.0;
        b.values[0] = 0.5;
        b.last_values[0] = 1.0;
        b.compute_gae(0.99, 0.95);
        assert!((b.advantages[0] - 1.49).abs() < 1e-6);
        assert!((b.returns[0] - 1.99).abs() < 1e-6);
    }

    #[test]
    fn done_masks_bootstrap() {
        let mut b = empty_buffer(1, 1);
        b.rewards[0] = 2.0;
        b.values[0] = 0.7;
        b.last_values[0] = 10.0; // must be ignored
        b.dones[0] = true;
        b.compute_gae(0.99, 0.95);
        assert!((b.advantages[0] - (2.0 - 0.7)).abs() < 1e-6);
    }

    #[test]
    fn normalization_hits_zero_mean_unit_std() {
        let mut adv: Vec<f32> = (0..1000).map(|i| (i as f32) * 0.013 - 2.0).collect();
        normalize_advantages(&mut adv);
        let mean: f64 = adv.iter().map(|&a| a as f64).sum::<f64>() / 1000.0;
        let var: f64 = adv.iter().map(|&a| (a as f64 - mean).powi(2)).sum::<f64>() / 1000.0;
        assert!(mean.abs() < 1e-6);
        assert!((var.sqrt() - 1.0).abs() < 1e-4);
    }
}
