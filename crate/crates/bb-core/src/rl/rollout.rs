//! Rollout collection: environments advance in lockstep so the policy and
//! value nets run batched, while every env owns an independent RNG stream
//! so results are identical for any worker count.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::policy::{gaussian_log_prob, ActorCritic};
use super::RolloutBuffer;
use crate::net::Tensor;
use crate::util::seeded_rng;

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f32,
    pub done: bool,
    /// Episode ended by reaching the reference end (success).
    pub success: bool,
    /// Simulation fault (the env must be reset by the caller).
    pub fault: bool,
}

/// A task environment the PPO loop can drive.
pub trait RlEnv: Send {
    fn obs(&self) -> Vec<f32>;
    fn critic_obs(&self) -> Vec<f32>;
    fn step(&mut self, action: &[f32]) -> StepOutcome;
    /// Start a new episode drawing randomness from the env's own stream.
    fn reset(&mut self);
}

/// Collect `horizon` steps from every env. Episodes reset automatically;
/// the buffer records bootstrap values for unfinished episodes.
pub fn collect_rollouts<E: RlEnv>(
    envs: &mut [E],
    policy: &ActorCritic,
    horizon: usize,
    seed: u64,
) -> RolloutBuffer {
    let num_envs = envs.len();
    let n = num_envs * horizon;
    let obs_dim = policy.obs_dim();
    let cobs_dim = policy.critic_obs_dim();
    let act_dim = policy.act_dim();

    let mut buf = RolloutBuffer {
        num_envs,
        horizon,
        obs: vec![Vec::new(); n],
        critic_obs: vec![Vec::new(); n],
        actions: vec![Vec::new(); n],
        log_probs: vec![0.0; n],
        rewards: vec![0.0; n],
        values: vec![0.0; n],
        dones: vec![false; n],
        last_values: vec![0.0; num_envs],
        advantages: Vec::new(),
        returns: Vec::new(),
        faults: vec![0; num_envs],
        episodes: 0,
        successes: 0,
    };

    let mut rngs: Vec<ChaCha8Rng> =
        (0..num_envs).map(|e| seeded_rng(seed, &format!("rollout-env-{e}"))).collect();

    let mut obs_mat = Tensor::zeros(num_envs, obs_dim);
    let mut cobs_mat = Tensor::zeros(num_envs, cobs_dim);
    for t in 0..horizon {
        for (e, env) in envs.iter().enumerate() {
            obs_mat.row_mut(e).copy_from_slice(&env.obs());
            cobs_mat.row_mut(e).copy_from_slice(&env.critic_obs());
        }
        let (mean, values, std) =
            policy.forward_batch(&obs_mat, &cobs_mat).expect("policy forward");

        // sample actions per env from its own stream
        let mut actions = vec![vec![0.0f32; act_dim]; num_envs];
        let mut log_probs = vec![0.0f32; num_envs];
        for e in 0..num_envs {
            let m = mean.row(e);
            for (d, a) in actions[e].iter_mut().enumerate() {
                let eps: f32 = StandardNormal.sample(&mut rngs[e]);
                *a = m[d] + std[d] * eps;
            }
            log_probs[e] = gaussian_log_prob(&actions[e], m, &std);
        }

        // step envs in parallel; each owns its state and rng
        let outcomes: Vec<StepOutcome> = envs
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|(env, action)| {
                let out = env.step(action);
                if out.done || out.fault {
                    env.reset();
                }
                out
            })
            .collect();

        for (e, out) in outcomes.iter().enumerate() {
            let i = e * horizon + t;
            buf.obs[i] = obs_mat.row(e).to_vec();
            buf.critic_obs[i] = cobs_mat.row(e).to_vec();
            buf.actions[i] = actions[e].clone();
            buf.log_probs[i] = log_probs[e];
            buf.rewards[i] = out.reward;
            buf.values[i] = values[e];
            buf.dones[i] = out.done || out.fault;
            if out.fault {
                buf.faults[e] += 1;
            }
            if out.done {
                buf.episodes += 1;
                if out.success {
                    buf.successes += 1;
                }
            }
        }
    }
    // bootstrap values for the states after the final step
    for (e, env) in envs.iter().enumerate() {
        buf.last_values[e] = policy.value(&env.critic_obs()).expect("critic forward");
    }
    buf
}
