//! The PPO update: clipped surrogate, value regression, entropy bonus,
//! global gradient clipping, Adam.

use rand::seq::SliceRandom;

use super::policy::ActorCritic;
use super::{normalize_advantages, PpoConfig, RolloutBuffer};
use crate::net::{AdamConfig, NetError, Tape, Tensor};
use crate::util::seeded_rng;

#[derive(Debug, Clone, Default)]
pub struct UpdateStats {
    pub surrogate_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    /// Gradient norms before clipping, one per mini-batch step.
    pub grad_norms: Vec<f64>,
    pub mean_return: f64,
}

#[derive(Debug)]
pub enum PpoError {
    NonFiniteLoss { epoch: usize, minibatch: usize },
    Net(NetError),
}

impl std::fmt::Display for PpoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonFiniteLoss { epoch, minibatch } => {
                write!(f, "non-finite loss at epoch {epoch}, mini-batch {minibatch}")
            }
            Self::Net(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PpoError {}

impl From<NetError> for PpoError {
    fn from(e: NetError) -> Self {
        Self::Net(e)
    }
}

/// Run the PPO epochs over a full buffer, updating the policy in place.
pub fn ppo_update(
    policy: &mut ActorCritic,
    buffer: &mut RolloutBuffer,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<UpdateStats, PpoError> {
    assert_eq!(buffer.len(), cfg.batch_size(), "buffer must be full");
    buffer.compute_gae(cfg.gamma, cfg.gae_lambda);
    normalize_advantages(&mut buffer.advantages);

    let n = buffer.len();
    let obs_dim = policy.obs_dim();
    let cobs_dim = policy.critic_obs_dim();
    let act_dim = policy.act_dim();
    let adam = AdamConfig::with_lr(cfg.learning_rate);

    let mut stats = UpdateStats {
        mean_return: buffer.rewards.iter().map(|&r| r as f64).sum::<f64>()
            / buffer.num_envs as f64,
        ..UpdateStats::default()
    };
    let mut rng = seeded_rng(seed, "ppo-minibatch");
    let mut indices: Vec<usize> = (0..n).collect();
    let mb_size = n / cfg.minibatches;

    let mut logged = 0usize;
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        for mb in 0..cfg.minibatches {
            let chunk = &indices[mb * mb_size..(mb + 1) * mb_size];
            let m = chunk.len();

            let mut obs = Tensor::zeros(m, obs_dim);
            let mut cobs = Tensor::zeros(m, cobs_dim);
            let mut acts = Tensor::zeros(m, act_dim);
            let mut old_logp = Tensor::zeros(m, 1);
            let mut adv = Tensor::zeros(m, 1);
            let mut ret = Tensor::zeros(m, 1);
            for (r, &i) in chunk.iter().enumerate() {
                obs.row_mut(r).copy_from_slice(&buffer.obs[i]);
                cobs.row_mut(r).copy_from_slice(&buffer.critic_obs[i]);
                acts.row_mut(r).copy_from_slice(&buffer.actions[i]);
                old_logp.data[r] = buffer.log_probs[i];
                adv.data[r] = buffer.advantages[i];
                ret.data[r] = buffer.returns[i];
            }

            let mut tape = Tape::new(policy.store.len());
            let x = tape.input(obs);
            let mean = policy.actor.forward_tape(&mut tape, &policy.store, x)?;
            let a = tape.input(acts);
            let logp = policy.log_prob_tape(&mut tape, mean, a);
            let old = tape.input(old_logp);
            let diff = tape.sub(logp, old);
            let ratio = tape.exp(diff);
            let adv_node = tape.input(adv);
            let unclipped = tape.mul_elem(ratio, adv_node);
            let clipped_ratio = tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
            let clipped = tape.mul_elem(clipped_ratio, adv_node);
            let objective = tape.min_elem(unclipped, clipped);
            let mean_obj = tape.mean_all(objective);
            let surrogate = tape.scale(mean_obj, -1.0);

            let cx = tape.input(cobs);
            let v = policy.critic.forward_tape(&mut tape, &policy.store, cx)?;
            let rt = tape.input(ret);
            let verr = tape.sub(v, rt);
            let vsq = tape.square(verr);
            let vmean = tape.mean_all(vsq);
            let vloss = tape.scale(vmean, cfg.value_coef);

            let entropy = policy.entropy_tape(&mut tape);
            let ent_term = tape.scale(entropy, -cfg.entropy_coef);

            let l1 = tape.add(surrogate, vloss);
            let loss = tape.add(l1, ent_term);

            let lv = tape.value(loss).data[0];
            if !lv.is_finite() {
                return Err(PpoError::NonFiniteLoss { epoch, minibatch: mb });
            }

            let mut grads = tape.backward(loss)?;
            let norm = grads.clip_global_norm(cfg.max_grad_norm);
            policy.store.adam_step(&grads, &adam)?;

            stats.surrogate_loss += tape.value(surrogate).data[0] as f64;
            stats.value_loss += tape.value(vloss).data[0] as f64;
            stats.entropy = tape.value(entropy).data[0] as f64;
            stats.mean_ratio += tape.value(ratio).data.iter().map(|&r| r as f64).sum::<f64>()
                / m as f64;
            stats.grad_norms.push(norm);
            logged += 1;
        }
    }
    let k = logged.max(1) as f64;
    stats.surrogate_loss /= k;
    stats.value_loss /= k;
    stats.mean_ratio /= k;
    Ok(stats)
}
