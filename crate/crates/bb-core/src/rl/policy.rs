//! Gaussian MLP actor with an asymmetric MLP critic sharing one
//! parameter store.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::net::{HeadKind, Mlp, NetConfig, NetError, NodeId, ParamStore, Tape, Tensor};

const LOG_2PI: f32 = 1.837_877_1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActorCritic {
    pub store: ParamStore,
    pub actor: Mlp,
    pub critic: Mlp,
}

impl ActorCritic {
    pub fn create<R: Rng>(
        obs_dim: usize,
        critic_obs_dim: usize,
        act_dim: usize,
        actor_hidden: &[usize],
        critic_hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let mut store = ParamStore::new();
        let actor = Mlp::create(
            &mut store,
            "actor",
            NetConfig::new(obs_dim, actor_hidden, act_dim, HeadKind::Gaussian),
            rng,
        );
        let critic = Mlp::create(
            &mut store,
            "critic",
            NetConfig::new(critic_obs_dim, critic_hidden, 1, HeadKind::Deterministic),
            rng,
        );
        Self { store, actor, critic }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.cfg.input_dim
    }

    pub fn act_dim(&self) -> usize {
        self.actor.cfg.output_dim
    }

    pub fn critic_obs_dim(&self) -> usize {
        self.critic.cfg.input_dim
    }

    /// Action distribution at one observation.
    pub fn dist(&self, obs: &[f32]) -> Result<(Vec<f32>, Vec<f32>), NetError> {
        let mean = self.actor.forward(&self.store, obs)?;
        let std = self.actor.log_std(&self.store).iter().map(|l| l.exp()).collect();
        Ok((mean, std))
    }

    /// Sample an action and its log-probability.
    pub fn act<R: Rng>(&self, obs: &[f32], rng: &mut R) -> Result<(Vec<f32>, f32), NetError> {
        let (mean, std) = self.dist(obs)?;
        let mut action = Vec::with_capacity(mean.len());
        for (m, s) in mean.iter().zip(&std) {
            let eps: f32 = StandardNormal.sample(rng);
            action.push(m + s * eps);
        }
        let logp = gaussian_log_prob(&action, &mean, &std);
        Ok((action, logp))
    }

    /// Deterministic (mean) action.
    pub fn act_mean(&self, obs: &[f32]) -> Result<Vec<f32>, NetError> {
        self.actor.forward(&self.store, obs)
    }

    pub fn value(&self, critic_obs: &[f32]) -> Result<f32, NetError> {
        Ok(self.critic.forward(&self.store, critic_obs)?[0])
    }

    /// Batched mean + value evaluation (used during rollouts).
    pub fn forward_batch(
        &self,
        obs: &Tensor,
        critic_obs: &Tensor,
    ) -> Result<(Tensor, Vec<f32>, Vec<f32>), NetError> {
        let mean = self.actor.forward_batch(&self.store, obs)?;
        let values = self.critic.forward_batch(&self.store, critic_obs)?.data;
        let std = self.actor.log_std(&self.store).iter().map(|l| l.exp()).collect();
        Ok((mean, values, std))
    }

    /// Log-probabilities of given actions on the tape: `[n, 1]`.
    pub fn log_prob_tape(
        &self,
        tape: &mut Tape,
        mean: NodeId,
        actions: NodeId,
    ) -> NodeId {
        let act_dim = self.act_dim();
        let log_std = self.actor.log_std_tape(tape, &self.store);
        let diff = tape.sub(actions, mean);
        let neg_ls = tape.scale(log_std, -1.0);
        let inv_std = tape.exp(neg_ls);
        let z = tape.mul_row_vec(diff, inv_std);
        let z2 = tape.square(z);
        let row = tape.row_sum(z2);
        let half = tape.scale(row, -0.5);
        let ls_sum = tape.sum_all(log_std);
        let const_term = -0.5 * act_dim as f32 * LOG_2PI;
        // broadcast the scalar log-std sum across the batch
        let n = tape.value(half).rows;
        let ones = tape.input(Tensor::from_vec(n, 1, vec![1.0; n]));
        let ls_neg = tape.scale(ls_sum, -1.0);
        let ls_row = tape.matmul(ones, ls_neg, false);
        let sum = tape.add(half, ls_row);
        tape.add_scalar(sum, const_term)
    }

    /// Gaussian entropy (scalar node): sum over dims of log_std plus the
    /// constant.
    pub fn entropy_tape(&self, tape: &mut Tape) -> NodeId {
        let log_std = self.actor.log_std_tape(tape, &self.store);
        let s = tape.sum_all(log_std);
        let c = 0.5 * self.act_dim() as f32 * (LOG_2PI + 1.0);
        tape.add_scalar(s, c)
    }
}

/// Diagonal-Gaussian log density.
pub fn gaussian_log_prob(action: &[f32], mean: &[f32], std: &[f32]) -> f32 {
    let mut logp = -0.5 * action.len() as f32 * LOG_2PI;
    for ((a, m), s) in action.iter().zip(mean).zip(std) {
        let z = (a - m) / s;
        logp += -0.5 * z * z - s.ln();
    }
    logp
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_log_prob_matches_scalar_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ac = ActorCritic::create(4, 3, 2, &[8], &[8], &mut rng);
        let obs = [0.1f32, -0.3, 0.5, 0.2];
        let (action, logp) = ac.act(&obs, &mut rng).unwrap();

        let mut tape = Tape::new(ac.store.len());
        let x = tape.input(Tensor::row_vec(obs.to_vec()));
        let mean = ac.actor.forward_tape(&mut tape, &ac.store, x).unwrap();
        let a = tape.input(Tensor::row_vec(action.clone()));
        let lp = ac.log_prob_tape(&mut tape, mean, a);
        let tape_logp = tape.value(lp).data[0];
        assert!(
            (tape_logp - logp).abs() < 1e-5,
            "tape {tape_logp} vs scalar {logp}"
        );
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut init = ChaCha8Rng::seed_from_u64(5);
        let ac = ActorCritic::create(3, 3, 2, &[6], &[6], &mut init);
        let obs = [0.5f32, 0.1, -0.2];
        let mut s1 = ChaCha8Rng::seed_from_u64(77);
        let mut s2 = ChaCha8Rng::seed_from_u64(77);
        let (a1, l1) = ac.act(&obs, &mut s1).unwrap();
        let (a2, l2) = ac.act(&obs, &mut s2).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(l1, l2);
    }
}
