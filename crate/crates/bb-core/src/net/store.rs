//! Named parameter tensors with Adam optimizer state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::Gradients;
use super::tensor::Tensor;
use super::NetError;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f32) -> Self {
        Self { lr, ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    m: Tensor,
    v: Tensor,
}

/// All learnable parameters of one model, with per-tensor Adam moments and
/// a shared step counter. Shapes are fixed at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    step: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self { entries: Vec::new(), step: 0 }
    }

    /// Register a tensor; returns its index. Names must be unique.
    pub fn add(&mut self, name: &str, tensor: Tensor) -> usize {
        assert!(
            self.index_of(name).is_none(),
            "duplicate parameter name {name}"
        );
        let (r, c) = tensor.shape();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            tensor,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
        });
        self.entries.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn get(&self, index: usize) -> &Tensor {
        &self.entries[index].tensor
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].tensor
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].name
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.tensor))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// Standard Adam update with bias correction; increments the step
    /// counter. Rejects non-finite gradients, naming the offending tensor.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<(), NetError> {
        assert_eq!(grads.by_param.len(), self.entries.len(), "gradient/store mismatch");
        for (entry, g) in self.entries.iter().zip(&grads.by_param) {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(NetError::NonFiniteGradient { tensor: entry.name.clone() });
                }
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - (cfg.beta1 as f64).powf(t);
        let bc2 = 1.0 - (cfg.beta2 as f64).powf(t);
        for (entry, g) in self.entries.iter_mut().zip(&grads.by_param) {
            let Some(g) = g else { continue };
            debug_assert_eq!(g.shape(), entry.tensor.shape());
            for i in 0..g.len() {
                let gi = g.data[i];
                entry.m.data[i] = cfg.beta1 * entry.m.data[i] + (1.0 - cfg.beta1) * gi;
                entry.v.data[i] = cfg.beta2 * entry.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = entry.m.data[i] as f64 / bc1;
                let v_hat = entry.v.data[i] as f64 / bc2;
                entry.tensor.data[i] -=
                    (cfg.lr as f64 * m_hat / (v_hat.sqrt() + cfg.eps as f64)) as f32;
            }
        }
        Ok(())
    }

    /// Flat little-endian view of all parameter tensors, in entry order.
    pub fn flat_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_scalars() * 4);
        for e in &self.entries {
            for v in &e.tensor.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Overwrite parameter contents from a flat blob (shapes must match).
    pub fn load_flat_bytes(&mut self, bytes: &[u8]) -> Result<(), NetError> {
        if bytes.len() != self.num_scalars() * 4 {
            return Err(NetError::CheckpointFormat(format!(
                "parameter blob is {} bytes, expected {}",
                bytes.len(),
                self.num_scalars() * 4
            )));
        }
        let mut off = 0;
        for e in &mut self.entries {
            for v in &mut e.tensor.data {
                *v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
                off += 4;
            }
        }
        Ok(())
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }
}

/// Uniform Xavier/Glorot initialization for a `[fan_in, fan_out]` weight.
pub fn xavier_init<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(fan_in, fan_out, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param_store(v: f32) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(v));
        s
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut s = single_param_store(0.37);
        let grads = Gradients { by_param: vec![Some(Tensor::scalar(0.0))] };
        s.adam_step(&grads, &AdamConfig::default()).unwrap();
        assert_eq!(s.get(0).data[0], 0.37);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // g = 1: m_hat = v_hat = 1, so the update is -lr / (1 + eps).
        let mut s = single_param_store(1.0);
        let grads = Gradients { by_param: vec![Some(Tensor::scalar(1.0))] };
        let cfg = AdamConfig { lr: 1e-4, ..AdamConfig::default() };
        s.adam_step(&grads, &cfg).unwrap();
        // f32 storage near 1.0 has ~6e-8 resolution; the update itself is
        // computed in f64.
        let delta = s.get(0).data[0] - 1.0;
        assert!((delta - (-1e-4)).abs() < 1e-6, "delta = {delta}");
    }

    #[test]
    fn non_finite_gradient_rejected_with_name() {
        let mut s = ParamStore::new();
        s.add("ok", Tensor::scalar(0.0));
        s.add("bad_layer", Tensor::scalar(0.0));
        let grads = Gradients {
            by_param: vec![Some(Tensor::scalar(1.0)), Some(Tensor::scalar(f32::NAN))],
        };
        match s.adam_step(&grads, &AdamConfig::default()) {
            Err(NetError::NonFiniteGradient { tensor }) => assert_eq!(tensor, "bad_layer"),
            other => panic!("expected non-finite rejection, got {other:?}"),
        }
        // rejected step must not advance the counter
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn flat_bytes_roundtrip() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::row_vec(vec![1.0, -2.5]));
        s.add("b", Tensor::scalar(0.125));
        let bytes = s.flat_bytes();
        let mut s2 = s.clone();
        s2.get_mut(0).data[0] = 99.0;
        s2.load_flat_bytes(&bytes).unwrap();
        assert_eq!(s2.get(0).data, vec![1.0, -2.5]);
    }
}
