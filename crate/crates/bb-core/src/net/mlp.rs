//! Multi-layer perceptron with ELU activations and an optional Gaussian
//! head (state-independent learned log-std).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::store::{xavier_init, ParamStore};
use super::tape::{NodeId, Tape};
use super::tensor::{matmul, Tensor};
use super::NetError;

/// Learned log-std initialization and clamp range for Gaussian heads.
pub const LOG_STD_INIT: f32 = -1.0;
pub const LOG_STD_MIN: f32 = -4.0;
pub const LOG_STD_MAX: f32 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Elu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    /// Raw linear output.
    Deterministic,
    /// Linear mean plus a learned state-independent log-std vector.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub head: HeadKind,
}

impl NetConfig {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize, head: HeadKind) -> Self {
        assert!(input_dim > 0 && output_dim > 0);
        assert!(hidden.iter().all(|&h| h > 0), "layer sizes must be positive");
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            activation: Activation::Elu,
            head,
        }
    }

    /// Paper-scale hidden sizes.
    pub fn paper_hidden() -> Vec<usize> {
        vec![1024, 1024, 512]
    }

    /// CPU-trainable preset.
    pub fn desk_hidden() -> Vec<usize> {
        vec![256, 256, 128]
    }
}

/// An MLP bound to tensors in a [`ParamStore`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub cfg: NetConfig,
    weights: Vec<usize>,
    biases: Vec<usize>,
    log_std: Option<usize>,
}

impl Mlp {
    pub fn create<R: Rng>(store: &mut ParamStore, prefix: &str, cfg: NetConfig, rng: &mut R) -> Self {
        let mut dims = vec![cfg.input_dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(cfg.output_dim);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            weights.push(store.add(&format!("{prefix}.w{l}"), xavier_init(rng, dims[l], dims[l + 1])));
            biases.push(store.add(&format!("{prefix}.b{l}"), Tensor::zeros(1, dims[l + 1])));
        }
        let log_std = match cfg.head {
            HeadKind::Gaussian => Some(store.add(
                &format!("{prefix}.log_std"),
                Tensor::from_vec(1, cfg.output_dim, vec![LOG_STD_INIT; cfg.output_dim]),
            )),
            HeadKind::Deterministic => None,
        };
        Self { cfg, weights, biases, log_std }
    }

    fn check_input(&self, cols: usize) -> Result<(), NetError> {
        if cols != self.cfg.input_dim {
            return Err(NetError::ShapeMismatch {
                what: "mlp input",
                expected: (1, self.cfg.input_dim),
                got: (1, cols),
            });
        }
        Ok(())
    }

    /// Recorded forward pass over a `[batch, input_dim]` node. Returns the
    /// output (mean for Gaussian heads).
    pub fn forward_tape(&self, tape: &mut Tape, store: &ParamStore, x: NodeId) -> Result<NodeId, NetError> {
        self.check_input(tape.value(x).cols)?;
        let mut h = x;
        let n_layers = self.weights.len();
        for l in 0..n_layers {
            let w = tape.param(self.weights[l], store.get(self.weights[l]));
            let b = tape.param(self.biases[l], store.get(self.biases[l]));
            let z = tape.matmul(h, w, false);
            h = tape.add_row_vec(z, b);
            if l + 1 < n_layers {
                h = tape.elu(h);
            }
        }
        Ok(h)
    }

    /// Clamped log-std node for Gaussian heads.
    pub fn log_std_tape(&self, tape: &mut Tape, store: &ParamStore) -> NodeId {
        let idx = self.log_std.expect("net has no Gaussian head");
        let p = tape.param(idx, store.get(idx));
        tape.clamp(p, LOG_STD_MIN, LOG_STD_MAX)
    }

    /// Tapeless batch forward; bit-identical to the recorded pass.
    pub fn forward_batch(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor, NetError> {
        self.check_input(x.cols)?;
        let mut h = x.clone();
        let n_layers = self.weights.len();
        for l in 0..n_layers {
            let mut z = matmul(&h, store.get(self.weights[l]), false);
            let b = store.get(self.biases[l]);
            for r in 0..z.rows {
                for (o, &bb) in z.row_mut(r).iter_mut().zip(&b.data) {
                    *o += bb;
                }
            }
            if l + 1 < n_layers {
                for v in &mut z.data {
                    if *v <= 0.0 {
                        *v = v.exp() - 1.0;
                    }
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Tapeless single-input forward.
    pub fn forward(&self, store: &ParamStore, input: &[f32]) -> Result<Vec<f32>, NetError> {
        let x = Tensor::from_vec(1, input.len(), input.to_vec());
        Ok(self.forward_batch(store, &x)?.data)
    }

    /// Clamped log-std values for Gaussian heads.
    pub fn log_std(&self, store: &ParamStore) -> Vec<f32> {
        let idx = self.log_std.expect("net has no Gaussian head");
        store.get(idx).data.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()
    }

    /// Zero the final linear layer (and bias) so the initial output is
    /// exactly zero regardless of input.
    pub fn zero_final_layer(&self, store: &mut ParamStore) {
        let w = *self.weights.last().unwrap();
        let b = *self.biases.last().unwrap();
        store.get_mut(w).data.fill(0.0);
        store.get_mut(b).data.fill(0.0);
    }

    /// Parameter indices owned by this net (for targeted updates).
    pub fn param_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.weights.iter().chain(&self.biases).copied().collect();
        if let Some(ls) = self.log_std {
            v.push(ls);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn elu_values() {
        let mut tape = Tape::new(0);
        let x = tape.input(Tensor::row_vec(vec![0.0, 1.0, -1.0]));
        let y = tape.elu(x);
        let v = &tape.value(y).data;
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1.0);
        assert!((v[2] - ((-1.0f32).exp() - 1.0)).abs() < 1e-7);
        assert!((v[2] + 0.6321).abs() < 1e-4);
    }

    #[test]
    fn identity_linear_layer() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = NetConfig::new(2, &[], 2, HeadKind::Deterministic);
        let mlp = Mlp::create(&mut store, "id", cfg, &mut rng);
        // identity weights, zero bias
        *store.get_mut(0) = Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let out = mlp.forward(&store, &[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_reports_dims() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::create(&mut store, "m", NetConfig::new(3, &[4], 2, HeadKind::Deterministic), &mut rng);
        match mlp.forward(&store, &[1.0, 2.0]) {
            Err(NetError::ShapeMismatch { expected, got, .. }) => {
                assert_eq!(expected.1, 3);
                assert_eq!(got.1, 2);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn tape_and_tapeless_forward_are_bit_identical() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mlp = Mlp::create(&mut store, "m", NetConfig::new(5, &[8, 6], 3, HeadKind::Gaussian), &mut rng);
        let input: Vec<f32> = (0..5).map(|i| (i as f32) * 0.3 - 0.7).collect();
        let fast = mlp.forward(&store, &input).unwrap();
        let mut tape = Tape::new(store.len());
        let x = tape.input(Tensor::row_vec(input));
        let y = mlp.forward_tape(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).data, fast);
    }

    #[test]
    fn determinism_same_input_same_output() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::create(&mut store, "m", NetConfig::new(4, &[16, 16], 2, HeadKind::Deterministic), &mut rng);
        let input = [0.1, -0.2, 0.3, -0.4];
        let a = mlp.forward(&store, &input).unwrap();
        let b = mlp.forward(&store, &input).unwrap();
        assert_eq!(a, b);
    }
}
