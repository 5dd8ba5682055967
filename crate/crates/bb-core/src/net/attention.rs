//! Gated attention block: causal multi-head attention whose output is
//! mixed with the residual stream through learned sigmoid gates, followed
//! by a gated feed-forward sublayer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{LOG_STD_INIT, LOG_STD_MAX, LOG_STD_MIN};
use super::store::{xavier_init, ParamStore};
use super::tape::{attention_kernel, AttentionSpec, NodeId, Tape};
use super::tensor::{matmul, Tensor};
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatedAttentionConfig {
    pub embed_dim: usize,
    pub heads: usize,
    pub ff_hidden: usize,
    pub memory_len: usize,
}

impl GatedAttentionConfig {
    /// One block, six heads, hidden 128, embedding 204, memory length 10.
    pub fn default_policy() -> Self {
        Self { embed_dim: 204, heads: 6, ff_hidden: 128, memory_len: 10 }
    }
}

/// Parameter indices for one gated attention block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatedAttentionBlock {
    pub cfg: GatedAttentionConfig,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    bo: usize,
    gate_w: usize,
    gate_b: usize,
    ff_w1: usize,
    ff_b1: usize,
    ff_w2: usize,
    ff_b2: usize,
    gate2_w: usize,
    gate2_b: usize,
}

impl GatedAttentionBlock {
    pub fn create<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        cfg: GatedAttentionConfig,
        rng: &mut R,
    ) -> Result<Self, NetError> {
        if cfg.embed_dim % cfg.heads != 0 {
            return Err(NetError::HeadSplit { embed_dim: cfg.embed_dim, heads: cfg.heads });
        }
        let d = cfg.embed_dim;
        let add = |s: &mut ParamStore, n: String, t: Tensor| s.add(&n, t);
        Ok(Self {
            wq: add(store, format!("{prefix}.wq"), xavier_init(rng, d, d)),
            wk: add(store, format!("{prefix}.wk"), xavier_init(rng, d, d)),
            wv: add(store, format!("{prefix}.wv"), xavier_init(rng, d, d)),
            wo: add(store, format!("{prefix}.wo"), xavier_init(rng, d, d)),
            bo: add(store, format!("{prefix}.bo"), Tensor::zeros(1, d)),
            gate_w: add(store, format!("{prefix}.gate_w"), xavier_init(rng, d, d)),
            gate_b: add(store, format!("{prefix}.gate_b"), Tensor::zeros(1, d)),
            ff_w1: add(store, format!("{prefix}.ff_w1"), xavier_init(rng, d, cfg.ff_hidden)),
            ff_b1: add(store, format!("{prefix}.ff_b1"), Tensor::zeros(1, cfg.ff_hidden)),
            ff_w2: add(store, format!("{prefix}.ff_w2"), xavier_init(rng, cfg.ff_hidden, d)),
            ff_b2: add(store, format!("{prefix}.ff_b2"), Tensor::zeros(1, d)),
            gate2_w: add(store, format!("{prefix}.gate2_w"), xavier_init(rng, d, d)),
            gate2_b: add(store, format!("{prefix}.gate2_b"), Tensor::zeros(1, d)),
            cfg,
        })
    }

    /// Recorded forward over `windows` sequences of length `seq_len`
    /// (rows of `x`, window-major). `memory` optionally prepends
    /// `memory_len` embeddings per window to the attention keys/values;
    /// gradients do not flow into the memory.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
        memory: Option<NodeId>,
        windows: usize,
        seq_len: usize,
    ) -> Result<NodeId, NetError> {
        let d = self.cfg.embed_dim;
        let xv = tape.value(x);
        if xv.cols != d || xv.rows != windows * seq_len {
            return Err(NetError::ShapeMismatch {
                what: "attention input",
                expected: (windows * seq_len, d),
                got: xv.shape(),
            });
        }
        let wq = tape.param(self.wq, store.get(self.wq));
        let wk = tape.param(self.wk, store.get(self.wk));
        let wv = tape.param(self.wv, store.get(self.wv));

        let (kv_in, mem_len) = match memory {
            Some(m) => {
                let mv = tape.value(m);
                assert_eq!(mv.rows % windows, 0, "memory rows must split across windows");
                let mlen = mv.rows / windows;
                if mlen > self.cfg.memory_len {
                    return Err(NetError::ShapeMismatch {
                        what: "attention memory",
                        expected: (windows * self.cfg.memory_len, d),
                        got: mv.shape(),
                    });
                }
                // interleave per window: [mem_w ; x_w]
                let mut parts = Vec::new();
                for w in 0..windows {
                    parts.push(tape.slice_rows(m, w * mlen, mlen));
                    parts.push(tape.slice_rows(x, w * seq_len, seq_len));
                }
                (tape.concat_rows(&parts), mlen)
            }
            None => (x, 0),
        };

        let q = tape.matmul(x, wq, false);
        let k = tape.matmul(kv_in, wk, false);
        let v = tape.matmul(kv_in, wv, false);
        let spec = AttentionSpec {
            windows,
            q_len: seq_len,
            kv_len: seq_len + mem_len,
            offset: mem_len,
            heads: self.cfg.heads,
        };
        let att = tape.block_attention(q, k, v, spec);
        let wo = tape.param(self.wo, store.get(self.wo));
        let bo = tape.param(self.bo, store.get(self.bo));
        let proj = tape.matmul(att, wo, false);
        let proj = tape.add_row_vec(proj, bo);

        // convex gate: g * attn + (1 - g) * residual
        let gw = tape.param(self.gate_w, store.get(self.gate_w));
        let gb = tape.param(self.gate_b, store.get(self.gate_b));
        let glin = tape.matmul(x, gw, false);
        let glin = tape.add_row_vec(glin, gb);
        let g = tape.sigmoid(glin);
        let gated = tape.mul_elem(g, proj);
        let neg = tape.scale(g, -1.0);
        let one_minus = tape.add_scalar(neg, 1.0);
        let res = tape.mul_elem(one_minus, x);
        let h = tape.add(gated, res);

        // gated feed-forward
        let w1 = tape.param(self.ff_w1, store.get(self.ff_w1));
        let b1 = tape.param(self.ff_b1, store.get(self.ff_b1));
        let w2 = tape.param(self.ff_w2, store.get(self.ff_w2));
        let b2 = tape.param(self.ff_b2, store.get(self.ff_b2));
        let f = tape.matmul(h, w1, false);
        let f = tape.add_row_vec(f, b1);
        let f = tape.elu(f);
        let f = tape.matmul(f, w2, false);
        let f = tape.add_row_vec(f, b2);
        let g2w = tape.param(self.gate2_w, store.get(self.gate2_w));
        let g2b = tape.param(self.gate2_b, store.get(self.gate2_b));
        let g2lin = tape.matmul(h, g2w, false);
        let g2lin = tape.add_row_vec(g2lin, g2b);
        let g2 = tape.sigmoid(g2lin);
        let gated2 = tape.mul_elem(g2, f);
        let neg2 = tape.scale(g2, -1.0);
        let one_minus2 = tape.add_scalar(neg2, 1.0);
        let res2 = tape.mul_elem(one_minus2, h);
        Ok(tape.add(gated2, res2))
    }

    /// Tapeless forward (single window, optional memory prefix).
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        memory: Option<&Tensor>,
    ) -> Result<Tensor, NetError> {
        let d = self.cfg.embed_dim;
        if x.cols != d {
            return Err(NetError::ShapeMismatch {
                what: "attention input",
                expected: (x.rows, d),
                got: x.shape(),
            });
        }
        let mem_len = memory.map_or(0, |m| m.rows);
        let kv_in = match memory {
            Some(m) => {
                let mut data = m.data.clone();
                data.extend_from_slice(&x.data);
                Tensor::from_vec(m.rows + x.rows, d, data)
            }
            None => x.clone(),
        };
        let q = matmul(x, store.get(self.wq), false);
        let k = matmul(&kv_in, store.get(self.wk), false);
        let v = matmul(&kv_in, store.get(self.wv), false);
        let spec = AttentionSpec {
            windows: 1,
            q_len: x.rows,
            kv_len: x.rows + mem_len,
            offset: mem_len,
            heads: self.cfg.heads,
        };
        let (att, _) = attention_kernel(&q, &k, &v, &spec);
        let mut proj = matmul(&att, store.get(self.wo), false);
        add_bias(&mut proj, store.get(self.bo));

        let mut g = matmul(x, store.get(self.gate_w), false);
        add_bias(&mut g, store.get(self.gate_b));
        sigmoid_inplace(&mut g);
        let mut h = Tensor::zeros(x.rows, d);
        for i in 0..h.len() {
            h.data[i] = g.data[i] * proj.data[i] + (1.0 - g.data[i]) * x.data[i];
        }

        let mut f = matmul(&h, store.get(self.ff_w1), false);
        add_bias(&mut f, store.get(self.ff_b1));
        for vv in &mut f.data {
            if *vv <= 0.0 {
                *vv = vv.exp() - 1.0;
            }
        }
        let mut f = matmul(&f, store.get(self.ff_w2), false);
        add_bias(&mut f, store.get(self.ff_b2));
        let mut g2 = matmul(&h, store.get(self.gate2_w), false);
        add_bias(&mut g2, store.get(self.gate2_b));
        sigmoid_inplace(&mut g2);
        let mut out = Tensor::zeros(x.rows, d);
        for i in 0..out.len() {
            out.data[i] = g2.data[i] * f.data[i] + (1.0 - g2.data[i]) * h.data[i];
        }
        Ok(out)
    }
}

fn add_bias(x: &mut Tensor, b: &Tensor) {
    for r in 0..x.rows {
        for (o, &bb) in x.row_mut(r).iter_mut().zip(&b.data) {
            *o += bb;
        }
    }
}

fn sigmoid_inplace(x: &mut Tensor) {
    for v in &mut x.data {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
}

/// A Gaussian policy head on top of a gated attention backbone: per-frame
/// linear embedding, one block, then a linear head read from the last
/// frame of each window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionPolicyNet {
    pub frame_dim: usize,
    pub seq_len: usize,
    pub action_dim: usize,
    pub block: GatedAttentionBlock,
    embed_w: usize,
    embed_b: usize,
    head_w: usize,
    head_b: usize,
    log_std: usize,
}

impl AttentionPolicyNet {
    pub fn create<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        frame_dim: usize,
        seq_len: usize,
        action_dim: usize,
        cfg: GatedAttentionConfig,
        rng: &mut R,
    ) -> Result<Self, NetError> {
        let d = cfg.embed_dim;
        let embed_w = store.add(&format!("{prefix}.embed_w"), xavier_init(rng, frame_dim, d));
        let embed_b = store.add(&format!("{prefix}.embed_b"), Tensor::zeros(1, d));
        let block = GatedAttentionBlock::create(store, &format!("{prefix}.block"), cfg, rng)?;
        let head_w = store.add(&format!("{prefix}.head_w"), xavier_init(rng, d, action_dim));
        let head_b = store.add(&format!("{prefix}.head_b"), Tensor::zeros(1, action_dim));
        let log_std = store.add(
            &format!("{prefix}.log_std"),
            Tensor::from_vec(1, action_dim, vec![LOG_STD_INIT; action_dim]),
        );
        Ok(Self { frame_dim, seq_len, action_dim, block, embed_w, embed_b, head_w, head_b, log_std })
    }

    /// Recorded forward over a batch of observation windows.
    /// `frames` is `[batch*seq_len, frame_dim]`, window-major.
    /// Returns the `[batch, action_dim]` mean.
    pub fn mean_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        frames: NodeId,
        batch: usize,
    ) -> Result<NodeId, NetError> {
        let ew = tape.param(self.embed_w, store.get(self.embed_w));
        let eb = tape.param(self.embed_b, store.get(self.embed_b));
        let emb = tape.matmul(frames, ew, false);
        let emb = tape.add_row_vec(emb, eb);
        let enc = self.block.forward_tape(tape, store, emb, None, batch, self.seq_len)?;
        // last frame of each window feeds the head
        let mut lasts = Vec::with_capacity(batch);
        for b in 0..batch {
            lasts.push(tape.slice_rows(enc, b * self.seq_len + self.seq_len - 1, 1));
        }
        let last = tape.concat_rows(&lasts);
        let hw = tape.param(self.head_w, store.get(self.head_w));
        let hb = tape.param(self.head_b, store.get(self.head_b));
        let mean = tape.matmul(last, hw, false);
        Ok(tape.add_row_vec(mean, hb))
    }

    pub fn log_std_tape(&self, tape: &mut Tape, store: &ParamStore) -> NodeId {
        let p = tape.param(self.log_std, store.get(self.log_std));
        tape.clamp(p, LOG_STD_MIN, LOG_STD_MAX)
    }

    /// Tapeless mean for one observation window `[seq_len, frame_dim]`.
    pub fn mean(&self, store: &ParamStore, window: &Tensor) -> Result<Vec<f32>, NetError> {
        if window.shape() != (self.seq_len, self.frame_dim) {
            return Err(NetError::ShapeMismatch {
                what: "attention policy window",
                expected: (self.seq_len, self.frame_dim),
                got: window.shape(),
            });
        }
        let mut emb = matmul(window, store.get(self.embed_w), false);
        add_bias(&mut emb, store.get(self.embed_b));
        let enc = self.block.forward(store, &emb, None)?;
        let last = Tensor::from_vec(1, enc.cols, enc.row(enc.rows - 1).to_vec());
        let mut mean = matmul(&last, store.get(self.head_w), false);
        add_bias(&mut mean, store.get(self.head_b));
        Ok(mean.data)
    }

    pub fn log_std(&self, store: &ParamStore) -> Vec<f32> {
        store.get(self.log_std).data.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()
    }

    /// Zero the head so the initial mean is exactly zero.
    pub fn zero_head(&self, store: &mut ParamStore) {
        store.get_mut(self.head_w).data.fill(0.0);
        store.get_mut(self.head_b).data.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_split_must_divide() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = GatedAttentionConfig { embed_dim: 10, heads: 3, ff_hidden: 8, memory_len: 2 };
        assert!(matches!(
            GatedAttentionBlock::create(&mut store, "b", cfg, &mut rng),
            Err(NetError::HeadSplit { embed_dim: 10, heads: 3 })
        ));
    }

    #[test]
    fn attention_probs_rows_sum_to_one() {
        let spec = AttentionSpec { windows: 2, q_len: 3, kv_len: 5, offset: 2, heads: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = xavier_init(&mut rng, 6, 8);
        let k = xavier_init(&mut rng, 10, 8);
        let v = xavier_init(&mut rng, 10, 8);
        let (_, probs) = attention_kernel(&q, &k, &v, &spec);
        for r in 0..probs.rows {
            let s: f32 = probs.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "row {r} sums to {s}");
        }
    }

    #[test]
    fn tape_and_tapeless_block_agree() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = GatedAttentionConfig { embed_dim: 12, heads: 3, ff_hidden: 16, memory_len: 4 };
        let block = GatedAttentionBlock::create(&mut store, "b", cfg, &mut rng).unwrap();
        let x = xavier_init(&mut rng, 5, 12);
        let fast = block.forward(&store, &x, None).unwrap();
        let mut tape = Tape::new(store.len());
        let xn = tape.input(x);
        let y = block.forward_tape(&mut tape, &store, xn, None, 1, 5).unwrap();
        let tv = tape.value(y);
        for (a, b) in tv.data.iter().zip(&fast.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn memory_prefix_shifts_attention_context() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = GatedAttentionConfig { embed_dim: 8, heads: 2, ff_hidden: 8, memory_len: 3 };
        let block = GatedAttentionBlock::create(&mut store, "b", cfg, &mut rng).unwrap();
        let x = xavier_init(&mut rng, 4, 8);
        let mem = xavier_init(&mut rng, 3, 8);
        let with_mem = block.forward(&store, &x, Some(&mem)).unwrap();
        let without = block.forward(&store, &x, None).unwrap();
        let diff: f32 = with_mem.data.iter().zip(&without.data).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-6, "memory must influence the output");
    }
}
