//! Dual-encoder autoencoder: a temporal motion encoder (per-frame MLP
//! into one gated attention block, mean-pooled) and a tag-bag encoder,
//! aligned in a shared latent space with a phase-conditioned decoder
//! reconstructing key motion features.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::losses::{loss_cluster, LossBreakdown};
use super::ClusterError;
use crate::motions::{
    extract_features, FeatureSequence, MotionDataset, FEATURE_DIM, KEY_FEATURE_DIM,
    TAG_VOCABULARY,
};
use crate::motions::tag_index;
use crate::net::store::xavier_init;
use crate::net::{
    AdamConfig, GatedAttentionBlock, GatedAttentionConfig, HeadKind, Mlp, NetConfig, ParamStore,
    Tape, Tensor,
};
use crate::sim::RobotModel;
use crate::util::seeded_rng;

/// Clips are uniformly resampled to this many frames before encoding.
pub const AE_WINDOW: usize = 128;
/// Internal embedding width of the temporal encoder.
const ENC_DIM: usize = 64;

/// Per-dimension input scaling for the 22 feature channels: positions are
/// compressed so long walks stay in range, velocities halved, contacts
/// untouched.
fn feature_scale() -> [f32; FEATURE_DIM] {
    let mut s = [1.0f32; FEATURE_DIM];
    for i in 0..6 {
        s[2 * i] = 0.25; // keypoint x
        s[2 * i + 1] = 1.0; // keypoint z
    }
    s[12] = 0.25; // root x
    s[13] = 1.0;
    s[14] = 0.5; // root velocity
    s[15] = 0.5;
    s[18] = 0.5; // foot velocities
    s[19] = 0.5;
    s[20] = 0.5;
    s[21] = 0.5;
    s
}

/// The same scaling restricted to the 20 reconstruction channels.
fn key_feature_scale() -> [f32; KEY_FEATURE_DIM] {
    let f = feature_scale();
    let mut s = [1.0f32; KEY_FEATURE_DIM];
    s[..14].copy_from_slice(&f[..14]);
    s[14] = 1.0; // contacts
    s[15] = 1.0;
    s[16..20].copy_from_slice(&f[18..22]);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeConfig {
    pub latent_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub epochs: usize,
    pub temperature: f32,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self { latent_dim: 32, batch_size: 64, learning_rate: 1e-3, epochs: 50, temperature: 0.07 }
    }
}

/// Encoders, decoder, and their parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeModel {
    pub cfg: AeConfig,
    pub store: ParamStore,
    frame_mlp: Mlp,
    block: GatedAttentionBlock,
    pool_head: Mlp,
    tag_mlp: Mlp,
    tag_embed: usize,
    decoder: Mlp,
}

/// Preprocessed clip: scaled resampled features, reconstruction targets,
/// and tag indices.
pub struct EncodedClip {
    pub inputs: Vec<f32>,  // AE_WINDOW x FEATURE_DIM
    pub targets: Vec<f32>, // AE_WINDOW x KEY_FEATURE_DIM
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f32,
    pub breakdown: (f32, f32, f32, f32),
}

impl AeModel {
    pub fn create(cfg: AeConfig, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, "ae-init");
        let mut store = ParamStore::new();
        let frame_mlp = Mlp::create(
            &mut store,
            "enc.frame",
            NetConfig::new(FEATURE_DIM, &[ENC_DIM], ENC_DIM, HeadKind::Deterministic),
            &mut rng,
        );
        let block = GatedAttentionBlock::create(
            &mut store,
            "enc.block",
            GatedAttentionConfig { embed_dim: ENC_DIM, heads: 4, ff_hidden: 64, memory_len: 0 },
            &mut rng,
        )
        .expect("encoder head split");
        let pool_head = Mlp::create(
            &mut store,
            "enc.head",
            NetConfig::new(ENC_DIM, &[], cfg.latent_dim, HeadKind::Deterministic),
            &mut rng,
        );
        let tag_embed = store.add(
            "tag.embed",
            xavier_init(&mut rng, TAG_VOCABULARY.len(), cfg.latent_dim),
        );
        let tag_mlp = Mlp::create(
            &mut store,
            "tag.mlp",
            NetConfig::new(cfg.latent_dim, &[ENC_DIM], cfg.latent_dim, HeadKind::Deterministic),
            &mut rng,
        );
        let decoder = Mlp::create(
            &mut store,
            "dec",
            NetConfig::new(cfg.latent_dim + 2, &[128, 128], KEY_FEATURE_DIM, HeadKind::Deterministic),
            &mut rng,
        );
        Self { cfg, store, frame_mlp, block, pool_head, tag_mlp, tag_embed, decoder }
    }

    /// Resample a feature sequence to the fixed window and apply scaling.
    pub fn preprocess(features: &FeatureSequence, tags: &[String]) -> EncodedClip {
        let n = features.frames.len();
        let scale = feature_scale();
        let kscale = key_feature_scale();
        let mut inputs = Vec::with_capacity(AE_WINDOW * FEATURE_DIM);
        let mut targets = Vec::with_capacity(AE_WINDOW * KEY_FEATURE_DIM);
        for k in 0..AE_WINDOW {
            let idx = if n == 1 {
                0
            } else {
                ((k as f64) * (n - 1) as f64 / (AE_WINDOW - 1) as f64).round() as usize
            };
            let f = &features.frames[idx];
            for (v, s) in f.flat().iter().zip(&scale) {
                inputs.push(v * s);
            }
            for (v, s) in f.key_features().iter().zip(&kscale) {
                targets.push(v * s);
            }
        }
        let tags = tags.iter().filter_map(|t| tag_index(t)).collect();
        EncodedClip { inputs, targets, tags }
    }

    /// Phase conditioning for the decoder: (cos, sin) over the window.
    fn phase_rows() -> Vec<f32> {
        let mut rows = Vec::with_capacity(AE_WINDOW * 2);
        for k in 0..AE_WINDOW {
            let u = k as f32 / (AE_WINDOW - 1) as f32;
            rows.push((std::f32::consts::PI * u).cos());
            rows.push((std::f32::consts::PI * u).sin());
        }
        rows
    }

    /// Motion latents for a batch, on the tape.
    fn encode_motion_tape(
        &self,
        tape: &mut Tape,
        batch: &[&EncodedClip],
    ) -> crate::net::NodeId {
        let b = batch.len();
        let mut data = Vec::with_capacity(b * AE_WINDOW * FEATURE_DIM);
        for c in batch {
            data.extend_from_slice(&c.inputs);
        }
        let x = tape.input(Tensor::from_vec(b * AE_WINDOW, FEATURE_DIM, data));
        let h = self.frame_mlp.forward_tape(tape, &self.store, x).expect("frame mlp");
        let h = tape.elu(h);
        let enc = self
            .block
            .forward_tape(tape, &self.store, h, None, b, AE_WINDOW)
            .expect("encoder block");
        let pooled = tape.window_mean_rows(enc, b);
        self.pool_head.forward_tape(tape, &self.store, pooled).expect("pool head")
    }

    /// Tag latents for a batch, on the tape.
    fn encode_tags_tape(&self, tape: &mut Tape, batch: &[&EncodedClip]) -> crate::net::NodeId {
        let table = tape.param(self.tag_embed, self.store.get(self.tag_embed));
        let bag = tape.embed_sum(table, batch.iter().map(|c| c.tags.clone()).collect());
        self.tag_mlp.forward_tape(tape, &self.store, bag).expect("tag mlp")
    }

    fn decode_tape(
        &self,
        tape: &mut Tape,
        z: crate::net::NodeId,
        batch: usize,
    ) -> crate::net::NodeId {
        let rep = tape.repeat_rows(z, AE_WINDOW);
        let mut phase = Vec::with_capacity(batch * AE_WINDOW * 2);
        let one = Self::phase_rows();
        for _ in 0..batch {
            phase.extend_from_slice(&one);
        }
        let ph = tape.input(Tensor::from_vec(batch * AE_WINDOW, 2, phase));
        let inp = tape.concat_cols(rep, ph);
        self.decoder.forward_tape(tape, &self.store, inp).expect("decoder")
    }

    /// One full forward on a batch, returning the loss node and breakdown.
    pub fn loss_tape(
        &self,
        tape: &mut Tape,
        batch: &[&EncodedClip],
    ) -> (crate::net::NodeId, LossBreakdown) {
        let b = batch.len();
        let zm = self.encode_motion_tape(tape, batch);
        let zl = self.encode_tags_tape(tape, batch);
        let rm = self.decode_tape(tape, zm, b);
        let rl = self.decode_tape(tape, zl, b);
        let mut tgt = Vec::with_capacity(b * AE_WINDOW * KEY_FEATURE_DIM);
        for c in batch {
            tgt.extend_from_slice(&c.targets);
        }
        let target = tape.input(Tensor::from_vec(b * AE_WINDOW, KEY_FEATURE_DIM, tgt));
        loss_cluster(tape, zl, zm, rl, rm, target, self.cfg.temperature)
    }

    /// Motion latents without recording (inference).
    pub fn encode_motion(&self, clips: &[&EncodedClip]) -> Vec<Vec<f32>> {
        let mut tape = Tape::new(self.store.len());
        let z = self.encode_motion_tape(&mut tape, clips);
        let zv = tape.value(z);
        (0..zv.rows).map(|r| zv.row(r).to_vec()).collect()
    }

    /// Tag latents without recording.
    pub fn encode_tags(&self, clips: &[&EncodedClip]) -> Vec<Vec<f32>> {
        let mut tape = Tape::new(self.store.len());
        let z = self.encode_tags_tape(&mut tape, clips);
        let zv = tape.value(z);
        (0..zv.rows).map(|r| zv.row(r).to_vec()).collect()
    }
}

/// Preprocess every clip of a dataset (parallel, deterministic order).
pub fn preprocess_dataset(model: &RobotModel, dataset: &MotionDataset) -> Vec<EncodedClip> {
    use rayon::prelude::*;
    dataset
        .clips
        .par_iter()
        .map(|clip| {
            let features = extract_features(model, clip);
            AeModel::preprocess(&features, &clip.tags)
        })
        .collect()
}

/// Train the autoencoder. Returns the model and per-epoch logs; on
/// divergence, the last finite-loss epoch's parameters are returned in
/// the error.
pub fn train_ae(
    encoded: &[EncodedClip],
    cfg: AeConfig,
    seed: u64,
) -> Result<(AeModel, Vec<EpochLog>), ClusterError> {
    if encoded.len() < 2 {
        return Err(ClusterError::DatasetTooSmall(encoded.len()));
    }
    let mut model = AeModel::create(cfg, seed);
    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let mut rng = seeded_rng(seed, "ae-train");
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut last_good = model.store.clone();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0f64;
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // InfoNCE needs at least one negative
            }
            let batch: Vec<&EncodedClip> = chunk.iter().map(|&i| &encoded[i]).collect();
            let mut tape = Tape::new(model.store.len());
            let (loss, bd) = model.loss_tape(&mut tape, &batch);
            let lv = tape.value(loss).data[0];
            if !lv.is_finite() {
                return Err(ClusterError::Diverged {
                    epoch,
                    last_good: Box::new(AeModel { store: last_good, ..model }),
                });
            }
            let grads = tape.backward(loss).map_err(ClusterError::Net)?;
            model.store.adam_step(&grads, &adam).map_err(ClusterError::Net)?;
            sum += lv as f64;
            sums[0] += bd.info_nce as f64;
            sums[1] += bd.l2 as f64;
            sums[2] += bd.huber_text as f64;
            sums[3] += bd.huber_motion as f64;
            batches += 1;
        }
        let k = batches.max(1) as f64;
        logs.push(EpochLog {
            epoch,
            loss: (sum / k) as f32,
            breakdown: (
                (sums[0] / k) as f32,
                (sums[1] / k) as f32,
                (sums[2] / k) as f32,
                (sums[3] / k) as f32,
            ),
        });
        last_good = model.store.clone();
    }
    Ok((model, logs))
}

/// Mean cosine similarity of matched pairs minus the mean over mismatched
/// pairs; used to verify that training aligned the two latent spaces.
pub fn alignment_separation(model: &AeModel, clips: &[&EncodedClip]) -> (f64, f64) {
    let zm = model.encode_motion(clips);
    let zl = model.encode_tags(clips);
    let cos = |a: &[f32], b: &[f32]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64) * (y as f64)).sum();
        let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb).max(1e-12)
    };
    let n = clips.len();
    let mut paired = 0.0;
    let mut unpaired = 0.0;
    let mut unpaired_count = 0usize;
    for i in 0..n {
        paired += cos(&zl[i], &zm[i]);
        for j in 0..n {
            if i != j {
                unpaired += cos(&zl[i], &zm[j]);
                unpaired_count += 1;
            }
        }
    }
    (paired / n as f64, unpaired / unpaired_count.max(1) as f64)
}

/// Deterministic random split into train/holdout index sets.
pub fn split_holdout(n: usize, holdout_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed, "holdout-split");
    idx.shuffle(&mut rng);
    let cut = ((n as f64) * holdout_frac).round() as usize;
    let holdout = idx[..cut].to_vec();
    let train = idx[cut..].to_vec();
    (train, holdout)
}

