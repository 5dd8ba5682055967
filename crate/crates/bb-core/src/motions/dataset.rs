//! Dataset assembly and persistence.
//!
//! On disk a dataset is a JSON manifest plus `clips.bin`, which stores
//! every clip as consecutive frames of 13 little-endian f32 values
//! (root x, z, pitch, then 10 joint targets).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::{generate_clip, sample_params, MotionClip};
use super::{Family, MotionError};
use crate::sim::{RobotModel, NUM_COORDS};
use crate::util::{seeded_rng, sha256_hex};

/// Clips per family. The defaults are the production counts scaled down
/// by 10 (total 721), preserving the imbalance across families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetCounts {
    pub jump: usize,
    pub stand_low: usize,
    pub walk_slow: usize,
    pub stand_mid: usize,
    pub stand_up: usize,
    pub walk_fast: usize,
}

impl Default for DatasetCounts {
    fn default() -> Self {
        Self { jump: 35, stand_low: 23, walk_slow: 336, stand_mid: 58, stand_up: 238, walk_fast: 31 }
    }
}

impl DatasetCounts {
    pub fn total(&self) -> usize {
        self.jump + self.stand_low + self.walk_slow + self.stand_mid + self.stand_up + self.walk_fast
    }

    pub fn of(&self, family: Family) -> usize {
        match family {
            Family::Jump => self.jump,
            Family::StandLow => self.stand_low,
            Family::WalkSlow => self.walk_slow,
            Family::StandMid => self.stand_mid,
            Family::StandUp => self.stand_up,
            Family::WalkFast => self.walk_fast,
        }
    }

    /// A small configuration for smoke tests.
    pub fn smoke() -> Self {
        Self { jump: 20, stand_low: 15, walk_slow: 30, stand_mid: 15, stand_up: 25, walk_fast: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionDataset {
    pub clips: Vec<MotionClip>,
    pub seed: u64,
}

impl MotionDataset {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn clip_ids_of_family(&self, family: Family) -> Vec<u32> {
        self.clips.iter().filter(|c| c.family == family).map(|c| c.id).collect()
    }

    pub fn clip(&self, id: u32) -> &MotionClip {
        &self.clips[id as usize]
    }

    /// Content hash over the binary frame data and clip metadata.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        for clip in &self.clips {
            bytes.extend_from_slice(&clip.id.to_le_bytes());
            bytes.extend_from_slice(clip.family.label().as_bytes());
            for t in &clip.tags {
                bytes.extend_from_slice(t.as_bytes());
            }
            for f in &clip.frames {
                for v in f {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        sha256_hex(&bytes)
    }
}

/// Generate the full dataset; clip ids are assigned densely in family
/// order so `clips[id]` indexing holds.
pub fn build_dataset(
    model: &RobotModel,
    counts: &DatasetCounts,
    seed: u64,
) -> Result<MotionDataset, MotionError> {
    let mut clips = Vec::with_capacity(counts.total());
    let mut id = 0u32;
    for family in Family::ALL {
        let mut rng = seeded_rng(seed, &format!("dataset-{}", family.label()));
        for _ in 0..counts.of(family) {
            let (params, duration) = sample_params(family, &mut rng);
            let clip_seed: u64 = rng.gen();
            let clip = generate_clip(model, family, params, duration, clip_seed, id)?;
            clips.push(clip);
            id += 1;
        }
    }
    Ok(MotionDataset { clips, seed })
}

use rand::Rng;

#[derive(Debug, Serialize, Deserialize)]
struct ClipMeta {
    id: u32,
    family: Family,
    tags: Vec<String>,
    frames: usize,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    version: u32,
    fps: f64,
    seed: u64,
    blob_sha256: String,
    clips: Vec<ClipMeta>,
}

pub fn save_dataset(dir: &Path, dataset: &MotionDataset) -> Result<(), MotionError> {
    fs::create_dir_all(dir).map_err(|e| MotionError::Io(e.to_string()))?;
    let mut blob: Vec<u8> = Vec::new();
    let mut metas = Vec::with_capacity(dataset.clips.len());
    for clip in &dataset.clips {
        let offset = blob.len();
        for f in &clip.frames {
            for v in f {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        metas.push(ClipMeta {
            id: clip.id,
            family: clip.family,
            tags: clip.tags.clone(),
            frames: clip.frames.len(),
            offset,
        });
    }
    let manifest = DatasetManifest {
        version: 1,
        fps: super::generate::CLIP_FPS,
        seed: dataset.seed,
        blob_sha256: sha256_hex(&blob),
        clips: metas,
    };
    fs::write(dir.join("clips.bin"), &blob).map_err(|e| MotionError::Io(e.to_string()))?;
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| MotionError::Format(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json).map_err(|e| MotionError::Io(e.to_string()))
}

pub fn load_dataset(dir: &Path) -> Result<MotionDataset, MotionError> {
    let manifest: DatasetManifest =
        serde_json::from_slice(&fs::read(dir.join("manifest.json")).map_err(|e| MotionError::Io(e.to_string()))?)
            .map_err(|e| MotionError::Format(e.to_string()))?;
    let blob = fs::read(dir.join("clips.bin")).map_err(|e| MotionError::Io(e.to_string()))?;
    if sha256_hex(&blob) != manifest.blob_sha256 {
        return Err(MotionError::Format("clip blob hash mismatch".into()));
    }
    let mut clips = Vec::with_capacity(manifest.clips.len());
    for meta in manifest.clips {
        let frame_bytes = NUM_COORDS * 4;
        let need = meta.offset + meta.frames * frame_bytes;
        if blob.len() < need {
            return Err(MotionError::Format(format!("clip {} truncated", meta.id)));
        }
        let mut frames = Vec::with_capacity(meta.frames);
        for k in 0..meta.frames {
            let mut frame = [0.0f32; NUM_COORDS];
            let base = meta.offset + k * frame_bytes;
            for (i, v) in frame.iter_mut().enumerate() {
                let b = base + i * 4;
                *v = f32::from_le_bytes(blob[b..b + 4].try_into().unwrap());
            }
            frames.push(frame);
        }
        clips.push(MotionClip { id: meta.id, family: meta.family, tags: meta.tags, frames });
    }
    Ok(MotionDataset { clips, seed: manifest.seed })
}
