//! Synthetic reference-motion generation for six behavior families, plus
//! feature extraction for clustering.

pub mod dataset;
pub mod features;
pub mod generate;
pub mod stats;

pub use dataset::{build_dataset, load_dataset, save_dataset, DatasetCounts, MotionDataset};
pub use features::{extract_features, FeatureFrame, FeatureSequence, FEATURE_DIM, KEY_FEATURE_DIM};
pub use generate::{generate_clip, sample_params, FamilyParams, MotionClip, CLIP_FPS};

use serde::{Deserialize, Serialize};
use std::fmt;

/// The six behavior families. Labels are hidden from clustering and are
/// kept only for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Jump,
    WalkSlow,
    WalkFast,
    StandUp,
    StandMid,
    StandLow,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Jump,
        Family::WalkSlow,
        Family::WalkFast,
        Family::StandUp,
        Family::StandMid,
        Family::StandLow,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::Jump => "jump",
            Family::WalkSlow => "walk-slow",
            Family::WalkFast => "walk-fast",
            Family::StandUp => "stand-up",
            Family::StandMid => "stand-mid",
            Family::StandLow => "stand-low",
        }
    }

    /// Two tags always present on clips of this family.
    pub fn core_tags(self) -> [&'static str; 2] {
        match self {
            Family::Jump => ["jumps", "jumping"],
            Family::WalkSlow => ["walks", "strolls"],
            Family::WalkFast => ["runs", "jogs"],
            Family::StandUp => ["something", "hand"],
            Family::StandMid => ["arms", "waves"],
            Family::StandLow => ["foot", "leg"],
        }
    }

    /// Additional tags sampled per clip.
    pub fn extra_tags(self) -> [&'static str; 2] {
        match self {
            Family::Jump => ["leaps", "airborne"],
            Family::WalkSlow => ["slow", "steps"],
            Family::WalkFast => ["fast", "forward"],
            Family::StandUp => ["reaches", "upper"],
            Family::StandMid => ["still", "gestures"],
            Family::StandLow => ["squats", "crouches"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The fixed 24-word tag vocabulary.
pub const TAG_VOCABULARY: [&str; 24] = [
    "jumps", "jumping", "leaps", "airborne", "walks", "strolls", "slow", "steps", "runs", "jogs",
    "fast", "forward", "something", "hand", "reaches", "upper", "arms", "waves", "still",
    "gestures", "foot", "leg", "squats", "crouches",
];

pub fn tag_index(tag: &str) -> Option<usize> {
    TAG_VOCABULARY.iter().position(|&t| t == tag)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionError {
    ParamOutOfRange { family: Family, what: &'static str, value: f64, lo: f64, hi: f64 },
    Io(String),
    Format(String),
}

impl fmt::Display for MotionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ParamOutOfRange { family, what, value, lo, hi } => write!(
                f,
                "{family}: {what} = {value} outside [{lo}, {hi}]"
            ),
            Self::Io(m) => write!(f, "io error: {m}"),
            Self::Format(m) => write!(f, "bad dataset: {m}"),
        }
    }
}

impl std::error::Error for MotionError {}
