//! Kinematic statistics of a clip, reported per cluster in the analysis
//! table: displacement, vertical movement, speed, and joint variation.

use serde::{Deserialize, Serialize};

use super::generate::{MotionClip, CLIP_FPS};
use crate::sim::{joint, NUM_JOINTS};

/// Upper-body joints (shoulders, elbows).
pub const UPPER_JOINTS: [usize; 4] =
    [joint::SHOULDER_L, joint::ELBOW_L, joint::SHOULDER_R, joint::ELBOW_R];
/// Lower-body joints (hips, knees, ankles).
pub const LOWER_JOINTS: [usize; 6] = [
    joint::HIP_L,
    joint::KNEE_L,
    joint::ANKLE_L,
    joint::HIP_R,
    joint::KNEE_R,
    joint::ANKLE_R,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipStats {
    /// Total root displacement start to end (m).
    pub displacement_m: f64,
    /// Mean |root dz| per frame (mm).
    pub z_move_mm: f64,
    /// Mean root speed (m/s).
    pub speed_mps: f64,
    /// Mean |dq| per frame over all joints (rad/frame).
    pub joint_var: f64,
    pub joint_var_upper: f64,
    pub joint_var_lower: f64,
}

pub fn clip_stats(clip: &MotionClip) -> ClipStats {
    let n = clip.frames.len();
    if n < 2 {
        return ClipStats {
            displacement_m: 0.0,
            z_move_mm: 0.0,
            speed_mps: 0.0,
            joint_var: 0.0,
            joint_var_upper: 0.0,
            joint_var_lower: 0.0,
        };
    }
    let first = &clip.frames[0];
    let last = &clip.frames[n - 1];
    let displacement_m =
        (((last[0] - first[0]).powi(2) + (last[1] - first[1]).powi(2)) as f64).sqrt();

    let mut z_move = 0.0f64;
    let mut speed = 0.0f64;
    let mut dq = [0.0f64; NUM_JOINTS];
    for w in clip.frames.windows(2) {
        let dx = (w[1][0] - w[0][0]) as f64;
        let dz = (w[1][1] - w[0][1]) as f64;
        z_move += dz.abs();
        speed += (dx * dx + dz * dz).sqrt();
        for j in 0..NUM_JOINTS {
            dq[j] += ((w[1][3 + j] - w[0][3 + j]) as f64).abs();
        }
    }
    let steps = (n - 1) as f64;
    let mean = |idx: &[usize]| -> f64 {
        idx.iter().map(|&j| dq[j]).sum::<f64>() / (idx.len() as f64 * steps)
    };
    ClipStats {
        displacement_m,
        z_move_mm: z_move / steps * 1000.0,
        speed_mps: speed / steps * CLIP_FPS,
        joint_var: dq.iter().sum::<f64>() / (NUM_JOINTS as f64 * steps),
        joint_var_upper: mean(&UPPER_JOINTS),
        joint_var_lower: mean(&LOWER_JOINTS),
    }
}

/// Mean stats over a set of clips.
pub fn mean_stats<'a>(clips: impl Iterator<Item = &'a MotionClip>) -> ClipStats {
    let mut acc = ClipStats {
        displacement_m: 0.0,
        z_move_mm: 0.0,
        speed_mps: 0.0,
        joint_var: 0.0,
        joint_var_upper: 0.0,
        joint_var_lower: 0.0,
    };
    let mut count = 0usize;
    for c in clips {
        let s = clip_stats(c);
        acc.displacement_m += s.displacement_m;
        acc.z_move_mm += s.z_move_mm;
        acc.speed_mps += s.speed_mps;
        acc.joint_var += s.joint_var;
        acc.joint_var_upper += s.joint_var_upper;
        acc.joint_var_lower += s.joint_var_lower;
        count += 1;
    }
    if count > 0 {
        let k = count as f64;
        acc.displacement_m /= k;
        acc.z_move_mm /= k;
        acc.speed_mps /= k;
        acc.joint_var /= k;
        acc.joint_var_upper /= k;
        acc.joint_var_lower /= k;
    }
    acc
}
