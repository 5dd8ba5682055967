//! Clustering features: keypoints, root translation and velocity, binary
//! foot contacts, and foot velocities per frame.

use serde::{Deserialize, Serialize};

use super::generate::{MotionClip, CLIP_FPS};
use crate::sim::{fk_keypoints, RobotModel, NUM_KEYPOINTS};

/// Flat per-frame feature width: 12 keypoints + 2 root + 2 root velocity
/// + 2 contacts + 4 foot velocities.
pub const FEATURE_DIM: usize = 22;
/// Reconstruction target width: keypoints + root + contacts + foot
/// velocities (root velocity excluded).
pub const KEY_FEATURE_DIM: usize = 20;

/// Foot counts as in contact below this height (m)...
const CONTACT_HEIGHT: f32 = 0.02;
/// ...and below this speed (m/s).
const CONTACT_SPEED: f32 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    /// 6 keypoints x 2D, world frame.
    pub keypoints: [f32; NUM_KEYPOINTS * 2],
    /// Root translation (x, z).
    pub root: [f32; 2],
    /// Root velocity by backward finite difference of the stored values.
    pub root_vel: [f32; 2],
    /// Binary foot contacts (left, right).
    pub contacts: [f32; 2],
    /// Foot velocities (left xy, right xy).
    pub foot_vel: [f32; 4],
}

impl FeatureFrame {
    pub fn flat(&self) -> [f32; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[..12].copy_from_slice(&self.keypoints);
        out[12..14].copy_from_slice(&self.root);
        out[14..16].copy_from_slice(&self.root_vel);
        out[16..18].copy_from_slice(&self.contacts);
        out[18..22].copy_from_slice(&self.foot_vel);
        out
    }

    /// The reconstruction target subset.
    pub fn key_features(&self) -> [f32; KEY_FEATURE_DIM] {
        let mut out = [0.0; KEY_FEATURE_DIM];
        out[..12].copy_from_slice(&self.keypoints);
        out[12..14].copy_from_slice(&self.root);
        out[14..16].copy_from_slice(&self.contacts);
        out[16..20].copy_from_slice(&self.foot_vel);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub frames: Vec<FeatureFrame>,
}

/// Extract features for every frame via forward kinematics. Velocities
/// are backward finite differences of the stored f32 positions (frame 0
/// copies frame 1), so stored velocity and position are exactly
/// consistent.
pub fn extract_features(model: &RobotModel, clip: &MotionClip) -> FeatureSequence {
    let n = clip.frames.len();
    let mut keypoints = Vec::with_capacity(n);
    for idx in 0..n {
        let kp = fk_keypoints(model, &clip.frame_q(idx));
        let mut flat = [0.0f32; NUM_KEYPOINTS * 2];
        for (i, p) in kp.iter().enumerate() {
            flat[2 * i] = p[0] as f32;
            flat[2 * i + 1] = p[1] as f32;
        }
        keypoints.push(flat);
    }

    let fps = CLIP_FPS as f32;
    let mut frames = Vec::with_capacity(n);
    for idx in 0..n {
        let prev = if idx == 0 { 0 } else { idx - 1 };
        let cur = if idx == 0 { 1.min(n - 1) } else { idx };
        let kp = &keypoints[idx];
        let root = [clip.frames[idx][0], clip.frames[idx][1]];
        let root_prev = [clip.frames[prev][0], clip.frames[prev][1]];
        let root_cur = [clip.frames[cur][0], clip.frames[cur][1]];
        let root_vel = [(root_cur[0] - root_prev[0]) * fps, (root_cur[1] - root_prev[1]) * fps];
        let mut foot_vel = [0.0f32; 4];
        for side in 0..2 {
            let off = 8 + 2 * side; // sole keypoints start at flat index 8
            foot_vel[2 * side] = (keypoints[cur][off] - keypoints[prev][off]) * fps;
            foot_vel[2 * side + 1] = (keypoints[cur][off + 1] - keypoints[prev][off + 1]) * fps;
        }
        let mut contacts = [0.0f32; 2];
        for side in 0..2 {
            let height = kp[8 + 2 * side + 1];
            let speed =
                (foot_vel[2 * side].powi(2) + foot_vel[2 * side + 1].powi(2)).sqrt();
            if height < CONTACT_HEIGHT && speed < CONTACT_SPEED {
                contacts[side] = 1.0;
            }
        }
        frames.push(FeatureFrame { keypoints: *kp, root, root_vel, contacts, foot_vel });
    }
    FeatureSequence { frames }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motions::generate::{generate_clip, FamilyParams};
    use crate::motions::Family;

    #[test]
    fn feature_frame_flat_dim_is_22() {
        assert_eq!(FEATURE_DIM, 12 + 2 + 2 + 2 + 4);
        assert_eq!(KEY_FEATURE_DIM, 12 + 2 + 2 + 4);
    }

    #[test]
    fn standing_clip_has_both_feet_in_contact() {
        let model = RobotModel::standard();
        let p = FamilyParams::Stand { upper_amp: 0.8, lower_amp: 0.01 };
        let clip = generate_clip(&model, Family::StandUp, p, 5.0, 11, 0).unwrap();
        let features = extract_features(&model, &clip);
        for (i, f) in features.frames.iter().enumerate() {
            assert_eq!(f.contacts, [1.0, 1.0], "frame {i} contacts {:?}", f.contacts);
        }
    }

    #[test]
    fn walking_speed_matches_commanded() {
        let model = RobotModel::standard();
        for &speed in &[0.25f64, 0.45, 0.8, 1.1] {
            let family = if speed < 0.6 { Family::WalkSlow } else { Family::WalkFast };
            let clip =
                generate_clip(&model, family, FamilyParams::Walk { speed }, 6.0, 3, 0).unwrap();
            let features = extract_features(&model, &clip);
            let mean: f64 = features
                .frames
                .iter()
                .map(|f| ((f.root_vel[0].powi(2) + f.root_vel[1].powi(2)) as f64).sqrt())
                .sum::<f64>()
                / features.frames.len() as f64;
            let rel = (mean - speed).abs() / speed;
            assert!(rel < 0.15, "speed {speed}: measured {mean:.3} ({rel:.2} rel)");
        }
    }

    #[test]
    fn root_velocity_consistent_with_stored_positions() {
        let model = RobotModel::standard();
        let clip = generate_clip(
            &model,
            Family::WalkSlow,
            FamilyParams::Walk { speed: 0.4 },
            4.0,
            5,
            0,
        )
        .unwrap();
        let f = extract_features(&model, &clip);
        let fps = CLIP_FPS as f32;
        for i in 1..f.frames.len() {
            let expect = [
                (f.frames[i].root[0] - f.frames[i - 1].root[0]) * fps,
                (f.frames[i].root[1] - f.frames[i - 1].root[1]) * fps,
            ];
            assert_eq!(f.frames[i].root_vel, expect);
        }
        assert_eq!(f.frames[0].root_vel, f.frames[1].root_vel);
    }
}
