//! Observation construction for the tracking policies.
//!
//! Experts see a 5-step history of a 49-channel frame that includes root
//! linear velocity and reference keypoints in world-axis offsets from the
//! pelvis. The generalist sees a 10-step history of a 34-channel frame
//! with no linear velocity, no keypoints, and reference root pose
//! expressed in the pelvis-local frame. The critic sees full simulator
//! state and is never deployed.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::motions::MotionClip;
use crate::sim::{fk_keypoints, RobotModel, SimState, NUM_JOINTS, NUM_KEYPOINTS};

pub const EXPERT_FRAME_DIM: usize = 49;
pub const EXPERT_HISTORY: usize = 5;
pub const EXPERT_OBS_DIM: usize = EXPERT_FRAME_DIM * EXPERT_HISTORY; // 245

pub const GENERALIST_FRAME_DIM: usize = 34;
pub const GENERALIST_HISTORY: usize = 10;
pub const GENERALIST_OBS_DIM: usize = GENERALIST_FRAME_DIM * GENERALIST_HISTORY; // 340

pub const CRITIC_OBS_DIM: usize = 43;

pub const DELTA_FRAME_DIM: usize = 42;
pub const DELTA_HISTORY_LEN: usize = 5;
pub const DELTA_OBS_DIM: usize = DELTA_FRAME_DIM * DELTA_HISTORY_LEN; // 210

// hand-set observation scales per group
const SCALE_LIN_VEL: f32 = 0.5;
const SCALE_ANG_VEL: f32 = 0.25;
const SCALE_JOINT_VEL: f32 = 0.05;
const SCALE_FORCE: f32 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Expert,
    Generalist,
}

impl Role {
    pub fn frame_dim(self) -> usize {
        match self {
            Role::Expert => EXPERT_FRAME_DIM,
            Role::Generalist => GENERALIST_FRAME_DIM,
        }
    }

    pub fn history(self) -> usize {
        match self {
            Role::Expert => EXPERT_HISTORY,
            Role::Generalist => GENERALIST_HISTORY,
        }
    }

    pub fn obs_dim(self) -> usize {
        self.frame_dim() * self.history()
    }
}

/// Reference targets for one control step.
pub struct RefFrame {
    pub q: [f64; crate::sim::NUM_COORDS],
    pub qd: [f64; crate::sim::NUM_COORDS],
    pub keypoints: [[f64; 2]; NUM_KEYPOINTS],
}

impl RefFrame {
    pub fn at(model: &RobotModel, clip: &MotionClip, frame: usize) -> Self {
        let idx = frame.min(clip.frames.len() - 1);
        let q = clip.frame_q(idx);
        Self { q, qd: clip.frame_qd(idx), keypoints: fk_keypoints(model, &q) }
    }
}

/// One observation frame for a role, from the current state and the
/// reference for the upcoming step.
pub fn build_frame(
    model: &RobotModel,
    state: &SimState,
    reference: &RefFrame,
    role: Role,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(role.frame_dim());
    let pelvis = [state.q[0], state.q[1]];
    let pitch = state.q[2];
    match role {
        Role::Expert => {
            out.push((state.qd[0] * SCALE_LIN_VEL as f64) as f32);
            out.push((state.qd[1] * SCALE_LIN_VEL as f64) as f32);
            out.push((state.qd[2] * SCALE_ANG_VEL as f64) as f32);
            out.push(pitch as f32);
            for j in 0..NUM_JOINTS {
                out.push(state.q[3 + j] as f32);
            }
            for j in 0..NUM_JOINTS {
                out.push((state.qd[3 + j] * SCALE_JOINT_VEL as f64) as f32);
            }
            for j in 0..NUM_JOINTS {
                out.push(reference.q[3 + j] as f32);
            }
            // reference keypoints as world-axis offsets from the pelvis
            for kp in &reference.keypoints {
                out.push((kp[0] - pelvis[0]) as f32);
                out.push((kp[1] - pelvis[1]) as f32);
            }
            out.push((reference.q[0] - pelvis[0]) as f32);
            out.push((reference.q[1] - pelvis[1]) as f32);
            out.push(reference.q[2] as f32);
        }
        Role::Generalist => {
            out.push((state.qd[2] * SCALE_ANG_VEL as f64) as f32);
            for j in 0..NUM_JOINTS {
                out.push(state.q[3 + j] as f32);
            }
            for j in 0..NUM_JOINTS {
                out.push((state.qd[3 + j] * SCALE_JOINT_VEL as f64) as f32);
            }
            for j in 0..NUM_JOINTS {
                out.push(reference.q[3 + j] as f32);
            }
            // reference root pose in the pelvis-local frame
            let dx = reference.q[0] - pelvis[0];
            let dz = reference.q[1] - pelvis[1];
            let (s, c) = (-pitch).sin_cos();
            out.push((c * dx - s * dz) as f32);
            out.push((s * dx + c * dz) as f32);
            out.push((reference.q[2] - pitch) as f32);
        }
    }
    debug_assert_eq!(out.len(), role.frame_dim());
    out
}

/// Observation frame for the residual-action model: proprioception (no
/// global position or keypoints) plus the tracking policy's action.
pub fn build_delta_frame(
    state: &SimState,
    last_applied_action: &[f64; NUM_JOINTS],
    tracking_action: &[f64; NUM_JOINTS],
) -> Vec<f32> {
    let mut out = Vec::with_capacity(DELTA_FRAME_DIM);
    out.push((state.qd[2] * SCALE_ANG_VEL as f64) as f32);
    out.push(state.q[2] as f32);
    for j in 0..NUM_JOINTS {
        out.push(state.q[3 + j] as f32);
    }
    for j in 0..NUM_JOINTS {
        out.push((state.qd[3 + j] * SCALE_JOINT_VEL as f64) as f32);
    }
    for a in last_applied_action {
        out.push(*a as f32);
    }
    for a in tracking_action {
        out.push(*a as f32);
    }
    debug_assert_eq!(out.len(), DELTA_FRAME_DIM);
    out
}

/// Asymmetric critic input: full simulator state plus reference targets
/// and phase.
pub fn build_critic_obs(
    state: &SimState,
    reference: &RefFrame,
    frame: usize,
    clip_len: usize,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(CRITIC_OBS_DIM);
    out.push((state.q[0] - reference.q[0]) as f32);
    out.push(state.q[1] as f32);
    out.push(state.q[2] as f32);
    for j in 0..NUM_JOINTS {
        out.push(state.q[3 + j] as f32);
    }
    out.push((state.qd[0] * SCALE_LIN_VEL as f64) as f32);
    out.push((state.qd[1] * SCALE_LIN_VEL as f64) as f32);
    out.push((state.qd[2] * SCALE_ANG_VEL as f64) as f32);
    for j in 0..NUM_JOINTS {
        out.push((state.qd[3 + j] * SCALE_JOINT_VEL as f64) as f32);
    }
    for side in 0..2 {
        out.push((state.foot_force[side][0] * SCALE_FORCE as f64) as f32);
        out.push((state.foot_force[side][1] * SCALE_FORCE as f64) as f32);
    }
    for j in 0..NUM_JOINTS {
        out.push(reference.q[3 + j] as f32);
    }
    out.push((reference.q[1] - state.q[1]) as f32);
    out.push((reference.q[2] - state.q[2]) as f32);
    out.push(frame as f32 / clip_len.max(1) as f32);
    debug_assert_eq!(out.len(), CRITIC_OBS_DIM);
    out
}

/// Fixed-length history of observation frames, primed by repeating the
/// first frame.
#[derive(Debug, Clone)]
pub struct ObsRing {
    frames: VecDeque<Vec<f32>>,
    history: usize,
}

impl ObsRing {
    pub fn new(history: usize) -> Self {
        Self { frames: VecDeque::with_capacity(history), history }
    }

    pub fn prime(&mut self, frame: Vec<f32>) {
        self.frames.clear();
        for _ in 0..self.history {
            self.frames.push_back(frame.clone());
        }
    }

    pub fn push(&mut self, frame: Vec<f32>) {
        if self.frames.len() == self.history {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    /// Concatenated oldest-to-newest.
    pub fn vector(&self) -> Vec<f32> {
        assert_eq!(self.frames.len(), self.history, "ring must be primed");
        let mut out = Vec::with_capacity(self.history * self.frames[0].len());
        for f in &self.frames {
            out.extend_from_slice(f);
        }
        out
    }

    /// The frames as rows (for sequence models).
    pub fn rows(&self) -> Vec<Vec<f32>> {
        self.frames.iter().cloned().collect()
    }
}
