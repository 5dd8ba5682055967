//! The motion-tracking RL environment: reference-indexed episodes over a
//! clip set with PD-target actions, optional residual-action patching,
//! domain randomization, curriculum deviation thresholds, and
//! reference-state initialization.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::obs::{build_critic_obs, build_delta_frame, build_frame, ObsRing, RefFrame, Role};
use super::reward::{compute_reward, RewardInputs};
use crate::motions::MotionDataset;
use crate::rl::{RlEnv, StepOutcome};
use crate::sim::{
    check_termination, step, EffectiveParams, RandomizationDraw, RobotModel, SimState, Terrain,
    VariantSpec, NUM_COORDS, NUM_JOINTS, POLICY_DT, PUSH_DELTA_V, PUSH_INTERVAL_S,
};
use crate::util::seeded_rng;

/// Network outputs are offsets from the reference targets: scaled down so
/// exploration noise stays physically small, then clamped.
pub const ACTION_SCALE: f64 = 0.3;
pub const ACTION_OFFSET_CLAMP: f64 = 1.0;
/// Delta observation history length.
pub const DELTA_HISTORY: usize = 5;

/// A provider of residual actions (the patched-environment hook).
pub trait ResidualSource: Send + Sync {
    /// Masked, clamped residual over the PD targets given the flat delta
    /// observation (proprioception history + tracking action).
    fn residual(&self, delta_obs: &[f32]) -> [f64; NUM_JOINTS];
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub variant: VariantSpec,
    pub randomize: bool,
    pub deviation_threshold: f64,
    /// Start episodes at a random reference frame (training) instead of
    /// frame zero (evaluation/deployment).
    pub rsi: bool,
    /// Joint-space noise applied to the initial state.
    pub init_jitter: f64,
    pub role: Role,
}

impl EnvConfig {
    pub fn train(variant: VariantSpec) -> Self {
        Self {
            variant,
            randomize: true,
            deviation_threshold: 0.8,
            rsi: true,
            init_jitter: 0.0,
            role: Role::Expert,
        }
    }

    pub fn eval(variant: VariantSpec, deviation_threshold: f64) -> Self {
        Self {
            variant,
            randomize: false,
            deviation_threshold,
            rsi: false,
            init_jitter: 0.02,
            role: Role::Expert,
        }
    }
}

pub struct TrackingEnv {
    pub model: RobotModel,
    dataset: Arc<MotionDataset>,
    clip_ids: Arc<Vec<u32>>,
    pub cfg: EnvConfig,
    rng: ChaCha8Rng,
    pub state: SimState,
    pub clip_id: u32,
    pub frame: usize,
    eff: EffectiveParams,
    terrain: Terrain,
    ring: ObsRing,
    delta_ring: ObsRing,
    residual: Option<Arc<dyn ResidualSource>>,
    last_action: [f64; NUM_JOINTS],
    prev_action: [f64; NUM_JOINTS],
    prev2_action: [f64; NUM_JOINTS],
    prev_joint_vel: [f64; NUM_JOINTS],
    episode_time: f64,
    next_push: f64,
    /// Applied PD targets from the last step (for trajectory recording).
    pub last_applied: [f64; NUM_JOINTS],
    /// Reward of the last step.
    pub last_reward: f64,
    pub last_termination: Option<crate::sim::Termination>,
}

impl TrackingEnv {
    pub fn new(
        model: RobotModel,
        dataset: Arc<MotionDataset>,
        clip_ids: Arc<Vec<u32>>,
        cfg: EnvConfig,
        residual: Option<Arc<dyn ResidualSource>>,
        seed: u64,
    ) -> Self {
        assert!(!clip_ids.is_empty(), "env needs at least one clip");
        let history = cfg.role.history();
        let mut env = Self {
            eff: EffectiveParams::resolve(&model, &cfg.variant, &RandomizationDraw::none()),
            model,
            dataset,
            clip_ids,
            cfg,
            rng: seeded_rng(seed, "tracking-env"),
            state: SimState::at_pose(crate::sim::standing_q(), [0.0; NUM_COORDS]),
            clip_id: 0,
            frame: 0,
            terrain: Terrain::Flat,
            ring: ObsRing::new(history),
            delta_ring: ObsRing::new(DELTA_HISTORY),
            residual,
            last_action: [0.0; NUM_JOINTS],
            prev_action: [0.0; NUM_JOINTS],
            prev2_action: [0.0; NUM_JOINTS],
            prev_joint_vel: [0.0; NUM_JOINTS],
            episode_time: 0.0,
            next_push: PUSH_INTERVAL_S,
            last_applied: [0.0; NUM_JOINTS],
            last_reward: 0.0,
            last_termination: None,
        };
        env.reset();
        env
    }

    pub fn clip(&self) -> &crate::motions::MotionClip {
        self.dataset.clip(self.clip_id)
    }

    pub fn clip_len(&self) -> usize {
        self.clip().frames.len()
    }

    /// Reference for the frame the policy is currently steering toward.
    pub fn next_reference(&self) -> RefFrame {
        RefFrame::at(&self.model, self.clip(), self.frame + 1)
    }

    /// Restart on a specific clip (used by evaluation and collection).
    pub fn reset_to_clip(&mut self, clip_id: u32) {
        self.clip_id = clip_id;
        self.reset_episode(false);
    }

    fn reset_episode(&mut self, choose_clip: bool) {
        if choose_clip {
            let pick = self.rng.gen_range(0..self.clip_ids.len());
            self.clip_id = self.clip_ids[pick];
        }
        let clip_len = self.clip_len();
        self.frame = if self.cfg.rsi && clip_len > 4 {
            self.rng.gen_range(0..clip_len / 2)
        } else {
            0
        };
        let clip = self.dataset.clip(self.clip_id);
        let mut q = clip.frame_q(self.frame);
        let mut qd = clip.frame_qd(self.frame);
        if self.cfg.init_jitter > 0.0 {
            for j in 0..NUM_JOINTS {
                q[3 + j] += self.rng.gen_range(-self.cfg.init_jitter..self.cfg.init_jitter);
                qd[3 + j] += self.rng.gen_range(-self.cfg.init_jitter..self.cfg.init_jitter);
            }
        }
        let draw = if self.cfg.randomize {
            RandomizationDraw::sample(&mut self.rng)
        } else {
            RandomizationDraw::none()
        };
        self.terrain = if draw.rough_terrain {
            Terrain::sample_rough(&mut self.rng)
        } else {
            Terrain::Flat
        };
        self.eff = EffectiveParams::resolve(&self.model, &self.cfg.variant, &draw);
        self.state = SimState::at_pose(q, qd);
        let mut ref_targets = [0.0; NUM_JOINTS];
        ref_targets.copy_from_slice(&clip.frame_q(self.frame)[3..]);
        self.last_action = ref_targets;
        self.prev_action = ref_targets;
        self.prev2_action = ref_targets;
        self.last_applied = ref_targets;
        let mut pjv = [0.0; NUM_JOINTS];
        pjv.copy_from_slice(&qd[3..]);
        self.prev_joint_vel = pjv;
        self.episode_time = 0.0;
        self.next_push = PUSH_INTERVAL_S;
        self.last_termination = None;

        let reference = self.next_reference();
        let frame_obs = build_frame(&self.model, &self.state, &reference, self.cfg.role);
        self.ring.prime(frame_obs);
        let dframe = build_delta_frame(&self.state, &self.last_applied, &ref_targets);
        self.delta_ring.prime(dframe);
    }

    /// Convert a network output into the final PD targets, applying the
    /// residual patch when present. Returns (tracking action, applied).
    fn resolve_action(&mut self, net_out: &[f32]) -> ([f64; NUM_JOINTS], [f64; NUM_JOINTS]) {
        let reference = self.next_reference();
        let mut tracking = [0.0; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            let offset =
                (net_out[j] as f64 * ACTION_SCALE).clamp(-ACTION_OFFSET_CLAMP, ACTION_OFFSET_CLAMP);
            tracking[j] = (reference.q[3 + j] + offset)
                .clamp(self.model.q_min[j], self.model.q_max[j]);
        }
        let applied = match &self.residual {
            Some(source) => {
                let dframe = build_delta_frame(&self.state, &self.last_applied, &tracking);
                self.delta_ring.push(dframe);
                let residual = source.residual(&self.delta_ring.vector());
                let mut out = tracking;
                for j in 0..NUM_JOINTS {
                    out[j] = (out[j] + residual[j]).clamp(self.model.q_min[j], self.model.q_max[j]);
                }
                out
            }
            None => tracking,
        };
        (tracking, applied)
    }

    /// Step with explicit PD targets, bypassing the offset parameterization
    /// (used for recorded-action replay).
    pub fn step_targets(&mut self, applied: [f64; NUM_JOINTS]) -> StepOutcome {
        self.advance(applied, applied)
    }

    fn advance(&mut self, tracking: [f64; NUM_JOINTS], applied: [f64; NUM_JOINTS]) -> StepOutcome {
        let prev_qd = {
            let mut v = [0.0; NUM_JOINTS];
            v.copy_from_slice(&self.state.qd[3..]);
            v
        };
        let result = step(&self.model, &mut self.state, &applied, &self.eff, &self.terrain);
        self.episode_time += POLICY_DT;
        if self.cfg.randomize && self.episode_time >= self.next_push {
            let sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            self.state.qd[0] += sign * PUSH_DELTA_V;
            self.next_push += PUSH_INTERVAL_S;
        }
        let info = match result {
            Ok(info) => info,
            Err(_) => {
                self.last_reward = 0.0;
                self.last_termination = None;
                return StepOutcome { reward: 0.0, done: true, success: false, fault: true };
            }
        };

        self.frame += 1;
        let reference = RefFrame::at(&self.model, self.clip(), self.frame);
        let inputs = RewardInputs {
            info: &info,
            action: &tracking,
            prev_action: &self.prev_action,
            prev2_action: &self.prev2_action,
            prev_joint_vel: &prev_qd,
        };
        let (reward, _) = compute_reward(&self.model, &self.state, &reference, &inputs);
        self.last_reward = reward;
        self.prev2_action = self.prev_action;
        self.prev_action = tracking;
        self.last_action = tracking;
        self.last_applied = applied;
        self.prev_joint_vel = prev_qd;

        let at_end = self.frame + 1 >= self.clip_len();
        let termination = check_termination(
            &self.model,
            &self.state,
            &reference.keypoints,
            self.cfg.deviation_threshold,
        );
        self.last_termination = Some(termination);
        let terminated = termination != crate::sim::Termination::Continue;

        // observation for the next decision
        let next_ref = self.next_reference();
        let frame_obs = build_frame(&self.model, &self.state, &next_ref, self.cfg.role);
        self.ring.push(frame_obs);

        StepOutcome {
            reward: reward as f32,
            done: at_end || terminated,
            success: at_end && !terminated,
            fault: false,
        }
    }

    /// Observation window rows (for sequence policies).
    pub fn obs_rows(&self) -> Vec<Vec<f32>> {
        self.ring.rows()
    }
}

impl RlEnv for TrackingEnv {
    fn obs(&self) -> Vec<f32> {
        self.ring.vector()
    }

    fn critic_obs(&self) -> Vec<f32> {
        let reference = self.next_reference();
        build_critic_obs(&self.state, &reference, self.frame, self.clip_len())
    }

    fn step(&mut self, action: &[f32]) -> StepOutcome {
        let (tracking, applied) = self.resolve_action(action);
        self.advance(tracking, applied)
    }

    fn reset(&mut self) {
        self.reset_episode(true);
    }
}
