//! Tracking reward: limit penalties, regularization, and exponential task
//! terms over keypoint, root, and joint errors.

use serde::{Deserialize, Serialize};

use super::obs::RefFrame;
use crate::sim::{fk, RobotModel, SimState, StepInfo, NUM_JOINTS, POLICY_DT};

pub const W_LIMIT: f64 = -10.0;
pub const W_DOF_ACC: f64 = -3e-8;
pub const W_ACTION_RATE: f64 = -2.0;
pub const W_ACTION_SMOOTH: f64 = -2.0;
pub const W_TORQUE: f64 = -1e-4;
pub const W_STUMBLE: f64 = -0.00125;
pub const W_FEET_ORIENT: f64 = -2.0;
pub const W_BODY_POS: f64 = 1.0;
pub const W_TASK: f64 = 0.5;
pub const EXP_SCALE: f64 = -4.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub torque_limit: f64,
    pub dof_pos_limit: f64,
    pub dof_vel_limit: f64,
    pub dof_acc: f64,
    pub action_rate: f64,
    pub action_smooth: f64,
    pub torque: f64,
    pub stumble: f64,
    pub feet_orientation: f64,
    pub body_position: f64,
    pub root_rotation: f64,
    pub root_ang_vel: f64,
    pub root_velocity: f64,
    pub dof_position: f64,
    pub dof_velocity: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.torque_limit
            + self.dof_pos_limit
            + self.dof_vel_limit
            + self.dof_acc
            + self.action_rate
            + self.action_smooth
            + self.torque
            + self.stumble
            + self.feet_orientation
            + self.body_position
            + self.root_rotation
            + self.root_ang_vel
            + self.root_velocity
            + self.dof_position
            + self.dof_velocity
    }

    pub fn task_subtotal(&self) -> f64 {
        self.body_position
            + self.root_rotation
            + self.root_ang_vel
            + self.root_velocity
            + self.dof_position
            + self.dof_velocity
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Everything the reward needs beyond the simulator state.
pub struct RewardInputs<'a> {
    pub info: &'a StepInfo,
    /// Final PD targets issued this step.
    pub action: &'a [f64; NUM_JOINTS],
    pub prev_action: &'a [f64; NUM_JOINTS],
    pub prev2_action: &'a [f64; NUM_JOINTS],
    /// Joint velocities at the previous policy step (for acceleration).
    pub prev_joint_vel: &'a [f64; NUM_JOINTS],
}

pub fn compute_reward(
    model: &RobotModel,
    state: &SimState,
    reference: &RefFrame,
    inputs: &RewardInputs,
) -> (f64, RewardBreakdown) {
    let mut b = RewardBreakdown::default();
    let info = inputs.info;

    // penalties: per-joint indicators
    b.torque_limit = W_LIMIT * info.torque_limit_violation.iter().filter(|&&v| v).count() as f64;
    b.dof_pos_limit = W_LIMIT * info.pos_limit_violation.iter().filter(|&&v| v).count() as f64;
    b.dof_vel_limit = W_LIMIT * info.vel_limit_violation.iter().filter(|&&v| v).count() as f64;

    // regularization
    let mut acc_sq = 0.0;
    for j in 0..NUM_JOINTS {
        let a = (state.qd[3 + j] - inputs.prev_joint_vel[j]) / POLICY_DT;
        acc_sq += a * a;
    }
    b.dof_acc = W_DOF_ACC * acc_sq;
    let mut rate_sq = 0.0;
    let mut smooth_sq = 0.0;
    for j in 0..NUM_JOINTS {
        let r = inputs.action[j] - inputs.prev_action[j];
        rate_sq += r * r;
        let s = inputs.action[j] - 2.0 * inputs.prev_action[j] + inputs.prev2_action[j];
        smooth_sq += s * s;
    }
    b.action_rate = W_ACTION_RATE * rate_sq;
    b.action_smooth = W_ACTION_SMOOTH * smooth_sq;
    b.torque = W_TORQUE * norm(&info.mean_abs_torque);
    b.stumble = W_STUMBLE * info.stumble.iter().filter(|&&s| s).count() as f64;
    let frames = fk(model, &state.q);
    b.feet_orientation =
        W_FEET_ORIENT * (frames.foot_angle[0].sin().abs() + frames.foot_angle[1].sin().abs());

    // task terms
    let kp = crate::sim::keypoints(&frames);
    let mean_kp_err = kp
        .iter()
        .zip(&reference.keypoints)
        .map(|(a, r)| ((a[0] - r[0]).powi(2) + (a[1] - r[1]).powi(2)).sqrt())
        .sum::<f64>()
        / kp.len() as f64;
    b.body_position = W_BODY_POS * (EXP_SCALE * mean_kp_err).exp();
    b.root_rotation = W_TASK * (EXP_SCALE * (state.q[2] - reference.q[2]).abs()).exp();
    b.root_ang_vel = W_TASK * (EXP_SCALE * (state.qd[2] - reference.qd[2]).abs()).exp();
    let v_err = norm(&[state.qd[0] - reference.qd[0], state.qd[1] - reference.qd[1]]);
    b.root_velocity = W_TASK * (EXP_SCALE * v_err).exp();
    let mut dq = [0.0; NUM_JOINTS];
    let mut dv = [0.0; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        dq[j] = state.q[3 + j] - reference.q[3 + j];
        dv[j] = state.qd[3 + j] - reference.qd[3 + j];
    }
    b.dof_position = W_TASK * (EXP_SCALE * norm(&dq)).exp();
    b.dof_velocity = W_TASK * (EXP_SCALE * norm(&dv)).exp();

    (b.total(), b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motions::generate::{generate_clip, FamilyParams};
    use crate::motions::Family;
    use crate::sim::StepInfo;

    fn perfect_setup() -> (RobotModel, SimState, RefFrame) {
        let model = RobotModel::standard();
        let clip = generate_clip(
            &model,
            Family::StandUp,
            FamilyParams::Stand { upper_amp: 0.7, lower_amp: 0.02 },
            4.0,
            1,
            0,
        )
        .unwrap();
        let reference = RefFrame::at(&model, &clip, 10);
        let state = SimState::at_pose(reference.q, reference.qd);
        (model, state, reference)
    }

    #[test]
    fn perfect_tracking_task_subtotal_is_3_5() {
        let (model, state, reference) = perfect_setup();
        let info = StepInfo::default();
        let action = {
            let mut a = [0.0; NUM_JOINTS];
            a.copy_from_slice(&reference.q[3..]);
            a
        };
        let mut ref_vel = [0.0; NUM_JOINTS];
        ref_vel.copy_from_slice(&reference.qd[3..]);
        let inputs = RewardInputs {
            info: &info,
            action: &action,
            prev_action: &action,
            prev2_action: &action,
            prev_joint_vel: &ref_vel,
        };
        let (total, b) = compute_reward(&model, &state, &reference, &inputs);
        assert!((b.task_subtotal() - 3.5).abs() < 1e-9, "task subtotal {}", b.task_subtotal());
        // feet flat at reference ankles may carry a small orientation term;
        // with a standing reference the feet are flat, so penalties vanish
        assert!((total - 3.5).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn one_joint_past_limit_contributes_minus_10() {
        let (model, state, reference) = perfect_setup();
        let mut info = StepInfo::default();
        info.pos_limit_violation[3] = true;
        let action = [0.0; NUM_JOINTS];
        let zero_vel = [0.0; NUM_JOINTS];
        let inputs = RewardInputs {
            info: &info,
            action: &action,
            prev_action: &action,
            prev2_action: &action,
            prev_joint_vel: &zero_vel,
        };
        let (_, b) = compute_reward(&model, &state, &reference, &inputs);
        assert_eq!(b.dof_pos_limit, -10.0);
        // two joints -> -20
        info.pos_limit_violation[4] = true;
        let inputs = RewardInputs {
            info: &info,
            action: &action,
            prev_action: &action,
            prev2_action: &action,
            prev_joint_vel: &zero_vel,
        };
        let (_, b) = compute_reward(&model, &state, &reference, &inputs);
        assert_eq!(b.dof_pos_limit, -20.0);
    }

    #[test]
    fn stationary_actions_zero_rate_and_smoothness() {
        let (model, state, reference) = perfect_setup();
        let info = StepInfo::default();
        let action = [0.3; NUM_JOINTS];
        let zero_vel = [0.0; NUM_JOINTS];
        let inputs = RewardInputs {
            info: &info,
            action: &action,
            prev_action: &action,
            prev2_action: &action,
            prev_joint_vel: &zero_vel,
        };
        let (_, b) = compute_reward(&model, &state, &reference, &inputs);
        assert_eq!(b.action_rate, 0.0);
        assert_eq!(b.action_smooth, 0.0);
    }

    #[test]
    fn breakdown_sums_to_total_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let (model, _, reference) = perfect_setup();
        for _ in 0..50 {
            let mut q = crate::sim::standing_q();
            for v in q.iter_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
            let mut qd = [0.0; crate::sim::NUM_COORDS];
            for v in qd.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let state = SimState::at_pose(q, qd);
            let mut info = StepInfo::default();
            info.mean_abs_torque = [rng.gen_range(0.0..50.0); NUM_JOINTS];
            info.stumble = [rng.gen_bool(0.3), rng.gen_bool(0.3)];
            let action = [rng.gen_range(-0.5..0.5); NUM_JOINTS];
            let prev = [rng.gen_range(-0.5..0.5); NUM_JOINTS];
            let prev2 = [rng.gen_range(-0.5..0.5); NUM_JOINTS];
            let pvel = [rng.gen_range(-2.0..2.0); NUM_JOINTS];
            let inputs = RewardInputs {
                info: &info,
                action: &action,
                prev_action: &prev,
                prev2_action: &prev2,
                prev_joint_vel: &pvel,
            };
            let (total, b) = compute_reward(&model, &state, &reference, &inputs);
            assert!((total - b.total()).abs() < 1e-9);
            // each task term within (0, weight]
            assert!(b.body_position > 0.0 && b.body_position <= W_BODY_POS);
            for t in [b.root_rotation, b.root_ang_vel, b.root_velocity, b.dof_position, b.dof_velocity] {
                assert!(t > 0.0 && t <= W_TASK);
            }
        }
    }

    #[test]
    fn reward_weights_match_contract() {
        assert_eq!(W_LIMIT, -10.0);
        assert_eq!(W_DOF_ACC, -3e-8);
        assert_eq!(W_ACTION_RATE, -2.0);
        assert_eq!(W_ACTION_SMOOTH, -2.0);
        assert_eq!(W_TORQUE, -1e-4);
        assert_eq!(W_STUMBLE, -0.00125);
        assert_eq!(W_FEET_ORIENT, -2.0);
        assert_eq!(W_BODY_POS, 1.0);
        assert_eq!(W_TASK, 0.5);
    }
}
