//! Planar robot description: link geometry, masses, generalized inertias,
//! joint limits, PD gains, and ground contact constants.

use serde::{Deserialize, Serialize};

/// Number of actuated joints (hip, knee, ankle per leg; shoulder, elbow
/// per arm).
pub const NUM_JOINTS: usize = 10;
/// Generalized coordinates: root x, z, pitch plus the joints.
pub const NUM_COORDS: usize = 3 + NUM_JOINTS;
/// Tracked keypoints: head, pelvis, hands, feet.
pub const NUM_KEYPOINTS: usize = 6;

/// Joint order within the actuated block.
pub mod joint {
    pub const HIP_L: usize = 0;
    pub const KNEE_L: usize = 1;
    pub const ANKLE_L: usize = 2;
    pub const HIP_R: usize = 3;
    pub const KNEE_R: usize = 4;
    pub const ANKLE_R: usize = 5;
    pub const SHOULDER_L: usize = 6;
    pub const ELBOW_L: usize = 7;
    pub const SHOULDER_R: usize = 8;
    pub const ELBOW_R: usize = 9;
    /// The residual-action joints.
    pub const ANKLES: [usize; 2] = [ANKLE_L, ANKLE_R];
}

/// Physics substep (200 Hz).
pub const SUBSTEP_DT: f64 = 0.005;
/// Physics substeps per policy step (policy at 50 Hz).
pub const SUBSTEPS_PER_STEP: usize = 4;
/// Policy step period.
pub const POLICY_DT: f64 = SUBSTEP_DT * SUBSTEPS_PER_STEP as f64;

pub const GRAVITY: f64 = 9.81;

/// Pelvis height of the zero pose with straight legs.
pub const NOMINAL_PELVIS_Z: f64 = 0.65;
/// Fall when the pelvis drops below 0.4 x nominal.
pub const FALL_PELVIS_Z: f64 = 0.26;
/// Fall when the torso pitches past this angle.
pub const FALL_PITCH: f64 = 1.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotModel {
    // link lengths (m)
    pub torso_len: f64,
    pub head_offset: f64,
    pub upper_leg: f64,
    pub lower_leg: f64,
    pub foot_len: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    /// Sole contact point in the foot frame, relative to the ankle.
    pub sole_offset: [f64; 2],

    // masses (kg)
    pub m_torso: f64,
    pub m_root: f64,
    pub m_upper_leg: f64,
    pub m_lower_leg: f64,
    pub m_foot: f64,
    pub m_upper_arm: f64,
    pub m_forearm: f64,

    // generalized inertias
    pub i_pitch: f64,
    pub i_joint: [f64; NUM_JOINTS],

    // joint limits
    pub q_min: [f64; NUM_JOINTS],
    pub q_max: [f64; NUM_JOINTS],
    pub qd_limit: [f64; NUM_JOINTS],
    pub tau_limit: [f64; NUM_JOINTS],

    // PD gains and unactuated joint damping
    pub kp: [f64; NUM_JOINTS],
    pub kd: [f64; NUM_JOINTS],
    pub joint_damping: f64,

    // ground contact
    pub ground_stiffness: f64,
    pub ground_damping: f64,
    pub friction: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
}

impl RobotModel {
    /// The standard 40 kg desk robot.
    pub fn standard() -> Self {
        let leg = [400.0, 400.0, 150.0];
        let arm = [60.0, 30.0];
        let leg_d = [20.0, 18.0, 8.0];
        let arm_d = [4.0, 1.5];
        let leg_tau = [220.0, 220.0, 90.0];
        let arm_tau = [60.0, 30.0];
        let leg_i = [1.5, 0.6, 0.2];
        let arm_i = [0.5, 0.2];
        let splice = |l: [f64; 3], a: [f64; 2]| {
            [l[0], l[1], l[2], l[0], l[1], l[2], a[0], a[1], a[0], a[1]]
        };
        Self {
            torso_len: 0.40,
            head_offset: 0.15,
            upper_leg: 0.30,
            lower_leg: 0.30,
            foot_len: 0.10,
            upper_arm: 0.25,
            forearm: 0.25,
            sole_offset: [0.0, -0.05],
            m_torso: 13.0,
            m_root: 3.0,
            m_upper_leg: 3.5,
            m_lower_leg: 3.0,
            m_foot: 2.0,
            m_upper_arm: 2.0,
            m_forearm: 1.5,
            i_pitch: 4.0,
            i_joint: splice(leg_i, arm_i),
            q_min: splice([-1.6, -2.4, -1.2], [-2.8, -0.02]),
            q_max: splice([1.6, 0.02, 1.2], [2.8, 2.4]),
            qd_limit: [20.0; NUM_JOINTS],
            tau_limit: splice(leg_tau, arm_tau),
            kp: splice(leg, arm),
            kd: splice(leg_d, arm_d),
            joint_damping: 0.5,
            ground_stiffness: 3.0e4,
            ground_damping: 1.5e3,
            friction: 1.0,
            tangential_stiffness: 1.0e4,
            tangential_damping: 3.0e2,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.m_torso
            + self.m_root
            + 2.0 * (self.m_upper_leg + self.m_lower_leg + self.m_foot)
            + 2.0 * (self.m_upper_arm + self.m_forearm)
    }
}

/// Which dynamics the simulator runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Nominal,
    Shifted,
}

impl std::fmt::Display for VariantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Nominal => write!(f, "nominal"),
            Self::Shifted => write!(f, "shifted"),
        }
    }
}

/// Fixed multiplier set distinguishing the training simulator from its
/// deployment proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub kind: VariantKind,
    pub friction_mult: f64,
    pub mass_mult: f64,
    pub motor_gain_mult: f64,
    pub ground_stiffness_mult: f64,
    pub control_delay_ms: f64,
}

impl VariantSpec {
    pub fn nominal() -> Self {
        Self {
            kind: VariantKind::Nominal,
            friction_mult: 1.0,
            mass_mult: 1.0,
            motor_gain_mult: 1.0,
            ground_stiffness_mult: 1.0,
            control_delay_ms: 0.0,
        }
    }

    pub fn shifted() -> Self {
        Self {
            kind: VariantKind::Shifted,
            friction_mult: 0.70,
            mass_mult: 1.15,
            motor_gain_mult: 0.85,
            ground_stiffness_mult: 1.30,
            control_delay_ms: 30.0,
        }
    }

    pub fn of(kind: VariantKind) -> Self {
        match kind {
            VariantKind::Nominal => Self::nominal(),
            VariantKind::Shifted => Self::shifted(),
        }
    }
}

/// Per-episode domain randomization draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomizationDraw {
    pub friction: f64,
    pub com_offset_x: f64,
    pub link_mass_mult: f64,
    pub p_gain_mult: f64,
    pub d_gain_mult: f64,
    pub control_delay_ms: f64,
    pub rough_terrain: bool,
}

impl RandomizationDraw {
    /// The identity draw (used when randomization is off).
    pub fn none() -> Self {
        Self {
            friction: 1.0,
            com_offset_x: 0.0,
            link_mass_mult: 1.0,
            p_gain_mult: 1.0,
            d_gain_mult: 1.0,
            control_delay_ms: 0.0,
            rough_terrain: false,
        }
    }

    pub fn sample<R: rand::Rng>(rng: &mut R) -> Self {
        Self {
            friction: rng.gen_range(0.5..1.25),
            com_offset_x: rng.gen_range(-0.1..0.1),
            link_mass_mult: rng.gen_range(0.8..1.2),
            p_gain_mult: rng.gen_range(0.75..1.25),
            d_gain_mult: rng.gen_range(0.75..1.25),
            control_delay_ms: rng.gen_range(20.0..40.0),
            rough_terrain: rng.gen_bool(0.5),
        }
    }
}

/// Interval between external push perturbations during randomized training.
pub const PUSH_INTERVAL_S: f64 = 10.0;
/// Planar velocity change applied by a push.
pub const PUSH_DELTA_V: f64 = 0.5;

/// Resolved per-episode physics parameters: model constants combined with
/// the variant multipliers and (during training) a randomization draw.
#[derive(Debug, Clone)]
pub struct EffectiveParams {
    pub friction: f64,
    pub mass_mult: f64,
    pub com_offset_x: f64,
    pub kp_mult: f64,
    pub kd_mult: f64,
    pub motor_gain_mult: f64,
    pub ground_stiffness: f64,
    pub delay_substeps: usize,
}

impl EffectiveParams {
    pub fn resolve(model: &RobotModel, variant: &VariantSpec, draw: &RandomizationDraw) -> Self {
        let delay_ms = variant.control_delay_ms + draw.control_delay_ms;
        Self {
            friction: model.friction * variant.friction_mult * draw.friction,
            mass_mult: variant.mass_mult * draw.link_mass_mult,
            com_offset_x: draw.com_offset_x,
            kp_mult: draw.p_gain_mult,
            kd_mult: draw.d_gain_mult,
            motor_gain_mult: variant.motor_gain_mult,
            ground_stiffness: model.ground_stiffness * variant.ground_stiffness_mult,
            delay_substeps: (delay_ms / (SUBSTEP_DT * 1000.0)).ceil() as usize,
        }
    }
}
