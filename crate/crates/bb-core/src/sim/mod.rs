//! Planar (sagittal) articulated robot simulation with PD-controlled
//! joints, spring-damper ground contact, domain randomization, terrain,
//! and a fixed-perturbation dynamics variant.

pub mod dynamics;
pub mod model;
pub mod terrain;

pub use dynamics::{
    check_termination, fk, fk_keypoints, foot_contact_points, keypoints, mechanical_energy,
    pd_torque, standing_q, static_com, step, Frames, SimState, StepInfo, Termination,
};
pub use model::{
    joint, EffectiveParams, RandomizationDraw, RobotModel, VariantKind, VariantSpec, FALL_PELVIS_Z,
    FALL_PITCH, GRAVITY, NOMINAL_PELVIS_Z, NUM_COORDS, NUM_JOINTS, NUM_KEYPOINTS, POLICY_DT,
    PUSH_DELTA_V, PUSH_INTERVAL_S, SUBSTEPS_PER_STEP, SUBSTEP_DT,
};
pub use terrain::Terrain;

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    /// Non-finite state: reported separately from falls.
    Fault { substep: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fault { substep } => write!(f, "simulation fault at substep {substep}"),
        }
    }
}

impl std::error::Error for SimError {}
