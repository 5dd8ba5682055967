//! Motion-tracking task: observations, rewards, metrics, the RL
//! environment, base-policy training, and expert fine-tuning.

pub mod env;
pub mod eval;
pub mod obs;
pub mod reward;
pub mod train;

pub use env::{EnvConfig, ResidualSource, TrackingEnv, ACTION_OFFSET_CLAMP, ACTION_SCALE};
pub use eval::{
    evaluate, uniform_thresholds, ClipThresholds, EndKind, EpisodeEval, EvalActor, EvalOutcome,
    EvalSubject, Metrics, TEST_THRESHOLD_OTHER, TEST_THRESHOLD_WALK, WALKING_SPEED_CUTOFF,
};
pub use obs::{
    build_critic_obs, build_delta_frame, build_frame, ObsRing, RefFrame, Role, CRITIC_OBS_DIM,
    DELTA_FRAME_DIM, DELTA_OBS_DIM, EXPERT_FRAME_DIM, EXPERT_HISTORY, EXPERT_OBS_DIM,
    GENERALIST_FRAME_DIM, GENERALIST_HISTORY, GENERALIST_OBS_DIM,
};
pub use reward::{compute_reward, RewardBreakdown, RewardInputs};
pub use train::{
    curriculum_threshold, finetune_expert, new_tracking_policy, train_base, train_tracking,
    TrainConfig, TrainLog,
};
