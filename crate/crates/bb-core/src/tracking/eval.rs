//! Policy evaluation: success rate and tracking-error metrics over a clip
//! set, randomization off, deterministic mean actions, seeded initial
//! jitter.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{EnvConfig, ResidualSource, TrackingEnv};
use super::obs::{ObsRing, Role};
use crate::motions::MotionDataset;
use crate::rl::ActorCritic;
use crate::sim::{fk_keypoints, RobotModel, Termination, VariantSpec, NUM_JOINTS};

/// Walking-style clips use the looser test deviation threshold.
pub const TEST_THRESHOLD_WALK: f64 = 0.8;
pub const TEST_THRESHOLD_OTHER: f64 = 0.4;
/// Clusters at or above this mean speed count as walking.
pub const WALKING_SPEED_CUTOFF: f64 = 0.25;

/// Something that can act from an observation window.
pub trait EvalActor: Sync {
    fn role(&self) -> Role;
    fn act(&self, ring_flat: &[f32], ring_rows: &[Vec<f32>]) -> Vec<f32>;
}

impl EvalActor for ActorCritic {
    fn role(&self) -> Role {
        Role::Expert
    }
    fn act(&self, ring_flat: &[f32], _rows: &[Vec<f32>]) -> Vec<f32> {
        self.act_mean(ring_flat).expect("actor forward")
    }
}

/// What to run in the evaluation loop.
pub enum EvalSubject<'a> {
    Policy(&'a dyn EvalActor),
    /// Oracle actuator bypass: the state is set to the reference each
    /// frame. Yields SR = 1 with zero errors by construction.
    ReferenceBypass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndKind {
    Success,
    Fall,
    Deviation,
    Fault,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeEval {
    pub clip_id: u32,
    pub seed: u64,
    pub end: EndKind,
    pub frames: usize,
    pub mpjpe_rad: f64,
    pub mpkpe_mm: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub sr: f64,
    pub mpjpe_rad: f64,
    pub mpkpe_mm: f64,
    pub episodes: usize,
    pub faults: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub per_episode: Vec<EpisodeEval>,
    pub metrics: Metrics,
}

/// Per-clip deviation thresholds (clip id, threshold).
pub type ClipThresholds = Vec<(u32, f64)>;

/// Uniform thresholds for a clip list.
pub fn uniform_thresholds(clip_ids: &[u32], threshold: f64) -> ClipThresholds {
    clip_ids.iter().map(|&c| (c, threshold)).collect()
}

/// Evaluate over clips x seeds. Metrics pool per-frame errors up to
/// termination across all episodes; faults count as failures and are
/// reported separately.
pub fn evaluate(
    model: &RobotModel,
    dataset: &Arc<MotionDataset>,
    clips: &ClipThresholds,
    subject: &EvalSubject,
    variant: VariantSpec,
    residual: Option<Arc<dyn ResidualSource>>,
    seeds: &[u64],
) -> EvalOutcome {
    let jobs: Vec<(u32, f64, u64)> = clips
        .iter()
        .flat_map(|&(c, th)| seeds.iter().map(move |&s| (c, th, s)))
        .collect();
    let per_episode: Vec<EpisodeEval> = jobs
        .par_iter()
        .map(|&(clip_id, threshold, seed)| {
            run_episode(model, dataset, clip_id, threshold, subject, variant, residual.clone(), seed)
        })
        .collect();

    let mut metrics = Metrics { episodes: per_episode.len(), ..Metrics::default() };
    let mut frame_total = 0usize;
    let mut jpe = 0.0f64;
    let mut kpe = 0.0f64;
    let mut successes = 0usize;
    for e in &per_episode {
        if e.end == EndKind::Success {
            successes += 1;
        }
        if e.end == EndKind::Fault {
            metrics.faults += 1;
        }
        jpe += e.mpjpe_rad * e.frames as f64;
        kpe += e.mpkpe_mm * e.frames as f64;
        frame_total += e.frames;
    }
    metrics.sr = successes as f64 / per_episode.len().max(1) as f64;
    metrics.mpjpe_rad = jpe / frame_total.max(1) as f64;
    metrics.mpkpe_mm = kpe / frame_total.max(1) as f64;
    EvalOutcome { per_episode, metrics }
}

#[allow(clippy::too_many_arguments)]
fn run_episode(
    model: &RobotModel,
    dataset: &Arc<MotionDataset>,
    clip_id: u32,
    threshold: f64,
    subject: &EvalSubject,
    variant: VariantSpec,
    residual: Option<Arc<dyn ResidualSource>>,
    seed: u64,
) -> EpisodeEval {
    let mut cfg = EnvConfig::eval(variant, threshold);
    if let EvalSubject::Policy(p) = subject {
        cfg.role = p.role();
    }
    if matches!(subject, EvalSubject::ReferenceBypass) {
        cfg.init_jitter = 0.0;
    }
    let mut env = TrackingEnv::new(
        model.clone(),
        dataset.clone(),
        Arc::new(vec![clip_id]),
        cfg,
        residual,
        seed,
    );
    env.reset_to_clip(clip_id);

    let clip_len = env.clip_len();
    let mut jpe = 0.0f64;
    let mut kpe = 0.0f64;
    let mut frames = 0usize;
    let end;
    loop {
        match subject {
            EvalSubject::Policy(actor) => {
                let flat = ObsRingView::flat(&env);
                let rows = env.obs_rows();
                let action = actor.act(&flat, &rows);
                let out = crate::rl::RlEnv::step(&mut env, &action);
                accumulate_errors(&mut env, &mut jpe, &mut kpe);
                frames += 1;
                if out.fault {
                    end = EndKind::Fault;
                    break;
                }
                if out.done {
                    end = if out.success {
                        EndKind::Success
                    } else if env.last_termination == Some(Termination::Fall) {
                        EndKind::Fall
                    } else {
                        EndKind::Deviation
                    };
                    break;
                }
            }
            EvalSubject::ReferenceBypass => {
                // set the state straight onto the reference
                env.frame += 1;
                let clip = dataset.clip(clip_id);
                env.state =
                    crate::sim::SimState::at_pose(clip.frame_q(env.frame), clip.frame_qd(env.frame));
                accumulate_errors(&mut env, &mut jpe, &mut kpe);
                frames += 1;
                if env.frame + 1 >= clip_len {
                    end = EndKind::Success;
                    break;
                }
            }
        }
    }
    EpisodeEval {
        clip_id,
        seed,
        end,
        frames,
        mpjpe_rad: jpe / frames.max(1) as f64,
        mpkpe_mm: kpe / frames.max(1) as f64,
    }
}

fn accumulate_errors(env: &mut TrackingEnv, jpe: &mut f64, kpe: &mut f64) {
    let clip = env.clip();
    let idx = env.frame.min(clip.frames.len() - 1);
    let ref_q = clip.frame_q(idx);
    let mut j = 0.0;
    for k in 0..NUM_JOINTS {
        j += (env.state.q[3 + k] - ref_q[3 + k]).abs();
    }
    *jpe += j / NUM_JOINTS as f64;
    let ref_kp = fk_keypoints(&env.model, &ref_q);
    let kp = fk_keypoints(&env.model, &env.state.q);
    let mut e = 0.0;
    for (a, r) in kp.iter().zip(&ref_kp) {
        e += ((a[0] - r[0]).powi(2) + (a[1] - r[1]).powi(2)).sqrt();
    }
    *kpe += e / kp.len() as f64 * 1000.0;
}

/// Internal helper so evaluation can read the flat observation without
/// exposing the ring type.
struct ObsRingView;

impl ObsRingView {
    fn flat(env: &TrackingEnv) -> Vec<f32> {
        crate::rl::RlEnv::obs(env)
    }
}
