//! Parametric clip generators. Legs are driven by planar two-link inverse
//! kinematics toward sole targets so stance feet are genuinely planted,
//! which makes contact extraction and open-loop replay meaningful.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Family, MotionError, TAG_VOCABULARY};
use crate::sim::{joint, RobotModel, NUM_COORDS, NUM_JOINTS};
use crate::util::seeded_rng;

pub const CLIP_FPS: f64 = 50.0;
const FRAME_DT: f64 = 1.0 / CLIP_FPS;

/// One reference trajectory: per-frame root pose and joint targets, plus
/// semantic tags and the (hidden) family label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionClip {
    pub id: u32,
    pub family: Family,
    pub tags: Vec<String>,
    /// Per frame: root x, z, pitch, then 10 joint targets.
    pub frames: Vec<[f32; NUM_COORDS]>,
}

impl MotionClip {
    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / CLIP_FPS
    }

    pub fn frame_q(&self, idx: usize) -> [f64; NUM_COORDS] {
        let mut q = [0.0; NUM_COORDS];
        for (o, &v) in q.iter_mut().zip(&self.frames[idx]) {
            *o = v as f64;
        }
        q
    }

    /// Joint targets of a frame.
    pub fn frame_targets(&self, idx: usize) -> [f64; NUM_JOINTS] {
        let mut t = [0.0; NUM_JOINTS];
        for (o, &v) in t.iter_mut().zip(&self.frames[idx][3..]) {
            *o = v as f64;
        }
        t
    }

    /// Finite-difference generalized velocities at a frame.
    pub fn frame_qd(&self, idx: usize) -> [f64; NUM_COORDS] {
        let a = if idx == 0 { 0 } else { idx - 1 };
        let b = if idx == 0 { 1.min(self.frames.len() - 1) } else { idx };
        let mut qd = [0.0; NUM_COORDS];
        if a == b {
            return qd;
        }
        for i in 0..NUM_COORDS {
            qd[i] = (self.frames[b][i] as f64 - self.frames[a][i] as f64) * CLIP_FPS;
        }
        qd
    }
}

/// Family-specific generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyParams {
    /// Forward walking at a commanded speed (m/s).
    Walk { speed: f64 },
    /// Repeated vertical jumps with the given flight apex rise (m).
    Jump { apex: f64 },
    /// In-place motion with upper- and lower-body amplitude split.
    Stand { upper_amp: f64, lower_amp: f64 },
}

fn check(family: Family, what: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), MotionError> {
    if value < lo || value > hi {
        return Err(MotionError::ParamOutOfRange { family, what, value, lo, hi });
    }
    Ok(())
}

fn validate(family: Family, params: &FamilyParams, duration_s: f64) -> Result<(), MotionError> {
    check(family, "duration_s", duration_s, 4.0, 10.0)?;
    match (family, params) {
        (Family::WalkSlow, FamilyParams::Walk { speed }) => {
            check(family, "speed", *speed, 0.2, 0.6)
        }
        (Family::WalkFast, FamilyParams::Walk { speed }) => {
            check(family, "speed", *speed, 0.6, 1.2)
        }
        (Family::Jump, FamilyParams::Jump { apex }) => check(family, "apex", *apex, 0.05, 0.20),
        (Family::StandUp, FamilyParams::Stand { upper_amp, lower_amp }) => {
            check(family, "upper_amp", *upper_amp, 0.65, 1.1)?;
            check(family, "lower_amp", *lower_amp, 0.0, 0.03)
        }
        (Family::StandMid, FamilyParams::Stand { upper_amp, lower_amp }) => {
            check(family, "upper_amp", *upper_amp, 0.25, 0.45)?;
            check(family, "lower_amp", *lower_amp, 0.045, 0.07)
        }
        (Family::StandLow, FamilyParams::Stand { upper_amp, lower_amp }) => {
            check(family, "upper_amp", *upper_amp, 0.0, 0.12)?;
            check(family, "lower_amp", *lower_amp, 0.09, 0.14)
        }
        _ => Err(MotionError::ParamOutOfRange {
            family,
            what: "params kind mismatched with family",
            value: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
        }),
    }
}

/// Draw family-appropriate parameters and a duration.
pub fn sample_params<R: Rng>(family: Family, rng: &mut R) -> (FamilyParams, f64) {
    let duration = rng.gen_range(4.0..10.0);
    let params = match family {
        Family::WalkSlow => FamilyParams::Walk { speed: rng.gen_range(0.2..0.6) },
        Family::WalkFast => FamilyParams::Walk { speed: rng.gen_range(0.6..1.2) },
        Family::Jump => FamilyParams::Jump { apex: rng.gen_range(0.05..0.20) },
        Family::StandUp => FamilyParams::Stand {
            upper_amp: rng.gen_range(0.65..1.1),
            lower_amp: rng.gen_range(0.0..0.03),
        },
        Family::StandMid => FamilyParams::Stand {
            upper_amp: rng.gen_range(0.25..0.45),
            lower_amp: rng.gen_range(0.045..0.07),
        },
        Family::StandLow => FamilyParams::Stand {
            upper_amp: rng.gen_range(0.0..0.12),
            lower_amp: rng.gen_range(0.09..0.14),
        },
    };
    (params, duration)
}

/// Planar two-link leg IK: place the sole at `sole_target` with the foot
/// frame at world angle `foot_world`, given the pelvis pose. Returns
/// (hip, knee, ankle) with the knee bending backward.
fn leg_ik(
    model: &RobotModel,
    pelvis: [f64; 2],
    pitch: f64,
    sole_target: [f64; 2],
    foot_world: f64,
) -> (f64, f64, f64) {
    let (l1, l2) = (model.upper_leg, model.lower_leg);
    // ankle position implied by the sole target and foot orientation
    let (s, c) = foot_world.sin_cos();
    let off = model.sole_offset;
    let ankle = [
        sole_target[0] - (c * off[0] - s * off[1]),
        sole_target[1] - (s * off[0] + c * off[1]),
    ];
    // hip-to-ankle vector in the pelvis frame
    let d_world = [ankle[0] - pelvis[0], ankle[1] - pelvis[1]];
    let (ps, pc) = (-pitch).sin_cos();
    let mut d = [pc * d_world[0] - ps * d_world[1], ps * d_world[0] + pc * d_world[1]];
    let mut dist = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let max_reach = l1 + l2 - 1e-4;
    let min_reach = 0.05;
    if dist > max_reach {
        let sc = max_reach / dist;
        d = [d[0] * sc, d[1] * sc];
        dist = max_reach;
    } else if dist < min_reach {
        let sc = min_reach / dist.max(1e-9);
        d = [d[0] * sc, d[1] * sc];
        dist = min_reach;
    }
    let cos_knee = ((l1 * l1 + l2 * l2 - dist * dist) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee = -(std::f64::consts::PI - cos_knee.acos());
    let phi = d[0].atan2(-d[1]); // angle of the target from straight down
    let cos_alpha = ((l1 * l1 + dist * dist - l2 * l2) / (2.0 * l1 * dist)).clamp(-1.0, 1.0);
    let hip = phi + cos_alpha.acos();
    let ankle_j = (foot_world - pitch - hip - knee)
        .clamp(model.q_min[joint::ANKLE_L] + 0.02, model.q_max[joint::ANKLE_L] - 0.02);
    (hip, knee, ankle_j)
}

/// Smoothstep (C1) interpolation weight on [0, 1].
fn smooth(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

struct FrameBuilder<'m> {
    model: &'m RobotModel,
    frames: Vec<[f32; NUM_COORDS]>,
}

impl<'m> FrameBuilder<'m> {
    fn new(model: &'m RobotModel, n: usize) -> Self {
        Self { model, frames: Vec::with_capacity(n) }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        root: [f64; 3],
        sole_l: [f64; 2],
        sole_r: [f64; 2],
        foot_world: f64,
        arm_l: [f64; 2],
        arm_r: [f64; 2],
    ) {
        let pelvis = [root[0], root[1]];
        let (hl, kl, al) = leg_ik(self.model, pelvis, root[2], sole_l, foot_world);
        let (hr, kr, ar) = leg_ik(self.model, pelvis, root[2], sole_r, foot_world);
        let mut q = [0.0f64; NUM_COORDS];
        q[0] = root[0];
        q[1] = root[1];
        q[2] = root[2];
        q[3 + joint::HIP_L] = hl;
        q[3 + joint::KNEE_L] = kl;
        q[3 + joint::ANKLE_L] = al;
        q[3 + joint::HIP_R] = hr;
        q[3 + joint::KNEE_R] = kr;
        q[3 + joint::ANKLE_R] = ar;
        q[3 + joint::SHOULDER_L] = arm_l[0];
        q[3 + joint::ELBOW_L] = arm_l[1];
        q[3 + joint::SHOULDER_R] = arm_r[0];
        q[3 + joint::ELBOW_R] = arm_r[1];
        // joint targets stay inside limits
        for j in 0..NUM_JOINTS {
            q[3 + j] = q[3 + j].clamp(self.model.q_min[j] + 0.01, self.model.q_max[j] - 0.01);
        }
        let mut f = [0.0f32; NUM_COORDS];
        for (o, &v) in f.iter_mut().zip(&q) {
            *o = v as f32;
        }
        self.frames.push(f);
    }
}

fn walk_frames(model: &RobotModel, speed: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<[f32; NUM_COORDS]> {
    let cadence = 0.8 + 1.8 * speed; // full gait cycles per second
    let cycle = 1.0 / cadence;
    let stride = speed * cycle; // advance per full cycle (per foot)
    let pelvis_z0 = 0.585 - 0.035 * speed + rng.gen_range(-0.005..0.005);
    let bounce = 0.005 * (1.0 + speed);
    let lean = 0.04 + 0.05 * speed;
    let arm_amp = 0.25 + 0.45 * speed;
    let lift = 0.035 + 0.045 * speed;
    let phase0: f64 = rng.gen_range(0.0..1.0);

    // foothold schedule per leg: during stance the sole stays put, during
    // swing it moves to the next foothold with a smooth lift
    let foot_pos = |t: f64, leg_phase: f64| -> [f64; 2] {
        let u = (t / cycle + phase0 + leg_phase).rem_euclid(1.0);
        // stance for u in [0, 0.5), swing in [0.5, 1.0)
        let cycle_idx = (t / cycle + phase0 + leg_phase).div_euclid(1.0);
        let hold_x = (cycle_idx - phase0 - leg_phase) * stride + stride * 0.25;
        if u < 0.5 {
            [hold_x, 0.0]
        } else {
            let s = (u - 0.5) / 0.5;
            let x = hold_x + stride * smooth(s);
            let z = lift * (std::f64::consts::PI * s).sin();
            [x, z]
        }
    };

    let mut b = FrameBuilder::new(model, n);
    for k in 0..n {
        let t = k as f64 * FRAME_DT;
        let root = [
            speed * t,
            pelvis_z0 + bounce * (2.0 * std::f64::consts::TAU * t / cycle).sin(),
            lean,
        ];
        let sl = foot_pos(t, 0.0);
        let sr = foot_pos(t, 0.5);
        let swing = (std::f64::consts::TAU * (t / cycle + phase0)).sin();
        let arm_l = [arm_amp * swing * 0.5, 0.15 + 0.1 * swing];
        let arm_r = [-arm_amp * swing * 0.5, 0.15 - 0.1 * swing];
        b.push(root, sl, sr, 0.0, arm_l, arm_r);
    }
    b.frames
}

fn jump_frames(model: &RobotModel, apex: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<[f32; NUM_COORDS]> {
    let g = crate::sim::GRAVITY;
    let v0 = (2.0 * g * apex).sqrt();
    let t_flight = 2.0 * v0 / g;
    let z_stand = 0.60;
    let z_crouch = 0.50 + rng.gen_range(-0.01..0.01);
    let z_takeoff = 0.63;
    // phase durations (s)
    let (t_stand, t_crouch, t_push, t_land, t_recover) = (0.30, 0.40, 0.18, 0.35, 0.45);
    let cycle = t_stand + t_crouch + t_push + t_flight + t_land + t_recover;

    // pelvis height profile per cycle, C1 via cubic hermite segments with
    // matched boundary velocities around the ballistic flight
    let hermite = |z0: f64, z1: f64, v0: f64, v1: f64, dur: f64, t: f64| -> f64 {
        let u = (t / dur).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * z0
            + (u3 - 2.0 * u2 + u) * v0 * dur
            + (-2.0 * u3 + 3.0 * u2) * z1
            + (u3 - u2) * v1 * dur
    };
    let pelvis_z = |tc: f64| -> (f64, bool) {
        if tc < t_stand {
            (z_stand, false)
        } else if tc < t_stand + t_crouch {
            (hermite(z_stand, z_crouch, 0.0, 0.0, t_crouch, tc - t_stand), false)
        } else if tc < t_stand + t_crouch + t_push {
            (hermite(z_crouch, z_takeoff, 0.0, v0, t_push, tc - t_stand - t_crouch), false)
        } else if tc < t_stand + t_crouch + t_push + t_flight {
            let tf = tc - t_stand - t_crouch - t_push;
            (z_takeoff + v0 * tf - 0.5 * g * tf * tf, true)
        } else if tc < cycle - t_recover {
            let tl = tc - (cycle - t_land - t_recover);
            (hermite(z_takeoff, z_crouch + 0.03, -v0, 0.0, t_land, tl), false)
        } else {
            let tr = tc - (cycle - t_recover);
            (hermite(z_crouch + 0.03, z_stand, 0.0, 0.0, t_recover, tr), false)
        }
    };

    let arm_swing = |tc: f64| -> f64 {
        // arms wind back in the crouch and swing up through the push
        let u = smooth((tc - t_stand) / (t_crouch + t_push));
        let v = smooth((tc - (cycle - t_land - t_recover)) / (t_land + t_recover));
        -0.5 * u + 1.6 * u * u - 1.1 * v
    };

    let mut b = FrameBuilder::new(model, n);
    for k in 0..n {
        let t = k as f64 * FRAME_DT;
        let tc = t.rem_euclid(cycle);
        let (z, airborne) = pelvis_z(tc);
        let root = [0.0, z, 0.0];
        let (sl, sr) = if airborne {
            // feet tuck with the pelvis
            let tuck = [0.0, z - 0.52];
            (tuck, tuck)
        } else {
            ([-0.06, 0.0], [0.06, 0.0])
        };
        let a = arm_swing(tc);
        b.push(root, sl, sr, 0.0, [a, 0.25], [a, 0.25]);
    }
    b.frames
}

fn stand_frames(
    model: &RobotModel,
    family: Family,
    upper_amp: f64,
    lower_amp: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<[f32; NUM_COORDS]> {
    let z0 = 0.645;
    let stance = 0.05;
    // random multi-sine gesture parameters per arm joint
    let mut gesture = |amp: f64| -> [(f64, f64, f64); 2] {
        [
            (amp * rng.gen_range(0.6..1.0), rng.gen_range(0.25..0.7), rng.gen_range(0.0..std::f64::consts::TAU)),
            (amp * rng.gen_range(0.2..0.5), rng.gen_range(0.8..1.4), rng.gen_range(0.0..std::f64::consts::TAU)),
        ]
    };
    let sh_l = gesture(upper_amp);
    let el_l = gesture(upper_amp * 0.8);
    let sh_r = gesture(upper_amp);
    let el_r = gesture(upper_amp * 0.8);
    let squat_freq = match family {
        Family::StandLow => rng.gen_range(0.30..0.45),
        _ => rng.gen_range(0.3..0.5),
    };
    let squat_phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);

    let eval = |comps: &[(f64, f64, f64); 2], t: f64, center: f64| -> f64 {
        center
            + comps
                .iter()
                .map(|&(a, f, p)| a * (std::f64::consts::TAU * f * t + p).sin())
                .sum::<f64>()
    };
    // stand-mid gestures alternate arms; the other stand styles move both
    let alt_freq = rng.gen_range(0.12..0.2);
    let alternate = family == Family::StandMid;

    // first pass: raw poses, accumulating the mean static CoM offset so
    // the whole clip can be shifted to balance over the support center
    // without adding root motion
    let mut b = FrameBuilder::new(model, n);
    let build_frame = |b: &mut FrameBuilder, root_x: f64, t: f64| {
        let dip = lower_amp * 0.5 * (1.0 - (std::f64::consts::TAU * squat_freq * t + squat_phase).cos());
        let (gate_l, gate_r) = if alternate {
            let w = (std::f64::consts::TAU * alt_freq * t).sin();
            (0.5 * (1.0 + w), 0.5 * (1.0 - w))
        } else {
            (1.0, 1.0)
        };
        let arm_l = [gate_l * eval(&sh_l, t, 0.0), (gate_l * eval(&el_l, t, 0.6)).max(0.05)];
        let arm_r = [gate_r * eval(&sh_r, t, 0.0), (gate_r * eval(&el_r, t, 0.6)).max(0.05)];
        b.push([root_x, z0 - dip, 0.0], [-stance, 0.0], [stance, 0.0], 0.0, arm_l, arm_r);
    };
    let mut mean_offset = 0.0;
    for k in 0..n {
        build_frame(&mut b, 0.0, k as f64 * FRAME_DT);
        let f = b.frames.pop().unwrap();
        let mut q = [0.0f64; NUM_COORDS];
        for (o, &v) in q.iter_mut().zip(&f) {
            *o = v as f64;
        }
        mean_offset += crate::sim::static_com(model, &q)[0] / n as f64;
    }
    for k in 0..n {
        build_frame(&mut b, -mean_offset, k as f64 * FRAME_DT);
    }
    b.frames
}

/// Generate one clip; reproducible from (family, params, duration, seed).
pub fn generate_clip(
    model: &RobotModel,
    family: Family,
    params: FamilyParams,
    duration_s: f64,
    seed: u64,
    id: u32,
) -> Result<MotionClip, MotionError> {
    validate(family, &params, duration_s)?;
    let mut rng = seeded_rng(seed, &format!("clip-{}-{id}", family.label()));
    let n = (duration_s * CLIP_FPS).round() as usize;
    let frames = match (family, params) {
        (_, FamilyParams::Walk { speed }) => walk_frames(model, speed, n, &mut rng),
        (_, FamilyParams::Jump { apex }) => jump_frames(model, apex, n, &mut rng),
        (fam, FamilyParams::Stand { upper_amp, lower_amp }) => {
            stand_frames(model, fam, upper_amp, lower_amp, n, &mut rng)
        }
    };
    // 2-4 tags: both core tags, a random subset of extras, 10% noise
    let mut tags: Vec<String> = family.core_tags().iter().map(|s| s.to_string()).collect();
    for extra in family.extra_tags() {
        if rng.gen_bool(0.5) {
            tags.push(extra.to_string());
        }
    }
    if rng.gen_bool(0.10) {
        let foreign: Vec<&str> = TAG_VOCABULARY
            .iter()
            .copied()
            .filter(|t| {
                !family.core_tags().contains(t) && !family.extra_tags().contains(t)
            })
            .collect();
        let noise = foreign[rng.gen_range(0..foreign.len())].to_string();
        if tags.len() >= 4 {
            let slot = rng.gen_range(2..tags.len());
            tags[slot] = noise;
        } else {
            tags.push(noise);
        }
    }
    tags.truncate(4);
    Ok(MotionClip { id, family, tags, frames })
}
