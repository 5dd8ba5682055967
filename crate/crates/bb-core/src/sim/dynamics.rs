//! Forward kinematics and reduced-order dynamics: diagonal generalized
//! mass matrix with gravity and contact forces mapped through point
//! Jacobian transposes, integrated by semi-implicit Euler.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use super::model::{
    joint, EffectiveParams, RobotModel, FALL_PELVIS_Z, FALL_PITCH, NUM_COORDS, NUM_JOINTS,
    NUM_KEYPOINTS, SUBSTEPS_PER_STEP, SUBSTEP_DT,
};
use super::terrain::Terrain;
use super::SimError;

fn rot(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

/// Full generalized state plus contact readings and the control delay
/// queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Root x, z, pitch, then the 10 joint angles.
    pub q: [f64; NUM_COORDS],
    pub qd: [f64; NUM_COORDS],
    /// Per-foot contact force (Fx, Fz) from the last substep.
    pub foot_force: [[f64; 2]; 2],
    /// Substeps simulated since reset.
    pub substeps: u64,
    /// Pending PD targets (oldest first) implementing control delay.
    pub pending_targets: VecDeque<[f64; NUM_JOINTS]>,
    /// Stick-slip friction anchors per foot per contact point (heel, toe):
    /// the ground x position each point is pinned to while sticking.
    pub contact_anchor: [[Option<f64>; 2]; 2],
}

impl SimState {
    /// State at a given pose with the delay queue primed so the current
    /// joint positions are the standing targets.
    pub fn at_pose(q: [f64; NUM_COORDS], qd: [f64; NUM_COORDS]) -> Self {
        let mut targets = [0.0; NUM_JOINTS];
        targets.copy_from_slice(&q[3..]);
        Self {
            q,
            qd,
            foot_force: [[0.0; 2]; 2],
            substeps: 0,
            pending_targets: VecDeque::from(vec![targets]),
            contact_anchor: [[None; 2]; 2],
        }
    }

    pub fn joints(&self) -> &[f64] {
        &self.q[3..]
    }

    pub fn joint_vels(&self) -> &[f64] {
        &self.qd[3..]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }
}

/// World-frame joint origins, cumulative link angles, and keypoints.
#[derive(Debug, Clone)]
pub struct Frames {
    pub pelvis: [f64; 2],
    pub pitch: f64,
    pub torso_top: [f64; 2],
    pub head: [f64; 2],
    pub elbow: [[f64; 2]; 2],
    pub hand: [[f64; 2]; 2],
    pub knee: [[f64; 2]; 2],
    pub ankle: [[f64; 2]; 2],
    pub sole: [[f64; 2]; 2],
    /// World angle of each foot frame (zero = sole flat).
    pub foot_angle: [f64; 2],
    /// Cumulative world angles per limb segment, used for link CoMs.
    leg_angles: [[f64; 3]; 2],
    arm_angles: [[f64; 2]; 2],
}

/// Forward kinematics from generalized positions.
pub fn fk(model: &RobotModel, q: &[f64; NUM_COORDS]) -> Frames {
    let pelvis = [q[0], q[1]];
    let pitch = q[2];
    let torso_top = add(pelvis, rot(pitch, [0.0, model.torso_len]));
    let head = add(pelvis, rot(pitch, [0.0, model.torso_len + model.head_offset]));

    let mut knee = [[0.0; 2]; 2];
    let mut ankle = [[0.0; 2]; 2];
    let mut sole = [[0.0; 2]; 2];
    let mut foot_angle = [0.0; 2];
    let mut leg_angles = [[0.0; 3]; 2];
    for (side, base) in [(0usize, joint::HIP_L), (1usize, joint::HIP_R)] {
        let hip_a = pitch + q[3 + base];
        let knee_a = hip_a + q[3 + base + 1];
        let ankle_a = knee_a + q[3 + base + 2];
        leg_angles[side] = [hip_a, knee_a, ankle_a];
        knee[side] = add(pelvis, rot(hip_a, [0.0, -model.upper_leg]));
        ankle[side] = add(knee[side], rot(knee_a, [0.0, -model.lower_leg]));
        sole[side] = add(ankle[side], rot(ankle_a, model.sole_offset));
        foot_angle[side] = ankle_a;
    }

    let mut elbow = [[0.0; 2]; 2];
    let mut hand = [[0.0; 2]; 2];
    let mut arm_angles = [[0.0; 2]; 2];
    for (side, base) in [(0usize, joint::SHOULDER_L), (1usize, joint::SHOULDER_R)] {
        let sh_a = pitch + q[3 + base];
        let el_a = sh_a + q[3 + base + 1];
        arm_angles[side] = [sh_a, el_a];
        elbow[side] = add(torso_top, rot(sh_a, [0.0, -model.upper_arm]));
        hand[side] = add(elbow[side], rot(el_a, [0.0, -model.forearm]));
    }

    Frames {
        pelvis,
        pitch,
        torso_top,
        head,
        elbow,
        hand,
        knee,
        ankle,
        sole,
        foot_angle,
        leg_angles,
        arm_angles,
    }
}

/// Keypoints in fixed order: head, pelvis, left hand, right hand, left
/// foot (sole), right foot (sole).
pub fn keypoints(frames: &Frames) -> [[f64; 2]; NUM_KEYPOINTS] {
    [
        frames.head,
        frames.pelvis,
        frames.hand[0],
        frames.hand[1],
        frames.sole[0],
        frames.sole[1],
    ]
}

/// Convenience: keypoints straight from positions.
pub fn fk_keypoints(model: &RobotModel, q: &[f64; NUM_COORDS]) -> [[f64; 2]; NUM_KEYPOINTS] {
    keypoints(&fk(model, q))
}

/// A mass concentrated at a world point, with the coordinate/origin chain
/// that rotates it.
struct LinkMass {
    mass: f64,
    com: [f64; 2],
    /// (generalized coordinate index, rotation origin) pairs; root pitch
    /// is included explicitly.
    chain: [(usize, [f64; 2]); 4],
    chain_len: usize,
}

fn link_masses(model: &RobotModel, frames: &Frames, com_offset_x: f64) -> Vec<LinkMass> {
    let pelvis = frames.pelvis;
    let mut links = Vec::with_capacity(11);
    links.push(LinkMass {
        mass: model.m_torso,
        com: add(pelvis, rot(frames.pitch, [com_offset_x, model.torso_len * 0.25])),
        chain: [(2, pelvis), (0, [0.0; 2]), (0, [0.0; 2]), (0, [0.0; 2])],
        chain_len: 1,
    });
    links.push(LinkMass {
        mass: model.m_root,
        com: pelvis,
        chain: [(2, pelvis), (0, [0.0; 2]), (0, [0.0; 2]), (0, [0.0; 2])],
        chain_len: 1,
    });
    for (side, base) in [(0usize, joint::HIP_L), (1usize, joint::HIP_R)] {
        let [hip_a, knee_a, ankle_a] = frames.leg_angles[side];
        let knee = frames.knee[side];
        let ankle = frames.ankle[side];
        links.push(LinkMass {
            mass: model.m_upper_leg,
            com: add(pelvis, rot(hip_a, [0.0, -model.upper_leg * 0.5])),
            chain: [(2, pelvis), (3 + base, pelvis), (0, [0.0; 2]), (0, [0.0; 2])],
            chain_len: 2,
        });
        links.push(LinkMass {
            mass: model.m_lower_leg,
            com: add(knee, rot(knee_a, [0.0, -model.lower_leg * 0.5])),
            chain: [(2, pelvis), (3 + base, pelvis), (3 + base + 1, knee), (0, [0.0; 2])],
            chain_len: 3,
        });
        links.push(LinkMass {
            mass: model.m_foot,
            com: add(ankle, rot(ankle_a, [model.sole_offset[0] * 0.5, model.sole_offset[1] * 0.5])),
            chain: [
                (2, pelvis),
                (3 + base, pelvis),
                (3 + base + 1, knee),
                (3 + base + 2, ankle),
            ],
            chain_len: 4,
        });
    }
    for (side, base) in [(0usize, joint::SHOULDER_L), (1usize, joint::SHOULDER_R)] {
        let [sh_a, el_a] = frames.arm_angles[side];
        let shoulder = frames.torso_top;
        let elbow = frames.elbow[side];
        links.push(LinkMass {
            mass: model.m_upper_arm,
            com: add(shoulder, rot(sh_a, [0.0, -model.upper_arm * 0.5])),
            chain: [(2, pelvis), (3 + base, shoulder), (0, [0.0; 2]), (0, [0.0; 2])],
            chain_len: 2,
        });
        links.push(LinkMass {
            mass: model.m_forearm,
            com: add(elbow, rot(el_a, [0.0, -model.forearm * 0.5])),
            chain: [(2, pelvis), (3 + base, shoulder), (3 + base + 1, elbow), (0, [0.0; 2])],
            chain_len: 3,
        });
    }
    links
}

/// Accumulate a point force into generalized forces through the chain's
/// Jacobian transpose.
fn apply_point_force(
    gen_forces: &mut [f64; NUM_COORDS],
    chain: &[(usize, [f64; 2])],
    point: [f64; 2],
    force: [f64; 2],
) {
    gen_forces[0] += force[0];
    gen_forces[1] += force[1];
    for &(ci, origin) in chain {
        let r = [point[0] - origin[0], point[1] - origin[1]];
        gen_forces[ci] += -r[1] * force[0] + r[0] * force[1];
    }
}

/// Velocity of a point rigidly attached through a rotation chain.
fn point_velocity(
    qd: &[f64; NUM_COORDS],
    chain: &[(usize, [f64; 2])],
    point: [f64; 2],
) -> [f64; 2] {
    let mut v = [qd[0], qd[1]];
    for &(ci, origin) in chain {
        let r = [point[0] - origin[0], point[1] - origin[1]];
        v[0] += qd[ci] * -r[1];
        v[1] += qd[ci] * r[0];
    }
    v
}

type ContactChain = [(usize, [f64; 2]); 4];

/// World positions of the two contact points (heel, toe) of a foot.
pub fn foot_contact_points(model: &RobotModel, frames: &Frames, side: usize) -> [[f64; 2]; 2] {
    let ankle = frames.ankle[side];
    let a = frames.foot_angle[side];
    let (s, c) = a.sin_cos();
    let half = model.foot_len * 0.5;
    let mk = |dx: f64| {
        [
            ankle[0] + c * (model.sole_offset[0] + dx) - s * model.sole_offset[1],
            ankle[1] + s * (model.sole_offset[0] + dx) + c * model.sole_offset[1],
        ]
    };
    [mk(-half), mk(half)]
}

/// Spring-damper contact at one heel/toe point with per-channel implicit
/// damping: the damping force is solved against the post-substep point
/// velocity through the effective inverse mass, which keeps stiff damping
/// stable on the low-inertia limb coordinates. The tangential force is
/// capped by Coulomb friction.
fn contact_force(
    model: &RobotModel,
    state: &SimState,
    frames: &Frames,
    eff: &EffectiveParams,
    terrain: &Terrain,
    side: usize,
    point: [f64; 2],
    anchor: Option<f64>,
) -> (ContactChain, [f64; 2], Option<f64>) {
    let base = if side == 0 { joint::HIP_L } else { joint::HIP_R };
    let sole = point;
    let chain: ContactChain = [
        (2usize, frames.pelvis),
        (3 + base, frames.pelvis),
        (3 + base + 1, frames.knee[side]),
        (3 + base + 2, frames.ankle[side]),
    ];
    let penetration = terrain.height(sole[0]) - sole[1];
    if penetration <= 0.0 {
        return (chain, [0.0, 0.0], None);
    }
    let v = point_velocity(&state.qd, &chain, sole);

    // effective inverse mass W = J M^-1 J^T for this contact point
    let m_lin = model.total_mass() * eff.mass_mult;
    let mut jx = [0.0; 6];
    let mut jz = [0.0; 6];
    let mut inv_m = [0.0; 6];
    jx[0] = 1.0;
    jz[1] = 1.0;
    inv_m[0] = 1.0 / m_lin;
    inv_m[1] = 1.0 / m_lin;
    for (slot, &(ci, origin)) in chain.iter().enumerate() {
        let r = [sole[0] - origin[0], sole[1] - origin[1]];
        jx[2 + slot] = -r[1];
        jz[2 + slot] = r[0];
        inv_m[2 + slot] = if ci == 2 {
            1.0 / (model.i_pitch * eff.mass_mult)
        } else {
            1.0 / (model.i_joint[ci - 3] * eff.mass_mult)
        };
    }
    let mut wxx = 0.0;
    let mut wzz = 0.0;
    for k in 0..6 {
        wxx += jx[k] * jx[k] * inv_m[k];
        wzz += jz[k] * jz[k] * inv_m[k];
    }

    // per-channel implicit spring-damping: springs are evaluated at the
    // predicted post-step position, folding k*dt into the damping term,
    // which keeps stiff contact stable on the low-inertia limb
    // coordinates; the cross coupling is dropped so a resting contact
    // carries no phantom tangential force
    let dt = SUBSTEP_DT;
    let kn = eff.ground_stiffness;
    let dn = model.ground_damping + kn * dt;
    let fz = ((kn * penetration - dn * v[1]) / (1.0 + dt * dn * wzz)).max(0.0);
    let cap = eff.friction * fz;

    // tangential stick-slip: a spring to the anchor point, Coulomb-capped;
    // on slip the anchor follows so the spring stays at the cap
    let kt = model.tangential_stiffness;
    let dx = model.tangential_damping + kt * dt;
    let ax = anchor.unwrap_or(sole[0]);
    let gap = sole[0] - ax;
    let mut fx = (-kt * gap - dx * v[0]) / (1.0 + dt * dx * wxx);
    let new_anchor = if fx.abs() > cap {
        fx = fx.signum() * cap;
        // slipping: re-seat the anchor so the spring force equals the cap
        Some(sole[0] + fx / kt)
    } else {
        Some(ax)
    };
    (chain, [fx, fz], new_anchor)
}

/// Joint limits enforced as stiff springs with implicitly-damped
/// restoring torque; flags the violation when outside the range.
const LIMIT_STIFFNESS: f64 = 600.0;
const LIMIT_DAMPING: f64 = 30.0;

fn limit_torque(
    model: &RobotModel,
    eff: &EffectiveParams,
    state: &SimState,
    j: usize,
    info: &mut StepInfo,
) -> f64 {
    let qj = state.q[3 + j];
    let excess = if qj < model.q_min[j] {
        qj - model.q_min[j]
    } else if qj > model.q_max[j] {
        qj - model.q_max[j]
    } else {
        return 0.0;
    };
    info.pos_limit_violation[j] = true;
    let inertia = model.i_joint[j] * eff.mass_mult;
    (-LIMIT_STIFFNESS * excess - LIMIT_DAMPING * state.qd[3 + j])
        / (1.0 + SUBSTEP_DT * LIMIT_DAMPING / inertia)
}

/// PD torque: `clamp(kp (target - q) - kd qd, ±tau_limit) * motor_gain`.
/// Returns (applied torque, raw pre-clamp torque).
pub fn pd_torque(
    q: f64,
    qd: f64,
    target: f64,
    kp: f64,
    kd: f64,
    tau_limit: f64,
    motor_gain: f64,
) -> (f64, f64) {
    let raw = kp * (target - q) - kd * qd;
    (raw.clamp(-tau_limit, tau_limit) * motor_gain, raw)
}

/// Aggregated diagnostics from one policy step (4 substeps).
#[derive(Debug, Clone, Default)]
pub struct StepInfo {
    pub torque_limit_violation: [bool; NUM_JOINTS],
    pub pos_limit_violation: [bool; NUM_JOINTS],
    pub vel_limit_violation: [bool; NUM_JOINTS],
    /// Mean over substeps of |applied torque| per joint.
    pub mean_abs_torque: [f64; NUM_JOINTS],
    pub stumble: [bool; 2],
}

/// Advance one policy step (4 physics substeps at 200 Hz). The same PD
/// targets are issued at every substep and flow through the delay queue at
/// substep granularity.
pub fn step(
    model: &RobotModel,
    state: &mut SimState,
    targets: &[f64; NUM_JOINTS],
    eff: &EffectiveParams,
    terrain: &Terrain,
) -> Result<StepInfo, SimError> {
    let mut info = StepInfo::default();
    for _ in 0..SUBSTEPS_PER_STEP {
        substep(model, state, targets, eff, terrain, &mut info)?;
    }
    for t in &mut info.mean_abs_torque {
        *t /= SUBSTEPS_PER_STEP as f64;
    }
    // record contact forces consistent with the final state (anchors are
    // read, not advanced)
    let frames = fk(model, &state.q);
    for side in 0..2 {
        let mut total = [0.0, 0.0];
        let points = foot_contact_points(model, &frames, side);
        for (pi, point) in points.into_iter().enumerate() {
            let (_, force, _) = contact_force(
                model,
                state,
                &frames,
                eff,
                terrain,
                side,
                point,
                state.contact_anchor[side][pi],
            );
            total[0] += force[0];
            total[1] += force[1];
        }
        state.foot_force[side] = total;
    }
    Ok(info)
}

fn substep(
    model: &RobotModel,
    state: &mut SimState,
    targets: &[f64; NUM_JOINTS],
    eff: &EffectiveParams,
    terrain: &Terrain,
    info: &mut StepInfo,
) -> Result<(), SimError> {
    // control delay: issue the current target, apply the oldest pending one
    state.pending_targets.push_back(*targets);
    while state.pending_targets.len() > eff.delay_substeps + 1 {
        state.pending_targets.pop_front();
    }
    let effective = *state.pending_targets.front().expect("delay queue primed");

    let mut gen_forces = [0.0; NUM_COORDS];

    // PD actuation plus unconditional joint viscous damping
    for j in 0..NUM_JOINTS {
        let (tau, raw) = pd_torque(
            state.q[3 + j],
            state.qd[3 + j],
            effective[j],
            model.kp[j] * eff.kp_mult,
            model.kd[j] * eff.kd_mult,
            model.tau_limit[j],
            eff.motor_gain_mult,
        );
        if raw.abs() > model.tau_limit[j] {
            info.torque_limit_violation[j] = true;
        }
        info.mean_abs_torque[j] += tau.abs();
        gen_forces[3 + j] += tau - model.joint_damping * state.qd[3 + j];
        gen_forces[3 + j] += limit_torque(model, eff, state, j, info);
    }

    // gravity through each link's CoM Jacobian transpose
    let frames = fk(model, &state.q);
    let links = link_masses(model, &frames, eff.com_offset_x);
    for link in &links {
        let w = -super::model::GRAVITY * link.mass * eff.mass_mult;
        apply_point_force(&mut gen_forces, &link.chain[..link.chain_len], link.com, [0.0, w]);
    }

    // ground contact at the heel and toe points of each foot
    for side in 0..2 {
        let mut total = [0.0, 0.0];
        let points = foot_contact_points(model, &frames, side);
        for (pi, point) in points.into_iter().enumerate() {
            let (chain, force, anchor) = contact_force(
                model,
                state,
                &frames,
                eff,
                terrain,
                side,
                point,
                state.contact_anchor[side][pi],
            );
            if force != [0.0, 0.0] {
                apply_point_force(&mut gen_forces, &chain, point, force);
                total[0] += force[0];
                total[1] += force[1];
            }
            state.contact_anchor[side][pi] = anchor;
        }
        if total[1] > 0.0 && total[0].abs() > 5.0 * total[1] {
            info.stumble[side] = true;
        }
        state.foot_force[side] = total;
    }

    // semi-implicit Euler on the diagonal generalized mass matrix
    let m_lin = model.total_mass() * eff.mass_mult;
    let i_pitch = model.i_pitch * eff.mass_mult;
    state.qd[0] += SUBSTEP_DT * gen_forces[0] / m_lin;
    state.qd[1] += SUBSTEP_DT * gen_forces[1] / m_lin;
    state.qd[2] += SUBSTEP_DT * gen_forces[2] / i_pitch;
    for j in 0..NUM_JOINTS {
        state.qd[3 + j] += SUBSTEP_DT * gen_forces[3 + j] / (model.i_joint[j] * eff.mass_mult);
        if state.qd[3 + j].abs() > model.qd_limit[j] {
            info.vel_limit_violation[j] = true;
            state.qd[3 + j] = state.qd[3 + j].clamp(-model.qd_limit[j], model.qd_limit[j]);
        }
    }
    for i in 0..NUM_COORDS {
        state.q[i] += SUBSTEP_DT * state.qd[i];
    }
    state.substeps += 1;

    if !state.is_finite() {
        return Err(SimError::Fault { substep: state.substeps });
    }
    Ok(())
}

/// Static whole-body center of mass of a pose (no randomization offsets).
pub fn static_com(model: &RobotModel, q: &[f64; NUM_COORDS]) -> [f64; 2] {
    let frames = fk(model, q);
    let links = link_masses(model, &frames, 0.0);
    let mut com = [0.0, 0.0];
    let mut mass = 0.0;
    for l in &links {
        com[0] += l.mass * l.com[0];
        com[1] += l.mass * l.com[1];
        mass += l.mass;
    }
    [com[0] / mass, com[1] / mass]
}

/// Total mechanical energy: kinetic in the generalized coordinates plus
/// gravitational potential of every link CoM plus contact spring
/// potential.
pub fn mechanical_energy(
    model: &RobotModel,
    state: &SimState,
    eff: &EffectiveParams,
    terrain: &Terrain,
) -> f64 {
    let m_lin = model.total_mass() * eff.mass_mult;
    let mut ke = 0.5 * m_lin * (state.qd[0] * state.qd[0] + state.qd[1] * state.qd[1]);
    ke += 0.5 * model.i_pitch * eff.mass_mult * state.qd[2] * state.qd[2];
    for j in 0..NUM_JOINTS {
        ke += 0.5 * model.i_joint[j] * eff.mass_mult * state.qd[3 + j] * state.qd[3 + j];
    }
    let frames = fk(model, &state.q);
    let mut pe = 0.0;
    for link in link_masses(model, &frames, eff.com_offset_x) {
        pe += link.mass * eff.mass_mult * super::model::GRAVITY * link.com[1];
    }
    for side in 0..2 {
        let points = foot_contact_points(model, &frames, side);
        for (pi, point) in points.into_iter().enumerate() {
            let pen = terrain.height(point[0]) - point[1];
            if pen > 0.0 {
                pe += 0.5 * eff.ground_stiffness * pen * pen;
                if let Some(ax) = state.contact_anchor[side][pi] {
                    let gap = point[0] - ax;
                    pe += 0.5 * model.tangential_stiffness * gap * gap;
                }
            }
        }
    }
    for j in 0..NUM_JOINTS {
        let qj = state.q[3 + j];
        let excess = if qj < model.q_min[j] {
            qj - model.q_min[j]
        } else if qj > model.q_max[j] {
            qj - model.q_max[j]
        } else {
            0.0
        };
        pe += 0.5 * LIMIT_STIFFNESS * excess * excess;
    }
    ke + pe
}

/// Episode termination verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Continue,
    Fall,
    Deviation,
}

/// Fall on pelvis collapse or excessive torso pitch; deviation when any
/// keypoint strays beyond the threshold from its reference.
pub fn check_termination(
    model: &RobotModel,
    state: &SimState,
    ref_keypoints: &[[f64; 2]; NUM_KEYPOINTS],
    threshold: f64,
) -> Termination {
    assert!(threshold > 0.0, "deviation threshold must be positive");
    if state.q[1] < FALL_PELVIS_Z || state.q[2].abs() > FALL_PITCH {
        return Termination::Fall;
    }
    let kp = fk_keypoints(model, &state.q);
    let max_err = kp
        .iter()
        .zip(ref_keypoints)
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        .fold(0.0, f64::max);
    if max_err > threshold {
        return Termination::Deviation;
    }
    Termination::Continue
}

/// Standing pose: zero joints, pelvis at nominal height.
pub fn standing_q() -> [f64; NUM_COORDS] {
    let mut q = [0.0; NUM_COORDS];
    q[1] = super::model::NOMINAL_PELVIS_Z;
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::model::{RandomizationDraw, VariantSpec, NOMINAL_PELVIS_Z};

    fn eff_nominal(model: &RobotModel) -> EffectiveParams {
        EffectiveParams::resolve(model, &VariantSpec::nominal(), &RandomizationDraw::none())
    }

    #[test]
    fn zero_pose_keypoints() {
        let model = RobotModel::standard();
        let kp = fk_keypoints(&model, &standing_q());
        // pelvis
        assert!((kp[1][0] - 0.0).abs() < 1e-12);
        assert!((kp[1][1] - 0.65).abs() < 1e-12);
        // head
        assert!((kp[0][1] - 1.20).abs() < 1e-12);
        // soles on the ground
        assert!(kp[4][1].abs() < 1e-12);
        assert!(kp[5][1].abs() < 1e-12);
    }

    #[test]
    fn root_translation_translates_every_keypoint() {
        let model = RobotModel::standard();
        let mut q = standing_q();
        q[3 + joint::HIP_L] = 0.3;
        q[3 + joint::KNEE_L] = -0.7;
        q[3 + joint::ELBOW_R] = 1.1;
        let base = fk_keypoints(&model, &q);
        let d = 1.234;
        q[0] += d;
        let moved = fk_keypoints(&model, &q);
        for (a, b) in base.iter().zip(&moved) {
            assert!((b[0] - a[0] - d).abs() < 1e-12);
            assert!((b[1] - a[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn pd_torque_cases() {
        // target = q, qd = 0 -> zero torque
        let (tau, _) = pd_torque(0.3, 0.0, 0.3, 50.0, 2.0, 100.0, 1.0);
        assert_eq!(tau, 0.0);
        // kp=50, err=0.1 -> 5
        let (tau, _) = pd_torque(0.0, 0.0, 0.1, 50.0, 2.0, 100.0, 1.0);
        assert!((tau - 5.0).abs() < 1e-12);
        // saturation clamps exactly
        let (tau, raw) = pd_torque(0.0, 0.0, 10.0, 50.0, 2.0, 100.0, 1.0);
        assert_eq!(tau, 100.0);
        assert_eq!(raw, 500.0);
    }

    #[test]
    fn free_fall_matches_semi_implicit_closed_form() {
        let model = RobotModel::standard();
        let eff = eff_nominal(&model);
        let mut q = standing_q();
        q[1] = 5.0; // high enough that the feet stay clear of the ground
        let mut state = SimState::at_pose(q, [0.0; NUM_COORDS]);
        let targets = [0.0; NUM_JOINTS];
        let mut v = 0.0f64;
        let mut z = 5.0f64;
        let g = super::super::model::GRAVITY;
        for _ in 0..35 {
            step(&model, &mut state, &targets, &eff, &Terrain::Flat).unwrap();
            for _ in 0..SUBSTEPS_PER_STEP {
                v -= g * SUBSTEP_DT;
                z += v * SUBSTEP_DT;
            }
            assert!((state.qd[1] - v).abs() < 1e-6, "vz {} vs {}", state.qd[1], v);
            assert!((state.q[1] - z).abs() < 1e-6, "z {} vs {}", state.q[1], z);
        }
    }

    #[test]
    fn same_inputs_bit_identical() {
        let model = RobotModel::standard();
        let eff = eff_nominal(&model);
        let run = || {
            let mut state = SimState::at_pose(standing_q(), [0.0; NUM_COORDS]);
            let mut targets = [0.0; NUM_JOINTS];
            for k in 0..200 {
                targets[joint::HIP_L] = 0.2 * ((k as f64) * 0.05).sin();
                targets[joint::HIP_R] = -targets[joint::HIP_L];
                step(&model, &mut state, &targets, &eff, &Terrain::Flat).unwrap();
            }
            state
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn standing_pd_holds_pelvis_height() {
        let model = RobotModel::standard();
        let eff = eff_nominal(&model);
        let mut state = SimState::at_pose(standing_q(), [0.0; NUM_COORDS]);
        let targets = [0.0; NUM_JOINTS];
        for _ in 0..250 {
            step(&model, &mut state, &targets, &eff, &Terrain::Flat).unwrap();
        }
        let drift = (state.q[1] - NOMINAL_PELVIS_Z).abs();
        assert!(drift < 0.02, "pelvis drifted {drift:.4} m over 5 s");
        assert!(state.q[2].abs() < 0.2, "pitch drifted {:.4}", state.q[2]);
    }

    #[test]
    fn contact_force_zero_above_terrain() {
        let model = RobotModel::standard();
        let eff = eff_nominal(&model);
        let mut q = standing_q();
        q[1] = 2.0;
        let mut state = SimState::at_pose(q, [0.0; NUM_COORDS]);
        step(&model, &mut state, &[0.0; NUM_JOINTS], &eff, &Terrain::Flat).unwrap();
        assert_eq!(state.foot_force, [[0.0; 2]; 2]);
    }

    #[test]
    fn contact_normal_force_nonnegative() {
        let model = RobotModel::standard();
        let eff = eff_nominal(&model);
        let mut q = standing_q();
        q[1] = 0.62; // slight crouch drop onto the ground
        let mut state = SimState::at_pose(q, [0.0; NUM_COORDS]);
        for _ in 0..200 {
            step(&model, &mut state, &[0.0; NUM_JOINTS], &eff, &Terrain::Flat).unwrap();
            for side in 0..2 {
                assert!(state.foot_force[side][1] >= 0.0);
            }
        }
    }

    #[test]
    fn termination_cases() {
        let model = RobotModel::standard();
        let q = standing_q();
        let state = SimState::at_pose(q, [0.0; NUM_COORDS]);
        let ref_kp = fk_keypoints(&model, &q);
        assert_eq!(check_termination(&model, &state, &ref_kp, 0.4), Termination::Continue);

        // max keypoint error 0.5 at threshold 0.4 -> deviation
        let mut shifted = ref_kp;
        for kp in &mut shifted {
            kp[0] += 0.5;
        }
        assert_eq!(check_termination(&model, &state, &shifted, 0.4), Termination::Deviation);

        // pitch 1.2 -> fall
        let mut qf = q;
        qf[2] = 1.2;
        let fallen = SimState::at_pose(qf, [0.0; NUM_COORDS]);
        assert_eq!(check_termination(&model, &fallen, &ref_kp, 0.4), Termination::Fall);
    }

    #[test]
    fn delay_queue_applies_old_targets_exactly() {
        // with a 2-substep delay, a target issued now must take effect
        // exactly 2 substeps later: before that the old target holds.
        let model = RobotModel::standard();
        let mut eff = eff_nominal(&model);
        eff.delay_substeps = 2;
        let mut q = standing_q();
        q[1] = 5.0; // airborne: joints respond only to PD
        let mut state = SimState::at_pose(q, [0.0; NUM_COORDS]);
        // feed a big elbow target; joints were primed at zero
        let mut targets = [0.0; NUM_JOINTS];
        targets[joint::ELBOW_L] = 1.0;
        // run exactly one substep via the policy-step API is 4 substeps, so
        // drive substeps directly through a 1-substep-equivalent: use
        // pending queue inspection after one policy step instead.
        step(&model, &mut state, &targets, &eff, &Terrain::Flat).unwrap();
        // after 4 substeps with delay 2, the queue front must be the new
        // target (it has been pending for >= 2 substeps)
        assert_eq!(state.pending_targets.front().unwrap()[joint::ELBOW_L], 1.0);
        assert!(state.qd[3 + joint::ELBOW_L] > 0.0, "elbow must be moving by now");
    }
}
