//! Simulation oracles: an independent homogeneous-transform FK chain,
//! passive-drop energy audits, and dynamics-variant separation.

mod common;

use bb_core::sim::{
    self, fk_keypoints, joint, mechanical_energy, standing_q, step, EffectiveParams,
    RandomizationDraw, RobotModel, SimState, Terrain, VariantSpec, NUM_COORDS, NUM_JOINTS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 3x3 homogeneous transform helpers (independent of the library).
type Mat3 = [[f64; 3]; 3];

fn ident() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn trans(x: f64, z: f64) -> Mat3 {
    [[1.0, 0.0, x], [0.0, 1.0, z], [0.0, 0.0, 1.0]]
}

fn rotm(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn origin(m: &Mat3) -> [f64; 2] {
    [m[0][2], m[1][2]]
}

/// FK via per-joint homogeneous transforms, mirroring the model geometry.
fn oracle_keypoints(model: &RobotModel, q: &[f64; NUM_COORDS]) -> [[f64; 2]; 6] {
    let root = mul(&trans(q[0], q[1]), &rotm(q[2]));
    let head = mul(&root, &trans(0.0, model.torso_len + model.head_offset));
    let torso_top = mul(&root, &trans(0.0, model.torso_len));

    let limb = |base: &Mat3, joints: &[(f64, f64, f64)]| -> Mat3 {
        // each entry: (joint angle, link dx, link dz) applied in order
        let mut m = *base;
        for &(a, dx, dz) in joints {
            m = mul(&mul(&m, &rotm(a)), &trans(dx, dz));
        }
        m
    };

    let hand = |base_joint: usize| {
        limb(
            &torso_top,
            &[
                (q[3 + base_joint], 0.0, -model.upper_arm),
                (q[3 + base_joint + 1], 0.0, -model.forearm),
            ],
        )
    };
    let sole = |base_joint: usize| {
        limb(
            &root,
            &[
                (q[3 + base_joint], 0.0, -model.upper_leg),
                (q[3 + base_joint + 1], 0.0, -model.lower_leg),
                (q[3 + base_joint + 2], model.sole_offset[0], model.sole_offset[1]),
            ],
        )
    };

    [
        origin(&head),
        origin(&root),
        origin(&hand(joint::SHOULDER_L)),
        origin(&hand(joint::SHOULDER_R)),
        origin(&sole(joint::HIP_L)),
        origin(&sole(joint::HIP_R)),
    ]
}

#[test]
fn fk_matches_transform_chain_oracle() {
    let model = RobotModel::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let mut q = [0.0; NUM_COORDS];
        q[0] = rng.gen_range(-3.0..3.0);
        q[1] = rng.gen_range(0.3..1.2);
        q[2] = rng.gen_range(-0.8..0.8);
        for j in 0..NUM_JOINTS {
            q[3 + j] = rng.gen_range(model.q_min[j]..model.q_max[j]);
        }
        let ours = fk_keypoints(&model, &q);
        let oracle = oracle_keypoints(&model, &q);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a[0] - b[0]).abs() < 1e-9, "{a:?} vs {b:?}");
            assert!((a[1] - b[1]).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }
}

/// Passive model: zero PD gains, so only gravity, joint damping, and
/// contact act.
fn passive_model() -> RobotModel {
    let mut m = RobotModel::standard();
    m.kp = [0.0; NUM_JOINTS];
    m.kd = [0.0; NUM_JOINTS];
    m
}

#[test]
fn energy_non_increasing_on_50_passive_drops() {
    let model = passive_model();
    let eff = EffectiveParams::resolve(&model, &VariantSpec::nominal(), &RandomizationDraw::none());
    let terrain = Terrain::Flat;
    let window = 50; // policy steps = 1 s
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for drop in 0..50 {
        let mut q = standing_q();
        q[1] = rng.gen_range(0.7..1.4);
        q[2] = rng.gen_range(-0.4..0.4);
        for j in 0..NUM_JOINTS {
            let lo = model.q_min[j].max(-1.0);
            let hi = model.q_max[j].min(1.0);
            q[3 + j] = rng.gen_range(lo..hi);
        }
        let mut qd = [0.0; NUM_COORDS];
        for v in &mut qd {
            *v = rng.gen_range(-0.3..0.3);
        }
        let mut state = SimState::at_pose(q, qd);
        let targets = [0.0; NUM_JOINTS];
        let mut energies = Vec::with_capacity(151);
        energies.push(mechanical_energy(&model, &state, &eff, &terrain));
        let mut faulted = false;
        for _ in 0..150 {
            if step(&model, &mut state, &targets, &eff, &terrain).is_err() {
                faulted = true;
                break;
            }
            energies.push(mechanical_energy(&model, &state, &eff, &terrain));
        }
        assert!(!faulted, "drop {drop} faulted");
        for t in 0..energies.len().saturating_sub(window) {
            let before = energies[t];
            let after = energies[t + window];
            assert!(
                after <= before + 1e-3,
                "drop {drop}: energy rose {:.6} J over window at t={t}",
                after - before
            );
        }
    }
}

#[test]
fn variants_diverge_under_identical_inputs() {
    let model = RobotModel::standard();
    let drive = |variant: VariantSpec| {
        let eff = EffectiveParams::resolve(&model, &variant, &RandomizationDraw::none());
        let mut state = SimState::at_pose(standing_q(), [0.0; NUM_COORDS]);
        let mut targets = [0.0; NUM_JOINTS];
        for k in 0..50 {
            // a simple open-loop stepping pattern: enough excitation to
            // expose the dynamics gap within a second
            let phase = k as f64 * 0.55;
            targets[joint::HIP_L] = 0.35 * phase.sin();
            targets[joint::KNEE_L] = -0.5 + 0.3 * phase.cos();
            targets[joint::HIP_R] = -0.35 * phase.sin();
            targets[joint::KNEE_R] = -0.5 - 0.3 * phase.cos();
            step(&model, &mut state, &targets, &eff, &Terrain::Flat).unwrap();
        }
        state
    };
    let a = drive(VariantSpec::nominal());
    let b = drive(VariantSpec::shifted());
    let diff: f64 = a
        .q
        .iter()
        .zip(&b.q)
        .chain(a.qd.iter().zip(&b.qd))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    assert!(diff > 1e-3, "variants must diverge, got {diff:.2e}");
}

#[test]
fn same_seed_rollouts_bit_identical_under_randomization() {
    let model = RobotModel::standard();
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = RandomizationDraw::sample(&mut rng);
        let terrain = if draw.rough_terrain {
            Terrain::sample_rough(&mut rng)
        } else {
            Terrain::Flat
        };
        let eff = EffectiveParams::resolve(&model, &VariantSpec::nominal(), &draw);
        let mut state = SimState::at_pose(standing_q(), [0.0; NUM_COORDS]);
        let mut targets = [0.0; NUM_JOINTS];
        for k in 0..100 {
            targets[joint::SHOULDER_L] = 0.4 * (k as f64 * 0.2).sin();
            step(&model, &mut state, &targets, &eff, &terrain).unwrap();
        }
        state
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn contact_complementarity_fuzz() {
    // F_z = 0 whenever the sole is above the terrain; F_z >= 0 always.
    let model = RobotModel::standard();
    let eff = EffectiveParams::resolve(&model, &VariantSpec::nominal(), &RandomizationDraw::none());
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for _ in 0..300 {
        let mut q = standing_q();
        q[1] = rng.gen_range(0.45..0.9);
        q[2] = rng.gen_range(-0.5..0.5);
        for j in 0..NUM_JOINTS {
            q[3 + j] = rng.gen_range(model.q_min[j].max(-1.2)..model.q_max[j].min(1.2));
        }
        let mut qd = [0.0; NUM_COORDS];
        for v in &mut qd {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut state = SimState::at_pose(q, qd);
        step(&model, &mut state, &[0.0; NUM_JOINTS], &eff, &Terrain::Flat).unwrap();
        let frames = sim::fk(&model, &state.q);
        for side in 0..2 {
            let fz = state.foot_force[side][1];
            assert!(fz >= 0.0);
            if frames.sole[side][1] > 0.0 {
                assert_eq!(fz, 0.0, "force on airborne foot");
            }
        }
    }
}
