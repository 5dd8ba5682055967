//! Generated-motion properties: open-loop replayability and the expected
//! per-family kinematic orderings.

use bb_core::motions::stats::{clip_stats, mean_stats, ClipStats};
use bb_core::motions::{build_dataset, generate::sample_params, generate_clip, DatasetCounts, Family};
use bb_core::sim::{
    step, EffectiveParams, RandomizationDraw, RobotModel, SimState, Terrain, VariantSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_family_replays_open_loop_without_fault() {
    let model = RobotModel::standard();
    let eff = EffectiveParams::resolve(&model, &VariantSpec::nominal(), &RandomizationDraw::none());
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for family in Family::ALL {
        for i in 0..4 {
            let (params, duration) = sample_params(family, &mut rng);
            let clip = generate_clip(&model, family, params, duration, rng.gen(), i).unwrap();
            let mut state = SimState::at_pose(clip.frame_q(0), clip.frame_qd(0));
            for idx in 0..clip.frames.len() {
                let targets = clip.frame_targets(idx);
                // falls are allowed; faults are not
                let res = step(&model, &mut state, &targets, &eff, &Terrain::Flat);
                assert!(res.is_ok(), "{family} clip {i} faulted at frame {idx}");
            }
        }
    }
}

#[test]
fn family_statistics_reproduce_expected_orderings() {
    let model = RobotModel::standard();
    // a reduced but still imbalanced dataset keeps this test quick
    let counts = DatasetCounts {
        jump: 12,
        stand_low: 12,
        walk_slow: 20,
        stand_mid: 12,
        stand_up: 16,
        walk_fast: 12,
    };
    let ds = build_dataset(&model, &counts, 31337).unwrap();
    let fam_stats = |f: Family| -> ClipStats {
        mean_stats(ds.clips.iter().filter(|c| c.family == f))
    };
    let jump = fam_stats(Family::Jump);
    let walk_slow = fam_stats(Family::WalkSlow);
    let walk_fast = fam_stats(Family::WalkFast);
    let stand_up = fam_stats(Family::StandUp);
    let stand_mid = fam_stats(Family::StandMid);
    let stand_low = fam_stats(Family::StandLow);
    let all = [jump, walk_slow, walk_fast, stand_up, stand_mid, stand_low];

    // jump maximizes vertical movement
    for s in &all {
        assert!(jump.z_move_mm >= s.z_move_mm, "jump z-move not maximal");
    }
    // walk-fast maximizes speed
    for s in &all {
        assert!(walk_fast.speed_mps >= s.speed_mps, "walk-fast speed not maximal");
    }
    // the walk families maximize displacement
    for s in [jump, stand_up, stand_mid, stand_low] {
        assert!(walk_slow.displacement_m > s.displacement_m);
        assert!(walk_fast.displacement_m > s.displacement_m);
    }
    // stand-up maximizes the upper/lower variation ratio
    let ratio = |s: ClipStats| s.joint_var_upper / s.joint_var_lower.max(1e-9);
    for s in &all {
        assert!(ratio(stand_up) >= ratio(*s), "stand-up upper/lower ratio not maximal");
    }
    // stand-low maximizes lower-body variation among the stand families
    assert!(stand_low.joint_var_lower > stand_up.joint_var_lower);
    assert!(stand_low.joint_var_lower > stand_mid.joint_var_lower);
}

#[test]
fn walk_families_differ_mostly_by_speed_statistic() {
    let model = RobotModel::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut slow_speeds = Vec::new();
    let mut fast_speeds = Vec::new();
    for i in 0..10 {
        let (p, d) = sample_params(Family::WalkSlow, &mut rng);
        slow_speeds
            .push(clip_stats(&generate_clip(&model, Family::WalkSlow, p, d, rng.gen(), i).unwrap()).speed_mps);
        let (p, d) = sample_params(Family::WalkFast, &mut rng);
        fast_speeds
            .push(clip_stats(&generate_clip(&model, Family::WalkFast, p, d, rng.gen(), i).unwrap()).speed_mps);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&fast_speeds) > mean(&slow_speeds) * 1.5);
}
