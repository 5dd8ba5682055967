// scratch driver: verify tracking actually trains at desk scale
use bb_core::motions::{build_dataset, DatasetCounts, Family};
use bb_core::rl::PpoConfig;
use bb_core::sim::{RobotModel, VariantSpec};
use bb_core::tracking::*;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let model = RobotModel::standard();
    let counts = DatasetCounts {
        jump: 6, stand_low: 6, walk_slow: 10, stand_mid: 6, stand_up: 10, walk_fast: 6,
    };
    let ds = Arc::new(build_dataset(&model, &counts, 11).unwrap());
    let updates: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let family: String = std::env::args().nth(2).unwrap_or_else(|| "stand-up".into());
    let fam = Family::ALL.iter().copied().find(|f| f.label() == family).unwrap();
    let ids: Vec<u32> = ds.clip_ids_of_family(fam);
    println!("training on {} {} clips, {updates} updates", ids.len(), fam);

    let ppo = PpoConfig::default();
    let train_cfg = TrainConfig { updates, hidden_desk: true };
    let clips = uniform_thresholds(&ids, TEST_THRESHOLD_OTHER);

    let t0 = Instant::now();
    let policy0 = new_tracking_policy(5, true);
    let before = evaluate(&model, &ds, &clips, &EvalSubject::Policy(&policy0),
        VariantSpec::nominal(), None, &[1, 2, 3]);
    println!("random-init policy: SR {:.2} mpjpe {:.3} mpkpe {:.0} ({:.1?})",
        before.metrics.sr, before.metrics.mpjpe_rad, before.metrics.mpkpe_mm, t0.elapsed());

    let t0 = Instant::now();
    let (policy, logs) = train_tracking(&model, &ds, &ids, None, &ppo, &train_cfg, 7).unwrap();
    let dt = t0.elapsed();
    println!("trained in {:.1?} ({:.2?}/update)", dt, dt / updates as u32);
    for l in logs.iter().step_by((updates / 8).max(1)) {
        println!("  upd {:3}: R/env {:7.1} succ {:.2} eps {:3} thr {:.2} vloss {:.3}",
            l.update, l.mean_reward_per_env, l.success_fraction, l.episodes, l.threshold, l.value_loss);
    }
    let after = evaluate(&model, &ds, &clips, &EvalSubject::Policy(&policy),
        VariantSpec::nominal(), None, &[1, 2, 3]);
    println!("trained policy: SR {:.2} mpjpe {:.3} mpkpe {:.0}",
        after.metrics.sr, after.metrics.mpjpe_rad, after.metrics.mpkpe_mm);
    let shifted = evaluate(&model, &ds, &clips, &EvalSubject::Policy(&policy),
        VariantSpec::shifted(), None, &[1, 2, 3]);
    println!("trained on shifted: SR {:.2}", shifted.metrics.sr);
}
