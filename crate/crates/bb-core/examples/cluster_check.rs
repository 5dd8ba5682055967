// scratch driver: cluster-quality dry run on the default dataset
use bb_core::cluster::*;
use bb_core::motions::{build_dataset, DatasetCounts};
use bb_core::sim::RobotModel;
use std::time::Instant;

fn main() {
    let model = RobotModel::standard();
    let t0 = Instant::now();
    let ds = build_dataset(&model, &DatasetCounts::default(), 42).unwrap();
    println!("dataset: {} clips in {:.1?}", ds.len(), t0.elapsed());

    let t0 = Instant::now();
    let encoded = preprocess_dataset(&model, &ds);
    println!("preprocess: {:.1?}", t0.elapsed());

    let mut cfg = AeConfig::default();
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    cfg.epochs = epochs;
    let t0 = Instant::now();
    let (ae, logs) = train_ae(&encoded, cfg, 7).unwrap();
    let dt = t0.elapsed();
    println!("train_ae: {} epochs in {:.1?} ({:.1?}/epoch)", epochs, dt, dt / epochs as u32);
    for l in logs.iter().take(3).chain(logs.iter().rev().take(2).collect::<Vec<_>>().into_iter().rev()) {
        println!("  epoch {:2}: loss {:.4} nce={:.4} l2={:.4} ht={:.4} hm={:.4}",
            l.epoch, l.loss, l.breakdown.0, l.breakdown.1, l.breakdown.2, l.breakdown.3);
    }

    let refs: Vec<&EncodedClip> = encoded.iter().collect();
    let t0 = Instant::now();
    let latents = ae.encode_motion(&refs);
    println!("encode: {:.1?}", t0.elapsed());

    let truth: Vec<u32> = ds.clips.iter().map(|c| {
        use bb_core::motions::Family::*;
        match c.family { Jump => 0, WalkSlow => 1, WalkFast => 2, StandUp => 3, StandMid => 4, StandLow => 5 }
    }).collect();

    let km = kmeans(&latents, 6, 99);
    let ari = adjusted_rand_index(&km.assignment, &truth);
    println!("ARI(k=6) raw = {ari:.4}");
    // unit-normalized latents (cosine geometry)
    let normed: Vec<Vec<f32>> = latents.iter().map(|z| {
        let n = z.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-9);
        z.iter().map(|v| v / n).collect()
    }).collect();
    let kmn = kmeans(&normed, 6, 99);
    let arin = adjusted_rand_index(&kmn.assignment, &truth);
    println!("ARI(k=6) normalized = {arin:.4}");
    // confusion matrix families x clusters (normalized run)
    let mut table = [[0usize; 6]; 6];
    for (i, &t) in truth.iter().enumerate() {
        table[t as usize][kmn.assignment[i] as usize] += 1;
    }
    let names = ["jump", "w-slow", "w-fast", "s-up", "s-mid", "s-low"];
    for (f, row) in table.iter().enumerate() {
        println!("  {:7} {:?}", names[f], row);
    }

    let (paired, unpaired) = alignment_separation(&ae, &refs);
    println!("alignment: paired {paired:.3} vs unpaired {unpaired:.3} (sep {:.3})", paired - unpaired);

    for seed in 0..5u64 {
        let e = elbow_select(&latents, 12, seed);
        let en = elbow_select(&normed, 12, seed);
        println!("elbow seed {seed}: raw k={} | normalized k={} confident={}", e.k, en.k, en.confident);
    }
}
