//! Per-cluster statistics table: kinematic summary plus top tags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::ClusterModel;
use crate::motions::stats::{clip_stats, ClipStats};
use crate::motions::MotionDataset;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster: u32,
    pub count: usize,
    /// True when the cluster is empty and the row is a placeholder.
    pub empty: bool,
    pub displacement_m: f64,
    pub z_move_mm: f64,
    pub speed_mps: f64,
    pub joint_var: f64,
    pub joint_var_upper: f64,
    pub joint_var_lower: f64,
    pub top_tags: Vec<String>,
}

/// Aggregate per-cluster statistics. Rows for empty clusters are emitted
/// with zero counts and flagged.
pub fn cluster_report(model: &ClusterModel, dataset: &MotionDataset) -> Vec<ClusterRow> {
    assert_eq!(
        model.assignment.len(),
        dataset.len(),
        "assignments must cover the dataset"
    );
    let mut rows = Vec::with_capacity(model.k);
    for c in 0..model.k as u32 {
        let members: Vec<usize> = model
            .assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == c)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            rows.push(ClusterRow {
                cluster: c,
                count: 0,
                empty: true,
                displacement_m: 0.0,
                z_move_mm: 0.0,
                speed_mps: 0.0,
                joint_var: 0.0,
                joint_var_upper: 0.0,
                joint_var_lower: 0.0,
                top_tags: Vec::new(),
            });
            continue;
        }
        let mut acc = ClipStats {
            displacement_m: 0.0,
            z_move_mm: 0.0,
            speed_mps: 0.0,
            joint_var: 0.0,
            joint_var_upper: 0.0,
            joint_var_lower: 0.0,
        };
        let mut tag_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &members {
            let clip = &dataset.clips[i];
            let s = clip_stats(clip);
            acc.displacement_m += s.displacement_m;
            acc.z_move_mm += s.z_move_mm;
            acc.speed_mps += s.speed_mps;
            acc.joint_var += s.joint_var;
            acc.joint_var_upper += s.joint_var_upper;
            acc.joint_var_lower += s.joint_var_lower;
            for t in &clip.tags {
                *tag_counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let n = members.len() as f64;
        let mut tags: Vec<(&str, usize)> = tag_counts.into_iter().collect();
        // by frequency, ties alphabetical (BTreeMap keeps keys sorted)
        tags.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows.push(ClusterRow {
            cluster: c,
            count: members.len(),
            empty: false,
            displacement_m: acc.displacement_m / n,
            z_move_mm: acc.z_move_mm / n,
            speed_mps: acc.speed_mps / n,
            joint_var: acc.joint_var / n,
            joint_var_upper: acc.joint_var_upper / n,
            joint_var_lower: acc.joint_var_lower / n,
            top_tags: tags.into_iter().take(2).map(|(t, _)| t.to_string()).collect(),
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motions::{build_dataset, DatasetCounts, Family};
    use crate::sim::RobotModel;

    fn tiny_dataset() -> MotionDataset {
        let counts = DatasetCounts {
            jump: 3,
            stand_low: 0,
            walk_slow: 3,
            stand_mid: 0,
            stand_up: 3,
            walk_fast: 0,
        };
        build_dataset(&RobotModel::standard(), &counts, 5).unwrap()
    }

    #[test]
    fn counts_partition_the_dataset() {
        let ds = tiny_dataset();
        // assign by family to mimic a perfect clustering
        let assignment: Vec<u32> = ds
            .clips
            .iter()
            .map(|c| match c.family {
                Family::Jump => 0,
                Family::WalkSlow => 1,
                _ => 2,
            })
            .collect();
        let model = ClusterModel { k: 3, centroids: vec![], assignment, wcss: 0.0 };
        let rows = cluster_report(&model, &ds);
        let total: usize = rows.iter().map(|r| r.count).sum();
        assert_eq!(total, ds.len());
    }

    #[test]
    fn pure_jump_cluster_top_tags() {
        let ds = tiny_dataset();
        let assignment: Vec<u32> =
            ds.clips.iter().map(|c| if c.family == Family::Jump { 0 } else { 1 }).collect();
        let model = ClusterModel { k: 2, centroids: vec![], assignment, wcss: 0.0 };
        let rows = cluster_report(&model, &ds);
        assert_eq!(rows[0].top_tags, vec!["jumping".to_string(), "jumps".to_string()]);
    }

    #[test]
    fn empty_cluster_flagged() {
        let ds = tiny_dataset();
        let assignment = vec![0u32; ds.len()];
        let model = ClusterModel { k: 2, centroids: vec![], assignment, wcss: 0.0 };
        let rows = cluster_report(&model, &ds);
        assert!(rows[1].empty);
        assert_eq!(rows[1].count, 0);
    }

    #[test]
    fn standing_cluster_is_slow() {
        let ds = tiny_dataset();
        let assignment: Vec<u32> =
            ds.clips.iter().map(|c| if c.family == Family::StandUp { 0 } else { 1 }).collect();
        let model = ClusterModel { k: 2, centroids: vec![], assignment, wcss: 0.0 };
        let rows = cluster_report(&model, &ds);
        assert!(rows[0].speed_mps < 0.05, "stand cluster speed {}", rows[0].speed_mps);
    }
}
