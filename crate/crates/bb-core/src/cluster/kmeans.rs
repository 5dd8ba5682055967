//! K-means over latent vectors with k-means++ initialization, restarts,
//! elbow-method cluster-count selection, and the adjusted Rand index for
//! evaluation against hidden labels.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::seeded_rng;

const RESTARTS: usize = 10;
const MAX_ITERS: usize = 300;

/// L2-normalize latent rows: alignment training shapes the latent space
/// on the cosine sphere, so clustering operates on unit vectors.
pub fn normalize_rows(points: &[Vec<f32>]) -> Vec<Vec<f32>> {
    points
        .iter()
        .map(|p| {
            let n = p.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-9);
            p.iter().map(|v| v / n).collect()
        })
        .collect()
}

/// Fitted clustering: centroids, an assignment per point, and the
/// within-cluster sum of squares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f32>>,
    pub assignment: Vec<u32>,
    pub wcss: f64,
}

fn dist_sq(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| ((x - y) as f64).powi(2)).sum()
}

fn assign(points: &[Vec<f32>], centroids: &[Vec<f32>]) -> (Vec<u32>, f64) {
    let mut labels = Vec::with_capacity(points.len());
    let mut wcss = 0.0;
    for p in points {
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = dist_sq(p, centroid);
            if d < best_d {
                best_d = d;
                best = c as u32;
            }
        }
        labels.push(best);
        wcss += best_d;
    }
    (labels, wcss)
}

fn lloyd(points: &[Vec<f32>], mut centroids: Vec<Vec<f32>>) -> ClusterModel {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![u32::MAX; points.len()];
    for _ in 0..MAX_ITERS {
        let (new_labels, _) = assign(points, &centroids);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l as usize] += 1;
            for (s, &v) in sums[l as usize].iter_mut().zip(p) {
                *s += v as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed an empty cluster at the point farthest from its
                // current centroid (deterministic)
                let (far_idx, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, dist_sq(p, &centroids[labels[i] as usize])))
                    .fold((0, -1.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
                centroids[c] = points[far_idx].clone();
            } else {
                for (dst, &s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = (s / counts[c] as f64) as f32;
                }
            }
        }
    }
    let (labels, wcss) = assign(points, &centroids);
    ClusterModel { k, centroids, assignment: labels, wcss }
}

fn kmeans_pp_init<R: Rng>(points: &[Vec<f32>], k: usize, rng: &mut R) -> Vec<Vec<f32>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist_sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut idx = 0;
            for (i, &d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centroids.push(points[next].clone());
        for (slot, p) in d2.iter_mut().zip(points) {
            let d = dist_sq(p, centroids.last().unwrap());
            if d < *slot {
                *slot = d;
            }
        }
    }
    centroids
}

/// K-means with k-means++ restarts; the lowest-WCSS solution wins, ties
/// broken by restart index.
pub fn kmeans(points: &[Vec<f32>], k: usize, seed: u64) -> ClusterModel {
    assert!(k >= 1, "k must be at least 1");
    assert!(k <= points.len(), "k cannot exceed point count");
    let runs: Vec<ClusterModel> = (0..RESTARTS)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded_rng(seed, &format!("kmeans-restart-{r}"));
            let init = kmeans_pp_init(points, k, &mut rng);
            lloyd(points, init)
        })
        .collect();
    runs.into_iter()
        .reduce(|best, cand| if cand.wcss < best.wcss { cand } else { best })
        .expect("at least one restart")
}

/// Elbow selection result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElbowResult {
    pub k: usize,
    /// False when the WCSS curve is too flat for the knee to be
    /// trustworthy (max chord distance < 5% in normalized units).
    pub confident: bool,
    pub wcss: Vec<f64>,
}

/// Pick K by the largest perpendicular distance to the chord of the
/// (normalized) WCSS curve between K = 1 and K = k_max.
pub fn elbow_select(points: &[Vec<f32>], k_max: usize, seed: u64) -> ElbowResult {
    assert!(k_max >= 3, "elbow selection needs k_max >= 3");
    let k_max = k_max.min(points.len());
    let wcss: Vec<f64> = (1..=k_max).map(|k| kmeans(points, k, seed).wcss).collect();
    let w1 = wcss[0].max(1e-12);
    let norm: Vec<f64> = wcss.iter().map(|w| w / w1).collect();
    // chord from (0, norm[0]) to (1, norm[last]) in normalized axes
    let n = norm.len();
    let x = |i: usize| i as f64 / (n - 1) as f64;
    let (x0, y0) = (0.0f64, norm[0]);
    let (x1, y1) = (1.0, norm[n - 1]);
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best_i = 0;
    let mut best_d = -1.0;
    for i in 0..n {
        let d = ((y1 - y0) * x(i) - (x1 - x0) * norm[i] + x1 * y0 - y1 * x0).abs() / len;
        if d > best_d {
            best_d = d;
            best_i = i;
        }
    }
    ElbowResult { k: best_i + 1, confident: best_d >= 0.05, wcss }
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = (*a.iter().max().unwrap_or(&0) + 1) as usize;
    let kb = (*b.iter().max().unwrap_or(&0) + 1) as usize;
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x as usize][y as usize] += 1;
    }
    let comb2 = |v: u64| -> f64 { (v as f64) * (v as f64 - 1.0) / 2.0 };
    let mut sum_ij = 0.0;
    for row in &table {
        for &v in row {
            sum_ij += comb2(v);
        }
    }
    let sum_a: f64 = (0..ka).map(|i| comb2(table[i].iter().sum())).sum();
    let sum_b: f64 = (0..kb)
        .map(|j| comb2((0..ka).map(|i| table[i][j]).sum()))
        .sum();
    let total = comb2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `count` points per blob around random well-separated centers in
    /// `dim` dimensions (matching the latent space this runs on).
    fn blobs(n_blobs: usize, dim: usize, count: usize, spread: f32, seed: u64) -> (Vec<Vec<f32>>, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f32>> = (0..n_blobs)
            .map(|_| (0..dim).map(|_| rng.gen_range(-8.0..8.0f32)).collect())
            .collect();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (ci, c) in centers.iter().enumerate() {
            for _ in 0..count {
                pts.push(c.iter().map(|&v| v + rng.gen_range(-spread..spread)).collect());
                labels.push(ci as u32);
            }
        }
        (pts, labels)
    }

    #[test]
    fn two_separated_blobs_partition_exactly() {
        let (pts, truth) = blobs(2, 8, 40, 0.5, 3);
        let model = kmeans(&pts, 2, 7);
        assert_eq!(adjusted_rand_index(&model.assignment, &truth), 1.0);
    }

    #[test]
    fn k_equals_n_gives_zero_wcss() {
        let (pts, _) = blobs(2, 4, 3, 0.3, 5);
        let model = kmeans(&pts, pts.len(), 1);
        assert!(model.wcss < 1e-9, "wcss = {}", model.wcss);
    }

    #[test]
    fn fixed_seed_reproducible() {
        let (pts, _) = blobs(3, 8, 30, 0.8, 9);
        let a = kmeans(&pts, 3, 42);
        let b = kmeans(&pts, 3, 42);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn elbow_finds_six_blobs() {
        let (pts, _) = blobs(6, 32, 40, 0.7, 13);
        let r = elbow_select(&pts, 12, 99);
        assert_eq!(r.k, 6, "wcss curve: {:?}", r.wcss);
        assert!(r.confident);
    }

    #[test]
    fn single_blob_low_confidence() {
        let (pts, _) = blobs(1, 32, 150, 1.0, 21);
        let r = elbow_select(&pts, 8, 5);
        assert!(!r.confident, "one blob must flag low confidence (k={})", r.k);
    }

    #[test]
    fn wcss_decreases_in_k() {
        let (pts, _) = blobs(3, 16, 50, 1.0, 17);
        let r = elbow_select(&pts, 8, 3);
        for w in r.wcss.windows(2) {
            assert!(w[1] <= w[0] * 1.01, "wcss not decreasing: {:?}", r.wcss);
        }
    }

    #[test]
    fn ari_perfect_and_independent() {
        let a = vec![0u32, 0, 1, 1, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a), 1.0);
        // a permuted labeling is still a perfect match
        let relabeled = vec![2u32, 2, 0, 0, 1, 1];
        assert_eq!(adjusted_rand_index(&a, &relabeled), 1.0);
    }
}
