//! Alignment and reconstruction losses for the dual-encoder autoencoder.

use crate::net::{NodeId, Tape};

/// Symmetric InfoNCE over cosine-similarity logits: cross-entropy of the
/// matching diagonal in both directions, averaged.
pub fn info_nce(tape: &mut Tape, z_text: NodeId, z_motion: NodeId, temperature: f32) -> NodeId {
    assert!(temperature > 0.0, "temperature must be positive");
    let (bl, bm) = (tape.value(z_text).rows, tape.value(z_motion).rows);
    assert_eq!(bl, bm, "paired batches must have equal length");
    assert!(bl > 0, "empty batch");
    let zl = tape.row_l2_normalize(z_text);
    let zm = tape.row_l2_normalize(z_motion);
    let sim = tape.matmul(zl, zm, true);
    let logits = tape.scale(sim, 1.0 / temperature);
    let ls_a = tape.row_log_softmax(logits);
    let diag_a = tape.diag_mean(ls_a);
    let logits_t = tape.transpose(logits);
    let ls_b = tape.row_log_softmax(logits_t);
    let diag_b = tape.diag_mean(ls_b);
    let sum = tape.add(diag_a, diag_b);
    tape.scale(sum, -0.5)
}

/// Mean squared distance between paired latents.
pub fn l2_align(tape: &mut Tape, z_text: NodeId, z_motion: NodeId) -> NodeId {
    let diff = tape.sub(z_text, z_motion);
    let sq = tape.square(diff);
    tape.mean_all(sq)
}

/// Mean elementwise Huber loss (delta = 1) between a reconstruction and
/// its target.
pub fn huber_recon(tape: &mut Tape, recon: NodeId, target: NodeId) -> NodeId {
    assert_eq!(
        tape.value(recon).shape(),
        tape.value(target).shape(),
        "reconstruction/target shape mismatch"
    );
    let diff = tape.sub(recon, target);
    let h = tape.huber_elem(diff, 1.0);
    tape.mean_all(h)
}

/// Per-term values of the clustering loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub info_nce: f32,
    pub l2: f32,
    pub huber_text: f32,
    pub huber_motion: f32,
}

impl LossBreakdown {
    pub fn total(&self) -> f32 {
        self.info_nce + self.l2 + self.huber_text + self.huber_motion
    }
}

/// The four-term clustering loss: InfoNCE + L2 between latents plus Huber
/// reconstruction from each modality. Returns the scalar node and the
/// per-term breakdown.
pub fn loss_cluster(
    tape: &mut Tape,
    z_text: NodeId,
    z_motion: NodeId,
    recon_text: NodeId,
    recon_motion: NodeId,
    target: NodeId,
    temperature: f32,
) -> (NodeId, LossBreakdown) {
    let nce = info_nce(tape, z_text, z_motion, temperature);
    let l2 = l2_align(tape, z_text, z_motion);
    let ht = huber_recon(tape, recon_text, target);
    let hm = huber_recon(tape, recon_motion, target);
    let breakdown = LossBreakdown {
        info_nce: tape.value(nce).data[0],
        l2: tape.value(l2).data[0],
        huber_text: tape.value(ht).data[0],
        huber_motion: tape.value(hm).data[0],
    };
    let s1 = tape.add(nce, l2);
    let s2 = tape.add(ht, hm);
    let total = tape.add(s1, s2);
    (total, breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Tensor;

    #[test]
    fn single_pair_info_nce_is_zero() {
        let mut tape = Tape::new(0);
        let zl = tape.input(Tensor::row_vec(vec![0.3, -0.2, 0.9]));
        let zm = tape.input(Tensor::row_vec(vec![-0.1, 0.5, 0.2]));
        let loss = info_nce(&mut tape, zl, zm, 0.07);
        assert_eq!(tape.value(loss).data[0], 0.0);
    }

    #[test]
    fn matched_pairs_beat_permuted_pairs() {
        // collinear positives, orthogonal negatives
        let mut tape = Tape::new(0);
        let zl = tape.input(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let zm = tape.input(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let aligned = info_nce(&mut tape, zl, zm, 0.07);
        let aligned_v = tape.value(aligned).data[0];

        let zm_swapped = tape.input(Tensor::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]));
        let mismatched = info_nce(&mut tape, zl, zm_swapped, 0.07);
        let mismatched_v = tape.value(mismatched).data[0];
        assert!(
            aligned_v < mismatched_v,
            "aligned {aligned_v} should beat permuted {mismatched_v}"
        );
        // direct evaluation: logits diag 1/0.07, off-diag 0 -> tiny loss
        assert!(aligned_v < 1e-5);
    }

    #[test]
    fn info_nce_invariant_under_simultaneous_permutation() {
        let a = vec![0.3f32, 0.8, -0.5, 0.2, 0.9, -0.1, 0.4, 0.4, -0.7, 0.6, 0.1, 0.2];
        let b = vec![0.1f32, -0.4, 0.6, 0.7, 0.2, 0.3, -0.2, 0.5, 0.5, -0.3, 0.8, 0.0];
        let eval = |la: &[f32], lb: &[f32]| {
            let mut tape = Tape::new(0);
            let zl = tape.input(Tensor::from_vec(4, 3, la.to_vec()));
            let zm = tape.input(Tensor::from_vec(4, 3, lb.to_vec()));
            let l = info_nce(&mut tape, zl, zm, 0.1);
            tape.value(l).data[0]
        };
        let base = eval(&a, &b);
        // permute rows [0,1,2,3] -> [2,0,3,1] in both batches
        let perm = [2usize, 0, 3, 1];
        let permute = |v: &[f32]| -> Vec<f32> {
            perm.iter().flat_map(|&r| v[r * 3..(r + 1) * 3].to_vec()).collect()
        };
        let permuted = eval(&permute(&a), &permute(&b));
        assert!((base - permuted).abs() < 1e-6);
    }

    #[test]
    fn huber_below_delta_is_quadratic() {
        let mut tape = Tape::new(0);
        let recon = tape.input(Tensor::row_vec(vec![0.5, 0.5]));
        let target = tape.input(Tensor::row_vec(vec![0.0, 0.0]));
        let h = huber_recon(&mut tape, recon, target);
        assert!((tape.value(h).data[0] - 0.5 * 0.25).abs() < 1e-7);
    }

    #[test]
    fn breakdown_sums_to_total_and_perfect_inputs_vanish() {
        let mut tape = Tape::new(0);
        let z = Tensor::row_vec(vec![0.2, -0.6, 0.4]);
        let m = Tensor::row_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let zl = tape.input(z.clone());
        let zm = tape.input(z);
        let rl = tape.input(m.clone());
        let rm = tape.input(m.clone());
        let t = tape.input(m);
        let (total, bd) = loss_cluster(&mut tape, zl, zm, rl, rm, t, 0.07);
        assert_eq!(tape.value(total).data[0], 0.0);
        assert_eq!(bd.total(), 0.0);

        // generic inputs: breakdown sums to total
        let mut tape = Tape::new(0);
        let zl = tape.input(Tensor::from_vec(2, 3, vec![0.3, 0.8, -0.5, 0.2, 0.9, -0.1]));
        let zm = tape.input(Tensor::from_vec(2, 3, vec![0.1, -0.4, 0.6, 0.7, 0.2, 0.3]));
        let rl = tape.input(Tensor::from_vec(2, 2, vec![0.5, 1.5, -0.3, 2.0]));
        let rm = tape.input(Tensor::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]));
        let t = tape.input(Tensor::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]));
        let (total, bd) = loss_cluster(&mut tape, zl, zm, rl, rm, t, 0.07);
        assert!((tape.value(total).data[0] - bd.total()).abs() < 1e-6);
    }
}
