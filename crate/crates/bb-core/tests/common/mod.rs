//! Independent float64 reference implementations used as test oracles.
//!
//! Everything here is written straight-line from the mathematical
//! definitions and shares no code with the library paths it checks.

#![allow(dead_code)]

/// Straight-line f64 MLP: ELU hidden activations, linear output.
/// Parameter layout per layer: row-major weight `[din x dout]`, then bias
/// `[dout]` — the same order the library's parameter store registers them.
pub struct F64Mlp {
    pub dims: Vec<usize>,
}

impl F64Mlp {
    pub fn n_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn forward(&self, theta: &[f64], input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.dims[0]);
        let mut h: Vec<f64> = input.to_vec();
        let mut off = 0;
        let last = self.dims.len() - 2;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (din, dout) = (w[0], w[1]);
            let mut out = vec![0.0; dout];
            for i in 0..din {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += h[i] * theta[off + i * dout + j];
                }
            }
            off += din * dout;
            for (j, o) in out.iter_mut().enumerate() {
                *o += theta[off + j];
            }
            off += dout;
            if l != last {
                for o in &mut out {
                    if *o <= 0.0 {
                        *o = o.exp() - 1.0;
                    }
                }
            }
            h = out;
        }
        h
    }
}

/// Central finite differences of a scalar function of a flat parameter
/// vector.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], eps: f64) -> Vec<f64> {
    let mut grad = vec![0.0; theta.len()];
    let mut t = theta.to_vec();
    for i in 0..theta.len() {
        t[i] = theta[i] + eps;
        let up = f(&t);
        t[i] = theta[i] - eps;
        let down = f(&t);
        t[i] = theta[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    grad
}

/// Gradient-check error: |a - b| / max(1, |a|, |b|), maximized over
/// entries.
pub fn max_rel_err(analytic: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(analytic.len(), reference.len());
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs()))
        .fold(0.0, f64::max)
}

/// Dense single-window causal multi-head attention in f64, from the
/// definition: per head, scores = QKᵀ/√dh with a causal mask (query i sees
/// kv j <= i + offset), softmax rows, times V.
pub fn dense_attention_f64(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
    heads: usize,
    offset: usize,
) -> Vec<Vec<f64>> {
    let d = q[0].len();
    assert_eq!(d % heads, 0);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![vec![0.0; d]; q.len()];
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..q.len() {
            let visible = (i + offset + 1).min(k.len());
            let mut scores = vec![f64::NEG_INFINITY; k.len()];
            for (j, s) in scores.iter_mut().enumerate().take(visible) {
                *s = q[i][cols.clone()]
                    .iter()
                    .zip(&k[j][cols.clone()])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * scale;
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for j in 0..visible {
                let p = exps[j] / denom;
                for c in cols.clone() {
                    out[i][c] += p * v[j][c];
                }
            }
        }
    }
    out
}

/// Diagonal-Gaussian KL divergence KL(p || q) from the closed form.
pub fn kl_diag_gaussian_f64(mp: &[f64], sp: &[f64], mq: &[f64], sq: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mp.len() {
        kl += (sq[i] / sp[i]).ln() + (sp[i] * sp[i] + (mp[i] - mq[i]).powi(2)) / (2.0 * sq[i] * sq[i])
            - 0.5;
    }
    kl
}
