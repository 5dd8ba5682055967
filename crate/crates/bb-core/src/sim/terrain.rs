//! Ground height profiles.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Terrain profile. Rough terrain is a sum of three sinusoids with small
/// amplitudes and per-episode random phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Terrain {
    Flat,
    Rough { components: [(f64, f64, f64); 3] },
}

impl Terrain {
    pub fn height(&self, x: f64) -> f64 {
        match self {
            Terrain::Flat => 0.0,
            Terrain::Rough { components } => components
                .iter()
                .map(|&(a, w, p)| a * (w * x + p).sin())
                .sum(),
        }
    }

    /// Sample rough terrain; total amplitude stays at or below 0.02 m.
    pub fn sample_rough<R: Rng>(rng: &mut R) -> Self {
        let mut components = [(0.0, 0.0, 0.0); 3];
        for c in &mut components {
            let amp = rng.gen_range(0.002..0.02 / 3.0);
            let omega = rng.gen_range(5.0..15.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            *c = (amp, omega, phase);
        }
        Terrain::Rough { components }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rough_terrain_stays_within_amplitude_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let t = Terrain::sample_rough(&mut rng);
            for i in 0..2000 {
                let h = t.height(i as f64 * 0.01 - 10.0);
                assert!(h.abs() <= 0.02 + 1e-12);
            }
        }
    }
}
