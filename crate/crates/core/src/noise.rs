//! Exact samplers for K-norm noise, `f(b) ∝ exp(-||b||_K / scale)`.
//!
//! A density of this form factors into a radius `R ~ Gamma(p, scale)` and an
//! independent direction drawn from the cone measure of the unit K-sphere,
//! which is what every sampler here does.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub b: Vec<f64>,
    pub norm_used: NormKind,
    /// Scale of the Gamma radius, i.e. the density is `∝ exp(-||b|| / scale)`.
    pub scale: f64,
}

impl NoiseDraw {
    pub fn radius(&self) -> f64 {
        self.norm_used.norm(&self.b)
    }
}

/// Noise vector for objective perturbation: density `∝ exp(-eps ||b||_2 / (2 xi))`.
pub fn sample_l2_exponential<R: Rng + ?Sized>(
    p: usize,
    epsilon: f64,
    xi: f64,
    rng: &mut R,
) -> Result<NoiseDraw> {
    positive("epsilon", epsilon)?;
    positive("xi", xi)?;
    draw(p, 2.0 * xi / epsilon, NormKind::L2, rng)
}

/// K-norm mechanism noise: density `∝ exp(-eps ||z||_K / sensitivity)`.
pub fn sample_knorm<R: Rng + ?Sized>(
    p: usize,
    epsilon: f64,
    sensitivity: f64,
    norm: NormKind,
    rng: &mut R,
) -> Result<NoiseDraw> {
    positive("epsilon", epsilon)?;
    positive("sensitivity", sensitivity)?;
    draw(p, sensitivity / epsilon, norm, rng)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn draw<R: Rng + ?Sized>(p: usize, scale: f64, norm: NormKind, rng: &mut R) -> Result<NoiseDraw> {
    if p == 0 {
        return Err(Error::InvalidParameter("noise dimension must be >= 1".into()));
    }
    if !scale.is_finite() {
        return Err(Error::InvalidParameter(format!("noise scale {scale} is not finite")));
    }
    let gamma = Gamma::new(p as f64, scale)
        .map_err(|e| Error::InvalidParameter(format!("gamma radius: {e}")))?;
    let radius = gamma.sample(rng);
    let mut b = unit_sphere_direction(p, norm, rng);
    b.iter_mut().for_each(|v| *v *= radius);
    Ok(NoiseDraw { b, norm_used: norm, scale })
}

/// Direction on the unit sphere of `norm`, distributed by the cone measure.
pub fn unit_sphere_direction<R: Rng + ?Sized>(p: usize, norm: NormKind, rng: &mut R) -> Vec<f64> {
    match norm {
        NormKind::L2 => loop {
            let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
            let n = NormKind::L2.norm(&v);
            if n > 0.0 {
                break v.into_iter().map(|x| x / n).collect();
            }
        },
        NormKind::L1 => {
            // Dirichlet(1, ..., 1) via normalised exponentials, with random signs.
            let e: Vec<f64> = (0..p).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = e.iter().sum();
            e.into_iter()
                .map(|v| if rng.random_bool(0.5) { v / total } else { -v / total })
                .collect()
        }
        NormKind::Linf => {
            // Every facet of the cube has the same cone volume.
            let face = rng.random_range(0..p);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (0..p)
                .map(|j| if j == face { sign } else { rng.random_range(-1.0..1.0) })
                .collect()
        }
    }
}

/// Generator used for every seeded stream.
pub type StreamRng = ChaCha8Rng;

/// Independent stream for a path such as `(replication, estimator, k index)`
/// under `master_seed`. Streams for distinct paths do not overlap in practice
/// and do not depend on the order in which they are created.
pub fn derive_rng(master_seed: u64, path: &[u64]) -> StreamRng {
    use rand::SeedableRng;
    let mut state = splitmix64(master_seed ^ 0x5851_F42D_4C95_7F2D);
    for &component in path {
        state = splitmix64(state ^ splitmix64(component.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    StreamRng::from_seed(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn invalid_parameters() {
        let mut rng = StreamRng::seed_from_u64(0);
        assert!(sample_l2_exponential(0, 1.0, 1.0, &mut rng).is_err());
        assert!(sample_l2_exponential(2, 0.0, 1.0, &mut rng).is_err());
        assert!(sample_l2_exponential(2, 1.0, -1.0, &mut rng).is_err());
        assert!(sample_knorm(2, 1.0, f64::NAN, NormKind::L1, &mut rng).is_err());
    }

    #[test]
    fn sphere_structure_is_exact() {
        let mut rng = StreamRng::seed_from_u64(1);
        for p in [1, 2, 7, 35] {
            for _ in 0..2000 {
                let u = unit_sphere_direction(p, NormKind::Linf, &mut rng);
                assert_eq!(u.iter().filter(|v| v.abs() == 1.0).count(), 1);
                assert!(u.iter().all(|v| v.abs() <= 1.0));
                let u = unit_sphere_direction(p, NormKind::L1, &mut rng);
                assert!((NormKind::L1.norm(&u) - 1.0).abs() < 1e-12);
                let u = unit_sphere_direction(p, NormKind::L2, &mut rng);
                assert!((NormKind::L2.norm(&u) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn huge_epsilon_gives_tiny_noise() {
        let mut rng = StreamRng::seed_from_u64(2);
        let d = sample_l2_exponential(3, 1e6, 1.0, &mut rng).unwrap();
        assert!(d.radius() < 1e-3);
        assert_eq!(d.scale, 2e-6);
    }

    #[test]
    fn same_seed_same_draws() {
        let a: Vec<_> = {
            let mut rng = derive_rng(42, &[3, 1]);
            (0..5).map(|_| sample_l2_exponential(4, 0.1, 1.0, &mut rng).unwrap().b).collect()
        };
        let b: Vec<_> = {
            let mut rng = derive_rng(42, &[3, 1]);
            (0..5).map(|_| sample_l2_exponential(4, 0.1, 1.0, &mut rng).unwrap().b).collect()
        };
        assert_eq!(a, b);
        let mut other = derive_rng(42, &[1, 3]);
        let c = sample_l2_exponential(4, 0.1, 1.0, &mut other).unwrap().b;
        assert_ne!(a[0], c);
    }
}
