use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::Rng;

/// Standard normal draws by the basic Box-Muller transform. Each uniform
/// pair yields two normals; the second is cached for the next call.
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn vector3(&mut self, sigma: f64) -> Vector3<f64> {
        Vector3::new(self.standard(), self.standard(), self.standard()) * sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn moments_are_standard() {
        let mut g = BoxMuller::new(rng_from_seed(3));
        let n = 200_000;
        let samples: Vec<f64> = (0..n).map(|_| g.standard()).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // 5 standard errors.
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = BoxMuller::new(rng_from_seed(9));
        let mut b = BoxMuller::new(rng_from_seed(9));
        for _ in 0..100 {
            assert_eq!(a.standard().to_bits(), b.standard().to_bits());
        }
    }
}
