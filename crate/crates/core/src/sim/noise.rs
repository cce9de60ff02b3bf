use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kinematics::CableLengths;

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation `sigma` to
/// every cable, drawing from `rng`.
pub fn add_noise<R: Rng + ?Sized>(l: &CableLengths, sigma: f64, rng: &mut R) -> Result<CableLengths> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(*l);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let a = l.as_array();
    CableLengths::new(std::array::from_fn(|i| a[i] + normal.sample(rng)))
}

/// [`add_noise`] with a fresh generator seeded from `seed`.
pub fn inject_noise(l: &CableLengths, sigma: f64, seed: u64) -> Result<CableLengths> {
    add_noise(l, sigma, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> CableLengths {
        CableLengths::new([0.5; 8]).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        assert_eq!(inject_noise(&base(), 0.0, 3).unwrap(), base());
    }

    #[test]
    fn negative_sigma_is_rejected() {
        assert!(inject_noise(&base(), -1e-3, 3).is_err());
    }

    #[test]
    fn same_seed_same_noise() {
        assert_eq!(
            inject_noise(&base(), 1e-3, 11).unwrap(),
            inject_noise(&base(), 1e-3, 11).unwrap()
        );
        assert_ne!(
            inject_noise(&base(), 1e-3, 11).unwrap(),
            inject_noise(&base(), 1e-3, 12).unwrap()
        );
    }

    #[test]
    fn sample_std_matches_sigma() {
        let sigma = 1.2e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut sum = [0.0; 8];
        let mut sq = [0.0; 8];
        for _ in 0..n {
            let l = add_noise(&base(), sigma, &mut rng).unwrap().as_array();
            for i in 0..8 {
                let e = l[i] - 0.5;
                sum[i] += e;
                sq[i] += e * e;
            }
        }
        for i in 0..8 {
            let mean = sum[i] / n as f64;
            let std = (sq[i] / n as f64 - mean * mean).sqrt();
            assert!((std - sigma).abs() / sigma < 0.05, "cable {i}: {std}");
        }
    }
}
