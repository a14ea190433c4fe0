//! Reproducible normal variates on independent ChaCha substreams.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::normal::std_normal_quantile;

/// SplitMix64 finalizer, used to fold identifiers into seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A stream of uniform and normal variates.
///
/// Each `(seed, cell_id, replicate)` triple selects its own ChaCha8 key and
/// stream number, so a replicate's draws never depend on how many other
/// replicates were generated or in which order.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn substream(seed: u64, cell_id: u64, replicate: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(cell_id)));
        rng.set_stream(replicate);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn next_open_unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Normal variate by inversion of the standard normal CDF.
    pub fn draw_normal(&mut self, mu: f64, sigma: f64) -> f64 {
        debug_assert!(sigma >= 0.0);
        let u = self.next_open_unit();
        // u is strictly inside (0, 1) by construction.
        let z = std_normal_quantile(u).unwrap_or(0.0);
        mu + sigma * z
    }
}

pub fn draw_normal(stream: &mut NormalStream, mu: f64, sigma: f64) -> f64 {
    stream.draw_normal(mu, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_substream() {
        let mut a = NormalStream::substream(42, 7, 3);
        let mut b = NormalStream::substream(42, 7, 3);
        for _ in 0..100 {
            assert_eq!(a.draw_normal(0.0, 1.0).to_bits(), b.draw_normal(0.0, 1.0).to_bits());
        }
        let mut c = NormalStream::substream(42, 7, 4);
        let mut d = NormalStream::substream(42, 8, 3);
        let first = NormalStream::substream(42, 7, 3).draw_normal(0.0, 1.0);
        assert_ne!(first, c.draw_normal(0.0, 1.0));
        assert_ne!(first, d.draw_normal(0.0, 1.0));
    }

    #[test]
    fn zero_sigma_is_the_mean() {
        let mut s = NormalStream::new(1);
        assert_eq!(draw_normal(&mut s, 2.5, 0.0), 2.5);
    }

    #[test]
    fn moments_of_a_million_draws() {
        let (mu, sigma) = (1.5, 0.2);
        let n = 1_000_000;
        let mut s = NormalStream::new(2024);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let v = s.draw_normal(mu, sigma);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - mu).abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "var {var}");
    }
}
