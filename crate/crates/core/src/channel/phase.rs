//! Rotation streams: laser phase noise and carrier frequency offset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::signal::Rotation2x2Stream;
use crate::{Error, Result};

/// Seeded generator for one named random stream of a scenario.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Wiener phase: `θ_0 = 0`, `θ_t = θ_{t-1} + w_t`, `w_t ~ N(0, variance)`.
pub fn make_phase_noise(variance: f64, n: usize, seed: u64) -> Result<Rotation2x2Stream> {
    make_phase_noise_from(variance, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn make_phase_noise_from<R: rand::Rng + ?Sized>(
    variance: f64,
    n: usize,
    rng: &mut R,
) -> Result<Rotation2x2Stream> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::invalid("linewidth variance", format!("{variance} must be finite and >= 0")));
    }
    if variance == 0.0 || n == 0 {
        return Ok(Rotation2x2Stream::zeros(n));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid("linewidth variance", e.to_string()))?;
    let mut theta = Vec::with_capacity(n);
    let mut acc = 0.0;
    theta.push(acc);
    for _ in 1..n {
        acc += normal.sample(rng);
        theta.push(acc);
    }
    Rotation2x2Stream::new(theta)
}

/// `θ_t = fo t + ramp t^2 / 2`.
pub fn make_fo_stream(fo: f64, ramp: f64, n: usize) -> Rotation2x2Stream {
    let theta = (0..n)
        .map(|t| {
            let t = t as f64;
            fo * t + 0.5 * ramp * t * t
        })
        .collect();
    Rotation2x2Stream::new(theta).unwrap_or_else(|_| Rotation2x2Stream::zeros(n))
}
