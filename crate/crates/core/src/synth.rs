//! Deterministic synthetic test images.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Standard deviation of the additive noise in the noisy kinds.
pub const DEFAULT_NOISE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Left half 0, right half 1.
    Step,
    /// Centered disk of value 1 and radius `size/4` on a zero background.
    Disk,
    /// Horizontal ramp, pixel `(i, j)` equal to `i/(size-1)`.
    Ramp,
    /// [`SynthKind::Ramp`] plus seeded Gaussian noise.
    RampNoise,
    /// Centered disk of value 0.8 on a 0.2 background plus seeded noise;
    /// the dividing edge stays away from the image boundary.
    TwoRegion,
}

impl SynthKind {
    pub const ALL: [SynthKind; 5] = [
        SynthKind::Step,
        SynthKind::Disk,
        SynthKind::Ramp,
        SynthKind::RampNoise,
        SynthKind::TwoRegion,
    ];

    pub fn is_noisy(self) -> bool {
        matches!(self, SynthKind::RampNoise | SynthKind::TwoRegion)
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Step => "step",
            SynthKind::Disk => "disk",
            SynthKind::Ramp => "ramp",
            SynthKind::RampNoise => "ramp+noise",
            SynthKind::TwoRegion => "two-region",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(SynthKind::Step),
            "disk" => Ok(SynthKind::Disk),
            "ramp" => Ok(SynthKind::Ramp),
            "ramp+noise" | "ramp_noise" | "ramp-noise" => Ok(SynthKind::RampNoise),
            "two-region" | "two_region" => Ok(SynthKind::TwoRegion),
            other => Err(Error::param(
                "kind",
                format!("unknown image kind `{other}` (step, disk, ramp, ramp+noise, two-region)"),
            )),
        }
    }
}

/// Generates a `size x size` image with unit pixel spacing.
pub fn synthesize(kind: SynthKind, size: usize, seed: u64) -> Result<ScalarField> {
    synthesize_with_noise(kind, size, seed, DEFAULT_NOISE)
}

pub fn synthesize_with_noise(
    kind: SynthKind,
    size: usize,
    seed: u64,
    noise: f64,
) -> Result<ScalarField> {
    if size < 2 {
        return Err(Error::param("size", format!("must be at least 2, got {size}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::param("noise", format!("must be >= 0, got {noise}")));
    }
    let n = size as f64;
    let c = (n - 1.0) / 2.0;
    let clean = ScalarField::from_fn(size, size, 1.0, |i, j| {
        let (x, y) = (i as f64, j as f64);
        match kind {
            SynthKind::Step => (i >= size / 2) as u8 as f64,
            SynthKind::Disk => (((x - c).powi(2) + (y - c).powi(2)).sqrt() <= n / 4.0) as u8 as f64,
            SynthKind::Ramp | SynthKind::RampNoise => x / (n - 1.0),
            SynthKind::TwoRegion => {
                if ((x - c).powi(2) + (y - c).powi(2)).sqrt() <= 0.3 * n {
                    0.8
                } else {
                    0.2
                }
            }
        }
    })?;
    if !kind.is_noisy() || noise == 0.0 {
        return Ok(clean);
    }
    add_gaussian_noise(&clean, noise, seed)
}

/// Adds i.i.d. `N(0, noise²)` samples drawn from `seed`; values are not
/// clamped.
pub fn add_gaussian_noise(u: &ScalarField, noise: f64, seed: u64) -> Result<ScalarField> {
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::param("noise", format!("must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::param("noise", e.to_string()))?;
    let noisy: Vec<f64> = u.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
    u.with_values(noisy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_values_are_exact() {
        let u = synthesize(SynthKind::Ramp, 64, 0).unwrap();
        for j in 0..64 {
            for i in 0..64 {
                assert_eq!(u.get(i, j), i as f64 / 63.0);
            }
        }
    }

    #[test]
    fn step_is_seed_independent() {
        let a = synthesize(SynthKind::Step, 64, 1).unwrap();
        let b = synthesize(SynthKind::Step, 64, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(31, 10), 0.0);
        assert_eq!(a.get(32, 10), 1.0);
    }

    #[test]
    fn noisy_kinds_are_deterministic_per_seed() {
        let a = synthesize(SynthKind::RampNoise, 32, 7).unwrap();
        let b = synthesize(SynthKind::RampNoise, 32, 7).unwrap();
        let c = synthesize(SynthKind::RampNoise, 32, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn two_region_edge_avoids_boundary() {
        let u = synthesize_with_noise(SynthKind::TwoRegion, 64, 0, 0.0).unwrap();
        for k in u.boundary_indices() {
            assert_eq!(u.values()[k], 0.2);
        }
        assert_eq!(u.get(32, 32), 0.8);
    }

    #[test]
    fn kinds_parse() {
        for kind in SynthKind::ALL {
            assert_eq!(kind.to_string().parse::<SynthKind>().unwrap(), kind);
        }
        assert!("plaid".parse::<SynthKind>().is_err());
    }
}
