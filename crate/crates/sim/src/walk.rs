use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Mean-reverting Gaussian random walk clamped to a range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Walk {
    pub std: f64,
    /// Fraction of the gap to the mean closed per step.
    pub reversion: f64,
}

impl Walk {
    pub fn frozen() -> Self {
        Self {
            std: 0.0,
            reversion: 0.0,
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, x: f64, mean: f64, range: (f64, f64), rng: &mut R) -> f64 {
        let noise = if self.std > 0.0 {
            Normal::new(0.0, self.std).map_or(0.0, |n| n.sample(rng))
        } else {
            0.0
        };
        (x + self.reversion * (mean - x) + noise).clamp(range.0, range.1)
    }
}
