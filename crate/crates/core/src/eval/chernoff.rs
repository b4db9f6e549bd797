//! Empirical tail-frequency checks against Chernoff-type bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Statistical slack applied to every theoretical tail bound.
pub const DEFAULT_SLACK: f64 = 3.0;

/// `Pr(X > (1 + δ) μ) <= exp(-δ² μ / (2 + δ))` for sums of independent
/// `[0, 1]` variables with mean `μ`.
pub fn upper_tail_bound(mu: f64, delta: f64) -> f64 {
    (-delta * delta / (2.0 + delta) * mu).exp()
}

/// `Pr(X < (1 - δ) μ) <= exp(-δ² μ / 2)`.
pub fn lower_tail_bound(mu: f64, delta: f64) -> f64 {
    (-delta * delta / 2.0 * mu).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub samples: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub threshold: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Counts samples strictly above `threshold` and passes when their frequency
/// is at most `bound * slack`.
pub fn chernoff_check(
    samples: &[f64],
    threshold: f64,
    bound: f64,
    slack: f64,
) -> Result<ChernoffReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let exceedances = samples.iter().filter(|&&x| x > threshold).count();
    let frequency = exceedances as f64 / samples.len() as f64;
    Ok(ChernoffReport {
        samples: samples.len(),
        exceedances,
        frequency,
        threshold,
        bound,
        slack,
        pass: frequency <= bound * slack,
    })
}
