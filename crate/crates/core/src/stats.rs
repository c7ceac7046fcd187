//! Binomial confidence intervals for error-rate comparisons.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// True when the two intervals do not overlap.
    pub fn separated_from(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }
}

/// Wilson score interval for `errors` successes in `trials` Bernoulli trials.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lo: if errors == 0 {
            0.0
        } else {
            (center - half).max(0.0)
        },
        hi: if errors >= trials {
            1.0
        } else {
            (center + half).min(1.0)
        },
    }
}
