//! Node priorities and nonparametric scan statistics.

use crate::error::{Error, Result};
use crate::pvalue::PValueRange;

/// Portion of `range` lying below `alpha`, clamped to `[0, 1]`.
#[inline]
pub fn priority(range: &PValueRange, alpha: f64) -> f64 {
    priority_between(range.p_min(), range.p_max(), alpha)
}

#[inline]
pub(crate) fn priority_between(p_min: f64, p_max: f64, alpha: f64) -> f64 {
    if alpha <= p_min {
        0.0
    } else if alpha >= p_max {
        1.0
    } else {
        (alpha - p_min) / (p_max - p_min)
    }
}

/// KL divergence between Bernoulli(x) and Bernoulli(y), with `0 ln 0 = 0`.
pub fn kl_bernoulli(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::InvalidArgument(format!("y = {y} outside (0, 1)")));
    }
    Ok(kl_unchecked(x, y))
}

#[inline]
fn kl_unchecked(x: f64, y: f64) -> f64 {
    let mut kl = 0.0;
    if x > 0.0 {
        kl += x * (x / y).ln();
    }
    if x < 1.0 {
        kl += (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln();
    }
    kl
}

/// Aggregate statistics of a subset at one significance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetStats {
    pub alpha: f64,
    pub n_alpha: f64,
    pub n: usize,
}

impl SubsetStats {
    pub fn new(alpha: f64, n_alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} outside (0, 1]"
            )));
        }
        if n == 0 {
            return Err(Error::EmptySubset);
        }
        if !(n_alpha >= 0.0 && n_alpha <= n as f64) {
            return Err(Error::InvalidArgument(format!(
                "n_alpha = {n_alpha} outside [0, {n}]"
            )));
        }
        Ok(Self { alpha, n_alpha, n })
    }
}

/// Berk-Jones: `N * KL(N_a / N, a)` when the observed fraction exceeds
/// `alpha`, else 0.
pub fn berk_jones(stats: &SubsetStats) -> f64 {
    BerkJones.score(stats.alpha, stats.n_alpha, stats.n)
}

/// A scan statistic over `(alpha, N_alpha, N)`.
pub trait ScanStatistic: Sync {
    fn score(&self, alpha: f64, n_alpha: f64, n: usize) -> f64;

    /// Whether the score is convex along every ray `(N0 + g*i, K0 + i)`.
    /// When true the scan only evaluates the ends of runs of equal-priority
    /// nodes.
    fn convex_in_prefix(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BerkJones;

impl ScanStatistic for BerkJones {
    #[inline]
    fn score(&self, alpha: f64, n_alpha: f64, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        let x = (n_alpha / n).min(1.0);
        if x <= alpha {
            return 0.0;
        }
        n * kl_unchecked(x, alpha)
    }

    // n * KL+(N_a / n, alpha) is the perspective of a convex function.
    fn convex_in_prefix(&self) -> bool {
        true
    }
}
