//! Sample quantiles by linear interpolation between order statistics.
//!
//! The position of probability `p` in a sorted sample of size `m` is
//! `h = (m - 1) p + 1` (1-based); the quantile interpolates between the
//! order statistics either side of `h`. This is the default convention of
//! R's `quantile()` and NumPy's `percentile()`, and is used by every module
//! of the crate.

use crate::error::{Error, Result};

/// Quantile of an already sorted, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= m {
        return sorted[m - 1];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if frac == 0.0 || a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

/// Sorted copy of `x`; rejects empty input and NaN/infinite values.
pub fn sorted_copy(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn quantile(x: &[f64], p: f64) -> Result<f64> {
    Ok(quantile_sorted(&sorted_copy(x)?, p))
}

/// Median; the mean of the two central order statistics for even sizes.
pub fn median(x: &[f64]) -> Result<f64> {
    quantile(x, 0.5)
}
