use serde::Serialize;

use crate::error::{Error, Result};

/// Hill estimate of a tail index, clamped to the admissible range `(1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIndexEstimate {
    pub alpha: f64,
    /// Estimate before clamping.
    pub raw: f64,
    pub k: usize,
    /// Set when `raw` fell outside `(1, 2]`.
    pub out_of_range: bool,
}

/// Default number of order statistics: `floor(sqrt(n))`.
pub fn default_k(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// Smallest value strictly above 1 used when clamping.
const LOWER_CLAMP: f64 = 1.0 + 1e-9;

/// Hill estimator over the `k` largest absolute values:
/// `1 / ((1/k) Σ_{i<k} ln(X_(i) / X_(k)))` with `X_(0) >= X_(1) >= ...`.
pub fn estimate_tail_index(samples: &[f64], k: usize) -> Result<TailIndexEstimate> {
    if k < 2 {
        return Err(Error::invalid("k", format!("{k} must be at least 2")));
    }
    if samples.len() < 2 * k {
        return Err(Error::invalid(
            "samples",
            format!(
                "{} samples are too few for k = {k} (need {})",
                samples.len(),
                2 * k
            ),
        ));
    }
    let mut mags = Vec::with_capacity(samples.len());
    for (i, &x) in samples.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite { index: i, value: x });
        }
        mags.push(x.abs());
    }
    // Only the top k + 1 order statistics are needed.
    let (top, threshold, _) = mags.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = *threshold;
    if threshold <= 0.0 {
        return Err(Error::invalid(
            "samples",
            "threshold order statistic is zero",
        ));
    }
    let h = top.iter().map(|&x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if h <= 0.0 {
        return Err(Error::invalid(
            "samples",
            "degenerate order statistics (all values equal)",
        ));
    }
    let raw = 1.0 / h;
    let alpha = raw.clamp(LOWER_CLAMP, 2.0);
    Ok(TailIndexEstimate {
        alpha,
        raw,
        k,
        out_of_range: !(raw > 1.0 && raw <= 2.0),
    })
}
