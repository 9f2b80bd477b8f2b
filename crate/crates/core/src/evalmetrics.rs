//! Evaluation metrics: pooled relative squared error, stability
//! classification scores, trajectory envelopes, and the median helper
//! used by the timing comparison.

use alloc::vec::Vec;

#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;

use crate::datagen::STABILITY_THRESHOLD_HZ;
use crate::error::{CoreError, Result};

/// Pooled relative squared error over a whole set:
/// `||pred - truth||^2 / ||truth||^2` with both norms taken across every
/// entry of every case.
pub fn relative_mse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.is_empty() {
        return Err(CoreError::EmptyInput("relative_mse on empty set".into()));
    }
    if preds.len() != targets.len() {
        return Err(CoreError::ShapeMismatch(
            alloc::format!("relative_mse lengths {} vs {}", preds.len(), targets.len()),
        ));
    }
    let mut err = 0.0;
    let mut norm = 0.0;
    for (&p, &t) in preds.iter().zip(targets) {
        err += (p - t) * (p - t);
        norm += t * t;
    }
    if norm == 0.0 {
        return Err(CoreError::DegenerateTarget { sample: 0 });
    }
    Ok(err / norm)
}

/// Stability rule applied to a predicted frequency window: mean absolute
/// frequency deviation (Hz) at or below the threshold means stable.
/// The window must cover the post-fault interval the caller selected.
pub fn predict_stability(omega_hz_window: &[f64]) -> Result<bool> {
    if omega_hz_window.is_empty() {
        return Err(CoreError::InsufficientHorizon(
            "empty frequency window".into(),
        ));
    }
    if omega_hz_window.iter().any(|v| !v.is_finite()) {
        return Ok(false);
    }
    let mean = omega_hz_window.iter().map(|v| v.abs()).sum::<f64>()
        / omega_hz_window.len() as f64;
    Ok(mean <= STABILITY_THRESHOLD_HZ)
}

/// Classification scores; `None` marks a not-applicable score (empty
/// class), never 0/0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    /// Fraction of truly unstable cases labeled stable.
    pub type1: Option<f64>,
    /// Fraction of truly stable cases labeled unstable.
    pub type2: Option<f64>,
    pub n_stable: usize,
    pub n_unstable: usize,
}

/// Score predicted stability labels against ground truth.
pub fn classify_and_score(pred_stable: &[bool], true_stable: &[bool]) -> Result<ClassScores> {
    if pred_stable.len() != true_stable.len() {
        return Err(CoreError::ShapeMismatch(
            alloc::format!(
                "classify_and_score lengths {} vs {}",
                pred_stable.len(),
                true_stable.len()
            ),
        ));
    }
    if pred_stable.is_empty() {
        return Err(CoreError::EmptyInput("classify_and_score on empty set".into()));
    }
    let mut n_stable = 0usize;
    let mut n_unstable = 0usize;
    let mut stable_called_unstable = 0usize;
    let mut unstable_called_stable = 0usize;
    for (&p, &t) in pred_stable.iter().zip(true_stable) {
        if t {
            n_stable += 1;
            if !p {
                stable_called_unstable += 1;
            }
        } else {
            n_unstable += 1;
            if p {
                unstable_called_stable += 1;
            }
        }
    }
    Ok(ClassScores {
        type1: (n_unstable > 0).then(|| unstable_called_stable as f64 / n_unstable as f64),
        type2: (n_stable > 0).then(|| stable_called_unstable as f64 / n_stable as f64),
        n_stable,
        n_unstable,
    })
}

/// Pointwise (min, max) band across a set of equally long series.
pub fn envelope(series: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = series.first() else {
        return Err(CoreError::EmptyInput("envelope of empty set".into()));
    };
    let n = first.len();
    if series.iter().any(|s| s.len() != n) {
        return Err(CoreError::ShapeMismatch("envelope series lengths differ".into()));
    }
    let mut lo = first.to_vec();
    let mut hi = first.to_vec();
    for s in &series[1..] {
        for (i, &v) in s.iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    Ok((lo, hi))
}

/// Median of a sample (average of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(CoreError::EmptyDistribution("median of empty sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable samples"));
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
