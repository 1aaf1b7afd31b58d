use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Effective sample size of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub value: f64,
    /// Set when the chain is constant; `value` is then the chain length.
    pub degenerate: bool,
}

/// Effective sample size by Geyer's initial positive sequence.
///
/// Autocorrelations are summed in adjacent pairs `ρ₂ⱼ + ρ₂ⱼ₊₁` until a pair
/// turns nonpositive; the result is `n / (-1 + 2 Σ pairs)` clipped to
/// `(0, n]`.
pub fn ess<T: Real>(chain: &[T]) -> Result<EssEstimate> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("ESS needs at least 10 draws, got {n}")));
    }
    let x: Vec<f64> = chain.iter().map(|v| v.as_f64()).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let c0 = autocov(0);
    if !(c0 > 0.0) || c0 <= f64::EPSILON * mean.abs().max(1.0).powi(2) * 1e-6 {
        return Ok(EssEstimate { value: n as f64, degenerate: true });
    }
    let mut sum_pairs = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        lag += 2;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    let value = (n as f64 / tau).clamp(f64::MIN_POSITIVE, n as f64);
    Ok(EssEstimate { value, degenerate: false })
}
