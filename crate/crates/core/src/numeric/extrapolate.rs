//! Richardson-style extrapolation of scaled limits from geometric
//! sample sequences.

use crate::error::{Error, Result};
use serde::Serialize;

/// Outcome of a limit extrapolation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LimitEstimate {
    pub limit: f64,
    pub error: f64,
    pub converged: bool,
}

/// Extrapolates `lim value(s)/s^exponent` as `s -> 0` from samples taken
/// at geometrically decreasing abscissae (largest `s` first).
///
/// The scaled sequence `q_i` is assumed to approach its limit with a
/// power-law correction, so consecutive increments decay geometrically;
/// the tail increment ratio removes the leading correction. A
/// non-decaying or sign-flipping increment tail yields
/// `converged = false` with the last sample as the estimate.
pub fn empirical_limit(samples: &[(f64, f64)], exponent: f64) -> Result<LimitEstimate> {
    if samples.len() < 4 {
        return Err(Error::invalid(
            "samples",
            format!("need at least 4 samples, got {}", samples.len()),
        ));
    }
    for w in samples.windows(2) {
        if !(w[1].0 < w[0].0) || !(w[1].0 > 0.0) {
            return Err(Error::invalid(
                "samples",
                "abscissae must be positive and strictly decreasing",
            ));
        }
    }
    let q: Vec<f64> = samples
        .iter()
        .map(|&(s, v)| v / s.powf(exponent))
        .collect();
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("scaled samples", "non-finite value"));
    }
    let n = q.len();
    let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d: Vec<f64> = q.windows(2).map(|w| w[1] - w[0]).collect();

    // A tail flat to rounding noise is a converged constant; increment
    // ratios would be pure noise there.
    let noise_floor = 1e-11 * scale;
    if d.iter().rev().take(2).all(|v| v.abs() <= noise_floor) {
        let spread = d.iter().rev().take(2).fold(0.0f64, |m, v| m.max(v.abs()));
        return Ok(LimitEstimate {
            limit: q[n - 1],
            error: spread,
            converged: true,
        });
    }

    let d_last = d[d.len() - 1];
    let d_prev = d[d.len() - 2];
    let rho = d_last / d_prev;
    if !(rho > 0.0 && rho < 0.97) {
        return Ok(LimitEstimate {
            limit: q[n - 1],
            error: d_last.abs(),
            converged: false,
        });
    }
    let limit = q[n - 1] + d_last * rho / (1.0 - rho);

    // Cross-check against the extrapolation from one step earlier.
    let alt = if d.len() >= 3 && d[d.len() - 3] != 0.0 {
        let rho_prev = d_prev / d[d.len() - 3];
        if rho_prev > 0.0 && rho_prev < 1.0 {
            q[n - 2] + d_prev * rho_prev / (1.0 - rho_prev)
        } else {
            q[n - 1]
        }
    } else {
        q[n - 1]
    };
    let error = (limit - alt).abs().max(f64::EPSILON * limit.abs());
    Ok(LimitEstimate {
        limit,
        error,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(start: f64, ratio: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| start * ratio.powi(k as i32)).collect()
    }

    #[test]
    fn constant_sequence_is_exact() {
        let samples: Vec<(f64, f64)> = geometric(1e-2, 0.1, 5)
            .into_iter()
            .map(|s| (s, 3.25 * s))
            .collect();
        let est = empirical_limit(&samples, 1.0).unwrap();
        assert!((est.limit - 3.25).abs() <= 1e-11 * 3.25);
        assert!(est.error <= 1e-10);
        assert!(est.converged);
    }

    #[test]
    fn linear_correction_removed() {
        // q(s) = 1 + s sampled at s = 1e-2 .. 1e-5.
        let samples: Vec<(f64, f64)> = geometric(1e-2, 0.1, 4)
            .into_iter()
            .map(|s| (s, 1.0 + s))
            .collect();
        let est = empirical_limit(&samples, 0.0).unwrap();
        assert!((est.limit - 1.0).abs() < 1e-5, "limit {}", est.limit);
        assert!(est.converged);
    }

    #[test]
    fn oscillating_tail_flagged() {
        let samples = vec![(1e-1, 1.1), (1e-2, 0.9), (1e-3, 1.1), (1e-4, 0.9)];
        let est = empirical_limit(&samples, 0.0).unwrap();
        assert!(!est.converged);
    }

    #[test]
    fn rejects_short_input() {
        assert!(empirical_limit(&[(1.0, 1.0), (0.1, 1.0)], 0.0).is_err());
    }
}
