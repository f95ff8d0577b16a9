//! Ordinary least squares on lines and power laws.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Least-squares line through `(x, y)` points.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Window(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::Window("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in points {
        let e = y - (slope * x + intercept);
        ss_res += e * e;
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        n,
    })
}

/// A fitted power law `y ≈ amplitude * x^exponent` over a window.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Log-log least squares on strictly positive `(x, y)` points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::Window(
            "power-law fit needs strictly positive data".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    let line = fit_line(&logs)?;
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit {
        exponent: line.slope,
        amplitude: 10f64.powf(line.intercept),
        r_squared: line.r_squared,
        window: (lo, hi),
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..12)
            .map(|i| {
                let x = 10f64.powf(-(i as f64) / 3.0);
                (x, 2.0 * x.powf(0.5))
            })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!((fit.amplitude - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }
}
