//! Strictly increasing sampled functions with shape-preserving cubic
//! interpolation and an exact inverse.
//!
//! Out-of-range evaluation is an error by design: extrapolating a
//! monotone inverse silently is how table-based transforms go wrong.

use crate::error::{Error, Result};
use crate::numeric::roots::newton_in_bracket;

/// Strictly increasing table with monotone cubic Hermite interpolation.
///
/// Tangents either come from the Fritsch–Carlson construction or are
/// supplied by the caller (analytic derivatives); supplied tangents are
/// still clamped to the monotone region so the interpolant cannot
/// overshoot.
#[derive(Clone, Debug)]
pub struct MonotoneTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

fn check_strictly_increasing(vals: &[f64], what: &str) -> Result<()> {
    if vals.len() < 2 {
        return Err(Error::Table(format!("{what}: need at least 2 samples")));
    }
    for w in vals.windows(2) {
        if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::Table(format!(
                "{what}: not strictly increasing near {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Clamp tangents so each Hermite piece stays monotone (|m| <= 3 * secant).
fn clamp_monotone(xs: &[f64], ys: &[f64], ms: &mut [f64]) {
    let n = xs.len();
    for i in 0..n {
        if ms[i] < 0.0 {
            ms[i] = 0.0;
        }
        let bound = {
            let left = if i > 0 {
                (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
            } else {
                f64::INFINITY
            };
            let right = if i + 1 < n {
                (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            } else {
                f64::INFINITY
            };
            3.0 * left.min(right)
        };
        if ms[i] > bound {
            ms[i] = bound;
        }
    }
}

impl MonotoneTable {
    /// Builds the table with Fritsch–Carlson tangents.
    pub fn from_samples(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Table("abscissae/ordinates length mismatch".into()));
        }
        check_strictly_increasing(&xs, "abscissae")?;
        check_strictly_increasing(&ys, "ordinates")?;
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut ms = vec![0.0; n];
        ms[0] = secants[0];
        ms[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            ms[i] = if secants[i - 1] * secants[i] > 0.0 {
                0.5 * (secants[i - 1] + secants[i])
            } else {
                0.0
            };
        }
        clamp_monotone(&xs, &ys, &mut ms);
        Ok(Self { xs, ys, ms })
    }

    /// Builds the table with caller-supplied tangents (e.g. analytic
    /// derivatives at the sample points).
    pub fn with_derivatives(xs: Vec<f64>, ys: Vec<f64>, ms: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() != ms.len() {
            return Err(Error::Table("sample/derivative length mismatch".into()));
        }
        check_strictly_increasing(&xs, "abscissae")?;
        check_strictly_increasing(&ys, "ordinates")?;
        if ms.iter().any(|m| !m.is_finite()) {
            return Err(Error::Table("non-finite derivative sample".into()));
        }
        let mut ms = ms;
        clamp_monotone(&xs, &ys, &mut ms);
        Ok(Self { xs, ys, ms })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn y_min(&self) -> f64 {
        self.ys[0]
    }

    pub fn y_max(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.xs
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ys
    }

    fn segment_of_x(&self, x: f64) -> Result<usize> {
        if !(x >= self.x_min() && x <= self.x_max()) {
            return Err(Error::domain(
                "table abscissa",
                format!("{x:e} not in [{:e}, {:e}]", self.x_min(), self.x_max()),
            ));
        }
        Ok(match self.xs.partition_point(|&t| t <= x) {
            0 => 0,
            p if p >= self.xs.len() => self.xs.len() - 2,
            p => p - 1,
        })
    }

    fn hermite(&self, i: usize, x: f64) -> (f64, f64) {
        let w = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / w;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let value = h00 * self.ys[i]
            + h10 * w * self.ms[i]
            + h01 * self.ys[i + 1]
            + h11 * w * self.ms[i + 1];
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * t2 - 2.0 * t;
        let deriv = (d00 * self.ys[i] + d01 * self.ys[i + 1]) / w
            + d10 * self.ms[i]
            + d11 * self.ms[i + 1];
        (value, deriv)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.segment_of_x(x)?;
        Ok(self.hermite(i, x).0)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let i = self.segment_of_x(x)?;
        Ok(self.hermite(i, x).1)
    }

    /// Solves `eval(x) = y` on the sampled range by Newton iteration on
    /// the owning Hermite piece, so forward-then-inverse round-trips to
    /// near machine precision.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !(y >= self.y_min() && y <= self.y_max()) {
            return Err(Error::domain(
                "table ordinate",
                format!("{y:e} not in [{:e}, {:e}]", self.y_min(), self.y_max()),
            ));
        }
        let i = match self.ys.partition_point(|&t| t <= y) {
            0 => 0,
            p if p >= self.ys.len() => self.ys.len() - 2,
            p => p - 1,
        };
        if y == self.ys[i] {
            return Ok(self.xs[i]);
        }
        if y == self.ys[i + 1] {
            return Ok(self.xs[i + 1]);
        }
        newton_in_bracket(
            |x| {
                let (v, d) = self.hermite(i, x);
                (v - y, d)
            },
            self.xs[i],
            self.xs[i + 1],
            1e-15,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_of<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> MonotoneTable {
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        MonotoneTable::from_samples(xs, ys).unwrap()
    }

    #[test]
    fn rejects_non_monotone_ordinates() {
        let r = MonotoneTable::from_samples(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = table_of(|x| x, 0.0, 1.0, 8);
        assert!(t.eval(-0.1).is_err());
        assert!(t.eval(1.1).is_err());
        assert!(t.invert(1.5).is_err());
    }

    #[test]
    fn interpolates_smooth_function() {
        let t = table_of(|x| x.exp(), 0.0, 2.0, 200);
        for k in 0..50 {
            let x = 0.017 + 1.9 * k as f64 / 50.0;
            let v = t.eval(x).unwrap();
            assert!((v - x.exp()).abs() / x.exp() < 1e-7, "x={x} err");
        }
    }

    #[test]
    fn exact_derivatives_boost_accuracy() {
        let xs: Vec<f64> = (0..100).map(|i| 1.0 + i as f64 / 33.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x * x * x).collect();
        let ds: Vec<f64> = xs.iter().map(|&x| 3.0 * x * x).collect();
        let t = MonotoneTable::with_derivatives(xs, ys, ds).unwrap();
        // cubic Hermite reproduces cubics exactly
        let v = t.eval(1.4567).unwrap();
        assert!((v - 1.4567f64.powi(3)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn roundtrip_inverse(
            steps in proptest::collection::vec(1e-3..1.0f64, 4..40),
            jumps in proptest::collection::vec(1e-3..1.0f64, 4..40),
            pick in 0.0..1.0f64,
        ) {
            let n = steps.len().min(jumps.len());
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for i in 0..n {
                xs.push(xs[i] + steps[i]);
                ys.push(ys[i] + jumps[i]);
            }
            let t = MonotoneTable::from_samples(xs, ys).unwrap();
            let x = t.x_min() + pick * (t.x_max() - t.x_min());
            let y = t.eval(x).unwrap();
            let back = t.invert(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * (1.0 + x.abs()),
                "x={x}, back={back}");
        }

        #[test]
        fn eval_is_monotone(
            pick1 in 0.0..1.0f64,
            pick2 in 0.0..1.0f64,
        ) {
            let t = table_of(|x| x + x.sin() * 0.3, 0.0, 6.0, 37);
            let a = t.x_min() + pick1 * (t.x_max() - t.x_min());
            let b = t.x_min() + pick2 * (t.x_max() - t.x_min());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(t.eval(lo).unwrap() <= t.eval(hi).unwrap() + 1e-12);
        }
    }
}
