//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on `[a, b]`; requires a sign change.
pub fn brent<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::RootSearch(format!(
            "no sign change on [{a:e}, {b:e}] (f = {fa:e}, {fb:e})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0)),
                    (q0 - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else if xm > 0.0 {
            tol1
        } else {
            -tol1
        };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Ok(b)
}

/// Newton iteration with bisection safeguard for an increasing function
/// with `f(lo) <= 0 <= f(hi)`. `f` returns `(value, derivative)`.
/// `xtol` is relative to the bracket magnitude.
pub fn newton_in_bracket<F: Fn(f64) -> (f64, f64)>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::RootSearch(format!("empty bracket [{lo:e}, {hi:e}]")));
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(x);
        if v == 0.0 {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = if d > 0.0 { x - v / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= xtol * scale {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
