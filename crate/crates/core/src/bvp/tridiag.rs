//! Thomas elimination for tridiagonal systems.
//!
//! The Jacobians assembled here are M-matrices (positive diagonal,
//! nonpositive off-diagonals, diagonally dominant), so elimination
//! without pivoting is stable.

/// Solves the tridiagonal system in place; `rhs` becomes the solution.
/// `lower[k]` couples row `k` to `k-1`, `upper[k]` to `k+1`.
pub(crate) fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    let mut scratch = vec![0.0; n];
    let mut piv = diag[0];
    rhs[0] /= piv;
    for k in 1..n {
        scratch[k] = upper[k - 1] / piv;
        piv = diag[k] - lower[k] * scratch[k];
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / piv;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= scratch[k + 1] * rhs[k + 1];
    }
}
