//! Discrete negative Laplacian on nonuniform interval and radial-ball
//! meshes, in finite-volume (flux) form, plus nodal gradients.

use crate::mesh::{Geometry, Mesh};

/// Tridiagonal rows of the discrete `-Δ` over the interior unknowns.
///
/// Interval: the classical 3-point divided-difference stencil with cell
/// measure `(x_{i+1}-x_{i-1})/2`. Ball: fluxes weighted by `r^{N-1}` at
/// arithmetic midpoints over cells of measure `(r_+^N - r_-^N)/N`; at
/// the center the flux through `r = 0` vanishes, which reproduces the
/// symmetry-reduced stencil `N v''(0)` exactly.
pub(crate) struct DiscreteLaplacian {
    /// Global node index of each row.
    pub interior: Vec<usize>,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

pub(crate) fn assemble(mesh: &Mesh) -> DiscreteLaplacian {
    let x = mesh.nodes();
    let interior: Vec<usize> = mesh.interior().collect();
    let m = interior.len();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];

    match mesh.geometry() {
        Geometry::Interval { .. } => {
            for (k, &i) in interior.iter().enumerate() {
                let hm = x[i] - x[i - 1];
                let hp = x[i + 1] - x[i];
                let hbar = 0.5 * (hm + hp);
                lower[k] = -1.0 / (hm * hbar);
                upper[k] = -1.0 / (hp * hbar);
                diag[k] = -(lower[k] + upper[k]);
            }
        }
        Geometry::Ball { dim, .. } => {
            let nd = dim as f64;
            let pw = |r: f64| r.powi(dim as i32 - 1);
            let vol = |rm: f64, rp: f64| (rp.powi(dim as i32) - rm.powi(dim as i32)) / nd;
            for (k, &i) in interior.iter().enumerate() {
                let rp = 0.5 * (x[i] + x[i + 1]);
                let hp = x[i + 1] - x[i];
                if i == 0 {
                    let v = vol(0.0, rp);
                    upper[k] = -pw(rp) / (hp * v);
                    diag[k] = -upper[k];
                } else {
                    let rm = 0.5 * (x[i - 1] + x[i]);
                    let hm = x[i] - x[i - 1];
                    let v = vol(rm, rp);
                    lower[k] = -pw(rm) / (hm * v);
                    upper[k] = -pw(rp) / (hp * v);
                    diag[k] = -(lower[k] + upper[k]);
                }
            }
        }
    }
    DiscreteLaplacian {
        interior,
        lower,
        diag,
        upper,
    }
}

impl DiscreteLaplacian {
    pub fn rows(&self) -> usize {
        self.interior.len()
    }

    /// Applies the operator to a full nodal vector (boundary values
    /// included), returning one value per interior row.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (k, &i) in self.interior.iter().enumerate() {
            let mut acc = self.diag[k] * v[i] + self.upper[k] * v[i + 1];
            if i > 0 {
                acc += self.lower[k] * v[i - 1];
            }
            out[k] = acc;
        }
        out
    }
}

/// Nodal first derivative: second-order 3-point formula at interior
/// nodes, first-order one-sided at the boundary, zero at a ball center
/// (symmetry).
pub(crate) fn gradient(mesh: &Mesh, v: &[f64]) -> Vec<f64> {
    let x = mesh.nodes();
    let n = x.len();
    let mut out = vec![0.0; n];
    let ball = matches!(mesh.geometry(), Geometry::Ball { .. });
    for i in 0..n {
        out[i] = if i == 0 {
            if ball {
                0.0
            } else {
                (v[1] - v[0]) / (x[1] - x[0])
            }
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / (x[n - 1] - x[n - 2])
        } else {
            let hm = x[i] - x[i - 1];
            let hp = x[i + 1] - x[i];
            // exact on quadratics for any spacing
            (-hp / (hm * (hm + hp))) * v[i - 1]
                + ((hp - hm) / (hm * hp)) * v[i]
                + (hm / (hp * (hm + hp))) * v[i + 1]
        };
    }
    out
}
