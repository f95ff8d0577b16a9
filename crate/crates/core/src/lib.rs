//! Desk-scale numerical laboratory for singular quasi-linear elliptic
//! boundary value problems on intervals and radial balls.
//!
//! The problem class is
//!
//! ```text
//! -div(a(u) Du) + a'(u)/2 |Du|^2 = f(u),   u > 0 in Ω,   u = 0 on ∂Ω,
//! ```
//!
//! with a diffusion coefficient `a` that may blow up at zero like `s^(-2μ)`
//! (0 ≤ μ < 1) and a source `f` that blows up like `s^(-γ)` (γ > 1). The
//! crate builds the change of variable `u = g(v)` that reduces the problem
//! to the semilinear equation `-Δv = h(v)`, constructs the boundary profile
//! that encodes the vanishing rate of `v` near `∂Ω`, solves the reduced
//! problem on graded meshes with Newton continuation, and verifies the
//! boundary rate, gradient blow-up, regularity class and global envelope
//! numerically.
//!
//! Everything is deterministic: no randomness is used anywhere. With the
//! `parallel` feature (on by default) the table builds, grid audits and
//! batch runs use rayon; without it the same code runs sequentially.

// Validation favors `!(x > 0.0)` over `x <= 0.0`: the negated form also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod batch;
pub mod bvp;
pub mod coefficients;
pub mod error;
pub mod export;
pub mod interp;
pub mod mesh;
pub mod numeric;
pub mod profile;
pub mod report;
pub mod transform;

pub use error::{Error, Result};
