//! Shared numerical kernels: quadrature, root finding, sequence
//! extrapolation and least-squares fits.

pub mod extrapolate;
pub mod fit;
pub mod quad;
pub mod roots;

pub use extrapolate::{empirical_limit, LimitEstimate};
pub use fit::{fit_line, fit_power_law, LineFit, RateFit};
pub use quad::{integrate, integrate_to_infinity};
pub use roots::{brent, newton_in_bracket};
