//! The per-run JSON report object: family and mesh parameters, audit
//! verdicts, limit cross-checks, profile amplitude routes, solve
//! diagnostics, rate and envelope fits, the regularity report and the
//! H¹ evidence. Serialized with a fixed field order so identical runs
//! produce identical bytes.

use serde::Serialize;

use crate::analysis::{BoundFit, H1Report, RateFit, RegularityReport};
use crate::bvp::BracketInfo;
use crate::coefficients::AuditReport;
use crate::numeric::LimitEstimate;
use crate::profile::ProfileAmplitude;
use crate::transform::TransformLimits;

#[derive(Clone, Debug, Serialize)]
pub struct FamilyParams {
    pub kind: String,
    pub mu: f64,
    pub gamma: f64,
    pub a0: f64,
    pub f0: f64,
    pub s0: f64,
    pub tail: crate::coefficients::Tail,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeshParams {
    pub n: usize,
    pub q: f64,
    pub min_cell: f64,
    pub nodes: usize,
}

/// Both closed-form amplitude routes side by side with their exact
/// ratio; the balance route is what the constructed profile follows.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AmplitudeTable {
    pub primitive_route: ProfileAmplitude,
    pub balance_route: ProfileAmplitude,
    pub primitive_over_balance: f64,
    pub expected_primitive_over_balance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub epsilon_final: f64,
    pub newton_iterations: usize,
    pub residual_semilinear_max: f64,
    pub residual_quasilinear_scaled_max: Option<f64>,
    pub bracket: BracketInfo,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFits {
    pub u: Option<RateFit>,
    pub v: Option<RateFit>,
    pub gradient: Option<RateFit>,
    pub expected_u_exponent: f64,
    pub expected_v_exponent: f64,
    pub expected_gradient_exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexitySummary {
    pub w_negative_interior: bool,
    pub w_zero_boundary: bool,
    pub min_second_difference: f64,
    pub convex: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSection {
    pub ell: f64,
    pub amplitudes: AmplitudeTable,
    pub rate_fit: Option<RateFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GInfinitySection {
    pub closed_form: f64,
    pub estimate: LimitEstimate,
}

/// Everything one pipeline run reports.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub family: FamilyParams,
    pub geometry: crate::mesh::Geometry,
    pub mesh: Option<MeshParams>,
    pub audit: Option<AuditReport>,
    pub transform_limits: Option<TransformLimits>,
    pub profile: Option<ProfileSection>,
    pub solve: Option<SolveSummary>,
    pub rate_fits: Option<RateFits>,
    pub bounds: Option<BoundFit>,
    pub regularity: RegularityReport,
    pub h1: Option<H1Report>,
    pub convexity: Option<ConvexitySummary>,
    pub fit_window: Option<(f64, f64)>,
}
