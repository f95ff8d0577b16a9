//! Boundary-rate extraction, regularity classification, global
//! envelopes, the H¹ membership dichotomy and the convexity check.

use serde::Serialize;

use crate::bvp::Solution;
use crate::error::{Error, Result};
use crate::mesh::{Field, Geometry, Mesh};
use crate::numeric::fit::fit_power_law;
pub use crate::numeric::fit::RateFit;
use crate::numeric::quad::integrate;
use crate::profile::BoundaryProfile;
use crate::transform::{ConvexityMap, Transform};

/// Default fitting window: excludes the first-order one-sided cells next
/// to the boundary and the interior plateau.
pub fn default_window(mesh: &Mesh) -> (f64, f64) {
    (5.0 * mesh.min_cell(), 0.05 * mesh.domain_radius())
}

fn window_points(
    field: &[f64],
    mesh: &Mesh,
    window: (f64, f64),
    min_decades: f64,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Window(format!("degenerate window [{lo:e}, {hi:e}]")));
    }
    let mut points = Vec::new();
    for i in mesh.interior() {
        let d = mesh.distance()[i];
        if d >= lo && d <= hi && field[i] > 0.0 {
            points.push((d, field[i]));
        }
    }
    if points.len() < 6 {
        return Err(Error::Window(format!(
            "window [{lo:e}, {hi:e}] holds {} usable nodes (need >= 6)",
            points.len()
        )));
    }
    let dmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let dmax = points.iter().map(|p| p.0).fold(0.0f64, f64::max);
    if (dmax / dmin).log10() < min_decades {
        return Err(Error::Window(format!(
            "window spans {:.2} decades (need >= {min_decades})",
            (dmax / dmin).log10()
        )));
    }
    Ok(points)
}

/// Log-log fit of a positive nodal field against the boundary distance.
pub fn fit_boundary_rate(field: &Field, window: (f64, f64)) -> Result<RateFit> {
    let points = window_points(&field.values, field.mesh(), window, 1.5)?;
    fit_power_law(&points)
}

/// Log-log fit of `|Du|` against the boundary distance. In the Lipschitz
/// regime the exponent comes out near zero; refinement stability of
/// `max |Du|` is the caller's cross-check there.
pub fn fit_gradient_rate(sol: &Solution, window: (f64, f64)) -> Result<RateFit> {
    let du = sol
        .du
        .as_ref()
        .ok_or_else(|| Error::Unsupported("solution not completed with u".into()))?;
    let abs_du: Vec<f64> = du.values.iter().map(|v| v.abs()).collect();
    let points = window_points(&abs_du, sol.mesh.as_ref(), window, 1.5)?;
    fit_power_law(&points)
}

/// Which singularity regime the source sits in; `γ = 1` is excluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityClass {
    /// `γ > 1`: the source is non-integrable at 0.
    StrongSingularity,
    /// `γ < 1`: the source is integrable at 0; solutions are Lipschitz.
    WeakSingularity,
}

/// Regularity conclusions for a parameter pair `(γ, μ)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegularityReport {
    pub lipschitz: bool,
    pub holder_exponent: Option<f64>,
    pub in_h10: bool,
    pub lipschitz_threshold: f64,
    pub h10_threshold: f64,
    pub class: SingularityClass,
}

/// Pure classifier: Lipschitz iff `1 < γ <= 1+2μ` or `γ < 1`; Hölder
/// with exponent `2/(1+γ-2μ)` iff `γ > 1+2μ`; `H¹₀` iff `γ < 3-2μ`
/// (strict; the threshold maps to "not in").
pub fn classify_regularity(gamma: f64, mu: f64) -> Result<RegularityReport> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::invalid("mu", format!("{mu} not in [0, 1)")));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must be positive")));
    }
    if gamma == 1.0 {
        return Err(Error::invalid("gamma", "the value 1 is excluded"));
    }
    let lipschitz_threshold = 1.0 + 2.0 * mu;
    let h10_threshold = 3.0 - 2.0 * mu;
    if gamma < 1.0 {
        return Ok(RegularityReport {
            lipschitz: true,
            holder_exponent: None,
            in_h10: true,
            lipschitz_threshold,
            h10_threshold,
            class: SingularityClass::WeakSingularity,
        });
    }
    let lipschitz = gamma <= lipschitz_threshold;
    Ok(RegularityReport {
        lipschitz,
        holder_exponent: if lipschitz {
            None
        } else {
            Some(2.0 / (1.0 + gamma - 2.0 * mu))
        },
        in_h10: gamma < h10_threshold,
        lipschitz_threshold,
        h10_threshold,
        class: SingularityClass::StrongSingularity,
    })
}

/// Numeric evidence for the H¹ membership criterion
/// `lim ∫_s^1 φ h(φ) < ∞`.
#[derive(Clone, Debug, Serialize)]
pub struct H1Report {
    /// `Some(true/false)` away from the threshold `γ = 3-2μ`, `None` on it.
    pub analytic_in_h10: Option<bool>,
    pub threshold: f64,
    /// `(s, ∫_s^1 φ h(φ))` at `s = 10^{-2} .. 10^{-6}`.
    pub partial_integrals: Vec<(f64, f64)>,
    /// Whether the partial integrals have stabilized at the small end.
    pub stabilized: bool,
    /// Extrapolated growth exponent of `∫_s^1` in `s` when diverging.
    pub growth_exponent: Option<f64>,
}

/// Evaluates the partial integrals of `φ h(φ)` toward 0 and reports the
/// stabilize-or-diverge evidence along with the analytic verdict.
pub fn h1_criterion(
    pack: &Transform,
    profile: &BoundaryProfile,
    gamma: f64,
    mu: f64,
) -> Result<H1Report> {
    let threshold = 3.0 - 2.0 * mu;
    let analytic_in_h10 = if gamma == threshold {
        None
    } else {
        Some(gamma < threshold)
    };
    let integrand = |xi: f64| {
        let phi = profile.eval(xi).unwrap_or(f64::NAN);
        phi * pack.h(phi).unwrap_or(f64::NAN)
    };
    let cuts: Vec<f64> = (2..=6).map(|k| 10f64.powi(-k)).collect();
    let mut partial_integrals = Vec::with_capacity(cuts.len());
    let mut acc = integrate(integrand, cuts[0], 1.0, 1e-12, 1e-10)?;
    partial_integrals.push((cuts[0], acc));
    for w in cuts.windows(2) {
        acc += integrate(integrand, w[1], w[0], 1e-12, 1e-10)?;
        partial_integrals.push((w[1], acc));
    }
    let last = partial_integrals[partial_integrals.len() - 1].1;
    let prev = partial_integrals[partial_integrals.len() - 2].1;
    let stabilized = (last - prev).abs() <= 0.02 * last.abs();

    // Extrapolate the log-log slope of the partial integrals; the raw
    // slopes carry the O(1) constant, the geometric tail removes it.
    let growth_exponent = if stabilized {
        None
    } else {
        let slopes: Vec<f64> = partial_integrals
            .windows(2)
            .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
            .collect();
        let m = slopes.len();
        let d1 = slopes[m - 1] - slopes[m - 2];
        let d0 = slopes[m - 2] - slopes[m - 3];
        let rho = d1 / d0;
        Some(if rho > 0.0 && rho < 0.97 {
            slopes[m - 1] + d1 * rho / (1.0 - rho)
        } else {
            slopes[m - 1]
        })
    };
    Ok(H1Report {
        analytic_in_h10,
        threshold,
        partial_integrals,
        stabilized,
        growth_exponent,
    })
}

/// Discrete `∫ |Du|²` over the interior cells (finite-volume weights).
pub fn h1_energy(sol: &Solution) -> Result<f64> {
    let du = sol
        .du
        .as_ref()
        .ok_or_else(|| Error::Unsupported("solution not completed with u".into()))?;
    let mesh = sol.mesh.as_ref();
    let x = mesh.nodes();
    let mut acc = 0.0;
    for i in mesh.interior() {
        let cell = match mesh.geometry() {
            Geometry::Interval { .. } => 0.5 * (x[i + 1] - x[i - 1]),
            Geometry::Ball { dim, .. } => {
                let nd = dim as f64;
                let rp = 0.5 * (x[i] + x[i + 1]);
                let rm = if i == 0 { 0.0 } else { 0.5 * (x[i - 1] + x[i]) };
                (rp.powi(dim as i32) - rm.powi(dim as i32)) / nd
            }
        };
        acc += du.values[i] * du.values[i] * cell;
    }
    Ok(acc)
}

/// Fitted envelope constants: `g(λ₁ φ(d)) <= u <= g(λ₂ φ(d))` at every
/// node and the gradient bound
/// `|Du| <= λ₃ [d h(λ₄ φ(d)) + φ(d)/d]/sqrt(a(u))` with `λ₄ = λ₁`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundFit {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// `min_i log(u_i / g(λ₁ φ(d_i)))`; nonnegative when the lower
    /// envelope holds.
    pub max_slack: f64,
}

const LAMBDA_RANGE: (f64, f64) = (1e-3, 1e3);
const LAMBDA_BISECTIONS: usize = 60;

/// Largest feasible λ (log-bisection) for a monotone predicate that holds
/// at small λ.
fn largest_feasible(pred: impl Fn(f64) -> bool) -> Option<f64> {
    let (mut lo, mut hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
    if !pred(lo.exp()) {
        return None;
    }
    if pred(hi.exp()) {
        return Some(hi.exp());
    }
    for _ in 0..LAMBDA_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if pred(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo.exp())
}

/// Smallest feasible λ for a monotone predicate that holds at large λ.
fn smallest_feasible(pred: impl Fn(f64) -> bool) -> Option<f64> {
    let (mut lo, mut hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
    if !pred(hi.exp()) {
        return None;
    }
    if pred(lo.exp()) {
        return Some(lo.exp());
    }
    for _ in 0..LAMBDA_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if pred(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi.exp())
}

/// Bisection search for the envelope constants of a completed solution.
pub fn global_bounds_check(
    sol: &Solution,
    profile: &BoundaryProfile,
    pack: &Transform,
) -> Result<BoundFit> {
    let u = sol
        .u
        .as_ref()
        .ok_or_else(|| Error::Unsupported("solution not completed with u".into()))?;
    let du = sol.du.as_ref().unwrap();
    let mesh = sol.mesh.as_ref();
    let interior: Vec<usize> = mesh.interior().collect();
    let phid: Result<Vec<f64>> = interior
        .iter()
        .map(|&i| profile.eval(mesh.distance()[i]))
        .collect();
    let phid = phid?;
    let v = &sol.v.values;

    // sandwich on v is equivalent to the sandwich on u = g(v)
    let lower_ok = |lambda: f64| {
        interior
            .iter()
            .zip(&phid)
            .all(|(&i, &p)| lambda * p <= v[i])
    };
    let upper_ok = |lambda: f64| {
        interior
            .iter()
            .zip(&phid)
            .all(|(&i, &p)| v[i] <= lambda * p)
    };
    let lambda1 = largest_feasible(lower_ok).ok_or_else(|| Error::Solve {
        message: format!("no lower envelope constant in [{:e}, {:e}]", LAMBDA_RANGE.0, LAMBDA_RANGE.1),
        residual_history: vec![],
    })?;
    let lambda2 = smallest_feasible(upper_ok).ok_or_else(|| Error::Solve {
        message: format!("no upper envelope constant in [{:e}, {:e}]", LAMBDA_RANGE.0, LAMBDA_RANGE.1),
        residual_history: vec![],
    })?;

    let lambda4 = lambda1;
    let fam = pack.family();
    let bound_ok = |lambda3: f64| -> bool {
        interior.iter().zip(&phid).all(|(&i, &p)| {
            let d = mesh.distance()[i];
            let harg = (lambda4 * p).min(pack.s_max());
            let h = match pack.h(harg) {
                Ok(v) => v,
                Err(_) => return false,
            };
            let bound = lambda3 * (d * h + p / d) / fam.a(u.values[i]).sqrt();
            du.values[i].abs() <= bound
        })
    };
    let lambda3 = smallest_feasible(bound_ok).ok_or_else(|| Error::Solve {
        message: "no finite gradient-envelope constant in range".into(),
        residual_history: vec![],
    })?;

    let mut max_slack = f64::INFINITY;
    for (&i, &p) in interior.iter().zip(&phid) {
        let lower = pack.g(lambda1 * p)?;
        if lower > 0.0 && u.values[i] > 0.0 {
            max_slack = max_slack.min((u.values[i] / lower).ln());
        }
    }
    Ok(BoundFit {
        lambda1,
        lambda2,
        lambda3,
        lambda4,
        max_slack,
    })
}

/// Max of `|D(u^{(1+γ-2μ)/2})|` over the window; bounded under mesh
/// refinement in the Hölder regime.
pub fn holder_gradient_check(
    sol: &Solution,
    gamma: f64,
    mu: f64,
    window: (f64, f64),
) -> Result<f64> {
    if !(gamma > 1.0 + 2.0 * mu) {
        return Err(Error::Unsupported(format!(
            "power-gradient check applies only for gamma > 1 + 2 mu (got {gamma}, {mu})"
        )));
    }
    let u = sol
        .u
        .as_ref()
        .ok_or_else(|| Error::Unsupported("solution not completed with u".into()))?;
    let p = 0.5 * (1.0 + gamma - 2.0 * mu);
    let powered: Vec<f64> = u.values.iter().map(|&ui| ui.powf(p)).collect();
    let dpow = crate::bvp::gradient(sol.mesh.as_ref(), &powered);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for i in sol.mesh.interior() {
        let d = sol.mesh.distance()[i];
        if d >= window.0 && d <= window.1 {
            worst = worst.max(dpow[i].abs());
            count += 1;
        }
    }
    if count < 3 {
        return Err(Error::Window("too few nodes in the window".into()));
    }
    Ok(worst)
}

/// Discrete convexity evidence for `w = -ψ(v)` on interval geometry.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub w_negative_interior: bool,
    pub w_zero_boundary: bool,
    pub min_second_difference: f64,
    pub convex: bool,
    #[serde(skip)]
    pub w: Vec<f64>,
    #[serde(skip)]
    pub second_differences: Vec<f64>,
}

/// Computes `w = -ψ(v)` nodewise (quadrature-backed ψ) and its divided
/// second differences. Verdict `convex` iff no second difference falls
/// below the per-node rounding-noise allowance `-c/h̄²`: below that
/// level a sign cannot be certified on the given mesh.
pub fn convexity_check(
    sol: &Solution,
    map: &ConvexityMap,
    pack: &Transform,
) -> Result<ConvexityReport> {
    if !matches!(sol.mesh.geometry(), Geometry::Interval { .. }) {
        return Err(Error::Unsupported(
            "convexity check runs on interval geometry only".into(),
        ));
    }
    let mesh = sol.mesh.as_ref();
    let x = mesh.nodes();
    let w: Result<Vec<f64>> = sol
        .v
        .values
        .iter()
        .map(|&vi| Ok(-map.eval_exact(pack, vi)?))
        .collect();
    let w = w?;
    let w_scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut second = vec![0.0; w.len()];
    let mut min_d2 = f64::INFINITY;
    let mut convex = true;
    for i in mesh.interior() {
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let hbar = 0.5 * (hm + hp);
        let d2 = ((w[i + 1] - w[i]) / hp - (w[i] - w[i - 1]) / hm) / hbar;
        second[i] = d2;
        min_d2 = min_d2.min(d2);
        // certification allowance: rounding noise of the divided
        // difference plus the boundary-layer truncation of the discrete
        // solution, which scales like ψ'(v) h(v) (h̄/d)²
        let vi = sol.v.values[i];
        let layer = crate::transform::convexity_slope(pack, vi)?
            * pack.h(vi)?
            * (hbar / mesh.distance()[i]).powi(2);
        let noise = 1e-12 * w_scale / (hm.min(hp) * hbar) + 4.0 * layer;
        if d2 < -noise {
            convex = false;
        }
    }
    let w_negative_interior = mesh.interior().all(|i| w[i] < 0.0);
    let w_zero_boundary = w[0] == 0.0 && w[w.len() - 1] == 0.0;
    Ok(ConvexityReport {
        w_negative_interior,
        w_zero_boundary,
        min_second_difference: min_d2,
        convex,
        w,
        second_differences: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{reconstruct_u, solve_semilinear, SolveConfig};
    use crate::coefficients::{make_example_family, Tail};
    use crate::mesh::build_mesh;
    use crate::profile::build_profile;
    use crate::transform::{build_convexity_map, build_transform, log_grid};
    use std::sync::Arc;

    fn pack(mu: f64, gamma: f64) -> Transform {
        let fam = make_example_family(mu, gamma, 1.0, Tail::BoundedBlend { a_min: 0.1 }).unwrap();
        build_transform(&fam, 20.0, 512).unwrap()
    }

    fn synthetic_field(n: usize, f: impl Fn(f64) -> f64) -> Field {
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, n, 2.0).unwrap();
        let values = mesh.distance().iter().map(|&d| f(d)).collect();
        Field::new(mesh, values).unwrap()
    }

    #[test]
    fn exact_power_field_recovered() {
        let field = synthetic_field(512, |d| 2.0 * d.powf(0.5));
        let window = default_window(field.mesh());
        let fit = fit_boundary_rate(&field, window).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-10);
        assert!((fit.amplitude - 2.0).abs() < 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn window_errors_on_few_nodes() {
        let field = synthetic_field(64, |d| d);
        assert!(fit_boundary_rate(&field, (1e-9, 2e-9)).is_err());
    }

    #[test]
    fn classifier_truth_table() {
        // (γ, μ) -> (lipschitz, holder, in_h10)
        let r = classify_regularity(1.5, 0.4).unwrap();
        assert!(r.lipschitz && r.holder_exponent.is_none() && r.in_h10);
        let r = classify_regularity(2.0, 0.5).unwrap();
        // boundary case: γ = 1+2μ keeps Lipschitz, γ = 3-2μ is outside
        // the strict H¹₀ criterion
        assert!(r.lipschitz && !r.in_h10);
        let r = classify_regularity(3.0, 0.0).unwrap();
        assert!(!r.lipschitz);
        assert!((r.holder_exponent.unwrap() - 0.5).abs() < 1e-15);
        assert!(!r.in_h10); // γ = 3-2μ is strict
        let r = classify_regularity(2.0, 0.0).unwrap();
        assert!((r.holder_exponent.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.in_h10);
        let r = classify_regularity(0.5, 0.2).unwrap();
        assert!(r.lipschitz && r.in_h10);
        assert_eq!(r.class, SingularityClass::WeakSingularity);
        assert!(classify_regularity(1.0, 0.0).is_err());
    }

    #[test]
    fn classifier_is_pure() {
        let a = classify_regularity(2.3, 0.3).unwrap();
        let b = classify_regularity(2.3, 0.3).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn h1_partial_integrals_dichotomy() {
        // γ=2, μ=0: integrand ~ τ^{-2/3}, converges.
        let p = pack(0.0, 2.0);
        let profile = build_profile(&p, 0.0, 10.0).unwrap();
        let rep = h1_criterion(&p, &profile, 2.0, 0.0).unwrap();
        assert_eq!(rep.analytic_in_h10, Some(true));
        assert!(rep.stabilized, "{rep:?}");

        // γ=4, μ=0: integrand ~ τ^{-6/5}, partial integrals grow like s^{-1/5}.
        let p = pack(0.0, 4.0);
        let profile = build_profile(&p, 0.0, 10.0).unwrap();
        let rep = h1_criterion(&p, &profile, 4.0, 0.0).unwrap();
        assert_eq!(rep.analytic_in_h10, Some(false));
        assert!(!rep.stabilized);
        let g = rep.growth_exponent.unwrap();
        assert!((g + 0.2).abs() < 0.02, "growth exponent {g}");

        // threshold (γ=3, μ=0): no verdict
        let p = pack(0.0, 3.0);
        let profile = build_profile(&p, 0.0, 10.0).unwrap();
        let rep = h1_criterion(&p, &profile, 3.0, 0.0).unwrap();
        assert_eq!(rep.analytic_in_h10, None);
    }

    #[test]
    fn synthetic_envelope_is_tight() {
        // u built exactly as g(φ(d)) gives λ1 = λ2 = 1.
        let p = pack(0.5, 2.0);
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 128, 2.0).unwrap();
        let profile = build_profile(&p, 0.0, 0.55).unwrap();
        let v: Vec<f64> = mesh
            .distance()
            .iter()
            .map(|&d| profile.eval(d).unwrap())
            .collect();
        let u: Vec<f64> = v.iter().map(|&vi| p.g(vi).unwrap()).collect();
        let dv = crate::bvp::gradient(&mesh, &v);
        let fam = p.family();
        let du: Vec<f64> = u
            .iter()
            .zip(&dv)
            .enumerate()
            .map(|(i, (&ui, &dvi))| {
                if mesh.is_boundary(i) {
                    0.0
                } else {
                    dvi / fam.a(ui).sqrt()
                }
            })
            .collect();
        let sol = Solution {
            mesh: mesh.clone(),
            v: Field::new(mesh.clone(), v).unwrap(),
            dv: Field::new(mesh.clone(), dv).unwrap(),
            u: Some(Field::new(mesh.clone(), u).unwrap()),
            du: Some(Field::new(mesh.clone(), du).unwrap()),
            epsilon_final: 0.0,
            newton_iterations: 0,
            residual_semilinear: Field::zeros(mesh.clone()),
            residual_quasilinear: None,
            bracket: crate::bvp::BracketInfo {
                c1: 1.0,
                c2: 1.0,
                holds_final: true,
                max_violation: 0.0,
            },
        };
        let fit = global_bounds_check(&sol, &profile, &p).unwrap();
        assert!((fit.lambda1 - 1.0).abs() < 1e-6, "lambda1 {}", fit.lambda1);
        assert!((fit.lambda2 - 1.0).abs() < 1e-6, "lambda2 {}", fit.lambda2);
        assert!(fit.max_slack >= -1e-9);
    }

    #[test]
    fn solved_envelope_and_gradient_bound() {
        let p = pack(0.0, 3.0);
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 256, 2.0).unwrap();
        let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
        reconstruct_u(&p, &mut sol).unwrap();
        let profile = build_profile(&p, 0.0, 0.55).unwrap();
        let fit = global_bounds_check(&sol, &profile, &p).unwrap();
        // exact solution: v/φ(d) = sqrt(max(x, 1-x)) ∈ [1/sqrt(2), 1]
        assert!(
            (fit.lambda1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02,
            "lambda1 {}",
            fit.lambda1
        );
        assert!((fit.lambda2 - 1.0).abs() < 0.03, "lambda2 {}", fit.lambda2);
        assert!(fit.lambda1 <= fit.lambda2);
        assert!(fit.lambda3.is_finite() && fit.lambda3 > 0.0);
        assert!(fit.max_slack >= -1e-9);
    }

    #[test]
    fn gradient_rate_synthetic() {
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 512, 2.0).unwrap();
        let du: Vec<f64> = mesh.distance().iter().map(|&d| {
            if d > 0.0 {
                d.powf(-0.25)
            } else {
                0.0
            }
        }).collect();
        let sol = Solution {
            mesh: mesh.clone(),
            v: Field::zeros(mesh.clone()),
            dv: Field::zeros(mesh.clone()),
            u: Some(Field::zeros(mesh.clone())),
            du: Some(Field::new(mesh.clone(), du).unwrap()),
            epsilon_final: 0.0,
            newton_iterations: 0,
            residual_semilinear: Field::zeros(mesh.clone()),
            residual_quasilinear: None,
            bracket: crate::bvp::BracketInfo {
                c1: 1.0,
                c2: 1.0,
                holds_final: true,
                max_violation: 0.0,
            },
        };
        let fit = fit_gradient_rate(&sol, default_window(&mesh)).unwrap();
        assert!((fit.exponent + 0.25).abs() < 1e-10);
    }

    #[test]
    fn gradient_bounded_in_lipschitz_regime() {
        // γ = 1+2μ: |Du| stays bounded; the fitted exponent is near zero
        // and the max is refinement-stable (exact |Du| = sqrt(2)(1-2x)).
        let p = pack(0.5, 2.0);
        let mut maxima = Vec::new();
        for n in [128usize, 256] {
            let mesh = build_mesh(Geometry::Interval { length: 1.0 }, n, 2.0).unwrap();
            let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
            reconstruct_u(&p, &mut sol).unwrap();
            // exact |Du| = sqrt(2)(1-2x) has log-slope -2d/(1-2d) inside
            // a finite window, so "exponent zero" holds to window size
            let fit = fit_gradient_rate(&sol, default_window(&mesh)).unwrap();
            assert!(fit.exponent.abs() < 0.05, "exponent {}", fit.exponent);
            let du = sol.du.as_ref().unwrap();
            let max = mesh
                .interior()
                .map(|i| du.values[i].abs())
                .fold(0.0f64, f64::max);
            maxima.push(max);
        }
        // the max sits in the first cell where the divided difference of
        // the sqrt-layer overshoots; bounded means refinement-STABLE,
        // unlike the Hölder regime where it grows with n
        assert!(
            (maxima[0] - maxima[1]).abs() < 0.02 * maxima[1],
            "max |Du| drifted: {maxima:?}"
        );
        // and away from the layer the value matches sqrt(2)(1-2x)
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 256, 2.0).unwrap();
        let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
        reconstruct_u(&p, &mut sol).unwrap();
        let du = sol.du.as_ref().unwrap();
        for i in mesh.interior() {
            let x = mesh.nodes()[i];
            if mesh.distance()[i] >= 0.01 {
                let exact = 2f64.sqrt() * (1.0 - 2.0 * x);
                assert!(
                    (du.values[i] - exact).abs() < 0.01 * (1.0 + exact.abs()),
                    "node {i}: {} vs {exact}",
                    du.values[i]
                );
            }
        }
    }

    #[test]
    fn power_gradient_check_refinement_stable() {
        // solved Hölder case: D(u^2) for γ=3, a ≡ 1 stays bounded with
        // < 5% movement per refinement
        let p = pack(0.0, 3.0);
        let window = (5.0 * 1e-4, 0.025);
        let mut maxima = Vec::new();
        for n in [256usize, 512] {
            let mesh = build_mesh(Geometry::Interval { length: 1.0 }, n, 2.0).unwrap();
            let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
            reconstruct_u(&p, &mut sol).unwrap();
            maxima.push(holder_gradient_check(&sol, 3.0, 0.0, window).unwrap());
        }
        assert!(
            (maxima[0] - maxima[1]).abs() < 0.05 * maxima[1],
            "power-gradient max drifted: {maxima:?}"
        );
        // u^2 = 2x(1-x): |D(u^2)| = 2|1-2x| -> 2 near the boundary
        assert!((maxima[1] - 2.0).abs() < 0.05 * 2.0, "{maxima:?}");
    }

    #[test]
    fn power_gradient_check_constant_for_exact_power() {
        // u = d^{2/(1+γ)} for γ=3, μ=0: u^{(1+γ)/2} = d, derivative 1.
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 256, 2.0).unwrap();
        let u: Vec<f64> = mesh.distance().iter().map(|&d| d.powf(0.5)).collect();
        let sol = Solution {
            mesh: mesh.clone(),
            v: Field::new(mesh.clone(), u.clone()).unwrap(),
            dv: Field::zeros(mesh.clone()),
            u: Some(Field::new(mesh.clone(), u).unwrap()),
            du: Some(Field::zeros(mesh.clone())),
            epsilon_final: 0.0,
            newton_iterations: 0,
            residual_semilinear: Field::zeros(mesh.clone()),
            residual_quasilinear: None,
            bracket: crate::bvp::BracketInfo {
                c1: 1.0,
                c2: 1.0,
                holds_final: true,
                max_violation: 0.0,
            },
        };
        let window = default_window(&mesh);
        let m = holder_gradient_check(&sol, 3.0, 0.0, window).unwrap();
        assert!((m - 1.0).abs() < 1e-8, "max power gradient {m}");
        // outside the Hölder regime the check refuses to run
        assert!(holder_gradient_check(&sol, 1.5, 0.4, window).is_err());
    }

    #[test]
    fn convexity_transform_of_solution() {
        let p = pack(0.0, 3.0);
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 128, 2.0).unwrap();
        let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
        reconstruct_u(&p, &mut sol).unwrap();
        let nodes = log_grid(1e-8, 2.0, 400);
        let map = build_convexity_map(&p, &nodes).unwrap();
        let rep = convexity_check(&sol, &map, &p).unwrap();
        assert!(rep.w_negative_interior);
        assert!(rep.w_zero_boundary);
        assert!(rep.convex, "min second difference {}", rep.min_second_difference);
        // ball geometry is rejected
        let ball = build_mesh(Geometry::Ball { radius: 1.0, dim: 3 }, 64, 2.0).unwrap();
        let bsol = Solution {
            mesh: ball.clone(),
            v: Field::zeros(ball.clone()),
            dv: Field::zeros(ball.clone()),
            u: None,
            du: None,
            epsilon_final: 0.0,
            newton_iterations: 0,
            residual_semilinear: Field::zeros(ball.clone()),
            residual_quasilinear: None,
            bracket: crate::bvp::BracketInfo {
                c1: 1.0,
                c2: 1.0,
                holds_final: true,
                max_violation: 0.0,
            },
        };
        assert!(convexity_check(&bsol, &map, &p).is_err());
    }

    #[test]
    fn exponent_chain_u_v_ratio() {
        // fitted u-exponent / v-exponent = 1/(1-μ)
        let p = pack(0.5, 2.0);
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 512, 2.0).unwrap();
        let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
        reconstruct_u(&p, &mut sol).unwrap();
        let window = default_window(&mesh);
        let v_fit = fit_boundary_rate(&sol.v, window).unwrap();
        let u_fit = fit_boundary_rate(sol.u.as_ref().unwrap(), window).unwrap();
        assert!((v_fit.exponent - 0.5).abs() < 0.02, "v exponent {}", v_fit.exponent);
        assert!((u_fit.exponent - 1.0).abs() < 0.02, "u exponent {}", u_fit.exponent);
        let ratio = u_fit.exponent / v_fit.exponent;
        assert!((ratio - 2.0).abs() < 0.05, "chain ratio {ratio}");
    }

    #[test]
    fn gradient_chain_discretized() {
        let p = pack(0.5, 2.0);
        let mesh = build_mesh(Geometry::Interval { length: 1.0 }, 256, 2.0).unwrap();
        let mut sol = solve_semilinear(&p, &mesh, &SolveConfig::default()).unwrap();
        reconstruct_u(&p, &mut sol).unwrap();
        let fam = p.family();
        let u = sol.u.as_ref().unwrap();
        let du = sol.du.as_ref().unwrap();
        for i in mesh.interior() {
            let lhs = du.values[i] * fam.a(u.values[i]).sqrt();
            let rhs = sol.dv.values[i];
            if rhs.abs() > 1e-8 {
                assert!(
                    (lhs - rhs).abs() / rhs.abs() < 1e-12,
                    "chain identity at {i}"
                );
            }
        }
    }

    #[test]
    fn uses_arc_mesh_everywhere() {
        let mesh: Arc<Mesh> = build_mesh(Geometry::Interval { length: 1.0 }, 64, 1.0).unwrap();
        assert_eq!(Arc::strong_count(&mesh), 1);
    }
}
