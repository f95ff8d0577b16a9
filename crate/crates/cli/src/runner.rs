//! Stage orchestration: audit -> transform -> profile -> solve ->
//! analysis, with artifact emission and report assembly.

use std::fs;
use std::path::Path;

use quasilin::analysis::{
    classify_regularity, convexity_check, default_window, fit_boundary_rate, fit_gradient_rate,
    global_bounds_check, h1_criterion,
};
use quasilin::bvp::{
    quasilinear_residual, reconstruct_u, residual_max_outside, solve_semilinear, Solution,
};
use quasilin::coefficients::{audit_assumptions, make_example_family, AuditReport, GridSpec};
use quasilin::export;
use quasilin::mesh::{build_mesh, Geometry};
use quasilin::profile::{
    amplitude_balance_route, amplitude_primitive_route, build_profile, fit_rate, route_ratio,
    BoundaryProfile,
};
use quasilin::report::{
    AmplitudeTable, ConvexitySummary, FamilyParams, MeshParams, ProfileSection, RateFits,
    RunReport, SolveSummary,
};
use quasilin::transform::{build_convexity_map, build_transform, limit_checks, log_grid, Transform};

use crate::config::{CaseSpec, RunSpec};
use crate::manifest::Manifest;

/// Domain-level failure (exit code 1) carrying the failing stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, w: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(w, "stage {}: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

fn stage_err(stage: &'static str, e: impl std::fmt::Display) -> StageError {
    StageError {
        stage,
        message: e.to_string(),
    }
}

fn io_err(stage: &'static str, e: std::io::Error) -> StageError {
    StageError {
        stage,
        message: format!("io: {e}"),
    }
}

fn family_params(spec: &RunSpec) -> FamilyParams {
    FamilyParams {
        kind: spec.family.kind.clone(),
        mu: spec.family.mu,
        gamma: spec.family.gamma,
        a0: 1.0,
        f0: 1.0,
        s0: spec.family.s0,
        tail: spec.family.tail.clone(),
    }
}

pub struct AuditOutcome {
    pub report: AuditReport,
}

/// Builds the family and audits it; the report is emitted as JSON.
pub fn run_audit(spec: &RunSpec, dir: &Path, man: &mut Manifest) -> Result<AuditOutcome, StageError> {
    if spec.family.case == CaseSpec::WeakSingularity {
        return Err(stage_err(
            "audit",
            "the audit requires gamma > 1; the weak-singularity case supports classify only",
        ));
    }
    let fam = make_example_family(
        spec.family.mu,
        spec.family.gamma,
        spec.family.s0,
        spec.family.tail.clone(),
    )
    .map_err(|e| stage_err("audit", e))?;
    let report = audit_assumptions(&fam, GridSpec::default()).map_err(|e| stage_err("audit", e))?;
    let json = serde_json::to_vec_pretty(&report).map_err(|e| stage_err("audit", e))?;
    man.emit(dir, "audit.json", &json).map_err(|e| io_err("audit", e))?;
    if !report.pass {
        return Err(stage_err("audit", "assumption audit failed"));
    }
    man.stage_ok("audit");
    Ok(AuditOutcome { report })
}

pub fn build_pack(spec: &RunSpec) -> Result<Transform, StageError> {
    let fam = make_example_family(
        spec.family.mu,
        spec.family.gamma,
        spec.family.s0,
        spec.family.tail.clone(),
    )
    .map_err(|e| stage_err("transform", e))?;
    build_transform(&fam, spec.transform_s_max, spec.transform_samples)
        .map_err(|e| stage_err("transform", e))
}

pub fn emit_transform(
    pack: &Transform,
    dir: &Path,
    man: &mut Manifest,
    csv: bool,
) -> Result<quasilin::transform::TransformLimits, StageError> {
    let limits = limit_checks(pack).map_err(|e| stage_err("transform", e))?;
    if csv {
        let mut buf = Vec::new();
        export::write_transform_csv(pack, &mut buf).map_err(|e| stage_err("transform", e))?;
        man.emit(dir, "transform.csv", &buf)
            .map_err(|e| io_err("transform", e))?;
    }
    man.stage_ok("transform");
    Ok(limits)
}

pub fn emit_profile(
    pack: &Transform,
    spec: &RunSpec,
    dir: &Path,
    man: &mut Manifest,
    csv: bool,
) -> Result<(BoundaryProfile, ProfileSection), StageError> {
    let profile = build_profile(pack, spec.profile_ell, spec.profile_s_max)
        .map_err(|e| stage_err("profile", e))?;
    let primitive = amplitude_primitive_route(spec.family.mu, 1.0, spec.family.gamma, 1.0);
    let balance = amplitude_balance_route(spec.family.mu, 1.0, spec.family.gamma, 1.0);
    let amplitudes = AmplitudeTable {
        primitive_route: primitive,
        balance_route: balance,
        primitive_over_balance: primitive.amplitude / balance.amplitude,
        expected_primitive_over_balance: route_ratio(spec.family.mu, spec.family.gamma),
    };
    let rate_fit = fit_rate(&profile, (1e-6, 1e-4)).ok();
    if csv {
        let mut buf = Vec::new();
        export::write_profile_csv(&profile, pack, &mut buf)
            .map_err(|e| stage_err("profile", e))?;
        man.emit(dir, "profile.csv", &buf)
            .map_err(|e| io_err("profile", e))?;
    }
    man.stage_ok("profile");
    Ok((
        profile,
        ProfileSection {
            ell: spec.profile_ell,
            amplitudes,
            rate_fit,
        },
    ))
}

pub fn run_solve(
    pack: &Transform,
    spec: &RunSpec,
    dir: &Path,
    man: &mut Manifest,
    csv: bool,
) -> Result<(Solution, SolveSummary, MeshParams), StageError> {
    let mesh = build_mesh(spec.geometry, spec.mesh_n, spec.mesh_q)
        .map_err(|e| stage_err("solve", e))?;
    let mesh_params = MeshParams {
        n: spec.mesh_n,
        q: spec.mesh_q,
        min_cell: mesh.min_cell(),
        nodes: mesh.nodes().len(),
    };
    let mut sol =
        solve_semilinear(pack, &mesh, &spec.solver).map_err(|e| stage_err("solve", e))?;
    reconstruct_u(pack, &mut sol).map_err(|e| stage_err("solve", e))?;
    sol.residual_quasilinear =
        Some(quasilinear_residual(pack.family(), &sol).map_err(|e| stage_err("solve", e))?);
    // residual summary outside two uniform boundary cells
    let span = match spec.geometry {
        Geometry::Interval { length } => length,
        Geometry::Ball { radius, .. } => radius,
    };
    let rq_max = residual_max_outside(&sol, 2.0 * span / spec.mesh_n as f64)
        .map_err(|e| stage_err("solve", e))?;
    let summary = SolveSummary {
        epsilon_final: sol.epsilon_final,
        newton_iterations: sol.newton_iterations,
        residual_semilinear_max: sol.residual_semilinear.max_abs(),
        residual_quasilinear_scaled_max: Some(rq_max),
        bracket: sol.bracket,
    };
    if csv {
        let mut buf = Vec::new();
        export::write_solution_csv(&sol, &mut buf).map_err(|e| stage_err("solve", e))?;
        man.emit(dir, "solution.csv", &buf)
            .map_err(|e| io_err("solve", e))?;
    }
    man.stage_ok("solve");
    Ok((sol, summary, mesh_params))
}

/// Full pipeline. Emits CSV tables, `report.json` and `MANIFEST`; on a
/// stage failure the manifest records it and earlier artifacts remain.
pub fn run_pipeline(spec: &RunSpec, dir: &Path) -> Result<(), StageError> {
    fs::create_dir_all(dir).map_err(|e| io_err("setup", e))?;
    let mut man = Manifest::default();
    let outcome = pipeline_stages(spec, dir, &mut man);
    if let Err(e) = &outcome {
        man.stage_failed(e.stage, &e.message);
    }
    man.write(dir).map_err(|e| io_err("manifest", e))?;
    outcome
}

fn pipeline_stages(spec: &RunSpec, dir: &Path, man: &mut Manifest) -> Result<(), StageError> {
    let csv = spec.formats.iter().any(|f| f == "csv");

    // Classifier-only path for the weakly singular range; NaN also fails
    // the negated test.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if spec.family.case == CaseSpec::WeakSingularity {
        if !(spec.family.gamma < 1.0) {
            return Err(stage_err(
                "analysis",
                format!(
                    "the weak-singularity case needs gamma < 1, got {}",
                    spec.family.gamma
                ),
            ));
        }
        let regularity = classify_regularity(spec.family.gamma, spec.family.mu)
            .map_err(|e| stage_err("analysis", e))?;
        for s in ["audit", "transform", "profile", "solve"] {
            man.stage_skipped(s, "weak-singularity case is classify-only");
        }
        let report = RunReport {
            family: family_params(spec),
            geometry: spec.geometry,
            mesh: None,
            audit: None,
            transform_limits: None,
            profile: None,
            solve: None,
            rate_fits: None,
            bounds: None,
            regularity,
            h1: None,
            convexity: None,
            fit_window: None,
        };
        let json = serde_json::to_vec_pretty(&report).map_err(|e| stage_err("analysis", e))?;
        man.emit(dir, "report.json", &json)
            .map_err(|e| io_err("analysis", e))?;
        man.stage_ok("analysis");
        return Ok(());
    }

    let audit = run_audit(spec, dir, man)?;
    let pack = build_pack(spec)?;
    let limits = emit_transform(&pack, dir, man, csv)?;
    let (profile, profile_section) = emit_profile(&pack, spec, dir, man, csv)?;
    let (sol, solve_summary, mesh_params) = run_solve(&pack, spec, dir, man, csv)?;

    // analysis
    let mesh = sol.mesh.clone();
    let window = (
        spec.window_min.unwrap_or(default_window(&mesh).0),
        spec.window_max.unwrap_or(default_window(&mesh).1),
    );
    let gamma = spec.family.gamma;
    let mu = spec.family.mu;
    let u_fit = fit_boundary_rate(sol.u.as_ref().unwrap(), window).ok();
    let v_fit = fit_boundary_rate(&sol.v, window).ok();
    let g_fit = fit_gradient_rate(&sol, window).ok();
    let p = 1.0 + gamma - 2.0 * mu;
    let rate_fits = RateFits {
        u: u_fit,
        v: v_fit,
        gradient: g_fit,
        expected_u_exponent: 2.0 / p,
        expected_v_exponent: (2.0 - 2.0 * mu) / p,
        expected_gradient_exponent: (1.0 - gamma + 2.0 * mu) / p,
    };
    let envelope_profile = build_profile(&pack, 0.0, mesh.domain_radius() * 1.05)
        .map_err(|e| stage_err("analysis", e))?;
    let bounds = global_bounds_check(&sol, &envelope_profile, &pack)
        .map_err(|e| stage_err("analysis", e))?;
    let regularity =
        classify_regularity(gamma, mu).map_err(|e| stage_err("analysis", e))?;
    let h1 = h1_criterion(&pack, &profile, gamma, mu).map_err(|e| stage_err("analysis", e))?;
    let convexity = if matches!(spec.geometry, Geometry::Interval { .. }) {
        let vmax = sol.v.values.iter().cloned().fold(0.0f64, f64::max);
        let nodes = log_grid(1e-8, (2.0 * vmax).min(pack.s_max()), 400);
        let map = build_convexity_map(&pack, &nodes).map_err(|e| stage_err("analysis", e))?;
        let rep = convexity_check(&sol, &map, &pack).map_err(|e| stage_err("analysis", e))?;
        Some(ConvexitySummary {
            w_negative_interior: rep.w_negative_interior,
            w_zero_boundary: rep.w_zero_boundary,
            min_second_difference: rep.min_second_difference,
            convex: rep.convex,
        })
    } else {
        None
    };

    let report = RunReport {
        family: family_params(spec),
        geometry: spec.geometry,
        mesh: Some(mesh_params),
        audit: Some(audit.report),
        transform_limits: Some(limits),
        profile: Some(profile_section),
        solve: Some(solve_summary),
        rate_fits: Some(rate_fits),
        bounds: Some(bounds),
        regularity,
        h1: Some(h1),
        convexity,
        fit_window: Some(window),
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| stage_err("analysis", e))?;
    man.emit(dir, "report.json", &json)
        .map_err(|e| io_err("analysis", e))?;
    man.stage_ok("analysis");
    Ok(())
}
