//! Semilinear solve `-Δv = h(v)` with zero boundary data, reconstruction
//! of the original unknown `u = g(v)`, and residual evaluation of the
//! quasi-linear equation.
//!
//! `h` blows up at 0, so Newton runs on the regularized right-hand side
//! `h_ε(s) = h(max(s, ε))` with the continuation `ε -> ε/2` driven down
//! to `eps_min`; damping halves the step until the iterate stays positive
//! and the residual decreases. Linear solves are direct tridiagonal
//! elimination. A verified discrete sub/supersolution pair `c₁ φ(d)`,
//! `c₂ φ(d)` brackets the solve: it seeds the iteration and the final
//! iterate is checked against it nodewise.

mod operator;
mod tridiag;

use std::sync::Arc;

use serde::Serialize;

use crate::coefficients::CoefficientFamily;
use crate::error::{Error, Result};
use crate::mesh::{Field, Geometry, Mesh};
use crate::profile::{build_profile, BoundaryProfile};
use crate::transform::Transform;

use operator::DiscreteLaplacian;

pub(crate) use operator::gradient;

/// Which end of the bracket seeds Newton.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialIterate {
    #[default]
    SuperProfile,
    SubProfile,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveConfig {
    /// `ε₀ = eps0_factor * (interior scale of the initial iterate)`.
    pub eps0_factor: f64,
    pub eps_min: f64,
    /// Scaled sup-norm residual target, `max |F_i|/(1+|rhs_i|)`.
    pub newton_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub initial: InitialIterate,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            eps0_factor: 1e-2,
            eps_min: 1e-10,
            newton_tol: 1e-11,
            max_iter: 60,
            max_backtracks: 40,
            initial: InitialIterate::SuperProfile,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eps0_factor > 0.0) {
            return Err(Error::invalid("eps0_factor", "must be positive"));
        }
        if !(self.eps_min > 0.0) {
            return Err(Error::invalid("eps_min", "must be positive"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Scales of the verified discrete sub/supersolution pair and the final
/// nodewise check of the sandwich.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BracketInfo {
    pub c1: f64,
    pub c2: f64,
    pub holds_final: bool,
    /// Worst relative excursion outside the bracket seen at any
    /// continuation stage (early, strongly regularized stages may dip
    /// below the subsolution near the boundary).
    pub max_violation: f64,
}

/// A converged solve. `u`, `du` and the quasi-linear residual appear
/// after `reconstruct_u` / `quasilinear_residual`.
#[derive(Debug)]
pub struct Solution {
    pub mesh: Arc<Mesh>,
    pub v: Field,
    pub dv: Field,
    pub u: Option<Field>,
    pub du: Option<Field>,
    pub epsilon_final: f64,
    pub newton_iterations: usize,
    pub residual_semilinear: Field,
    pub residual_quasilinear: Option<Field>,
    pub bracket: BracketInfo,
}

/// Right-hand side sample: value, derivative in `v`, and the magnitude
/// scale of its ingredients. The scale feeds the residual normalization;
/// for composite sources (nonlinearity plus injected source) the parts
/// can cancel while their rounding noise does not.
#[derive(Clone, Copy)]
struct Rhs {
    value: f64,
    deriv: f64,
    scale: f64,
}

/// Residual rows, their scaled sup-norm (convergence test) and the l2
/// merit of the scaled rows (line-search criterion; the sup-norm is too
/// spiky to decrease monotonically along damped Newton steps).
fn residual_and_norm(
    lap: &DiscreteLaplacian,
    rhs: &dyn Fn(usize, f64) -> Rhs,
    v: &[f64],
) -> (Vec<f64>, f64, f64) {
    let mut out = lap.apply(v);
    let mut norm = 0.0f64;
    let mut merit = 0.0f64;
    for (k, &i) in lap.interior.iter().enumerate() {
        let r = rhs(i, v[i]);
        out[k] -= r.value;
        // row magnitude in the denominator keeps the target reachable:
        // the difference quotients carry rounding noise of size
        // eps * |diag| * |v|, which grows under mesh refinement
        let row_scale = 1.0 + r.scale.abs() + lap.diag[k] * v[i].abs();
        let scaled = out[k].abs() / row_scale;
        if scaled.is_finite() {
            norm = norm.max(scaled);
            merit += scaled * scaled;
        } else {
            norm = f64::INFINITY;
            merit = f64::INFINITY;
        }
    }
    (out, norm, merit.sqrt())
}

struct NewtonOutcome {
    v: Vec<f64>,
    iterations: usize,
}

fn newton_solve(
    lap: &DiscreteLaplacian,
    rhs: &dyn Fn(usize, f64) -> Rhs,
    v0: Vec<f64>,
    cfg: &SolveConfig,
) -> Result<NewtonOutcome> {
    let mut v = v0;
    let (mut rows, mut norm, mut merit) = residual_and_norm(lap, rhs, &v);
    let mut history = vec![norm];
    let mut iterations = 0;
    while norm > cfg.newton_tol {
        if iterations >= cfg.max_iter {
            return Err(Error::Solve {
                message: format!("Newton stagnated at scaled residual {norm:.3e}"),
                residual_history: history,
            });
        }
        let mut diag = lap.diag.clone();
        for (k, &i) in lap.interior.iter().enumerate() {
            let dv = rhs(i, v[i]).deriv;
            if dv.is_finite() {
                diag[k] -= dv;
            }
        }
        let mut step: Vec<f64> = rows.iter().map(|f| -f).collect();
        tridiag::solve(&lap.lower, &diag, &lap.upper, &mut step);

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_backtracks {
            let mut trial = v.clone();
            let mut positive = true;
            for (k, &i) in lap.interior.iter().enumerate() {
                let val = v[i] + alpha * step[k];
                if !(val > 0.0) {
                    positive = false;
                    break;
                }
                trial[i] = val;
            }
            if positive {
                let (trows, tnorm, tmerit) = residual_and_norm(lap, rhs, &trial);
                if tmerit < merit || tnorm < norm {
                    v = trial;
                    rows = trows;
                    norm = tnorm;
                    merit = tmerit;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Solve {
                message: "damping exhausted: no positive residual-decreasing step".into(),
                residual_history: history,
            });
        }
        history.push(norm);
        iterations += 1;
    }
    Ok(NewtonOutcome { v, iterations })
}

fn h_eps(pack: &Transform, eps: f64, v: f64) -> Rhs {
    let s = v.max(eps);
    match pack.h(s) {
        Ok(hv) => Rhs {
            value: hv,
            deriv: if v > eps {
                pack.h_prime(s).unwrap_or(f64::NAN)
            } else {
                0.0
            },
            scale: hv,
        },
        Err(_) => Rhs {
            value: f64::NAN,
            deriv: f64::NAN,
            scale: f64::NAN,
        },
    }
}

struct Bracket {
    c1: f64,
    c2: f64,
    /// Full nodal vectors (zero at the boundary).
    under: Vec<f64>,
    over: Vec<f64>,
}

/// Verify-and-scale: doubles `c₂` until `c₂ φ(d)` is a discrete
/// supersolution at every interior node, halves `c₁` until `c₁ φ(d)` is a
/// discrete subsolution. Both directions terminate because `h` blows up
/// under downscaling and decays under upscaling.
fn bracket_scales(
    pack: &Transform,
    profile: &BoundaryProfile,
    mesh: &Mesh,
    lap: &DiscreteLaplacian,
) -> Result<Bracket> {
    let phid: Result<Vec<f64>> = mesh.distance().iter().map(|&d| profile.eval(d)).collect();
    let phid = phid?;
    let lap_phi = lap.apply(&phid);
    // Above the transform range, monotonicity of h makes h(s_max) a valid
    // stand-in for the supersolution check.
    let h_at = |s: f64| -> f64 {
        let s = s.min(pack.s_max());
        pack.h(s).unwrap_or(f64::NAN)
    };
    let is_super = |c: f64| {
        lap.interior
            .iter()
            .enumerate()
            .all(|(k, &i)| c * lap_phi[k] >= h_at(c * phid[i]))
    };
    let is_sub = |c: f64| {
        lap.interior
            .iter()
            .enumerate()
            .all(|(k, &i)| c * lap_phi[k] <= h_at(c * phid[i]))
    };
    let mut c2 = 1.0f64;
    while !is_super(c2) {
        c2 *= 2.0;
        if c2 > 1e3 {
            return Err(Error::Solve {
                message: "no supersolution scale of the boundary profile in [1, 1e3]".into(),
                residual_history: vec![],
            });
        }
    }
    let mut c1 = 1.0f64;
    while !is_sub(c1) {
        c1 *= 0.5;
        if c1 < 1e-7 {
            return Err(Error::Solve {
                message: "no subsolution scale of the boundary profile in [1e-7, 1]".into(),
                residual_history: vec![],
            });
        }
    }
    let under: Vec<f64> = phid.iter().map(|&p| c1 * p).collect();
    let over: Vec<f64> = phid.iter().map(|&p| c2 * p).collect();
    Ok(Bracket {
        c1,
        c2,
        under,
        over,
    })
}

/// Solves `-Δv = h(v)`, `v = 0` on the boundary, on the given mesh.
pub fn solve_semilinear(pack: &Transform, mesh: &Arc<Mesh>, cfg: &SolveConfig) -> Result<Solution> {
    let profile = build_profile(pack, 0.0, mesh.domain_radius() * 1.05)?;
    solve_semilinear_with_profile(pack, &profile, mesh, cfg)
}

/// As `solve_semilinear` with a caller-built ℓ=0 profile (reused across
/// solves on the same family).
pub fn solve_semilinear_with_profile(
    pack: &Transform,
    profile: &BoundaryProfile,
    mesh: &Arc<Mesh>,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    let lap = operator::assemble(mesh);
    let bracket = bracket_scales(pack, profile, mesh, &lap)?;
    let cap = profile.eval(mesh.domain_radius())?;
    let mut v: Vec<f64> = match cfg.initial {
        InitialIterate::SuperProfile => bracket.over.iter().map(|&o| o.min(cap)).collect(),
        InitialIterate::SubProfile => bracket.under.clone(),
    };
    // boundary stays exact zero
    for (i, val) in v.iter_mut().enumerate() {
        if mesh.is_boundary(i) {
            *val = 0.0;
        }
    }
    let scale = v.iter().cloned().fold(0.0f64, f64::max);
    let mut eps = cfg.eps0_factor * scale;
    let mut total_iterations = 0;
    let mut max_violation = 0.0f64;
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let rhs = |i: usize, val: f64| {
            let _ = i;
            h_eps(pack, eps, val)
        };
        let out = newton_solve(&lap, &rhs, v, cfg)?;
        total_iterations += out.iterations;
        v = out.v;
        for &i in &lap.interior {
            if bracket.under[i] > 0.0 {
                let below = (bracket.under[i] - v[i]) / bracket.under[i];
                let above = (v[i] - bracket.over[i]) / bracket.over[i];
                max_violation = max_violation.max(below).max(above);
            }
        }
        if eps <= cfg.eps_min {
            break;
        }
        let change = prev
            .as_ref()
            .map(|p| {
                p.iter()
                    .zip(&v)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .unwrap_or(f64::INFINITY);
        prev = Some(v.clone());
        // once the iterate has stopped moving, release the regularization
        // in one final step
        eps = if change < 1e-10 {
            cfg.eps_min
        } else {
            (0.5 * eps).max(cfg.eps_min)
        };
    }

    // Residual of the unregularized equation at the converged iterate.
    let raw = |_: usize, val: f64| match pack.h(val) {
        Ok(hv) => Rhs {
            value: hv,
            deriv: 0.0,
            scale: hv,
        },
        Err(_) => Rhs {
            value: f64::NAN,
            deriv: f64::NAN,
            scale: f64::NAN,
        },
    };
    let (raw_rows, raw_norm, _) = residual_and_norm(&lap, &raw, &v);
    if !(raw_norm <= cfg.newton_tol) {
        return Err(Error::Solve {
            message: format!(
                "unregularized residual {raw_norm:.3e} above tolerance {:.3e}",
                cfg.newton_tol
            ),
            residual_history: vec![raw_norm],
        });
    }

    let holds_final = lap.interior.iter().all(|&i| {
        v[i] >= bracket.under[i] * (1.0 - 1e-10) && v[i] <= bracket.over[i] * (1.0 + 1e-10)
    });

    let mut res_full = vec![0.0; v.len()];
    for (k, &i) in lap.interior.iter().enumerate() {
        res_full[i] = raw_rows[k];
    }
    let dv = gradient(mesh, &v);
    Ok(Solution {
        mesh: mesh.clone(),
        v: Field::new(mesh.clone(), v)?,
        dv: Field::new(mesh.clone(), dv)?,
        u: None,
        du: None,
        epsilon_final: eps,
        newton_iterations: total_iterations,
        residual_semilinear: Field::new(mesh.clone(), res_full)?,
        residual_quasilinear: None,
        bracket: BracketInfo {
            c1: bracket.c1,
            c2: bracket.c2,
            holds_final,
            max_violation,
        },
    })
}

/// Completes a solution with `u = g(v)` and `Du = Dv / sqrt(a(u))`
/// (one-sided differences of `u` at boundary nodes, where the chain rule
/// degenerates).
pub fn reconstruct_u(pack: &Transform, sol: &mut Solution) -> Result<()> {
    let mesh = sol.mesh.clone();
    let fam = pack.family();
    let u: Result<Vec<f64>> = sol.v.values.iter().map(|&vi| pack.g(vi)).collect();
    let u = u?;
    let x = mesh.nodes();
    let n = x.len();
    let mut du = vec![0.0; n];
    for i in 0..n {
        du[i] = if mesh.is_boundary(i) {
            if i == 0 {
                (u[1] - u[0]) / (x[1] - x[0])
            } else {
                (u[n - 1] - u[n - 2]) / (x[n - 1] - x[n - 2])
            }
        } else if i == 0 {
            0.0 // ball center, symmetry
        } else {
            sol.dv.values[i] / fam.a(u[i]).sqrt()
        };
    }
    sol.u = Some(Field::new(mesh.clone(), u)?);
    sol.du = Some(Field::new(mesh, du)?);
    Ok(())
}

/// Flux-form residual of the quasi-linear equation at the reconstructed
/// `u`: midpoint-averaged coefficients, `r^{N-1}`-weighted fluxes on the
/// ball, gradient term from the stored nodal `Du`.
pub fn quasilinear_residual(fam: &CoefficientFamily, sol: &Solution) -> Result<Field> {
    let u = sol
        .u
        .as_ref()
        .ok_or_else(|| Error::Unsupported("solution not completed with u".into()))?;
    let du = sol.du.as_ref().unwrap();
    let mesh = sol.mesh.clone();
    let x = mesh.nodes();
    let uu = &u.values;
    let mut res = vec![0.0; x.len()];
    match mesh.geometry() {
        Geometry::Interval { .. } => {
            for i in mesh.interior() {
                let hm = x[i] - x[i - 1];
                let hp = x[i + 1] - x[i];
                let hbar = 0.5 * (hm + hp);
                let flux_p = fam.a(0.5 * (uu[i] + uu[i + 1])) * (uu[i + 1] - uu[i]) / hp;
                let flux_m = fam.a(0.5 * (uu[i - 1] + uu[i])) * (uu[i] - uu[i - 1]) / hm;
                res[i] = -(flux_p - flux_m) / hbar
                    + 0.5 * fam.a_prime(uu[i]) * du.values[i] * du.values[i]
                    - fam.f(uu[i]);
            }
        }
        Geometry::Ball { dim, .. } => {
            let nd = dim as f64;
            let pw = |r: f64| r.powi(dim as i32 - 1);
            for i in mesh.interior() {
                let rp = 0.5 * (x[i] + x[i + 1]);
                let hp = x[i + 1] - x[i];
                let flux_p = pw(rp) * fam.a(0.5 * (uu[i] + uu[i + 1])) * (uu[i + 1] - uu[i]) / hp;
                let (flux_m, vol) = if i == 0 {
                    (0.0, rp.powi(dim as i32) / nd)
                } else {
                    let rm = 0.5 * (x[i - 1] + x[i]);
                    let hm = x[i] - x[i - 1];
                    (
                        pw(rm) * fam.a(0.5 * (uu[i - 1] + uu[i])) * (uu[i] - uu[i - 1]) / hm,
                        (rp.powi(dim as i32) - rm.powi(dim as i32)) / nd,
                    )
                };
                res[i] = -(flux_p - flux_m) / vol
                    + 0.5 * fam.a_prime(uu[i]) * du.values[i] * du.values[i]
                    - fam.f(uu[i]);
            }
        }
    }
    Field::new(mesh, res)
}

/// Max of `|residual_quasilinear|` over interior nodes at distance at
/// least `d_min` from the boundary. Refinement studies keep `d_min`
/// fixed across meshes (the width of the excluded boundary cells on the
/// coarsest mesh): within the boundary layer the coefficients blow up
/// and the pointwise defect is self-similar rather than decaying.
pub fn residual_max_outside(sol: &Solution, d_min: f64) -> Result<f64> {
    let res = sol
        .residual_quasilinear
        .as_ref()
        .ok_or_else(|| Error::Unsupported("quasi-linear residual not computed".into()))?;
    let mut worst = 0.0f64;
    for i in sol.mesh.interior() {
        if sol.mesh.distance()[i] >= d_min {
            worst = worst.max(res.values[i].abs());
        }
    }
    Ok(worst)
}

/// One manufactured-solution solve: injects `r = -Δv* - h(v*)` so the
/// smooth `v*` is the exact solution, then reports the nodal max error.
/// With `pack = None` the nonlinearity is off (pure stencil test).
pub fn manufactured_solve<V, L>(
    pack: Option<&Transform>,
    mesh: &Arc<Mesh>,
    v_star: V,
    lap_v_star: L,
    cfg: &SolveConfig,
) -> Result<ManufacturedCase>
where
    V: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    cfg.validate()?;
    let lap = operator::assemble(mesh);
    let x = mesh.nodes();
    let mut interior_max = 0.0f64;
    for &i in &lap.interior {
        interior_max = interior_max.max(v_star(x[i]).abs());
    }
    for (i, &xi) in x.iter().enumerate() {
        if mesh.is_boundary(i) && v_star(xi).abs() > 1e-12 * interior_max {
            return Err(Error::invalid(
                "v_star",
                format!("must vanish on the boundary (v*({xi}) = {})", v_star(xi)),
            ));
        }
    }
    let mut source = vec![0.0; x.len()];
    for &i in &lap.interior {
        let vs = v_star(x[i]);
        if !(vs > 0.0) {
            return Err(Error::invalid(
                "v_star",
                format!("must be positive at interior nodes (v*({}) = {vs})", x[i]),
            ));
        }
        source[i] = -lap_v_star(x[i])
            - match pack {
                Some(p) => p.h(vs)?,
                None => 0.0,
            };
    }

    let exact_max = x
        .iter()
        .map(|&xi| v_star(xi))
        .fold(0.0f64, f64::max);

    let (v, iterations) = match pack {
        None => {
            let rhs = |i: usize, _: f64| Rhs {
                value: source[i],
                deriv: 0.0,
                scale: source[i].abs(),
            };
            let v0: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, _)| if mesh.is_boundary(i) { 0.0 } else { exact_max })
                .collect();
            let out = newton_solve(&lap, &rhs, v0, cfg)?;
            (out.v, out.iterations)
        }
        Some(p) => {
            // seed with the constant-source solve scaled to the profile size
            let ones = |_: usize, _: f64| Rhs {
                value: 1.0,
                deriv: 0.0,
                scale: 1.0,
            };
            let seed0: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, _)| if mesh.is_boundary(i) { 0.0 } else { 1.0 })
                .collect();
            let lin = newton_solve(&lap, &ones, seed0, cfg)?;
            let wmax = lin.v.iter().cloned().fold(0.0f64, f64::max);
            let mut v: Vec<f64> = lin.v.iter().map(|&w| w * exact_max / wmax).collect();
            for (i, val) in v.iter_mut().enumerate() {
                if mesh.is_boundary(i) {
                    *val = 0.0;
                }
            }
            // the regularization must not cap h at the manufactured
            // profile's own values: the injected source balances raw h,
            // and capping it drives near-boundary iterates negative
            let mut interior_min = f64::INFINITY;
            for &i in &lap.interior {
                interior_min = interior_min.min(v_star(x[i]));
            }
            let mut eps = (cfg.eps0_factor * exact_max).min(0.45 * interior_min);
            let mut total = 0;
            loop {
                let rhs = |i: usize, val: f64| {
                    let h = h_eps(p, eps, val);
                    Rhs {
                        value: h.value + source[i],
                        deriv: h.deriv,
                        scale: h.scale.abs() + source[i].abs(),
                    }
                };
                let out = newton_solve(&lap, &rhs, v, cfg)?;
                total += out.iterations;
                v = out.v;
                if eps <= cfg.eps_min {
                    break;
                }
                eps = (0.5 * eps).max(cfg.eps_min);
            }
            (v, total)
        }
    };

    let mut max_error = 0.0f64;
    for (i, &xi) in x.iter().enumerate() {
        max_error = max_error.max((v[i] - v_star(xi)).abs());
    }
    Ok(ManufacturedCase {
        v: Field::new(mesh.clone(), v)?,
        max_error,
        iterations,
    })
}

#[derive(Debug)]
pub struct ManufacturedCase {
    pub v: Field,
    pub max_error: f64,
    pub iterations: usize,
}

/// Max-norm error against the manufactured profile across a mesh
/// family, with observed convergence orders between consecutive runs.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudy {
    pub cases: Vec<(usize, f64)>,
    pub orders: Vec<f64>,
}

pub fn manufactured_convergence<V, L>(
    pack: Option<&Transform>,
    geometry: Geometry,
    q: f64,
    ns: &[usize],
    v_star: V,
    lap_v_star: L,
    cfg: &SolveConfig,
) -> Result<ConvergenceStudy>
where
    V: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    let mut cases = Vec::with_capacity(ns.len());
    for &n in ns {
        let mesh = crate::mesh::build_mesh(geometry, n, q)?;
        let case = manufactured_solve(pack, &mesh, &v_star, &lap_v_star, cfg)?;
        cases.push((n, case.max_error));
    }
    let orders = cases
        .windows(2)
        .map(|w| {
            let (n1, e1) = w[0];
            let (n2, e2) = w[1];
            (e1 / e2).ln() / (n2 as f64 / n1 as f64).ln()
        })
        .collect();
    Ok(ConvergenceStudy { cases, orders })
}
