//! Change-of-variable reduction to a semilinear problem.
//!
//! For a family `(a, f)` the substitution map `g` solves
//! `g'(s) = 1/sqrt(a(g(s)))`, `g(0) = 0`, `g > 0`, equivalently
//! `∫_0^{g(s)} sqrt(a(ξ)) dξ = s`. With `h(s) = f(g(s))/sqrt(a(g(s)))`
//! the original quasi-linear problem for `u` becomes `-Δv = h(v)` for
//! `v = g^{-1}(u)`. This module tabulates the primitive
//! `A(t) = ∫_0^t sqrt(a)`, its inverse `g`, the reduced right-hand side
//! `h`, the closed-form small/large-argument amplitudes and their
//! empirical cross-checks, and the convexity map `ψ` with
//! `ψ' = 1/sqrt(2 H)`, `H(s) = ∫_s^∞ h`.

use serde::Serialize;

use crate::batch::par_map;
use crate::coefficients::CoefficientFamily;
use crate::error::{Error, Result};
use crate::interp::MonotoneTable;
use crate::numeric::quad::integrate;
use crate::numeric::roots::newton_in_bracket;
use crate::numeric::{empirical_limit, LimitEstimate};

const QUAD_ABS: f64 = 1e-15;
const QUAD_REL: f64 = 1e-13;

/// Tabulated substitution map for one coefficient family.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug)]
pub struct Transform {
    fam: CoefficientFamily,
    /// `t -> A(t)`, exact derivative `sqrt(a(t))` at the samples.
    primitive: MonotoneTable,
    /// `s -> g(s)`, exact derivative `1/sqrt(a(g(s)))` at the samples.
    g_table: MonotoneTable,
    s_max: f64,
    delta: f64,
    head_s: f64,
    head_exponent: f64,
}

fn sqrt_a(fam: &CoefficientFamily, xi: f64) -> f64 {
    fam.a(xi).sqrt()
}

/// `A(t)` for `t <= delta`: the leading power integrated analytically
/// plus the bounded remainder by quadrature. Naive quadrature loses
/// accuracy against the `ξ^{-μ}` blow-up of the integrand.
fn primitive_head(fam: &CoefficientFamily, t: f64) -> Result<f64> {
    let mu = fam.mu;
    let lead = fam.a0.sqrt() * t.powf(1.0 - mu) / (1.0 - mu);
    let a0 = fam.a0;
    let rem = integrate(
        |xi: f64| sqrt_a(fam, xi) - a0.sqrt() * xi.powf(-mu),
        0.0,
        t,
        QUAD_ABS * (1.0 + lead),
        1e-12,
    )?;
    Ok(lead + rem)
}

impl Transform {
    pub fn family(&self) -> &CoefficientFamily {
        &self.fam
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Small-`s` exponent of `g`: `1/(1-μ)`.
    pub fn head_exponent(&self) -> f64 {
        self.head_exponent
    }

    pub fn primitive_table(&self) -> &MonotoneTable {
        &self.primitive
    }

    pub fn g_table(&self) -> &MonotoneTable {
        &self.g_table
    }

    /// `A(t) = ∫_0^t sqrt(a)`, evaluated through the nearest exact anchor
    /// rather than the interpolant.
    pub fn primitive_exact(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain("primitive argument", format!("{t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if t <= self.delta {
            return primitive_head(&self.fam, t);
        }
        let ts = self.primitive.abscissae();
        let vals = self.primitive.ordinates();
        let j = match ts.partition_point(|&x| x <= t) {
            0 => {
                return Err(Error::domain(
                    "primitive argument",
                    format!("{t:e} below table start"),
                ))
            }
            p => (p - 1).min(ts.len() - 1),
        };
        let seg = integrate(
            |xi| sqrt_a(&self.fam, xi),
            ts[j],
            t,
            f64::MIN_POSITIVE,
            QUAD_REL,
        )?;
        Ok(vals[j] + seg)
    }

    /// `g(s)` by Newton on quadrature-backed primitive values instead of
    /// the interpolant; table-level interpolation error would contaminate
    /// limit extrapolations.
    pub fn g_exact(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if !(s > 0.0) || s > self.s_max * (1.0 + 1e-12) {
            return Err(Error::domain(
                "substitution argument",
                format!("{s:e} not in [0, {:e}]", self.s_max),
            ));
        }
        let ts = self.primitive.abscissae();
        let vals = self.primitive.ordinates();
        if s < vals[0] {
            return self.g(s);
        }
        let j = match vals.partition_point(|&v| v <= s) {
            0 => 0,
            p => (p - 1).min(ts.len() - 2),
        };
        let base = vals[j];
        let (lo, hi) = (ts[j], ts[j + 1]);
        newton_in_bracket(
            |t| {
                let seg = integrate(
                    |xi| sqrt_a(&self.fam, xi),
                    lo,
                    t,
                    f64::MIN_POSITIVE,
                    QUAD_REL,
                )
                .unwrap_or(f64::NAN);
                (base + seg - s, sqrt_a(&self.fam, t))
            },
            lo,
            hi,
            1e-15,
        )
    }

    /// The substitution map `g(s)`; `g(0) = 0` exactly, below the first
    /// table node the leading power continues the table.
    pub fn g(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if !(s > 0.0) || s > self.s_max * (1.0 + 1e-12) {
            return Err(Error::domain(
                "substitution argument",
                format!("{s:e} not in [0, {:e}]", self.s_max),
            ));
        }
        let s = s.min(self.g_table.x_max());
        if s < self.head_s {
            let g1 = self.g_table.ordinates()[0];
            return Ok(g1 * (s / self.head_s).powf(self.head_exponent));
        }
        self.g_table.eval(s)
    }

    /// `g'(s) = 1/sqrt(a(g(s)))`.
    pub fn g_prime(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(if self.fam.mu > 0.0 {
                0.0
            } else {
                1.0 / self.fam.a0.sqrt()
            });
        }
        let g = self.g(s)?;
        Ok(1.0 / sqrt_a(&self.fam, g))
    }

    /// Reduced right-hand side `h(s) = f(g(s))/sqrt(a(g(s)))`.
    pub fn h(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::domain("reduced rhs argument", format!("{s}")));
        }
        let g = self.g(s)?;
        Ok(self.fam.f(g) / sqrt_a(&self.fam, g))
    }

    /// `h'(s) = [f'(g) a(g) - f(g) a'(g)/2] / a(g)^2`; nonpositive for
    /// audited families.
    pub fn h_prime(&self, s: f64) -> Result<f64> {
        let g = self.g(s)?;
        let a = self.fam.a(g);
        Ok((self.fam.f_prime(g) * a - 0.5 * self.fam.f(g) * self.fam.a_prime(g)) / (a * a))
    }

    /// `F(t) = ∫_t^∞ f`.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        self.fam.tail_integral(t)
    }

    /// `H(s) = ∫_s^∞ h = F(g(s))`, using that `(F∘g)' = -h`.
    pub fn h_tail(&self, s: f64) -> Result<f64> {
        self.tail_integral(self.g(s)?)
    }
}

/// Builds the substitution tables. The primitive is swept cumulatively
/// over a log grid; each `g` sample then comes from a Newton solve of
/// `A(t) = s` against exact (quadrature-backed) primitive values, so the
/// defining identity holds to quadrature accuracy at every sample.
pub fn build_transform(fam: &CoefficientFamily, s_max: f64, n_samples: usize) -> Result<Transform> {
    if !(s_max > 0.0) {
        return Err(Error::invalid("s_max", format!("{s_max} must be positive")));
    }
    if n_samples < 64 {
        return Err(Error::invalid(
            "n_samples",
            format!("{n_samples} below minimum 64"),
        ));
    }
    let delta = (fam.s0 / 2.0).min(1e-2);
    let head_exponent = 1.0 / (1.0 - fam.mu);

    // Upper end of the t-range: double until A(t) covers s_max.
    let mut t_hi = delta;
    let mut a_hi = primitive_head(fam, t_hi)?;
    while a_hi < s_max * 1.0001 {
        let next = t_hi * 2.0;
        a_hi += integrate(|xi| sqrt_a(fam, xi), t_hi, next, QUAD_ABS, QUAD_REL)?;
        t_hi = next;
        if t_hi > 1e150 {
            return Err(Error::domain(
                "primitive range",
                "A(t) fails to reach s_max",
            ));
        }
    }

    // Lower end: park the first anchor below the first g sample, using the
    // leading-order inverse of A.
    // A(t) ~ sqrt(a0) t^{1-μ}/(1-μ)  =>  t = (s (1-μ)/sqrt(a0))^{1/(1-μ)}
    let s_head = 1e-10 * s_max;
    let mut t_lo = ((0.3 * s_head * (1.0 - fam.mu)) / fam.a0.sqrt()).powf(head_exponent);
    t_lo = t_lo.min(delta * 0.5).max(1e-280);
    while primitive_head(fam, t_lo)? > 0.9 * s_head {
        t_lo *= 0.25;
        if t_lo < 1e-290 {
            return Err(Error::domain("primitive range", "t_lo underflow"));
        }
    }

    // Cumulative sweep of the primitive over a log grid; every segment is
    // interior to (0, ∞) where sqrt(a) is smooth.
    let n_anchor = (2 * n_samples).max(512);
    let ts = log_grid(t_lo, t_hi, n_anchor);
    let mut values = Vec::with_capacity(n_anchor);
    values.push(primitive_head(fam, ts[0])?);
    for j in 1..n_anchor {
        // relative tolerance per segment keeps the accumulated error
        // relative to A(t) itself, head segments included
        let seg = integrate(
            |xi| sqrt_a(fam, xi),
            ts[j - 1],
            ts[j],
            f64::MIN_POSITIVE,
            QUAD_REL,
        )?;
        values.push(values[j - 1] + seg);
    }
    let derivs: Vec<f64> = ts.iter().map(|&t| sqrt_a(fam, t)).collect();
    let primitive = MonotoneTable::with_derivatives(ts.clone(), values.clone(), derivs)?;

    // Invert the primitive at log-spaced s nodes with quadrature-exact
    // Newton refinement inside the bracketing anchor segment. The images
    // of the tail junctions join the node set so no Hermite piece
    // straddles a curvature kink of g.
    let mut s_nodes = log_grid(s_head, s_max, n_samples);
    for t_kink in [fam.s0, 2.0 * fam.s0] {
        if t_kink >= ts[0] && t_kink <= t_hi {
            let img = primitive_head_or_sweep(fam, &ts, &values, delta, t_kink)?;
            if img > s_head * 1.001 && img < s_max * 0.999 {
                let pos = s_nodes.partition_point(|&v| v < img);
                if (s_nodes[pos] - img).abs() > 1e-9 * img
                    && (s_nodes[pos - 1] - img).abs() > 1e-9 * img
                {
                    s_nodes.insert(pos, img);
                }
            }
        }
    }
    if s_nodes[0] < values[0] {
        return Err(Error::domain(
            "primitive range",
            "first anchor above first sample",
        ));
    }
    let g_vals: Vec<Result<f64>> = par_map(&s_nodes, |&s| {
        let j = match values.partition_point(|&v| v <= s) {
            0 => 0,
            p => (p - 1).min(n_anchor - 2),
        };
        let base = values[j];
        let (lo, hi) = (ts[j], ts[j + 1]);
        newton_in_bracket(
            |t| {
                let seg = integrate(|xi| sqrt_a(fam, xi), lo, t, f64::MIN_POSITIVE, QUAD_REL)
                    .unwrap_or(f64::NAN);
                (base + seg - s, sqrt_a(fam, t))
            },
            lo,
            hi,
            1e-15,
        )
    });
    let mut gs = Vec::with_capacity(n_samples);
    for r in g_vals {
        gs.push(r?);
    }
    let g_derivs: Vec<f64> = gs.iter().map(|&t| 1.0 / sqrt_a(fam, t)).collect();
    let g_table = MonotoneTable::with_derivatives(s_nodes, gs, g_derivs)?;

    Ok(Transform {
        fam: fam.clone(),
        primitive,
        g_table,
        s_max,
        delta,
        head_s: s_head,
        head_exponent,
    })
}

/// `A(t)` during the build, before the table exists.
fn primitive_head_or_sweep(
    fam: &CoefficientFamily,
    ts: &[f64],
    values: &[f64],
    delta: f64,
    t: f64,
) -> Result<f64> {
    if t <= delta {
        return primitive_head(fam, t);
    }
    let j = match ts.partition_point(|&x| x <= t) {
        0 => return primitive_head(fam, t),
        p => (p - 1).min(ts.len() - 1),
    };
    let seg = integrate(
        |xi| sqrt_a(fam, xi),
        ts[j],
        t,
        f64::MIN_POSITIVE,
        QUAD_REL,
    )?;
    Ok(values[j] + seg)
}

/// Log-uniform grid with exact endpoints.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    out[0] = lo;
    out[n - 1] = hi;
    out
}

// ---------------------------------------------------------------------
// Closed-form asymptotic amplitudes
// ---------------------------------------------------------------------

/// `lim g(s)/s^{1/(1-μ)} = (1-μ)^{1/(1-μ)} a0^{1/(2(μ-1))}`.
pub fn g_zero_amplitude(mu: f64, a0: f64) -> f64 {
    (1.0 - mu).powf(1.0 / (1.0 - mu)) * a0.powf(1.0 / (2.0 * (mu - 1.0)))
}

pub fn g_zero_exponent(mu: f64) -> f64 {
    1.0 / (1.0 - mu)
}

/// `lim h(s)/s^{(μ-γ)/(1-μ)} = f0 a0^{(1-γ)/(2(μ-1))} (1-μ)^{-(γ-μ)/(1-μ)}`.
pub fn h_zero_amplitude(mu: f64, a0: f64, gamma: f64, f0: f64) -> f64 {
    f0 * a0.powf((1.0 - gamma) / (2.0 * (mu - 1.0)))
        * (1.0 - mu).powf(-(gamma - mu) / (1.0 - mu))
}

pub fn h_zero_exponent(mu: f64, gamma: f64) -> f64 {
    (mu - gamma) / (1.0 - mu)
}

/// `lim F(g(s))/s^{(1-γ)/(1-μ)} =
///  f0 a0^{(γ-1)/(2(1-μ))} (γ-1)^{-1} (1-μ)^{-(γ-1)/(1-μ)}`.
pub fn tail_zero_amplitude(mu: f64, a0: f64, gamma: f64, f0: f64) -> f64 {
    f0 * a0.powf((gamma - 1.0) / (2.0 * (1.0 - mu)))
        / (gamma - 1.0)
        * (1.0 - mu).powf(-(gamma - 1.0) / (1.0 - mu))
}

pub fn tail_zero_exponent(mu: f64, gamma: f64) -> f64 {
    (1.0 - gamma) / (1.0 - mu)
}

/// `lim g(s)/s^{2/(k+2)} = ((k+2)/(2 sqrt(a_inf)))^{2/(k+2)}` for a
/// power tail `a ~ a_inf s^k`.
pub fn g_infinity_amplitude(k: f64, a_inf: f64) -> f64 {
    ((k + 2.0) / (2.0 * a_inf.sqrt())).powf(2.0 / (k + 2.0))
}

// ---------------------------------------------------------------------
// Empirical cross-checks of the closed forms
// ---------------------------------------------------------------------

/// One closed-form amplitude against its extrapolated empirical value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LimitCheck {
    pub closed_form: f64,
    pub exponent: f64,
    pub estimate: LimitEstimate,
    pub relative_mismatch: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TransformLimits {
    pub g_zero: LimitCheck,
    pub h_zero: LimitCheck,
    pub tail_zero: LimitCheck,
}

/// Default sample abscissae for the empirical limits: `10^{-3} .. 10^{-7}`.
pub fn limit_sample_points() -> Vec<f64> {
    (3..=7).map(|k| 10f64.powi(-k)).collect()
}

fn check_one(
    samples: &[(f64, f64)],
    exponent: f64,
    closed_form: f64,
) -> Result<LimitCheck> {
    let estimate = empirical_limit(samples, exponent)?;
    Ok(LimitCheck {
        closed_form,
        exponent,
        estimate,
        relative_mismatch: (estimate.limit - closed_form).abs() / closed_form.abs(),
    })
}

/// Extrapolates the three small-argument limits from the tables and
/// compares each against its closed form.
pub fn limit_checks(pack: &Transform) -> Result<TransformLimits> {
    let fam = pack.family();
    let (mu, a0, gamma, f0) = (fam.mu, fam.a0, fam.gamma, fam.f0);
    let points = limit_sample_points();

    let g_samples: Result<Vec<(f64, f64)>> =
        points.iter().map(|&s| Ok((s, pack.g_exact(s)?))).collect();
    let h_samples: Result<Vec<(f64, f64)>> = points
        .iter()
        .map(|&s| {
            let g = pack.g_exact(s)?;
            Ok((s, fam.f(g) / fam.a(g).sqrt()))
        })
        .collect();
    let f_samples: Result<Vec<(f64, f64)>> = points
        .iter()
        .map(|&s| Ok((s, pack.tail_integral(pack.g_exact(s)?)?)))
        .collect();

    Ok(TransformLimits {
        g_zero: check_one(&g_samples?, g_zero_exponent(mu), g_zero_amplitude(mu, a0))?,
        h_zero: check_one(
            &h_samples?,
            h_zero_exponent(mu, gamma),
            h_zero_amplitude(mu, a0, gamma, f0),
        )?,
        tail_zero: check_one(
            &f_samples?,
            tail_zero_exponent(mu, gamma),
            tail_zero_amplitude(mu, a0, gamma, f0),
        )?,
    })
}

// ---------------------------------------------------------------------
// Convexity map ψ
// ---------------------------------------------------------------------

/// The convexity map `ψ(s) = ∫_0^s dξ/sqrt(2 H(ξ))` with
/// `H(s) = ∫_s^∞ h`; satisfies `ψ'' = (ψ')^3 h`, strictly increasing and
/// strictly convex.
#[derive(Debug)]
pub struct ConvexityMap {
    psi: MonotoneTable,
    h_tail_samples: Vec<[f64; 2]>,
    head_s: f64,
    head_exponent: f64,
}

impl ConvexityMap {
    pub fn table(&self) -> &MonotoneTable {
        &self.psi
    }

    /// `(s, H(s))` at the table abscissae.
    pub fn h_tail_samples(&self) -> &[[f64; 2]] {
        &self.h_tail_samples
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if !(s > 0.0) {
            return Err(Error::domain("convexity map argument", format!("{s}")));
        }
        if s < self.head_s {
            let y1 = self.psi.ordinates()[0];
            return Ok(y1 * (s / self.head_s).powf(self.head_exponent));
        }
        self.psi.eval(s)
    }

    /// ψ by quadrature from the nearest tabulated anchor; second
    /// differences of table-interpolated values drown in interpolation
    /// noise on fine meshes.
    pub fn eval_exact(&self, pack: &Transform, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if !(s > 0.0) {
            return Err(Error::domain("convexity map argument", format!("{s}")));
        }
        let integrand = |xi: f64| {
            let ht = pack.h_tail(xi).unwrap_or(f64::NAN);
            1.0 / (2.0 * ht).sqrt()
        };
        let xs = self.psi.abscissae();
        let ys = self.psi.ordinates();
        if s < xs[0] {
            return integrate(integrand, 0.0, s, f64::MIN_POSITIVE, QUAD_REL);
        }
        let j = match xs.partition_point(|&x| x <= s) {
            0 => 0,
            p => (p - 1).min(xs.len() - 1),
        };
        let seg = integrate(integrand, xs[j], s, f64::MIN_POSITIVE, QUAD_REL)?;
        Ok(ys[j] + seg)
    }
}

/// `ψ'(s) = 1/sqrt(2 F(g(s)))`, exact up to the tail-integral accuracy.
pub fn convexity_slope(pack: &Transform, s: f64) -> Result<f64> {
    Ok(1.0 / (2.0 * pack.h_tail(s)?).sqrt())
}

/// `ψ''(s) = h(s)/(2 H(s))^{3/2} = (ψ'(s))^3 h(s)`.
pub fn convexity_curvature(pack: &Transform, s: f64) -> Result<f64> {
    Ok(pack.h(s)? / (2.0 * pack.h_tail(s)?).powf(1.5))
}

/// Tabulates ψ at the given strictly increasing positive nodes.
pub fn build_convexity_map(pack: &Transform, s_nodes: &[f64]) -> Result<ConvexityMap> {
    if s_nodes.len() < 8 || s_nodes[0] <= 0.0 {
        return Err(Error::invalid(
            "s_nodes",
            "need at least 8 strictly positive nodes",
        ));
    }
    if s_nodes.last().copied().unwrap_or(f64::INFINITY) > pack.s_max() {
        return Err(Error::domain(
            "convexity map range",
            format!("nodes exceed transform range {:e}", pack.s_max()),
        ));
    }
    // H must be finite; a divergent source tail surfaces here.
    let h_tail_samples: Result<Vec<[f64; 2]>> = s_nodes
        .iter()
        .map(|&s| Ok([s, pack.h_tail(s)?]))
        .collect();
    let h_tail_samples = h_tail_samples?;

    let integrand = |xi: f64| {
        let ht = pack.h_tail(xi).unwrap_or(f64::NAN);
        1.0 / (2.0 * ht).sqrt()
    };
    let mut values = Vec::with_capacity(s_nodes.len());
    values.push(integrate(
        integrand,
        0.0,
        s_nodes[0],
        f64::MIN_POSITIVE,
        QUAD_REL,
    )?);
    for j in 1..s_nodes.len() {
        let seg = integrate(
            integrand,
            s_nodes[j - 1],
            s_nodes[j],
            f64::MIN_POSITIVE,
            QUAD_REL,
        )?;
        values.push(values[j - 1] + seg);
    }
    let derivs: Result<Vec<f64>> = s_nodes.iter().map(|&s| convexity_slope(pack, s)).collect();
    let psi = MonotoneTable::with_derivatives(s_nodes.to_vec(), values, derivs?)?;
    let gamma = pack.family().gamma;
    let mu = pack.family().mu;
    Ok(ConvexityMap {
        psi,
        h_tail_samples,
        head_s: s_nodes[0],
        // ψ grows like s^{1/β} with β = (2-2μ)/(1+γ-2μ)
        head_exponent: (1.0 + gamma - 2.0 * mu) / (2.0 - 2.0 * mu),
    })
}

/// Max residual of the identity `ψ'' = (ψ')^3 h` over a uniform grid on
/// `[lo, hi]`, with `ψ''` from centered second differences of exact
/// (quadrature-backed) ψ values and the right side analytic. Decays at
/// second order in the spacing.
pub fn convexity_identity_residual(
    pack: &Transform,
    lo: f64,
    hi: f64,
    intervals: usize,
) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) || intervals < 2 {
        return Err(Error::invalid("grid", "need 0 < lo < hi and >= 2 intervals"));
    }
    let dx = (hi - lo) / intervals as f64;
    let integrand = |xi: f64| {
        let ht = pack.h_tail(xi).unwrap_or(f64::NAN);
        1.0 / (2.0 * ht).sqrt()
    };
    // cumulative exact ψ values on the grid
    let mut psi = Vec::with_capacity(intervals + 1);
    psi.push(integrate(integrand, 0.0, lo, QUAD_ABS, QUAD_REL)?);
    for j in 1..=intervals {
        let a = lo + (j - 1) as f64 * dx;
        let b = lo + j as f64 * dx;
        let seg = integrate(integrand, a, b, QUAD_ABS, QUAD_REL)?;
        psi.push(psi[j - 1] + seg);
    }
    let mut worst = 0.0f64;
    for j in 1..intervals {
        let s = lo + j as f64 * dx;
        let second = (psi[j + 1] - 2.0 * psi[j] + psi[j - 1]) / (dx * dx);
        let analytic = convexity_curvature(pack, s)?;
        let rel = (second - analytic).abs() / analytic.abs();
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_example_family, Tail};
    use std::sync::Arc;

    fn blend(mu: f64, gamma: f64) -> CoefficientFamily {
        make_example_family(mu, gamma, 1.0, Tail::BoundedBlend { a_min: 0.1 }).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn identity_family_gives_identity_map() {
        let fam = make_example_family(0.0, 3.0, 1.0, Tail::BoundedBlend { a_min: 0.5 }).unwrap();
        let pack = build_transform(&fam, 10.0, 256).unwrap();
        for &s in &[1e-8, 1e-4, 0.3, 1.0, 7.5, 10.0] {
            assert!(rel(pack.g(s).unwrap(), s) < 1e-10, "g({s})");
            assert!(rel(pack.g_prime(s).unwrap(), 1.0) < 1e-10);
        }
        // h = f for the identity map
        assert!(rel(pack.h(0.5).unwrap(), 0.5f64.powi(-3)) < 1e-10);
    }

    #[test]
    fn pure_power_region_anchor() {
        // μ=1/2, s0=1: A(1) = ∫_0^1 ξ^{-1/2} dξ = 2, hence g(2) = 1.
        let fam = blend(0.5, 2.0);
        let pack = build_transform(&fam, 10.0, 512).unwrap();
        assert!(rel(pack.primitive_exact(1.0).unwrap(), 2.0) < 1e-12);
        assert!(rel(pack.g(2.0).unwrap(), 1.0) < 1e-10);
        // on the pure region g(s) = s^2/4
        for &s in &[1e-6, 1e-3, 0.2, 1.0, 1.9] {
            assert!(rel(pack.g(s).unwrap(), s * s / 4.0) < 1e-9, "g({s})");
        }
        // and h(s) = 8 s^{-3}
        for &s in &[1e-4, 0.3, 1.5] {
            assert!(rel(pack.h(s).unwrap(), 8.0 * s.powi(-3)) < 1e-9, "h({s})");
        }
    }

    #[test]
    fn inversion_identity_at_samples() {
        for fam in [blend(0.5, 2.0), blend(0.25, 1.5), blend(0.0, 3.0)] {
            let pack = build_transform(&fam, 20.0, 256).unwrap();
            let xs = pack.g_table().abscissae();
            let gs = pack.g_table().ordinates();
            for k in (0..xs.len()).step_by(17) {
                let back = pack.primitive_exact(gs[k]).unwrap();
                assert!(
                    rel(back, xs[k]) < 1e-8,
                    "A(g(s)) = {back:e} vs s = {:e}",
                    xs[k]
                );
            }
        }
    }

    #[test]
    fn quadratic_head_family() {
        // a(s) = 4 s^{-1} near zero (μ=1/2, a0=4): g(s) = s^2/16 + o(s^2).
        let fam = CoefficientFamily::from_parts(
            0.5,
            4.0,
            2.0,
            1.0,
            1.0,
            Tail::BoundedBlend { a_min: 0.5 },
            Arc::new(|s: f64| if s <= 1.0 { 4.0 / s } else { 4.0 }),
            Arc::new(|s: f64| if s <= 1.0 { -4.0 / (s * s) } else { 0.0 }),
            Arc::new(|s: f64| s.powi(-2)),
            Arc::new(|s: f64| -2.0 * s.powi(-3)),
            Some(Arc::new(|t: f64| 1.0 / t)),
        )
        .unwrap();
        let pack = build_transform(&fam, 10.0, 256).unwrap();
        for &s in &[1e-5, 1e-3, 0.05] {
            assert!(rel(pack.g(s).unwrap(), s * s / 16.0) < 1e-7, "g({s})");
        }
        // empirical limit against exponent 2 recovers 1/16
        let samples: Vec<(f64, f64)> = (3..=7)
            .map(|k| {
                let s = 10f64.powi(-k);
                (s, pack.g(s).unwrap())
            })
            .collect();
        let est = empirical_limit(&samples, 2.0).unwrap();
        assert!(est.converged);
        assert!(rel(est.limit, 0.0625) < 1e-2, "limit {}", est.limit);
    }

    #[test]
    fn closed_form_amplitudes() {
        assert!(rel(g_zero_amplitude(0.0, 1.0), 1.0) < 1e-15);
        assert!(rel(g_zero_amplitude(0.5, 1.0), 0.25) < 1e-15);
        assert!(rel(g_zero_amplitude(0.5, 4.0), 0.0625) < 1e-15);

        assert!(rel(h_zero_amplitude(0.0, 1.0, 3.0, 1.0), 1.0) < 1e-15);
        assert!(rel(h_zero_amplitude(0.0, 1.0, 2.0, 1.0), 1.0) < 1e-15);
        assert!(rel(h_zero_amplitude(0.5, 1.0, 2.0, 1.0), 8.0) < 1e-15);

        assert!(rel(tail_zero_amplitude(0.0, 1.0, 3.0, 1.0), 0.5) < 1e-15);
        assert!(rel(tail_zero_amplitude(0.0, 1.0, 2.0, 1.0), 1.0) < 1e-15);
        assert!(rel(tail_zero_amplitude(0.5, 4.0, 2.0, 1.0), 16.0) < 1e-15);

        assert!(rel(g_infinity_amplitude(0.0, 1.0), 1.0) < 1e-15);
        assert!(rel(g_infinity_amplitude(2.0, 1.0), 2f64.sqrt()) < 1e-15);
        assert!(rel(g_infinity_amplitude(0.0, 4.0), 0.5) < 1e-15);
    }

    #[test]
    fn g_infinity_empirical_for_power_tail() {
        // a ~ s^2 at infinity: g(s)/s^{1/2} -> sqrt(2).
        let fam = make_example_family(
            0.5,
            2.0,
            1.0,
            Tail::PowerTail {
                k: 2.0,
                a_inf: 1.0,
                p: 2.0,
                f_inf: 1.0,
            },
        )
        .unwrap();
        let pack = build_transform(&fam, 1e5, 1024).unwrap();
        // decreasing 1/s plays the extrapolation abscissa
        let samples: Vec<(f64, f64)> = (1..=5)
            .map(|k| {
                let s = 10f64.powi(k);
                (1.0 / s, pack.g(s).unwrap() / s.sqrt())
            })
            .collect();
        let est = empirical_limit(&samples, 0.0).unwrap();
        let expected = g_infinity_amplitude(2.0, 1.0);
        assert!(est.converged, "{est:?}");
        assert!(
            rel(est.limit, expected) < 0.01,
            "limit {} vs {expected}",
            est.limit
        );
    }

    #[test]
    fn h_is_nonincreasing() {
        let pack = build_transform(&blend(0.5, 2.0), 20.0, 256).unwrap();
        let mut prev = f64::INFINITY;
        let mut s = 1e-6;
        while s < 19.0 {
            let h = pack.h(s).unwrap();
            assert!(h <= prev * (1.0 + 1e-12), "h not nonincreasing at {s}");
            prev = h;
            s *= 1.7;
        }
    }

    #[test]
    fn h_blows_up_at_zero_and_integrates_at_infinity() {
        let pack = build_transform(&blend(0.25, 1.5), 20.0, 256).unwrap();
        // h(10^{-k}) increases in k
        let mut prev = 0.0;
        for k in 1..=7 {
            let h = pack.h(10f64.powi(-k)).unwrap();
            assert!(h > prev);
            prev = h;
        }
        // finite partial sums of ∫_1^∞ h stabilize: H(1) is finite
        let h1 = pack.h_tail(1.0).unwrap();
        assert!(h1.is_finite() && h1 > 0.0);
    }

    #[test]
    fn g_lipschitz_with_floor_constant() {
        let fam = blend(0.5, 2.0);
        let pack = build_transform(&fam, 20.0, 256).unwrap();
        let report =
            crate::coefficients::audit_assumptions(&fam, crate::coefficients::GridSpec::default())
                .unwrap();
        let lip = 1.0 / report.a_floor.sqrt();
        let mut s = 0.05;
        while s < 18.0 {
            let s2 = s * 1.31;
            let dg = pack.g(s2).unwrap() - pack.g(s).unwrap();
            assert!(dg <= lip * (s2 - s) * (1.0 + 1e-9), "Lipschitz at {s}");
            s = s2;
        }
    }

    #[test]
    fn empirical_limits_match_closed_forms() {
        for (mu, gamma) in [(0.0, 3.0), (0.5, 2.0), (0.25, 1.5)] {
            let pack = build_transform(&blend(mu, gamma), 20.0, 1024).unwrap();
            let checks = limit_checks(&pack).unwrap();
            for (name, c) in [
                ("g", checks.g_zero),
                ("h", checks.h_zero),
                ("tail", checks.tail_zero),
            ] {
                assert!(c.estimate.converged, "({mu},{gamma}) {name} not converged");
                assert!(
                    c.relative_mismatch < 0.01,
                    "({mu},{gamma}) {name} mismatch {}",
                    c.relative_mismatch
                );
            }
        }
    }

    #[test]
    fn convexity_map_closed_form() {
        // a ≡ 1, f = s^{-3}: H(s) = s^{-2}/2 and ψ(s) = s^2/2.
        let fam = make_example_family(0.0, 3.0, 1.0, Tail::BoundedBlend { a_min: 0.5 }).unwrap();
        let pack = build_transform(&fam, 10.0, 256).unwrap();
        let nodes = log_grid(1e-6, 8.0, 200);
        let map = build_convexity_map(&pack, &nodes).unwrap();
        for &[s, ht] in map.h_tail_samples() {
            assert!(rel(ht, 0.5 / (s * s)) < 1e-10, "H({s})");
        }
        for &s in &[0.5, 1.0, 2.0] {
            assert!(rel(map.eval(s).unwrap(), 0.5 * s * s) < 1e-8, "psi({s})");
        }
        // strictly increasing and convex at the samples
        for &s in &[0.01, 0.3, 1.7, 5.0] {
            assert!(convexity_slope(&pack, s).unwrap() > 0.0);
            assert!(convexity_curvature(&pack, s).unwrap() > 0.0);
        }
    }

    #[test]
    fn convexity_identity_second_order() {
        // γ=2, μ=0 keeps ψ genuinely cubic-plus (ψ ~ s^{3/2} near zero),
        // so the second-difference truncation is visible.
        let fam = blend(0.0, 2.0);
        let pack = build_transform(&fam, 10.0, 256).unwrap();
        let r1 = convexity_identity_residual(&pack, 0.2, 0.8, 25).unwrap();
        let r2 = convexity_identity_residual(&pack, 0.2, 0.8, 50).unwrap();
        let r3 = convexity_identity_residual(&pack, 0.2, 0.8, 100).unwrap();
        let ratio1 = r1 / r2;
        let ratio2 = r2 / r3;
        assert!(
            (2.5..6.0).contains(&ratio1) && (2.5..6.0).contains(&ratio2),
            "ratios {ratio1} {ratio2}"
        );
    }

    #[test]
    fn convexity_identity_exact_for_quadratic_map() {
        // μ=1/2, γ=2: ψ(s) = s²/(4√2) exactly on the pure region, so the
        // centered second difference is exact up to rounding noise.
        let fam = blend(0.5, 2.0);
        let pack = build_transform(&fam, 10.0, 256).unwrap();
        let r = convexity_identity_residual(&pack, 0.5, 1.5, 25).unwrap();
        assert!(r < 1e-9, "residual {r}");
        for &s in &[0.3, 0.9, 1.7] {
            let psi_exact = s * s / (4.0 * 2f64.sqrt());
            let nodes = log_grid(1e-6, 2.0, 64);
            let map = build_convexity_map(&pack, &nodes).unwrap();
            assert!(rel(map.eval(s).unwrap(), psi_exact) < 1e-8, "psi({s})");
        }
    }

    #[test]
    fn domain_errors() {
        let pack = build_transform(&blend(0.5, 2.0), 5.0, 128).unwrap();
        assert!(pack.g(6.0).is_err());
        assert!(pack.g(-1.0).is_err());
        assert!(pack.h(0.0).is_err());
    }
}
