//! `H^s u(p)` by three independent routes: the hypersingular space-time
//! integral, the Balakrishnan semigroup integral, and the Fourier symbol for
//! plane waves. Also the extension-problem Neumann quotient.
//!
//! Sign convention: the kernel is the positive density
//! `s/Γ(1-s) · W_n(w,τ) τ^{-1-s}`, and
//! `H^s u(p) = s/Γ(1-s) ∫_0^∞ τ^{-1-s} (u(p) - P_τ u(p)) dτ` with
//! `P_τ u(x,t) = E[u(x + √(2τ) Z, t - τ)]`, so that `H^s cos(x_1) = cos(x_1)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{check_positive, Error, Result};
use crate::fields::{ScalarField, SpaceTimePoint};
use crate::kernel::FracParams;
use crate::quad::{
    adaptive, half_sphere, power_weight_finite, power_weight_tail_doubling, power_weight_tail_periodic,
    power_weight_tail_powerlaw,
    DoublingTail, Estimate, GaussRule, HeadMap, Tolerance,
};

/// Tolerances and truncation settings shared by every operator evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Hard horizon of time integrals; the rest is bounded analytically.
    pub tau_max: f64,
    /// Dyadic tail sweeps never stop before this horizon.
    pub tau_min_horizon: f64,
    /// Spatial truncation of Gaussian averages, in standard deviations.
    pub w_max: f64,
    /// Split point ε₀ between the near-origin and far time integrals.
    pub near_origin_split: f64,
    /// Below this lag the integrand is replaced by its Taylor model.
    pub taylor_cutoff: f64,
    /// Subtract the Taylor model over the whole near-origin stretch.
    pub subtract_taylor: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-10,
            max_subdivisions: 200,
            tau_max: 1e7,
            tau_min_horizon: 16.0,
            w_max: 8.5,
            near_origin_split: 1.0,
            taylor_cutoff: 1e-8,
            subtract_taylor: false,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("abs_tol", self.abs_tol)?;
        check_positive("rel_tol", self.rel_tol)?;
        check_positive("tau_max", self.tau_max)?;
        check_positive("w_max", self.w_max)?;
        check_positive("near_origin_split", self.near_origin_split)?;
        check_positive("taylor_cutoff", self.taylor_cutoff)?;
        if self.taylor_cutoff >= self.near_origin_split {
            return Err(Error::InvalidParameter("taylor_cutoff must be below near_origin_split".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidParameter("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn piece_tolerance(&self, scale: f64) -> Tolerance {
        Tolerance { abs: self.abs_tol * scale, rel: self.rel_tol, max_subdivisions: self.max_subdivisions }
    }
}

/// Evaluation route.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Hypersingular,
    Balakrishnan,
    Symbol,
}

/// An operator value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorValue {
    pub value: f64,
    pub error_estimate: f64,
    pub route: Route,
}

// ---------------------------------------------------------------------------
// Spatial averages
// ---------------------------------------------------------------------------

struct SpatialBudget {
    gh_ratio: f64,
    gh_base: usize,
    max_nodes_1d: usize,
    radial_panel_cap: usize,
    angular_cap: usize,
}

fn budget(n: usize) -> SpatialBudget {
    match n {
        1 => SpatialBudget { gh_ratio: 0.5, gh_base: 48, max_nodes_1d: 8192, radial_panel_cap: 1024, angular_cap: 2 },
        2 => SpatialBudget { gh_ratio: 0.75, gh_base: 40, max_nodes_1d: 512, radial_panel_cap: 128, angular_cap: 256 },
        _ => SpatialBudget { gh_ratio: 0.75, gh_base: 24, max_nodes_1d: 48, radial_panel_cap: 24, angular_cap: 16 },
    }
}

/// Gaussian-weighted spatial averages of a field around a fixed `x`.
pub(crate) struct Averager<'a> {
    u: &'a ScalarField,
    x: &'a [f64],
    w_max: f64,
    far: f64,
}

impl<'a> Averager<'a> {
    pub(crate) fn new(u: &'a ScalarField, x: &'a [f64], q: &QuadratureSpec) -> Self {
        Self { u, x, w_max: q.w_max, far: u.far_field() }
    }

    fn ratio(&self, sigma: f64) -> f64 {
        let f = self.u.feature_scale();
        if f.is_finite() {
            sigma / f
        } else {
            0.0
        }
    }

    /// `E[u(x + σZ, t)] - offset` with `Z ~ N(0, I_n)`, tensor rule. The
    /// offset is subtracted inside the sum so that small defects keep their
    /// relative accuracy.
    pub(crate) fn gaussian(&self, t: f64, sigma: f64, offset: f64) -> f64 {
        if self.u.is_far_in_time(t) {
            return self.far - offset;
        }
        let n = self.x.len();
        let b = budget(n);
        let ratio = self.ratio(sigma);
        if n >= 3 && ratio > b.gh_ratio {
            // A tensor grid fine enough for wide spreads is too large here.
            return self.shell(t, sigma, 0.0, self.z_max(), offset);
        }
        let rule = GaussRule::standard_normal(ratio, b.gh_ratio, b.gh_base, b.max_nodes_1d, self.w_max);
        let m = rule.len();
        let mut idx = vec![0usize; n];
        let mut y = self.x.to_vec();
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for d in 0..n {
                y[d] = self.x[d] + sigma * rule.nodes[idx[d]];
                w *= rule.weights[idx[d]];
            }
            total += w * (self.u.value(&y, t) - offset);
            let mut d = 0;
            loop {
                if d == n {
                    return total;
                }
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// `E[½(u(x + σ|Z|θ, t) + u(x - σ|Z|θ, t)) - offset; a <= |Z| <= b]`,
    /// radial rule times a half-sphere rule.
    pub(crate) fn shell(&self, t: f64, sigma: f64, a: f64, b: f64, offset: f64) -> f64 {
        let n = self.x.len();
        let zmax = self.z_max();
        let b = b.min(zmax);
        if b <= a {
            return 0.0;
        }
        let bud = budget(n);
        let ratio = self.ratio(sigma);
        let panels = (((b - a) * ratio.max(1.0) / 1.5).ceil() as usize).clamp(6, bud.radial_panel_cap);
        let mut radial = GaussRule::chi_segment(n, a, b, panels);
        if a == 0.0 && b >= zmax {
            let mass: f64 = radial.weights.iter().sum();
            radial.weights.iter_mut().for_each(|w| *w /= mass);
        }
        if self.u.is_far_in_time(t) {
            return (self.far - offset) * radial.weights.iter().sum::<f64>();
        }
        let res = ((ratio * b).ceil() as usize + 6).min(bud.angular_cap.max(2));
        let dirs = half_sphere(n, res);
        let mut y = vec![0.0; n];
        let mut total = 0.0;
        for (r, wr) in radial.nodes.iter().zip(&radial.weights) {
            let mut acc = 0.0;
            for (dir, wd) in &dirs {
                for d in 0..n {
                    y[d] = self.x[d] + sigma * r * dir[d];
                }
                let plus = self.u.value(&y, t);
                for d in 0..n {
                    y[d] = self.x[d] - sigma * r * dir[d];
                }
                acc += wd * (0.5 * (plus + self.u.value(&y, t)) - offset);
            }
            total += wr * acc;
        }
        total
    }

    /// `E[u(x + σ|Z|, t) - offset; a <= |Z| <= b]` for a one-dimensional
    /// field.
    pub(crate) fn half_line(&self, t: f64, sigma: f64, a: f64, b: f64, offset: f64) -> f64 {
        let zmax = self.z_max();
        let b = b.min(zmax);
        if b <= a {
            return 0.0;
        }
        let panels = (((b - a) * self.ratio(sigma).max(1.0) / 1.5).ceil() as usize).clamp(6, 1024);
        let mut radial = GaussRule::chi_segment(1, a, b, panels);
        if a == 0.0 && b >= zmax {
            let mass: f64 = radial.weights.iter().sum();
            radial.weights.iter_mut().for_each(|w| *w /= mass);
        }
        if self.u.is_far_in_time(t) {
            return (self.far - offset) * radial.weights.iter().sum::<f64>();
        }
        let mut y = vec![0.0; self.x.len()];
        let mut total = 0.0;
        for (r, wr) in radial.nodes.iter().zip(&radial.weights) {
            y[0] = self.x[0] + sigma * r;
            total += wr * (self.u.value(&y, t) - offset);
        }
        total
    }

    pub(crate) fn z_max(&self) -> f64 {
        self.w_max + 0.5 * self.x.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Time integrals of the lag defect
// ---------------------------------------------------------------------------

/// Local description of the lag defect `g(τ) = center - q(τ)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LagModel {
    pub center: f64,
    /// Limit of `q(τ)` as `τ -> ∞`.
    pub far: f64,
    /// `g(τ) ≈ slope·τ + root·√τ` as `τ -> 0`.
    pub slope: f64,
    pub root: f64,
    /// Bound on `|q - far|`.
    pub bound: f64,
    /// Period of `q` in `τ`, if any.
    pub period: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Scheme {
    /// Log substitution near the origin, dyadic far field.
    Semigroup,
    /// Power substitution near the origin, power-law map of the far field.
    Hypersingular,
}

/// `s/Γ(1-s) ∫_0^∞ τ^{-1-s} g(τ) dτ` for the lag defect
/// `g(τ) = center - q(τ)`.
pub(crate) fn lag_integral(
    fp: &FracParams,
    model: &LagModel,
    defect: &dyn Fn(f64) -> f64,
    scheme: Scheme,
    spec: &QuadratureSpec,
) -> Estimate {
    let s = fp.s;
    let tc = spec.taylor_cutoff;
    let model_at = |tau: f64| model.slope * tau + model.root * tau.sqrt();
    let mut near = model.slope * tc.powf(1.0 - s) / (1.0 - s);
    if model.root != 0.0 && s < 0.5 {
        near += model.root * tc.powf(0.5 - s) / (0.5 - s);
    }
    let near_err = (defect(tc) - model_at(tc)).abs() / tc * tc.powf(1.0 - s) / (2.0 - s);
    let near = Estimate { value: near, error: near_err, evals: 1, converged: true };
    near.scale(fp.positive_prefactor) + lag_integral_from(fp, model, defect, scheme, spec, tc)
}

/// `s/Γ(1-s) ∫_start^∞ τ^{-1-s} g(τ) dτ`: bounded stretch up to
/// `max(start, ε₀)`, then the far field.
pub(crate) fn lag_integral_from(
    fp: &FracParams,
    model: &LagModel,
    defect: &dyn Fn(f64) -> f64,
    scheme: Scheme,
    spec: &QuadratureSpec,
    start: f64,
) -> Estimate {
    let s = fp.s;
    let c = fp.positive_prefactor;
    let e0 = spec.near_origin_split.max(start);
    let tol = spec.piece_tolerance(0.25 / c);

    let mut head = Estimate::ZERO;
    if start < e0 {
        let subtract = spec.subtract_taylor;
        let head_g = |tau: f64| {
            let g = defect(tau);
            if subtract {
                g - model.slope * tau
            } else {
                g
            }
        };
        let map = match scheme {
            Scheme::Semigroup => HeadMap::Log,
            Scheme::Hypersingular => HeadMap::Power,
        };
        head = power_weight_finite(head_g, s, start, e0, map, tol);
        if subtract {
            head.value += model.slope * (e0.powf(1.0 - s) - start.powf(1.0 - s)) / (1.0 - s);
        }
    }

    let gap = model.center - model.far;
    let h = |tau: f64| gap - defect(tau);
    let bound = model.bound;
    let tail_int = match (model.period, scheme) {
        (Some(period), _) => power_weight_tail_periodic(h, s, e0, period, tol),
        (None, Scheme::Semigroup) => {
            let cfg = DoublingTail { tail_tol: tol.abs, min_horizon: spec.tau_min_horizon, max_horizon: spec.tau_max };
            power_weight_tail_doubling(h, s, e0, bound, cfg, tol)
        }
        (None, Scheme::Hypersingular) => {
            power_weight_tail_powerlaw(h, s, e0, bound, tol.abs, spec.tau_min_horizon, tol)
        }
    };
    let tail = Estimate::exact(gap * e0.powf(-s) / s) + tail_int.neg();
    (head + tail).scale(c)
}

/// `(∂_t - Δ)u(p)`, exact when the derivative closures exist, central
/// differences otherwise.
pub(crate) fn heat_defect(u: &ScalarField, p: &SpaceTimePoint) -> f64 {
    if let (Some(dt), Some(h)) = (u.dt(p), u.hessian(p)) {
        return dt - h.trace();
    }
    let h = 1e-4 * u.feature_scale().min(1.0);
    let u0 = u.eval(p);
    let mut lap = 0.0;
    let mut x = p.x.clone();
    for i in 0..p.dim() {
        x[i] = p.x[i] + h;
        let a = u.value(&x, p.t);
        x[i] = p.x[i] - h;
        let b = u.value(&x, p.t);
        x[i] = p.x[i];
        lap += (a - 2.0 * u0 + b) / (h * h);
    }
    let dt = (u.value(&p.x, p.t + h) - u.value(&p.x, p.t - h)) / (2.0 * h);
    dt - lap
}

pub(crate) fn check_inputs(u: &ScalarField, p: &SpaceTimePoint, fp: &FracParams, q: &QuadratureSpec) -> Result<()> {
    q.validate()?;
    u.check_point(p)?;
    if fp.n != u.dim() {
        return Err(Error::InvalidParameter(format!("FracParams has n = {} but field has n = {}", fp.n, u.dim())));
    }
    Ok(())
}

pub(crate) fn finish(est: Estimate, route: Route, q: &QuadratureSpec) -> Result<OperatorValue> {
    let target = q.abs_tol.max(q.rel_tol * est.value.abs());
    if !est.value.is_finite() || (!est.converged && est.error > 10.0 * target) {
        return Err(Error::QuadratureFailure { value: est.value, error: est.error });
    }
    Ok(OperatorValue { value: est.value, error_estimate: est.error.max(q.abs_tol), route })
}

fn symmetric_model(u: &ScalarField, p: &SpaceTimePoint) -> LagModel {
    let far = u.far_field();
    LagModel {
        center: u.eval(p),
        far,
        slope: heat_defect(u, p),
        root: 0.0,
        bound: u.bound() + far.abs(),
        period: u.time_period(),
    }
}

// ---------------------------------------------------------------------------
// Routes
// ---------------------------------------------------------------------------

/// Heat-semigroup average `P_τ u(p) = E[u(x + √(2τ) Z, t - τ)]`.
pub fn heat_semigroup(u: &ScalarField, p: &SpaceTimePoint, tau: f64, q: &QuadratureSpec) -> Result<f64> {
    check_positive("tau", tau)?;
    q.validate()?;
    if p.dim() != u.dim() {
        return Err(Error::InvalidParameter("point and field dimensions differ".into()));
    }
    Ok(Averager::new(u, &p.x, q).gaussian(p.t - tau, (2.0 * tau).sqrt(), 0.0))
}

/// `s/Γ(1-s) ∫_0^∞ τ^{-1-s} (u(p) - P_τ u(p)) dτ` with tensor Gaussian
/// averages in space.
pub fn eval_hs_balakrishnan(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    q: &QuadratureSpec,
) -> Result<OperatorValue> {
    check_inputs(u, p, fp, q)?;
    let avg = Averager::new(u, &p.x, q);
    let model = symmetric_model(u, p);
    let lag = |tau: f64| -avg.gaussian(p.t - tau, (2.0 * tau).sqrt(), model.center);
    let est = lag_integral(fp, &model, &lag, Scheme::Semigroup, q);
    finish(est, Route::Balakrishnan, q)
}

/// `½ ∬ [2u(x,t) - u(x+w,t-τ) - u(x-w,t-τ)] k(w,τ) dw dτ` with a radial ×
/// half-sphere rule in `w` and power-law maps in `τ`.
pub fn eval_hs_hypersingular(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    q: &QuadratureSpec,
) -> Result<OperatorValue> {
    check_inputs(u, p, fp, q)?;
    let avg = Averager::new(u, &p.x, q);
    let zmax = avg.z_max();
    let model = symmetric_model(u, p);
    let lag = |tau: f64| -avg.shell(p.t - tau, (2.0 * tau).sqrt(), 0.0, zmax, model.center);
    let est = lag_integral(fp, &model, &lag, Scheme::Hypersingular, q);
    finish(est, Route::Hypersingular, q)
}

pub fn eval_hs(u: &ScalarField, p: &SpaceTimePoint, fp: &FracParams, q: &QuadratureSpec, route: Route) -> Result<OperatorValue> {
    match route {
        Route::Hypersingular => eval_hs_hypersingular(u, p, fp, q),
        Route::Balakrishnan => eval_hs_balakrishnan(u, p, fp, q),
        Route::Symbol => Err(Error::InvalidParameter(
            "the symbol route applies to plane waves only; use plane_wave_value".into(),
        )),
    }
}

/// Evaluates many `(field, point)` pairs in parallel; output order matches
/// input order, so results do not depend on the thread count.
pub fn eval_batch(
    jobs: &[(ScalarField, SpaceTimePoint)],
    fp: &FracParams,
    q: &QuadratureSpec,
    route: Route,
) -> Vec<Result<OperatorValue>> {
    jobs.par_iter().map(|(u, p)| eval_hs(u, p, fp, q, route)).collect()
}

/// Principal-branch `(|ξ|² + iρ)^s` as `(re, im)`.
pub fn symbol_oracle(xi: &[f64], rho: f64, s: f64) -> Result<(f64, f64)> {
    crate::error::check_order(s)?;
    let xi2: f64 = xi.iter().map(|v| v * v).sum();
    if xi2 == 0.0 && rho == 0.0 {
        return Err(Error::InvalidParameter("symbol undefined at (xi, rho) = 0".into()));
    }
    let z = Complex64::new(xi2, rho).powf(s);
    Ok((z.re, z.im))
}

/// `H^s` of `cos(ξ·x + ρt)` at `p`: `Re[(|ξ|² + iρ)^s e^{i(ξ·x + ρt)}]`.
pub fn plane_wave_value(xi: &[f64], rho: f64, s: f64, p: &SpaceTimePoint) -> Result<f64> {
    let (re, im) = symbol_oracle(xi, rho, s)?;
    let theta: f64 = xi.iter().zip(&p.x).map(|(a, b)| a * b).sum::<f64>() + rho * p.t;
    Ok(re * theta.cos() - im * theta.sin())
}

/// Extension profile `U(λ, p) = λ^{2s}/(4^s Γ(s)) ∫ τ^{-1-s} e^{-λ²/(4τ)} P_τ u dτ`,
/// evaluated as `E[P_{λ²/(4R)} u(p)]` with `R ~ Gamma(s, 1)`.
pub fn extension_profile(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    lambda: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    check_inputs(u, p, fp, q)?;
    check_positive("lambda", lambda)?;
    let s = fp.s;
    let avg = Averager::new(u, &p.x, q);
    let semigroup = |r: f64| {
        let tau = lambda * lambda / (4.0 * r);
        if tau > q.tau_max {
            u.far_field()
        } else {
            avg.gaussian(p.t - tau, (2.0 * tau).sqrt(), 0.0)
        }
    };
    let tol = q.piece_tolerance(0.5);
    // r ∈ (0, 1]: r = v^{1/s} absorbs r^{s-1}.
    let low = adaptive(
        |v: f64| {
            let r = v.powf(1.0 / s);
            if r <= 0.0 {
                return u.far_field();
            }
            (-r).exp() * semigroup(r)
        },
        0.0,
        1.0,
        tol,
    )
    .scale(1.0 / gamma(1.0 + s));
    let high = adaptive(|r: f64| r.powf(s - 1.0) * (-r).exp() * semigroup(r), 1.0, 60.0, tol).scale(1.0 / gamma(s));
    let est = low + high;
    if !est.converged && est.error > 10.0 * q.abs_tol {
        return Err(Error::QuadratureFailure { value: est.value, error: est.error });
    }
    Ok(est.value)
}

/// Result of [`extension_neumann_ratio`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeumannReport {
    pub lambdas: Vec<f64>,
    /// `-λ^{1-2s} ∂_λ U` at each λ.
    pub neumann: Vec<f64>,
    /// Extrapolation of the Neumann quotient to `λ = 0`.
    pub neumann_limit: f64,
    pub operator_value: f64,
    /// Empirical `c_s`: `neumann_limit / H^s u(p)`.
    pub ratio: f64,
    /// `U` at the smallest λ.
    pub profile_at_smallest: f64,
    /// `U(0⁺)` extrapolated linearly in `λ^{2s}`; tends to `u(p)`.
    pub profile_limit: f64,
}

/// Empirical constant `c_s` in `-lim λ^{1-2s} ∂_λ U = c_s H^s u`.
/// Derivatives are centred differences in λ with one Richardson step; the
/// λ -> 0 limit is extrapolated linearly in `λ^{2-2s}` from the two
/// smallest grid points.
pub fn extension_neumann_ratio(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    lambda_grid: &[f64],
    q: &QuadratureSpec,
) -> Result<NeumannReport> {
    if lambda_grid.len() < 2 {
        return Err(Error::InvalidParameter("need at least two lambda values".into()));
    }
    if lambda_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("lambda grid must be strictly decreasing".into()));
    }
    let s = fp.s;
    let h = 0.02;
    let derivative = |lam: f64, h: f64| -> Result<f64> {
        let up = extension_profile(u, p, fp, lam * (1.0 + h), q)?;
        let dn = extension_profile(u, p, fp, lam * (1.0 - h), q)?;
        Ok((up - dn) / (2.0 * h * lam))
    };
    let mut neumann = Vec::with_capacity(lambda_grid.len());
    for &lam in lambda_grid {
        let d1 = derivative(lam, h)?;
        let d2 = derivative(lam, 0.5 * h)?;
        let d = (4.0 * d2 - d1) / 3.0;
        neumann.push(-lam.powf(1.0 - 2.0 * s) * d);
    }
    let k = lambda_grid.len();
    let (l1, l2) = (lambda_grid[k - 2], lambda_grid[k - 1]);
    let (x1, x2) = (l1.powf(2.0 - 2.0 * s), l2.powf(2.0 - 2.0 * s));
    let limit = (neumann[k - 1] * x1 - neumann[k - 2] * x2) / (x1 - x2);
    let op = eval_hs_balakrishnan(u, p, fp, q)?;
    if op.value.abs() < 1e3 * op.error_estimate.max(1e-12) {
        return Err(Error::DegenerateRatio(op.value));
    }
    let profile_limit = profile_limit(u, p, fp, lambda_grid, q)?;
    let u2 = extension_profile(u, p, fp, l2, q)?;
    Ok(NeumannReport {
        lambdas: lambda_grid.to_vec(),
        neumann,
        neumann_limit: limit,
        operator_value: op.value,
        ratio: limit / op.value,
        profile_at_smallest: u2,
        profile_limit,
    })
}

/// `U(0⁺)` from the expansion `U ≈ u + a λ^{2s} + b λ²` fitted through the
/// (at most three) smallest λ.
fn profile_limit(u: &ScalarField, p: &SpaceTimePoint, fp: &FracParams, grid: &[f64], q: &QuadratureSpec) -> Result<f64> {
    let s = fp.s;
    let pts = &grid[grid.len().saturating_sub(3)..];
    let k = pts.len();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for (i, &lam) in pts.iter().enumerate() {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = lam.powf(2.0 * s);
        if k == 3 {
            a[(i, 2)] = lam * lam;
        }
        b[i] = extension_profile(u, p, fp, lam, q)?;
    }
    let coef = a.lu().solve(&b).ok_or(Error::DegenerateFit("extension profile fit is singular".into()))?;
    Ok(coef[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t).unwrap()
    }

    #[test]
    fn symbol_values() {
        let (re, im) = symbol_oracle(&[1.0], 0.0, 0.37).unwrap();
        assert!((re - 1.0).abs() < 1e-15 && im.abs() < 1e-15);
        let (re, im) = symbol_oracle(&[1.0], 1.0, 0.5).unwrap();
        let m = 2f64.powf(0.25);
        let a = std::f64::consts::PI / 8.0;
        assert!((re - m * a.cos()).abs() < 1e-14 && (im - m * a.sin()).abs() < 1e-14);
        assert!(symbol_oracle(&[0.0], 0.0, 0.5).is_err());
    }

    #[test]
    fn semigroup_of_constant_and_cosine() {
        let q = QuadratureSpec::default();
        let c = parse_field("const:2.5", 2).unwrap();
        assert!((heat_semigroup(&c, &pt(&[0.1, 0.2], 0.0), 3.0, &q).unwrap() - 2.5).abs() < 1e-13);
        let u = parse_field("planewave:1,0", 1).unwrap();
        let v = heat_semigroup(&u, &pt(&[0.0], 0.3), 1.0, &q).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn cosine_in_space_has_unit_value() {
        let fp = FracParams::new(1, 0.3).unwrap();
        let q = QuadratureSpec::default();
        let u = parse_field("planewave:1,0", 1).unwrap();
        let p = pt(&[0.0], 0.0);
        let b = eval_hs_balakrishnan(&u, &p, &fp, &q).unwrap();
        let h = eval_hs_hypersingular(&u, &p, &fp, &q).unwrap();
        assert!((b.value - 1.0).abs() < 1e-6, "{b:?}");
        assert!((h.value - 1.0).abs() < 1e-6, "{h:?}");
    }

    #[test]
    fn constant_gives_zero() {
        let fp = FracParams::new(2, 0.6).unwrap();
        let q = QuadratureSpec::default();
        let u = parse_field("const:4", 2).unwrap();
        let p = pt(&[0.3, 0.1], 1.0);
        assert!(eval_hs_balakrishnan(&u, &p, &fp, &q).unwrap().value.abs() < 1e-10);
        assert!(eval_hs_hypersingular(&u, &p, &fp, &q).unwrap().value.abs() < 1e-10);
    }
}
