//! Analytic space-time test functions with exact derivatives, and the
//! [`ScalarField`] handle every operator consumes.

use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// A point `(x, t)` of space-time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("point needs at least one space coordinate".into()));
        }
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("point coordinates must be finite".into()));
        }
        Ok(Self { x, t })
    }

    pub fn origin(n: usize) -> Self {
        Self { x: vec![0.0; n], t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Euclidean distance in `R^{n+1}`.
    pub fn distance(&self, other: &SpaceTimePoint) -> f64 {
        let dx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| (a - b).powi(2)).sum();
        (dx + (self.t - other.t).powi(2)).sqrt()
    }
}

/// Euclidean ball in space-time where a field is guaranteed `C^{2,1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothRegion {
    pub center: SpaceTimePoint,
    pub radius: f64,
}

impl SmoothRegion {
    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        self.center.distance(p) < self.radius
    }
}

/// Behaviour shared by all analytic fields.
pub trait FieldFn: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], t: f64) -> f64;
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>>;
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>>;
    fn dt(&self, x: &[f64], t: f64) -> Option<f64>;
    /// Global bound on `|value|`.
    fn bound(&self) -> f64;
    /// `None` when the field is smooth everywhere.
    fn smooth_region(&self) -> Option<SmoothRegion> {
        None
    }
    /// Smallest spatial length over which the field changes appreciably.
    fn feature_scale(&self) -> f64;
    /// Limit (or mean, for time-oscillating fields) of the heat-semigroup
    /// average `P_τ u` as `τ -> ∞`.
    fn far_field(&self) -> f64;
    /// Time interval outside of which the field equals `far_field`
    /// identically (up to underflow); `None` when there is no such interval.
    fn time_window(&self) -> Option<(f64, f64)> {
        None
    }
    /// Period in `t` of a field that does not depend on `x`; its
    /// semigroup averages `P_τ u` are then periodic in `τ`.
    fn time_period(&self) -> Option<f64> {
        None
    }
    fn label(&self) -> String;
}

/// Shared, immutable handle to an analytic field.
#[derive(Clone)]
pub struct ScalarField(Arc<dyn FieldFn>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.0.label())
    }
}

impl ScalarField {
    pub fn new<F: FieldFn + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.0.value(x, t)
    }
    pub fn eval(&self, p: &SpaceTimePoint) -> f64 {
        self.0.value(&p.x, p.t)
    }
    pub fn gradient(&self, p: &SpaceTimePoint) -> Option<Vec<f64>> {
        self.0.gradient(&p.x, p.t)
    }
    pub fn hessian(&self, p: &SpaceTimePoint) -> Option<DMatrix<f64>> {
        self.0.hessian(&p.x, p.t)
    }
    pub fn dt(&self, p: &SpaceTimePoint) -> Option<f64> {
        self.0.dt(&p.x, p.t)
    }
    pub fn bound(&self) -> f64 {
        self.0.bound()
    }
    pub fn smooth_region(&self) -> Option<SmoothRegion> {
        self.0.smooth_region()
    }
    pub fn feature_scale(&self) -> f64 {
        self.0.feature_scale()
    }
    pub fn far_field(&self) -> f64 {
        self.0.far_field()
    }
    pub fn time_period(&self) -> Option<f64> {
        self.0.time_period()
    }
    pub fn time_window(&self) -> Option<(f64, f64)> {
        self.0.time_window()
    }
    pub fn label(&self) -> String {
        self.0.label()
    }

    /// True when `t` lies outside the field's time window.
    pub fn is_far_in_time(&self, t: f64) -> bool {
        self.time_window().is_some_and(|(lo, hi)| t < lo || t > hi)
    }

    pub fn is_smooth_at(&self, p: &SpaceTimePoint) -> bool {
        self.smooth_region().is_none_or(|r| r.contains(p))
    }

    /// Distance from `p` to the edge of the smooth region (infinite when the
    /// field is smooth everywhere).
    pub fn smooth_margin(&self, p: &SpaceTimePoint) -> f64 {
        self.smooth_region().map_or(f64::INFINITY, |r| r.radius - r.center.distance(p))
    }

    pub fn check_point(&self, p: &SpaceTimePoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {} but field `{}` has dimension {}",
                p.dim(),
                self.label(),
                self.dim()
            )));
        }
        if !self.is_smooth_at(p) {
            return Err(Error::OutsideSmoothRegion(self.label()));
        }
        Ok(())
    }

    /// `u(A x + b, a_t t + c)`.
    pub fn affine(&self, a: DMatrix<f64>, b: Vec<f64>, a_t: f64, c: f64) -> Result<ScalarField> {
        Affine::new(self.clone(), a, b, a_t, c).map(ScalarField::new)
    }

    /// `u(x + b, t + c)`.
    pub fn translate(&self, b: Vec<f64>, c: f64) -> Result<ScalarField> {
        let n = self.dim();
        self.affine(DMatrix::identity(n, n), b, 1.0, c)
    }

    /// Spatial reflection about `x0`: `u(2 x0 - x, t)`.
    pub fn reflect_about(&self, x0: &[f64]) -> Result<ScalarField> {
        let n = self.dim();
        let b = x0.iter().map(|v| 2.0 * v).collect();
        self.affine(-DMatrix::identity(n, n), b, 1.0, 0.0)
    }

    /// Time reversal `u(x, -t)`.
    pub fn time_reversed(&self) -> ScalarField {
        let n = self.dim();
        ScalarField::new(
            Affine::new(self.clone(), DMatrix::identity(n, n), vec![0.0; n], -1.0, 0.0)
                .expect("identity map is invertible"),
        )
    }

    /// `Σ c_i u_i`.
    pub fn combination(terms: Vec<(f64, ScalarField)>) -> Result<ScalarField> {
        Combination::new(terms).map(ScalarField::new)
    }

    /// One-dimensional restriction `r ↦ u(x + r y, t)` along the unit
    /// direction `y`.
    pub fn line(&self, x: &[f64], y: &[f64]) -> Result<ScalarField> {
        Line::new(self.clone(), x.to_vec(), y.to_vec()).map(ScalarField::new)
    }

    /// `φ` inside the cylinder `B(center.x, r) × (center.t - r², center.t + r²)`,
    /// `self` outside.
    pub fn splice(&self, phi: &ScalarField, center: &SpaceTimePoint, r: f64) -> Result<ScalarField> {
        Splice::new(phi.clone(), self.clone(), center.clone(), r).map(ScalarField::new)
    }
}

/// Tags of the analytic corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestFunctionId {
    /// params `[c]`
    Constant,
    /// params `[ξ_1..ξ_n, ρ]`: `cos(ξ·x + ρ t)`
    PlaneWave,
    /// params `[a_1..a_n, b_1..b_n, c_t]`: `Σ a_i x_i² + Σ b_i x_i + c_t t`,
    /// smoothly clamped outside radius 10
    ClampedQuadratic,
    /// params `[A, σ, θ]`: `A exp(-|x|²/(2σ²) - t²/(2θ²))`
    SpaceTimeGaussian,
    /// params `[ω]` or `[ω, φ]`: `cos(ω t + φ)`
    TimeCos,
    /// params `[θ]` or `[θ, t0]`: `exp(-(t - t0)²/(2θ²))`
    TimeGauss,
    /// params `[A, R]`: smooth bump of height `A` supported on `|x| < R`
    RadialBump,
}

impl TestFunctionId {
    pub fn parse(tag: &str) -> Result<Self> {
        Ok(match tag {
            "const" | "constant" => Self::Constant,
            "planewave" | "plane-wave" => Self::PlaneWave,
            "quadratic" | "clamped-quadratic" => Self::ClampedQuadratic,
            "gaussian" => Self::SpaceTimeGaussian,
            "time-cos" => Self::TimeCos,
            "time-gauss" => Self::TimeGauss,
            "bump" => Self::RadialBump,
            other => return Err(Error::UnknownField(other.to_string())),
        })
    }
}

/// Builds a corpus field. `n` is the space dimension; for plane waves and
/// quadratics it must agree with the parameter count.
pub fn make_test_function(id: TestFunctionId, params: &[f64], n: usize) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("field parameters must be finite".into()));
    }
    let count = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what} (got {} parameters, n = {n})", params.len())))
        }
    };
    Ok(match id {
        TestFunctionId::Constant => {
            count(params.len() == 1, "constant takes [c]")?;
            ScalarField::new(Constant { n, c: params[0] })
        }
        TestFunctionId::PlaneWave => {
            count(params.len() == n + 1, "plane wave takes [xi_1..xi_n, rho]")?;
            ScalarField::new(PlaneWave::new(params[..n].to_vec(), params[n])?)
        }
        TestFunctionId::ClampedQuadratic => {
            count(params.len() == 2 * n + 1, "quadratic takes [a_1..a_n, b_1..b_n, c_t]")?;
            let a = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 * params[i] } else { 0.0 });
            let q = ClampedQuadratic::builder(n)
                .hessian(a)
                .linear(params[n..2 * n].to_vec())
                .time_slope(params[2 * n]);
            ScalarField::new(q.build()?)
        }
        TestFunctionId::SpaceTimeGaussian => {
            count(params.len() == 3, "gaussian takes [A, sigma, theta]")?;
            ScalarField::new(SpaceTimeGaussian::new(params[0], params[1], params[2], vec![0.0; n], 0.0)?)
        }
        TestFunctionId::TimeCos => {
            count(matches!(params.len(), 1 | 2), "time-cos takes [omega] or [omega, phase]")?;
            let phase = params.get(1).copied().unwrap_or(0.0);
            ScalarField::new(TimeProfile::cos(n, params[0], phase)?)
        }
        TestFunctionId::TimeGauss => {
            count(matches!(params.len(), 1 | 2), "time-gauss takes [theta] or [theta, t0]")?;
            let t0 = params.get(1).copied().unwrap_or(0.0);
            ScalarField::new(TimeProfile::gauss(n, params[0], t0)?)
        }
        TestFunctionId::RadialBump => {
            count(params.len() == 2, "bump takes [A, R]")?;
            ScalarField::new(RadialBump::new(params[0], params[1], vec![0.0; n])?)
        }
    })
}

/// Parses `tag:p1,p2,...` (e.g. `planewave:1,0`). Plane waves and quadratics
/// take their dimension from the parameter count; other tags use `n`.
pub fn parse_field(spec: &str, n: usize) -> Result<ScalarField> {
    let (tag, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let id = TestFunctionId::parse(tag.trim())?;
    let params = parse_list(rest)?;
    let dim = match id {
        TestFunctionId::PlaneWave => params.len().saturating_sub(1),
        TestFunctionId::ClampedQuadratic => params.len().saturating_sub(1) / 2,
        _ => n,
    };
    make_test_function(id, &params, dim)
}

/// Comma-separated reals; empty input yields an empty list.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse `{v}` as a number")))
        })
        .collect()
}

/// Discrepancies between analytic derivatives and central differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdReport {
    pub h: f64,
    pub gradient: f64,
    pub hessian: f64,
    pub dt: f64,
    pub max: f64,
}

/// Compares the exact derivative closures with second-order central
/// differences of step `h` at `p`.
pub fn finite_difference_check(f: &ScalarField, p: &SpaceTimePoint, h: f64) -> Result<FdReport> {
    check_positive("h", h)?;
    f.check_point(p)?;
    if f.smooth_margin(p) <= 2.0 * h {
        return Err(Error::OutsideSmoothRegion(f.label()));
    }
    let n = p.dim();
    let at = |dx: &[(usize, f64)], dt: f64| {
        let mut x = p.x.clone();
        for &(i, d) in dx {
            x[i] += d;
        }
        f.value(&x, p.t + dt)
    };
    let u0 = f.eval(p);
    let mut report = FdReport { h, gradient: 0.0, hessian: 0.0, dt: 0.0, max: 0.0 };
    if let Some(g) = f.gradient(p) {
        for (i, gi) in g.iter().enumerate() {
            let fd = (at(&[(i, h)], 0.0) - at(&[(i, -h)], 0.0)) / (2.0 * h);
            report.gradient = report.gradient.max((gi - fd).abs());
        }
    }
    if let Some(hm) = f.hessian(p) {
        for i in 0..n {
            for j in 0..n {
                let fd = if i == j {
                    (at(&[(i, h)], 0.0) - 2.0 * u0 + at(&[(i, -h)], 0.0)) / (h * h)
                } else {
                    (at(&[(i, h), (j, h)], 0.0) - at(&[(i, h), (j, -h)], 0.0) - at(&[(i, -h), (j, h)], 0.0)
                        + at(&[(i, -h), (j, -h)], 0.0))
                        / (4.0 * h * h)
                };
                report.hessian = report.hessian.max((hm[(i, j)] - fd).abs());
            }
        }
    }
    if let Some(d) = f.dt(p) {
        let fd = (at(&[], h) - at(&[], -h)) / (2.0 * h);
        report.dt = (d - fd).abs();
    }
    report.max = report.gradient.max(report.hessian).max(report.dt);
    Ok(report)
}

fn sq_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum()
}

fn check_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} has length {} but n = {n}", v.len())))
    }
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct Constant {
    n: usize,
    c: f64,
}

impl FieldFn for Constant {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, _: &[f64], _: f64) -> f64 {
        self.c
    }
    fn gradient(&self, _: &[f64], _: f64) -> Option<Vec<f64>> {
        Some(vec![0.0; self.n])
    }
    fn hessian(&self, _: &[f64], _: f64) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(self.n, self.n))
    }
    fn dt(&self, _: &[f64], _: f64) -> Option<f64> {
        Some(0.0)
    }
    fn bound(&self) -> f64 {
        self.c.abs().max(f64::MIN_POSITIVE)
    }
    fn feature_scale(&self) -> f64 {
        f64::INFINITY
    }
    fn far_field(&self) -> f64 {
        self.c
    }
    fn label(&self) -> String {
        format!("const:{}", self.c)
    }
}

/// `cos(ξ·x + ρ t)`.
pub struct PlaneWave {
    xi: Vec<f64>,
    rho: f64,
}

impl PlaneWave {
    pub fn new(xi: Vec<f64>, rho: f64) -> Result<Self> {
        if xi.is_empty() || xi.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParameter("plane wave needs a nonzero xi".into()));
        }
        Ok(Self { xi, rho })
    }

    fn phase(&self, x: &[f64], t: f64) -> f64 {
        self.xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.rho * t
    }
}

impl FieldFn for PlaneWave {
    fn dim(&self) -> usize {
        self.xi.len()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.phase(x, t).cos()
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let s = self.phase(x, t).sin();
        Some(self.xi.iter().map(|k| -k * s).collect())
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let c = self.phase(x, t).cos();
        let n = self.xi.len();
        Some(DMatrix::from_fn(n, n, |i, j| -c * self.xi[i] * self.xi[j]))
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        Some(-self.rho * self.phase(x, t).sin())
    }
    fn bound(&self) -> f64 {
        1.0
    }
    fn feature_scale(&self) -> f64 {
        1.0 / self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
    fn far_field(&self) -> f64 {
        0.0
    }
    fn label(&self) -> String {
        let xi: Vec<String> = self.xi.iter().map(|v| v.to_string()).collect();
        format!("planewave:{},{}", xi.join(","), self.rho)
    }
}

/// Smooth step equal to 1 on `z <= 0` and 0 on `z >= 1`, with its first two
/// derivatives.
fn smoothstep(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if z >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let f = |y: f64| (-1.0 / y).exp();
    let f1 = |y: f64| f(y) / (y * y);
    let f2 = |y: f64| f(y) * (1.0 / y.powi(4) - 2.0 / y.powi(3));
    let (a, b) = (f(1.0 - z), f(z));
    let (a1, b1) = (-f1(1.0 - z), f1(z));
    let (a2, b2) = (f2(1.0 - z), f2(z));
    let sum = a + b;
    let d = sum * sum;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    let d1 = 2.0 * sum * (a1 + b1);
    (a / sum, num / d, (num1 * d - num * d1) / (d * d))
}

/// Quadratic polynomial in `(x, t)` multiplied by a smooth cutoff of
/// `ρ = |x - c|² + (t - t0)²` that equals 1 for `ρ <= R²` and 0 for
/// `ρ >= 4R²`.
pub struct ClampedQuadratic {
    c0: f64,
    b: Vec<f64>,
    a: DMatrix<f64>,
    ct: f64,
    ctt: f64,
    center: Vec<f64>,
    t0: f64,
    radius: f64,
}

/// Builder for [`ClampedQuadratic`]; unspecified coefficients are zero.
pub struct QuadraticBuilder {
    inner: ClampedQuadratic,
}

impl QuadraticBuilder {
    pub fn constant(mut self, c0: f64) -> Self {
        self.inner.c0 = c0;
        self
    }
    pub fn linear(mut self, b: Vec<f64>) -> Self {
        self.inner.b = b;
        self
    }
    /// Spatial Hessian of the polynomial.
    pub fn hessian(mut self, a: DMatrix<f64>) -> Self {
        self.inner.a = a;
        self
    }
    pub fn time_slope(mut self, ct: f64) -> Self {
        self.inner.ct = ct;
        self
    }
    pub fn time_curvature(mut self, ctt: f64) -> Self {
        self.inner.ctt = ctt;
        self
    }
    pub fn center(mut self, x0: Vec<f64>, t0: f64) -> Self {
        self.inner.center = x0;
        self.inner.t0 = t0;
        self
    }
    pub fn radius(mut self, r: f64) -> Self {
        self.inner.radius = r;
        self
    }
    pub fn build(self) -> Result<ClampedQuadratic> {
        let q = self.inner;
        let n = q.center.len();
        check_len("linear coefficient", &q.b, n)?;
        if q.a.nrows() != n || q.a.ncols() != n {
            return Err(Error::InvalidParameter("Hessian must be n x n".into()));
        }
        if (&q.a - q.a.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParameter("Hessian must be symmetric".into()));
        }
        check_positive("clamp radius", q.radius)?;
        Ok(q)
    }
}

impl ClampedQuadratic {
    pub fn builder(n: usize) -> QuadraticBuilder {
        QuadraticBuilder {
            inner: ClampedQuadratic {
                c0: 0.0,
                b: vec![0.0; n],
                a: DMatrix::zeros(n, n),
                ct: 0.0,
                ctt: 0.0,
                center: vec![0.0; n],
                t0: 0.0,
                radius: 10.0,
            },
        }
    }

    fn poly(&self, x: &[f64], t: f64) -> (f64, Vec<f64>, f64) {
        let n = self.center.len();
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let dt = t - self.t0;
        let mut ay = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                ay[i] += self.a[(i, j)] * y[j];
            }
        }
        let quad: f64 = y.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let lin: f64 = self.b.iter().zip(&y).map(|(a, b)| a * b).sum();
        let q = self.c0 + lin + 0.5 * quad + self.ct * dt + 0.5 * self.ctt * dt * dt;
        let grad = self.b.iter().zip(&ay).map(|(a, b)| a + b).collect();
        let qt = self.ct + self.ctt * dt;
        (q, grad, qt)
    }

    fn cutoff(&self, x: &[f64], t: f64) -> (f64, f64, f64) {
        let r2 = self.radius * self.radius;
        let rho = sq_dist(x, &self.center) + (t - self.t0).powi(2);
        let (s0, s1, s2) = smoothstep((rho - r2) / (3.0 * r2));
        (s0, s1 / (3.0 * r2), s2 / (9.0 * r2 * r2))
    }
}

impl FieldFn for ClampedQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let (chi, _, _) = self.cutoff(x, t);
        if chi == 0.0 {
            return 0.0;
        }
        self.poly(x, t).0 * chi
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let (q, gq, _) = self.poly(x, t);
        let (chi, chi1, _) = self.cutoff(x, t);
        Some(
            gq.iter()
                .zip(x.iter().zip(&self.center))
                .map(|(g, (xi, ci))| chi * g + q * chi1 * 2.0 * (xi - ci))
                .collect(),
        )
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let n = self.center.len();
        let (q, gq, _) = self.poly(x, t);
        let (chi, chi1, chi2) = self.cutoff(x, t);
        let gr: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| 2.0 * (a - b)).collect();
        Some(DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            chi * self.a[(i, j)]
                + chi1 * (gq[i] * gr[j] + gr[i] * gq[j])
                + q * (chi2 * gr[i] * gr[j] + 2.0 * chi1 * delta)
        }))
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        let (q, _, qt) = self.poly(x, t);
        let (chi, chi1, _) = self.cutoff(x, t);
        Some(chi * qt + q * chi1 * 2.0 * (t - self.t0))
    }
    fn bound(&self) -> f64 {
        let r = 2.0 * self.radius;
        let norm = self.a.abs().row_sum().max();
        let bn = self.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.c0.abs() + bn * r + 0.5 * norm * r * r + self.ct.abs() * r + 0.5 * self.ctt.abs() * r * r
    }
    fn feature_scale(&self) -> f64 {
        self.radius / 4.0
    }
    fn far_field(&self) -> f64 {
        0.0
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        Some((self.t0 - 2.0 * self.radius, self.t0 + 2.0 * self.radius))
    }
    fn label(&self) -> String {
        format!("quadratic(R={})", self.radius)
    }
}

/// `A exp(-|x - c|²/(2σ²) - (t - t0)²/(2θ²))`.
pub struct SpaceTimeGaussian {
    amp: f64,
    sigma: f64,
    theta: f64,
    center: Vec<f64>,
    t0: f64,
}

impl SpaceTimeGaussian {
    pub fn new(amp: f64, sigma: f64, theta: f64, center: Vec<f64>, t0: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        check_positive("theta", theta)?;
        if center.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { amp, sigma, theta, center, t0 })
    }
}

impl FieldFn for SpaceTimeGaussian {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let e = sq_dist(x, &self.center) / (2.0 * self.sigma * self.sigma)
            + (t - self.t0).powi(2) / (2.0 * self.theta * self.theta);
        self.amp * (-e).exp()
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let u = self.value(x, t);
        let s2 = self.sigma * self.sigma;
        Some(x.iter().zip(&self.center).map(|(a, c)| -u * (a - c) / s2).collect())
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let u = self.value(x, t);
        let s2 = self.sigma * self.sigma;
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let n = y.len();
        Some(DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            u * (y[i] * y[j] / (s2 * s2) - delta / s2)
        }))
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        Some(-self.value(x, t) * (t - self.t0) / (self.theta * self.theta))
    }
    fn bound(&self) -> f64 {
        self.amp.abs().max(f64::MIN_POSITIVE)
    }
    fn feature_scale(&self) -> f64 {
        self.sigma
    }
    fn far_field(&self) -> f64 {
        0.0
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        // exp(-x²/2) underflows past x ≈ 38.6
        Some((self.t0 - 40.0 * self.theta, self.t0 + 40.0 * self.theta))
    }
    fn label(&self) -> String {
        format!("gaussian:{},{},{}", self.amp, self.sigma, self.theta)
    }
}

enum Profile {
    Cos { omega: f64, phase: f64 },
    Gauss { theta: f64, t0: f64 },
}

/// Space-independent field `g(t)`.
pub struct TimeProfile {
    n: usize,
    profile: Profile,
}

impl TimeProfile {
    pub fn cos(n: usize, omega: f64, phase: f64) -> Result<Self> {
        check_positive("omega", omega)?;
        Ok(Self { n, profile: Profile::Cos { omega, phase } })
    }

    pub fn gauss(n: usize, theta: f64, t0: f64) -> Result<Self> {
        check_positive("theta", theta)?;
        Ok(Self { n, profile: Profile::Gauss { theta, t0 } })
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        match self.profile {
            Profile::Cos { omega, phase } => {
                let a = omega * t + phase;
                (a.cos(), -omega * a.sin())
            }
            Profile::Gauss { theta, t0 } => {
                let g = (-(t - t0).powi(2) / (2.0 * theta * theta)).exp();
                (g, -g * (t - t0) / (theta * theta))
            }
        }
    }
}

impl FieldFn for TimeProfile {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, _: &[f64], t: f64) -> f64 {
        self.eval(t).0
    }
    fn gradient(&self, _: &[f64], _: f64) -> Option<Vec<f64>> {
        Some(vec![0.0; self.n])
    }
    fn hessian(&self, _: &[f64], _: f64) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(self.n, self.n))
    }
    fn dt(&self, _: &[f64], t: f64) -> Option<f64> {
        Some(self.eval(t).1)
    }
    fn bound(&self) -> f64 {
        1.0
    }
    fn feature_scale(&self) -> f64 {
        f64::INFINITY
    }
    fn far_field(&self) -> f64 {
        0.0
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        match self.profile {
            Profile::Cos { .. } => None,
            Profile::Gauss { theta, t0 } => Some((t0 - 40.0 * theta, t0 + 40.0 * theta)),
        }
    }
    fn time_period(&self) -> Option<f64> {
        match self.profile {
            Profile::Cos { omega, .. } => Some(2.0 * std::f64::consts::PI / omega),
            Profile::Gauss { .. } => None,
        }
    }
    fn label(&self) -> String {
        match self.profile {
            Profile::Cos { omega, phase } => format!("time-cos:{omega},{phase}"),
            Profile::Gauss { theta, t0 } => format!("time-gauss:{theta},{t0}"),
        }
    }
}

/// `A e^{1 - 1/(1 - |x - c|²/R²)}` on `|x - c| < R`, zero outside;
/// time-independent.
pub struct RadialBump {
    amp: f64,
    radius: f64,
    center: Vec<f64>,
}

impl RadialBump {
    pub fn new(amp: f64, radius: f64, center: Vec<f64>) -> Result<Self> {
        check_positive("bump radius", radius)?;
        if center.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { amp, radius, center })
    }

    /// `(u, g)` with `g = 1 - |y|²/R²`, or `None` outside the support.
    fn core(&self, x: &[f64]) -> Option<(f64, f64)> {
        let g = 1.0 - sq_dist(x, &self.center) / (self.radius * self.radius);
        if g <= 0.0 {
            return None;
        }
        Some((self.amp * E * (-1.0 / g).exp(), g))
    }
}

impl FieldFn for RadialBump {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64], _: f64) -> f64 {
        self.core(x).map_or(0.0, |c| c.0)
    }
    fn gradient(&self, x: &[f64], _: f64) -> Option<Vec<f64>> {
        let n = self.center.len();
        let Some((u, g)) = self.core(x) else {
            return Some(vec![0.0; n]);
        };
        let r2 = self.radius * self.radius;
        Some(x.iter().zip(&self.center).map(|(a, c)| -2.0 * u * (a - c) / (r2 * g * g)).collect())
    }
    fn hessian(&self, x: &[f64], _: f64) -> Option<DMatrix<f64>> {
        let n = self.center.len();
        let Some((u, g)) = self.core(x) else {
            return Some(DMatrix::zeros(n, n));
        };
        let r2 = self.radius * self.radius;
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let v: Vec<f64> = y.iter().map(|yi| -2.0 * yi / (r2 * g * g)).collect();
        Some(DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            u * (v[i] * v[j] - 2.0 * delta / (r2 * g * g) - 8.0 * y[i] * y[j] / (r2 * r2 * g * g * g))
        }))
    }
    fn dt(&self, _: &[f64], _: f64) -> Option<f64> {
        Some(0.0)
    }
    fn bound(&self) -> f64 {
        self.amp.abs().max(f64::MIN_POSITIVE)
    }
    fn feature_scale(&self) -> f64 {
        self.radius / 4.0
    }
    fn far_field(&self) -> f64 {
        0.0
    }
    fn label(&self) -> String {
        format!("bump:{},{}", self.amp, self.radius)
    }
}

// ---------------------------------------------------------------------------
// Combinators
// ---------------------------------------------------------------------------

struct Affine {
    inner: ScalarField,
    a: DMatrix<f64>,
    b: Vec<f64>,
    a_t: f64,
    c: f64,
    a_inv: DMatrix<f64>,
    norm: f64,
}

impl Affine {
    fn new(inner: ScalarField, a: DMatrix<f64>, b: Vec<f64>, a_t: f64, c: f64) -> Result<Self> {
        let n = inner.dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::InvalidParameter("affine map must be n x n".into()));
        }
        check_len("affine shift", &b, n)?;
        if a_t == 0.0 || !a_t.is_finite() {
            return Err(Error::InvalidParameter("time scale must be nonzero".into()));
        }
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("affine map must be invertible".into()))?;
        let norm = a.clone().svd(false, false).singular_values.max();
        Ok(Self { inner, a, b, a_t, c, a_inv, norm })
    }

    fn map(&self, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        let n = x.len();
        let mut y = self.b.clone();
        for i in 0..n {
            for j in 0..n {
                y[i] += self.a[(i, j)] * x[j];
            }
        }
        (y, self.a_t * t + self.c)
    }
}

impl FieldFn for Affine {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let (y, s) = self.map(x, t);
        self.inner.value(&y, s)
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let (y, s) = self.map(x, t);
        let g = self.inner.0.gradient(&y, s)?;
        let n = g.len();
        Some((0..n).map(|j| (0..n).map(|i| self.a[(i, j)] * g[i]).sum()).collect())
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let (y, s) = self.map(x, t);
        let h = self.inner.0.hessian(&y, s)?;
        Some(self.a.transpose() * h * &self.a)
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        let (y, s) = self.map(x, t);
        Some(self.a_t * self.inner.0.dt(&y, s)?)
    }
    fn bound(&self) -> f64 {
        self.inner.bound()
    }
    fn smooth_region(&self) -> Option<SmoothRegion> {
        let r = self.inner.smooth_region()?;
        let shifted: Vec<f64> = r.center.x.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        let n = shifted.len();
        let x: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.a_inv[(i, j)] * shifted[j]).sum()).collect();
        let t = (r.center.t - self.c) / self.a_t;
        let stretch = self.norm.max(self.a_t.abs()).max(1e-300);
        Some(SmoothRegion { center: SpaceTimePoint { x, t }, radius: r.radius / stretch })
    }
    fn feature_scale(&self) -> f64 {
        self.inner.feature_scale() / self.norm
    }
    fn far_field(&self) -> f64 {
        self.inner.far_field()
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        let (lo, hi) = self.inner.time_window()?;
        let (a, b) = ((lo - self.c) / self.a_t, (hi - self.c) / self.a_t);
        Some((a.min(b), a.max(b)))
    }
    fn time_period(&self) -> Option<f64> {
        self.inner.time_period().map(|p| p / self.a_t.abs())
    }
    fn label(&self) -> String {
        format!("affine({})", self.inner.label())
    }
}

struct Combination {
    terms: Vec<(f64, ScalarField)>,
}

impl Combination {
    fn new(terms: Vec<(f64, ScalarField)>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidParameter("combination needs at least one term".into()));
        };
        let n = first.1.dim();
        if terms.iter().any(|(c, f)| f.dim() != n || !c.is_finite()) {
            return Err(Error::InvalidParameter("combination terms must share a dimension".into()));
        }
        Ok(Self { terms })
    }
}

impl FieldFn for Combination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x, t)).sum()
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        for (c, f) in &self.terms {
            for (o, g) in out.iter_mut().zip(f.0.gradient(x, t)?) {
                *o += c * g;
            }
        }
        Some(out)
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (c, f) in &self.terms {
            out += f.0.hessian(x, t)? * *c;
        }
        Some(out)
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut out = 0.0;
        for (c, f) in &self.terms {
            out += c * f.0.dt(x, t)?;
        }
        Some(out)
    }
    fn bound(&self) -> f64 {
        self.terms.iter().map(|(c, f)| c.abs() * f.bound()).sum::<f64>().max(f64::MIN_POSITIVE)
    }
    fn smooth_region(&self) -> Option<SmoothRegion> {
        let regions: Vec<SmoothRegion> = self.terms.iter().filter_map(|(_, f)| f.smooth_region()).collect();
        let first = regions.first()?;
        let radius = regions
            .iter()
            .map(|r| r.radius - r.center.distance(&first.center))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        Some(SmoothRegion { center: first.center.clone(), radius })
    }
    fn feature_scale(&self) -> f64 {
        self.terms.iter().map(|(_, f)| f.feature_scale()).fold(f64::INFINITY, f64::min)
    }
    fn far_field(&self) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.far_field()).sum()
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        let mut hull = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, f) in &self.terms {
            let (lo, hi) = f.time_window()?;
            hull = (hull.0.min(lo), hull.1.max(hi));
        }
        Some(hull)
    }
    fn time_period(&self) -> Option<f64> {
        let first = self.terms[0].1.time_period()?;
        self.terms.iter().all(|(_, f)| f.time_period() == Some(first)).then_some(first)
    }
    fn label(&self) -> String {
        let parts: Vec<String> = self.terms.iter().map(|(c, f)| format!("{c}*{}", f.label())).collect();
        parts.join(" + ")
    }
}

struct Splice {
    inside: ScalarField,
    outside: ScalarField,
    center: SpaceTimePoint,
    r: f64,
}

impl Splice {
    fn new(inside: ScalarField, outside: ScalarField, center: SpaceTimePoint, r: f64) -> Result<Self> {
        check_positive("splice radius", r)?;
        if inside.dim() != outside.dim() || center.dim() != inside.dim() {
            return Err(Error::InvalidParameter("splice fields must share a dimension".into()));
        }
        Ok(Self { inside, outside, center, r })
    }

    fn pick(&self, x: &[f64], t: f64) -> &ScalarField {
        let inside = sq_dist(x, &self.center.x) < self.r * self.r && (t - self.center.t).abs() < self.r * self.r;
        if inside {
            &self.inside
        } else {
            &self.outside
        }
    }
}

impl FieldFn for Splice {
    fn dim(&self) -> usize {
        self.inside.dim()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.pick(x, t).value(x, t)
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        self.pick(x, t).0.gradient(x, t)
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        self.pick(x, t).0.hessian(x, t)
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        self.pick(x, t).0.dt(x, t)
    }
    fn bound(&self) -> f64 {
        self.inside.bound().max(self.outside.bound())
    }
    fn smooth_region(&self) -> Option<SmoothRegion> {
        let mut radius = self.r.min(self.r * self.r);
        if let Some(inner) = self.inside.smooth_region() {
            radius = radius.min(inner.radius - inner.center.distance(&self.center));
        }
        Some(SmoothRegion { center: self.center.clone(), radius: radius.max(0.0) })
    }
    fn feature_scale(&self) -> f64 {
        self.inside.feature_scale().min(self.outside.feature_scale()).min(self.r / 4.0)
    }
    fn far_field(&self) -> f64 {
        self.outside.far_field()
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        let (lo, hi) = self.outside.time_window()?;
        let r2 = self.r * self.r;
        Some((lo.min(self.center.t - r2), hi.max(self.center.t + r2)))
    }
    fn label(&self) -> String {
        format!("splice({} in {})", self.inside.label(), self.outside.label())
    }
}

struct Line {
    inner: ScalarField,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Line {
    fn new(inner: ScalarField, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_len("line base point", &x, inner.dim())?;
        check_len("line direction", &y, inner.dim())?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("direction must be a unit vector, |y| = {norm}")));
        }
        Ok(Self { inner, x, y })
    }

    fn at(&self, r: f64) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(a, b)| a + r * b).collect()
    }
}

impl FieldFn for Line {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.inner.value(&self.at(x[0]), t)
    }
    fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let g = self.inner.0.gradient(&self.at(x[0]), t)?;
        Some(vec![g.iter().zip(&self.y).map(|(a, b)| a * b).sum()])
    }
    fn hessian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let h = self.inner.0.hessian(&self.at(x[0]), t)?;
        let y = DVector::from_column_slice(&self.y);
        Some(DMatrix::from_element(1, 1, y.dot(&(&h * &y))))
    }
    fn dt(&self, x: &[f64], t: f64) -> Option<f64> {
        self.inner.0.dt(&self.at(x[0]), t)
    }
    fn bound(&self) -> f64 {
        self.inner.bound()
    }
    fn smooth_region(&self) -> Option<SmoothRegion> {
        // The line meets the space-time ball in a segment; its midpoint is
        // the projection of the centre.
        let region = self.inner.smooth_region()?;
        let d: Vec<f64> = region.center.x.iter().zip(&self.x).map(|(a, b)| a - b).collect();
        let along: f64 = d.iter().zip(&self.y).map(|(a, b)| a * b).sum();
        let perp2 = d.iter().map(|v| v * v).sum::<f64>() - along * along;
        let radius = (region.radius * region.radius - perp2.max(0.0)).max(0.0).sqrt();
        Some(SmoothRegion { center: SpaceTimePoint { x: vec![along], t: region.center.t }, radius })
    }
    fn feature_scale(&self) -> f64 {
        self.inner.feature_scale()
    }
    fn far_field(&self) -> f64 {
        self.inner.far_field()
    }
    fn time_window(&self) -> Option<(f64, f64)> {
        self.inner.time_window()
    }
    fn time_period(&self) -> Option<f64> {
        self.inner.time_period()
    }
    fn label(&self) -> String {
        format!("line({}, y = {:?})", self.inner.label(), self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t).unwrap()
    }

    #[test]
    fn constant_field() {
        let f = parse_field("const:3", 2).unwrap();
        assert_eq!(f.eval(&p(&[0.3, -1.0], 2.0)), 3.0);
        assert_eq!(f.gradient(&p(&[0.3, -1.0], 2.0)).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f.dt(&p(&[0.3, -1.0], 2.0)).unwrap(), 0.0);
        let r = finite_difference_check(&f, &p(&[1.0, 1.0], 0.0), 1e-3).unwrap();
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn plane_wave_at_origin() {
        let f = parse_field("planewave:1,0", 1).unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.eval(&p(&[0.0], 0.0)), 1.0);
        assert_eq!(f.gradient(&p(&[0.0], 0.0)).unwrap()[0], 0.0);
        assert!(parse_field("planewave:0,1", 1).is_err());
    }

    #[test]
    fn quadratic_core_derivatives() {
        // x_1² + (2/(n+2)) t with n = 2
        let f = parse_field("quadratic:1,0,0,0,0.5", 2).unwrap();
        let q = p(&[0.5, -0.7], 0.3);
        assert!((f.dt(&q).unwrap() - 0.5).abs() < 1e-15);
        let h = f.hessian(&q).unwrap();
        assert!((h.trace() - 2.0).abs() < 1e-15);
        assert!((f.eval(&q) - (0.25 + 0.15)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_is_clamped_and_smooth_in_transition() {
        let f = parse_field("quadratic:1,0,0", 1).unwrap();
        assert_eq!(f.eval(&p(&[25.0], 0.0)), 0.0);
        assert!(f.eval(&p(&[15.0], 0.0)) > 0.0 && f.eval(&p(&[15.0], 0.0)) < 225.0);
        for x in [11.0, 14.0, 17.0, 19.5] {
            let r = finite_difference_check(&f, &p(&[x], 0.7), 1e-4).unwrap();
            assert!(r.max < 1e-4, "x={x} {r:?}");
        }
    }

    #[test]
    fn fd_discrepancy_is_second_order() {
        let f = parse_field("planewave:1,0", 1).unwrap();
        let q = p(&[0.3], 0.2);
        let a = finite_difference_check(&f, &q, 1e-2).unwrap().max;
        let b = finite_difference_check(&f, &q, 5e-3).unwrap().max;
        assert!((a / b - 4.0).abs() < 0.1, "{}", a / b);
    }

    #[test]
    fn gaussian_and_bump_derivatives() {
        let g = parse_field("gaussian:1,1,1", 2).unwrap();
        let r = finite_difference_check(&g, &p(&[0.3, -0.4], 0.5), 1e-4).unwrap();
        assert!(r.max < 1e-6, "{r:?}");
        let b = parse_field("bump:2,1.5", 3).unwrap();
        let r = finite_difference_check(&b, &p(&[0.3, -0.4, 0.2], 0.0), 1e-4).unwrap();
        assert!(r.max < 1e-5, "{r:?}");
    }

    #[test]
    fn affine_chain_rule() {
        let g = parse_field("gaussian:1,0.8,1.3", 2).unwrap();
        let th = 0.4f64;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let f = g.affine(rot * 1.5, vec![0.1, 0.2], -2.0, 0.3).unwrap();
        let r = finite_difference_check(&f, &p(&[0.2, 0.1], 0.1), 1e-4).unwrap();
        assert!(r.max < 1e-6, "{r:?}");
    }

    #[test]
    fn splice_switches_fields_and_reports_region() {
        let u = parse_field("const:0", 1).unwrap();
        let phi = parse_field("const:-1", 1).unwrap();
        let c = p(&[0.0], 0.0);
        let v = u.splice(&phi, &c, 0.5).unwrap();
        assert_eq!(v.eval(&p(&[0.1], 0.1)), -1.0);
        assert_eq!(v.eval(&p(&[0.1], -0.3)), 0.0);
        assert!(v.is_smooth_at(&c));
        assert!(!v.is_smooth_at(&p(&[0.49], 0.0)));
        assert!(finite_difference_check(&v, &p(&[0.24], 0.0), 1e-2).is_err());
    }
}
