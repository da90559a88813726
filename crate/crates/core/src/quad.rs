//! Quadrature building blocks: adaptive Gauss–Kronrod on intervals, Gauss
//! rules for Legendre and Gaussian weights, radial/angular rules for isotropic
//! Gaussian averages, and integrators for the power weight `τ^{-1-s}` on
//! `(a, b)` and `(a, ∞)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Absolute/relative tolerance pair with a subdivision budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, max_subdivisions: 200 }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    /// Same relative tolerance with a scaled absolute tolerance.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { abs: self.abs * factor, ..*self }
    }
}

/// A numerical integral with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate { value: 0.0, error: 0.0, evals: 0, converged: true };

    pub fn exact(value: f64) -> Self {
        Self { value, ..Self::ZERO }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { value: self.value * c, error: self.error * c.abs(), ..self }
    }

    pub fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
            evals: self.evals + o.evals,
            converged: self.converged && o.converged,
        }
    }
}

impl AddAssign for Estimate {
    fn add_assign(&mut self, o: Estimate) {
        *self = *self + o;
    }
}

// 7-point Gauss / 15-point Kronrod nodes on [0, 1] (symmetric half).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// One application of the 15-point Kronrod rule on `[a, b]`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv = [(0.0, 0.0); 7];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv[j] = (f1, f2);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let err = rescale_error((res_k - res_g) * h, res_abs * h.abs(), res_asc * h.abs());
    (res_k * h, err)
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`; the
/// interval with the largest error is bisected until the summed error meets
/// the tolerance.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    if a == b {
        return Estimate::ZERO;
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        let done = error <= tol.target(value);
        if done || parts.len() >= tol.max_subdivisions {
            return Estimate { value, error, evals, converged: done };
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = parts[idx];
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            return Estimate { value, error, evals, converged: false };
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evals += 30;
        parts[idx] = (lo, mid, v1, e1);
        parts.push((mid, hi, v2, e2));
    }
}

/// A quadrature rule: nodes and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss–Legendre rule with `m` nodes on `[-1, 1]`.
    pub fn legendre(m: usize) -> Arc<GaussRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("rule cache poisoned");
        guard.entry(m).or_insert_with(|| Arc::new(legendre_nodes(m))).clone()
    }

    /// Gauss–Hermite rule with `m` nodes for the standard normal law
    /// (weights sum to one).
    pub fn hermite(m: usize) -> Arc<GaussRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("rule cache poisoned");
        guard.entry(m).or_insert_with(|| Arc::new(hermite_nodes(m))).clone()
    }

    /// Composite `m`-point Legendre rule on `[a, b]` with `panels` panels.
    pub fn composite(a: f64, b: f64, panels: usize, m: usize) -> GaussRule {
        let base = Self::legendre(m);
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * m);
        let mut weights = Vec::with_capacity(panels * m);
        for p in 0..panels {
            let lo = a + h * p as f64;
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        GaussRule { nodes, weights }
    }

    /// Rule for `E[f(Z)]`, `Z ~ N(0,1)`, adapted to the ratio between the
    /// Gaussian spread and the feature size of the integrand: Gauss–Hermite
    /// with `base` nodes up to `gh_ratio`, otherwise composite Legendre on
    /// `[-zmax, zmax]` with panels about one feature wide.
    pub fn standard_normal(ratio: f64, gh_ratio: f64, base: usize, max_nodes: usize, zmax: f64) -> GaussRule {
        if ratio <= gh_ratio {
            return (*Self::hermite(base)).clone();
        }
        let panels = ((2.0 * zmax * ratio.max(1.0)).ceil() as usize).clamp(1, (max_nodes / 8).max(1));
        let mut rule = Self::composite(-zmax, zmax, panels, 8);
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
            *w *= (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        }
        rule
    }

    /// Rule for `E[f(|Z|)]` with `Z` standard normal in `R^n` (chi law).
    pub fn chi_radial(n: usize, panels: usize) -> GaussRule {
        Self::chi_segment(n, 0.0, chi_cutoff(n), panels)
    }

    /// Rule for `E[f(|Z|); a <= |Z| <= b]`.
    pub fn chi_segment(n: usize, a: f64, b: f64, panels: usize) -> GaussRule {
        let mut rule = Self::composite(a, b, panels.max(1), 8);
        let half = 0.5 * n as f64;
        let log_norm = (half - 1.0) * 2f64.ln() + ln_gamma(half);
        for (r, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
            *w *= ((n as f64 - 1.0) * r.ln() - 0.5 * r * r - log_norm).exp();
        }
        rule
    }
}

/// Radius beyond which the chi(n) law has negligible (< 1e-17) mass.
pub fn chi_cutoff(n: usize) -> f64 {
    9.0 + 0.5 * n as f64
}

fn legendre_nodes(m: usize) -> GaussRule {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
            }
            dp = mf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn hermite_nodes(m: usize) -> GaussRule {
    assert!(m >= 1);
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = (k as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize to remove eigen-solver asymmetry.
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[j].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// Directions on a half sphere of `R^n` with weights summing to one; exact
/// averaging for integrands even under `y -> -y` up to the resolution.
pub fn half_sphere(n: usize, resolution: usize) -> Vec<(Vec<f64>, f64)> {
    let res = resolution.max(2);
    match n {
        1 => vec![(vec![1.0], 1.0)],
        2 => (0..res)
            .map(|j| {
                let th = PI * (j as f64 + 0.5) / res as f64;
                (vec![th.cos(), th.sin()], 1.0 / res as f64)
            })
            .collect(),
        _ => {
            let mu = GaussRule::composite(0.0, 1.0, res.div_ceil(8).max(1), 8);
            let nphi = 2 * res;
            let mut out = Vec::with_capacity(mu.len() * nphi);
            for (m, wm) in mu.nodes.iter().zip(&mu.weights) {
                let rho = (1.0 - m * m).max(0.0).sqrt();
                for k in 0..nphi {
                    let ph = 2.0 * PI * k as f64 / nphi as f64;
                    let mut y = vec![0.0; n];
                    y[0] = rho * ph.cos();
                    y[1] = rho * ph.sin();
                    y[2] = *m;
                    out.push((y, wm / nphi as f64));
                }
            }
            out
        }
    }
}

/// Substitution used on a bounded stretch `[a, b]` of the power weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadMap {
    /// `τ = e^{-r}`.
    Log,
    /// `τ = σ^{1/(1-s)}`, which turns `τ^{-s} dτ/τ` into `dσ/(1-s)`.
    Power,
}

/// `∫_a^b τ^{-1-s} g(τ) dτ` with `0 < a < b`.
pub fn power_weight_finite<G: FnMut(f64) -> f64>(
    mut g: G,
    s: f64,
    a: f64,
    b: f64,
    map: HeadMap,
    tol: Tolerance,
) -> Estimate {
    match map {
        HeadMap::Log => {
            let f = |r: f64| {
                let tau = (-r).exp();
                (s * r).exp() * g(tau)
            };
            adaptive(f, -b.ln(), -a.ln(), tol)
        }
        HeadMap::Power => {
            let p = 1.0 / (1.0 - s);
            let f = |sig: f64| {
                let tau = sig.powf(p);
                g(tau) / tau
            };
            adaptive(f, a.powf(1.0 - s), b.powf(1.0 - s), tol.scaled(1.0 - s)).scale(p)
        }
    }
}

/// `∫_a^∞ τ^{-1-s} h(τ) dτ` through `σ = τ^{-s}`, which maps the weight to
/// `dσ/s` on `(0, a^{-s}]`. The horizon `T` is the first dyadic point past
/// `min_horizon` where `h` sampled at `T` and `T/2` predicts a remainder
/// below `tail_tol`; without one it falls back to the worst case for
/// `|h| <= bound`. The dropped remainder is added to the error.
pub fn power_weight_tail_powerlaw<H: FnMut(f64) -> f64>(
    mut h: H,
    s: f64,
    a: f64,
    bound: f64,
    tail_tol: f64,
    min_horizon: f64,
    tol: Tolerance,
) -> Estimate {
    let top = a.powf(-s);
    let floor = 1e300f64.powf(-s);
    let worst = (s * tail_tol / bound.max(f64::MIN_POSITIVE)).max(floor).min(top);
    let cap = worst.powf(-1.0 / s);
    let mut horizon = (cap, bound);
    let mut tau = a;
    let mut prev = h(tau).abs();
    while tau < cap {
        tau *= 2.0;
        let cur = h(tau).abs();
        let level = prev.max(cur);
        if tau >= min_horizon && level * tau.powf(-s) / s <= tail_tol {
            horizon = (tau, level);
            break;
        }
        prev = cur;
    }
    let sig_min = horizon.0.powf(-s).clamp(worst, top);
    let f = |sig: f64| h(sig.powf(-1.0 / s));
    let mut est = adaptive(f, sig_min, top, tol.scaled(s)).scale(1.0 / s);
    est.error += horizon.1 * sig_min / s;
    est
}

/// Settings for [`power_weight_tail_doubling`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingTail {
    /// Contributions below this are treated as negligible.
    pub tail_tol: f64,
    /// The sweep never stops before this horizon.
    pub min_horizon: f64,
    /// Hard cap; the remainder beyond is bounded analytically.
    pub max_horizon: f64,
}

/// `∫_a^∞ τ^{-1-s} h(τ) dτ` over dyadic intervals `[T, 2T]` (log
/// substitution on each); stops once two consecutive contributions are
/// negligible past `min_horizon`, or at `max_horizon` where the rest is
/// estimated from the last contributions and capped by `bound·T^{-s}/s`.
pub fn power_weight_tail_doubling<H: FnMut(f64) -> f64>(
    mut h: H,
    s: f64,
    a: f64,
    bound: f64,
    cfg: DoublingTail,
    tol: Tolerance,
) -> Estimate {
    let mut total = Estimate::ZERO;
    let mut lo = a;
    let mut quiet = 0;
    let mut recent = [0.0f64; 2];
    loop {
        let hi = 2.0 * lo;
        let f = |r: f64| {
            let tau = r.exp();
            (-s * r).exp() * h(tau)
        };
        let piece = adaptive(f, lo.ln(), hi.ln(), tol);
        total += piece;
        recent = [recent[1], piece.value.abs() + piece.error];
        quiet = if piece.value.abs() + piece.error <= cfg.tail_tol { quiet + 1 } else { 0 };
        lo = hi;
        if quiet >= 2 && lo >= cfg.min_horizon {
            break;
        }
        if lo >= cfg.max_horizon {
            // Contributions of bounded integrands shrink at least like 2^{-s}
            // per doubling, so the recent ones extrapolate the remainder.
            let geometric = 2.0 * recent[0].max(recent[1]) / (1.0 - 2f64.powf(-s));
            total.error += geometric.min(bound * lo.powf(-s) / s);
            break;
        }
    }
    total
}

/// `∫_a^∞ τ^{-1-s} h(τ) dτ` for `h` with period `P`: four periods directly,
/// then the rest folded onto one period against `Σ_k (τ + kP)^{-1-s}`.
pub fn power_weight_tail_periodic<H: FnMut(f64) -> f64>(
    mut h: H,
    s: f64,
    a: f64,
    period: f64,
    tol: Tolerance,
) -> Estimate {
    let b = a + 4.0 * period;
    let direct = adaptive(
        |r: f64| {
            let tau = r.exp();
            (-s * r).exp() * h(tau)
        },
        a.ln(),
        b.ln(),
        tol,
    );
    let folded = adaptive(|r: f64| h(b + r) * periodic_weight(b + r, period, s), 0.0, period, tol);
    direct + folded
}

/// `Σ_{k>=0} (a + kP)^{-1-s}` with Euler–Maclaurin after eight terms.
fn periodic_weight(a: f64, p: f64, s: f64) -> f64 {
    const K: usize = 8;
    let head: f64 = (0..K).map(|k| (a + k as f64 * p).powf(-1.0 - s)).sum();
    let b = a + K as f64 * p;
    let f0 = b.powf(-1.0 - s);
    let f1 = -(1.0 + s) * p * b.powf(-2.0 - s);
    let f3 = -(1.0 + s) * (2.0 + s) * (3.0 + s) * p.powi(3) * b.powf(-4.0 - s);
    head + b.powf(-s) / (s * p) + 0.5 * f0 - f1 / 12.0 + f3 / 720.0
}

/// Pairwise summation; keeps parallel reductions reproducible
/// when the input order is fixed.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = GaussRule::legendre(8);
        let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = r.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_reproduces_normal_moments() {
        let r = GaussRule::hermite(20);
        let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum();
        let m8: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
        assert!((m8 - 105.0).abs() < 1e-8);
    }

    #[test]
    fn wide_normal_rule_resolves_oscillation() {
        // E[cos(k Z)] = e^{-k^2/2}
        let k = 5.0;
        let r = GaussRule::standard_normal(k * 2.0, 1.0, 40, 4096, 8.5);
        let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (k * x).cos()).sum();
        assert!((v - (-k * k / 2.0).exp()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn chi_radial_moments() {
        for n in 1..=3 {
            let r = GaussRule::chi_radial(n, 12);
            let m0: f64 = r.weights.iter().sum();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            assert!((m0 - 1.0).abs() < 1e-12, "n={n} {m0}");
            assert!((m2 - n as f64).abs() < 1e-11, "n={n} {m2}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let e = adaptive(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-10, 1e-10));
        assert!((e.value - 2.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn power_weight_pieces_sum_to_gamma_identity() {
        // ∫_0^∞ τ^{-1-s}(1 - e^{-τ}) dτ = Γ(1-s)/s
        let s = 0.4;
        let tol = Tolerance::new(1e-12, 1e-12);
        let g = |t: f64| -(-t).exp_m1();
        let near = 1e-8f64.powf(1.0 - s) / (1.0 - s);
        let head = power_weight_finite(g, s, 1e-8, 1.0, HeadMap::Log, tol);
        let head2 = power_weight_finite(g, s, 1e-8, 1.0, HeadMap::Power, tol);
        let tail = power_weight_tail_powerlaw(g, s, 1.0, 1.0, 1e-12, 16.0, tol);
        let cfg = DoublingTail { tail_tol: 1e-13, min_horizon: 64.0, max_horizon: 1e12 };
        let tail2 = power_weight_tail_doubling(|t| -(-t).exp(), s, 1.0, 1.0, cfg, tol).value + 1.0 / s;
        let want = statrs::function::gamma::gamma(1.0 - s) / s;
        assert!((near + head.value + tail.value - want).abs() < 1e-7);
        assert!((near + head2.value + tail2 - want).abs() < 1e-7);
    }

    #[test]
    fn periodic_tail_matches_gamma_identity() {
        // ∫_0^∞ τ^{-1-s}(1 - cos τ) dτ = Γ(1-s) cos(πs/2)/s.
        let s = 0.4;
        let tol = Tolerance::new(1e-13, 1e-12);
        let head = adaptive(|r: f64| (s * r).exp() * (1.0 - (-r).exp().cos()), 0.0, 60.0, tol);
        let tail = power_weight_tail_periodic(|t| -t.cos(), s, 1.0, 2.0 * PI, tol).value + 1.0 / s;
        let want = statrs::function::gamma::gamma(1.0 - s) * (PI * s / 2.0).cos() / s;
        assert!((head.value + tail - want).abs() < 1e-10, "{} vs {want}", head.value + tail);
        let direct: f64 = (0..200_000).map(|k| (3.0 + k as f64 * 0.5f64).powf(-1.7)).sum::<f64>()
            + (3.0 + 200_000.0 * 0.5f64).powf(-0.7) / (0.7 * 0.5);
        assert!((periodic_weight(3.0, 0.5, 0.7) - direct).abs() < 1e-8);
    }

    #[test]
    fn half_sphere_weights_and_second_moment() {
        for n in 1..=3 {
            let pts = half_sphere(n, 16);
            let w: f64 = pts.iter().map(|p| p.1).sum();
            let m: f64 = pts.iter().map(|p| p.1 * p.0[0] * p.0[0]).sum();
            assert!((w - 1.0).abs() < 1e-13);
            assert!((m - 1.0 / n as f64).abs() < 1e-12, "n={n} {m}");
        }
    }
}
