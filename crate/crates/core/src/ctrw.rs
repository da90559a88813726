//! Samplers for the coupled jump law: one-sided stable waiting times, the
//! Gaussian jump given the waiting time, and the jump law conditioned on
//! leaving the forward cylinder `C_ε^+(0,0)`. Validators compare the draws
//! with the transform `E[e^{ik·A - τD}] = e^{-(τ+|k|²)^s}` and with
//! quadrature of the kernel density.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{check_order, check_positive, Error, Result};
use crate::kernel::FracParams;
use crate::quad::{adaptive, Tolerance};

/// Default floor on the acceptance rate of direct rejection.
pub const ACCEPTANCE_FLOOR: f64 = 1e-4;

/// Draws generated per independent stream in batch sampling.
pub const CHUNK: usize = 1 << 14;

/// Seed plus stream identifier of a ChaCha generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream for the `index`-th chunk of a batch drawn from `self`.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream { seed: self.seed, stream_id: self.stream_id.wrapping_mul(1 << 32).wrapping_add(index) }
    }
}

/// A spatial jump together with its waiting time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledJump {
    pub w: Vec<f64>,
    pub tau: f64,
}

impl CoupledJump {
    pub fn norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Outside the forward cylinder `{|w| < ε, 0 < τ < ε²}`.
    pub fn is_exterior(&self, eps: f64) -> bool {
        self.tau >= eps * eps || self.norm() >= eps
    }
}

/// Kanter's factor `A(u)`, so that `D = (A(U)/E)^{(1-s)/s}` with
/// `U ~ U(0,π)`, `E ~ Exp(1)` has Laplace transform `e^{-λ^s}`.
fn kanter(s: f64, u: f64) -> f64 {
    let num = (s * u).sin().powf(s) * ((1.0 - s) * u).sin().powf(1.0 - s);
    (num / u.sin()).powf(1.0 / (1.0 - s))
}

/// One-sided stable variable with `E[e^{-λD}] = e^{-λ^s}`.
pub fn sample_stable_subordinator<R: Rng + ?Sized>(s: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    (kanter(s, u) / e).powf((1.0 - s) / s)
}

/// Density of the one-sided stable law, from the distribution function
/// `P(D <= x) = (1/π) ∫_0^π exp(-A(u) x^{-s/(1-s)}) du`.
pub fn stable_density(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = x.powf(-s / (1.0 - s));
    let f = |u: f64| {
        let a = kanter(s, u) * y;
        if a.is_finite() && a < 745.0 {
            a * (-a).exp()
        } else {
            0.0
        }
    };
    let est = adaptive(f, 0.0, PI, Tolerance::new(1e-300, 1e-10));
    s / ((1.0 - s) * PI * x) * est.value
}

fn gaussian_vector<R: Rng + ?Sized>(n: usize, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

/// `D` from the subordinator and `A | D ~ N(0, 2D I_n)`.
pub fn sample_coupled_pair<R: Rng + ?Sized>(s: f64, n: usize, rng: &mut R) -> CoupledJump {
    let tau = sample_stable_subordinator(s, rng);
    CoupledJump { w: gaussian_vector(n, (2.0 * tau).sqrt(), rng), tau }
}

/// Coupled pair conditioned on the exterior of `C_ε^+` by rejection.
/// Returns the draw and the number of attempts.
pub fn sample_conditioned_exterior<R: Rng + ?Sized>(
    s: f64,
    n: usize,
    eps: f64,
    floor: f64,
    rng: &mut R,
) -> Result<(CoupledJump, u64)> {
    let limit = (10.0 / floor).ceil() as u64;
    for attempt in 1..=limit {
        let j = sample_coupled_pair(s, n, rng);
        if j.is_exterior(eps) {
            return Ok((j, attempt));
        }
    }
    Err(Error::AcceptanceStall { rate: 1.0 / limit as f64, floor })
}

fn uniform_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let z = gaussian_vector(n, 1.0, rng);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return z.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Exact sampler of the normalized kernel density on the exterior of
/// `C_ε^+`. With probability `κ/Γ(1-s)` the lag is Pareto on `[ε², ∞)` and
/// the jump Gaussian; otherwise `τ < ε²` and the jump leaves the ball.
#[derive(Clone, Debug)]
pub struct ExteriorSampler {
    n: usize,
    s: f64,
    eps: f64,
    far_probability: f64,
    near_gamma: Gamma<f64>,
}

impl ExteriorSampler {
    pub fn new(fp: &FracParams, eps: f64) -> Result<Self> {
        check_positive("eps", eps)?;
        let near_gamma = Gamma::new(0.5 * fp.n as f64 + fp.s, 1.0)
            .map_err(|e| Error::InvalidParameter(format!("gamma law: {e}")))?;
        Ok(Self { n: fp.n, s: fp.s, eps, far_probability: fp.far_time_fraction(), near_gamma })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoupledJump {
        let (s, e2) = (self.s, self.eps * self.eps);
        if rng.random::<f64>() < self.far_probability {
            let u = 1.0 - rng.random::<f64>();
            let tau = e2 * u.powf(-1.0 / s);
            return CoupledJump { w: gaussian_vector(self.n, (2.0 * tau).sqrt(), rng), tau };
        }
        // With G = |w|²/(4τ) and x = ε²/(4τ): (G, x) has density
        // ∝ g_{n/2}(G) x^{s-1} on 1/4 < x < G.
        let floor = 0.25f64.powf(s);
        loop {
            let g = self.near_gamma.sample(rng);
            if g <= 0.25 || rng.random::<f64>() >= 1.0 - (4.0 * g).powf(-s) {
                continue;
            }
            let v = rng.random::<f64>();
            let x = (floor + v * (g.powf(s) - floor)).powf(1.0 / s);
            let tau = e2 / (4.0 * x);
            let r = (e2 * g / x).sqrt();
            let w = uniform_direction(self.n, rng).into_iter().map(|d| r * d).collect();
            return CoupledJump { w, tau };
        }
    }
}

/// Sampling route for the exterior law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExteriorMethod {
    /// Rejection of coupled pairs with importance weights for the lag law.
    Rejection,
    /// The exact two-region sampler; unit weights.
    TwoRegion,
}

/// Importance weight `s τ^{-1-s} / (Γ(1-s) f_s(τ))` carrying coupled-pair
/// draws to the kernel's `τ^{-1-s}` lag law; tends to 1 as `τ → ∞`.
pub fn importance_weight(s: f64, tau: f64) -> f64 {
    let f = stable_density(s, tau);
    let log_num = s.ln() - (1.0 + s) * tau.ln() - ln_gamma(1.0 - s);
    if f > 0.0 {
        (log_num - f.ln()).exp()
    } else {
        f64::INFINITY
    }
}

/// Kish effective sample size.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum: f64 = weights.iter().sum();
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq > 0.0 {
        sum * sum / sq
    } else {
        0.0
    }
}

/// Draws from the exterior law with their weights.
#[derive(Clone, Debug, Serialize)]
pub struct SampleBatch {
    pub draws: Vec<CoupledJump>,
    pub weights: Vec<f64>,
    pub acceptance_rate: f64,
    pub eps: f64,
    pub method: ExteriorMethod,
    pub effective_sample_size: f64,
}

/// `count` exterior draws, generated in parallel chunks of [`CHUNK`] draws
/// with one child stream each.
pub fn sample_exterior_batch(
    fp: &FracParams,
    eps: f64,
    count: usize,
    method: ExteriorMethod,
    floor: f64,
    stream: RngStream,
) -> Result<SampleBatch> {
    check_positive("eps", eps)?;
    let chunks = count.div_ceil(CHUNK);
    let sampler = ExteriorSampler::new(fp, eps)?;
    let parts: Vec<Result<(Vec<CoupledJump>, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.child(c as u64).rng();
            let len = CHUNK.min(count - c * CHUNK);
            let mut draws = Vec::with_capacity(len);
            let mut attempts = 0;
            for _ in 0..len {
                match method {
                    ExteriorMethod::Rejection => {
                        let (j, a) = sample_conditioned_exterior(fp.s, fp.n, eps, floor, &mut rng)?;
                        attempts += a;
                        draws.push(j);
                    }
                    ExteriorMethod::TwoRegion => {
                        attempts += 1;
                        draws.push(sampler.sample(&mut rng));
                    }
                }
            }
            Ok((draws, attempts))
        })
        .collect();
    let mut draws = Vec::with_capacity(count);
    let mut attempts = 0;
    for part in parts {
        let (d, a) = part?;
        draws.extend(d);
        attempts += a;
    }
    let acceptance_rate = if attempts == 0 { 1.0 } else { draws.len() as f64 / attempts as f64 };
    if acceptance_rate < floor {
        return Err(Error::AcceptanceStall { rate: acceptance_rate, floor });
    }
    let weights: Vec<f64> = match method {
        ExteriorMethod::Rejection => draws.par_iter().map(|j| importance_weight(fp.s, j.tau)).collect(),
        ExteriorMethod::TwoRegion => vec![1.0; draws.len()],
    };
    Ok(SampleBatch {
        effective_sample_size: effective_sample_size(&weights),
        draws,
        weights,
        acceptance_rate,
        eps,
        method,
    })
}

/// One node of the transform check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformNode {
    pub k: f64,
    pub tau: f64,
    pub empirical: f64,
    pub exact: f64,
    pub std_error: f64,
    /// `|empirical - exact| / std_error`.
    pub z: f64,
}

/// Transform check of the coupled pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformReport {
    pub s: f64,
    pub n: usize,
    pub draws: usize,
    pub nodes: Vec<TransformNode>,
    pub max_z: f64,
}

/// Default `(|k|, τ)` nodes of the transform check.
pub const TRANSFORM_NODES: [(f64, f64); 6] = [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (1.5, 1.5)];

/// Empirical `E[cos(k A_1) e^{-τD}]` against `e^{-(τ+k²)^s}` at each node;
/// the imaginary part vanishes by symmetry.
pub fn transform_check(
    s: f64,
    n: usize,
    draws: usize,
    nodes: &[(f64, f64)],
    stream: RngStream,
) -> Result<TransformReport> {
    check_order(s)?;
    if n == 0 || draws < 2 {
        return Err(Error::InvalidParameter("need n >= 1 and at least two draws".into()));
    }
    let chunks = draws.div_ceil(CHUNK);
    let m = nodes.len();
    // Per node: sum and sum of squares.
    let sums: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.child(c as u64).rng();
            let len = CHUNK.min(draws - c * CHUNK);
            let mut acc = vec![(0.0, 0.0); m];
            for _ in 0..len {
                let j = sample_coupled_pair(s, n, &mut rng);
                for (a, &(k, tau)) in acc.iter_mut().zip(nodes) {
                    let v = (k * j.w[0]).cos() * (-tau * j.tau).exp();
                    a.0 += v;
                    a.1 += v * v;
                }
            }
            acc
        })
        .collect();
    let count = draws as f64;
    let nodes = nodes
        .iter()
        .enumerate()
        .map(|(i, &(k, tau))| {
            let (sum, sq) = sums.iter().fold((0.0, 0.0), |a, c| (a.0 + c[i].0, a.1 + c[i].1));
            let mean = sum / count;
            let var = ((sq - count * mean * mean) / (count - 1.0)).max(0.0);
            let std_error = (var / count).sqrt();
            let exact = (-(tau + k * k).powf(s)).exp();
            let z = if std_error > 0.0 { (mean - exact).abs() / std_error } else { f64::INFINITY };
            TransformNode { k, tau, empirical: mean, exact, std_error, z }
        })
        .collect::<Vec<_>>();
    let max_z = nodes.iter().map(|n| n.z).fold(0.0, f64::max);
    Ok(TransformReport { s, n, draws, nodes, max_z })
}

/// Rectangular bin in `(|w|, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bin {
    pub r: (f64, f64),
    pub tau: (f64, f64),
}

impl Bin {
    fn contains(&self, j: &CoupledJump) -> bool {
        let r = j.norm();
        r >= self.r.0 && r < self.r.1 && j.tau >= self.tau.0 && j.tau < self.tau.1
    }
}

/// Log-spaced bins tiling the exterior of `C_ε^+`.
pub fn exterior_bins(eps: f64) -> Vec<Bin> {
    let r = [0.0, 0.5, 1.0, 1.5, 2.0, 4.0, f64::INFINITY].map(|v| v * eps);
    let t = [0.0, 1.0 / 16.0, 0.25, 1.0, 4.0, 16.0, 64.0, f64::INFINITY].map(|v| v * eps * eps);
    let mut bins = Vec::new();
    for tw in t.windows(2) {
        for rw in r.windows(2) {
            if rw[1] <= eps && tw[1] <= eps * eps {
                continue;
            }
            bins.push(Bin { r: (rw[0], rw[1]), tau: (tw[0], tw[1]) });
        }
    }
    bins
}

/// Unnormalized mass `∫ τ^{-1-s} P(r0 <= |W| < r1 | τ) dτ` of a bin.
fn bin_mass(n: usize, s: f64, bin: &Bin, eps: f64) -> f64 {
    let a = 0.5 * n as f64;
    let lower = |r: f64, tau: f64| if r.is_infinite() { 1.0 } else if r <= 0.0 { 0.0 } else { gamma_lr(a, r * r / (4.0 * tau)) };
    let p = |tau: f64| (lower(bin.r.1, tau) - lower(bin.r.0, tau)).max(0.0);
    let tol = Tolerance::new(1e-300, 1e-11);
    if bin.tau.1.is_infinite() {
        // y = τ^{-s}: ∫_T^∞ τ^{-1-s} p dτ = (1/s) ∫_0^{T^{-s}} p(y^{-1/s}) dy.
        let top = bin.tau.0.powf(-s);
        let est = adaptive(|y: f64| if y <= 0.0 { 0.0 } else { p(y.powf(-1.0 / s)) }, 0.0, top, tol);
        return est.value / s;
    }
    let lo = if bin.tau.0 > 0.0 { bin.tau.0 } else { 1e-4 * eps * eps };
    // Log-lag substitution.
    let est = adaptive(|v: f64| { let tau = v.exp(); tau.powf(-s) * p(tau) }, lo.ln(), bin.tau.1.ln(), tol);
    est.value
}

/// Chi-square statistic with degrees of freedom and p-value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square(statistic: f64, dof: usize) -> ChiSquare {
    let p_value = ChiSquared::new(dof as f64).map(|d| 1.0 - d.cdf(statistic)).unwrap_or(f64::NAN);
    ChiSquare { statistic, dof, p_value }
}

/// Histogram check of exterior draws against kernel quadrature.
#[derive(Clone, Debug, Serialize)]
pub struct HistogramReport {
    pub eps: f64,
    pub bins: Vec<Bin>,
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
    pub chi_square: ChiSquare,
    pub tau_floor: f64,
    /// Kernel mass below the lag floor.
    pub excluded_expected: f64,
    /// Weighted fraction of draws below the lag floor.
    pub excluded_observed: f64,
    pub acceptance_rate: f64,
    pub effective_sample_size: f64,
}

/// Expected bin probabilities of the normalized exterior law.
pub fn exterior_bin_probabilities(fp: &FracParams, eps: f64, bins: &[Bin]) -> Vec<f64> {
    let masses: Vec<f64> = bins.par_iter().map(|b| bin_mass(fp.n, fp.s, b, eps)).collect();
    let total: f64 = masses.iter().sum();
    masses.into_iter().map(|m| m / total).collect()
}

/// Compares a batch with the quadrature of the kernel density over
/// [`exterior_bins`], conditionally on `τ >= tau_floor`. Unit weights use
/// Pearson's statistic over bins with at least five expected draws (the
/// rest pooled); weighted batches use the Wald statistic of the
/// self-normalized bin estimates. Rejection weights grow like
/// `exp(c τ^{-s/(1-s)} - ε²/(4τ))` as `τ → 0` and have infinite variance
/// for small ε, so weighted checks need a positive floor; the mass below it
/// is reported separately.
pub fn histogram_check(fp: &FracParams, batch: &SampleBatch, tau_floor: f64) -> Result<HistogramReport> {
    let eps = batch.eps;
    let bins = exterior_bins(eps);
    let full = exterior_bin_probabilities(fp, eps, &bins);
    let b = bins.len();
    let index: Vec<usize> = batch.draws.iter().map(|j| bins.iter().position(|bin| bin.contains(j)).unwrap_or(b)).collect();
    if index.contains(&b) {
        return Err(Error::InvalidParameter("batch contains draws inside the cylinder".into()));
    }
    let kept: Vec<bool> = bins.iter().map(|bin| bin.tau.0 >= tau_floor).collect();
    let all: f64 = batch.weights.iter().sum();
    let total: f64 = index.iter().zip(&batch.weights).filter(|(i, _)| kept[**i]).map(|(_, w)| w).sum();
    let kept_mass: f64 = full.iter().zip(&kept).filter(|(_, k)| **k).map(|(e, _)| e).sum();
    let excluded_expected = 1.0 - kept_mass;
    let excluded_observed = 1.0 - total / all;
    let expected: Vec<f64> = full.iter().zip(&kept).map(|(e, k)| if *k { e / kept_mass } else { 0.0 }).collect();
    let mut observed = vec![0.0; b];
    let mut kept_weights = Vec::with_capacity(index.len());
    for (&i, w) in index.iter().zip(&batch.weights) {
        if kept[i] {
            observed[i] += w / total;
            kept_weights.push(*w);
        }
    }
    // Bins with fewer than five expected (effective) draws are pooled.
    let count = effective_sample_size(&kept_weights);
    let mut cell_of = vec![0; b];
    let mut cells = 0;
    for (i, e) in expected.iter().enumerate() {
        if !kept[i] {
            cell_of[i] = usize::MAX - 1;
        } else if e * count >= 5.0 {
            cell_of[i] = cells;
            cells += 1;
        } else {
            cell_of[i] = usize::MAX;
        }
    }
    if cell_of.contains(&usize::MAX) {
        cell_of.iter_mut().filter(|c| **c == usize::MAX).for_each(|c| *c = cells);
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::DegenerateFit("fewer than two populated bins".into()));
    }
    let mut cell_e = vec![0.0; cells];
    let mut cell_o = vec![0.0; cells];
    for i in (0..b).filter(|&i| kept[i]) {
        cell_e[cell_of[i]] += expected[i];
        cell_o[cell_of[i]] += observed[i];
    }
    let chi = if batch.method == ExteriorMethod::TwoRegion {
        let stat: f64 = cell_e.iter().zip(&cell_o).map(|(e, o)| count * (o - e).powi(2) / e).sum();
        chi_square(stat, cells - 1)
    } else {
        // Drop the last cell; covariance of the self-normalized estimates.
        let m = cells - 1;
        let mut cov = DMatrix::<f64>::zeros(m, m);
        let mut centered = vec![0.0; m];
        for (&i, w) in index.iter().zip(&batch.weights).filter(|(i, _)| kept[**i]) {
            let wn = w / total;
            let own = cell_of[i];
            for (c, v) in centered.iter_mut().enumerate() {
                *v = if c == own { 1.0 } else { 0.0 } - cell_o[c];
            }
            for r in 0..m {
                for c in 0..m {
                    cov[(r, c)] += wn * wn * centered[r] * centered[c];
                }
            }
        }
        let d = DVector::from_fn(m, |i, _| cell_o[i] - cell_e[i]);
        let stat = cov
            .lu()
            .solve(&d)
            .map(|x| d.dot(&x))
            .ok_or_else(|| Error::DegenerateFit("singular bin covariance".into()))?;
        chi_square(stat, m)
    };
    Ok(HistogramReport {
        eps,
        bins,
        expected,
        observed,
        chi_square: chi,
        tau_floor,
        excluded_expected,
        excluded_observed,
        acceptance_rate: batch.acceptance_rate,
        effective_sample_size: batch.effective_sample_size,
    })
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// Two-sample KS critical value at level 1%.
pub fn ks_critical_1pct(m: usize, n: usize) -> f64 {
    1.628 * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..5).map(|_| 0.0).scan(RngStream::new(3, 1).rng(), |r, _| Some(r.random())).collect();
        let b: Vec<f64> = (0..5).map(|_| 0.0).scan(RngStream::new(3, 1).rng(), |r, _| Some(r.random())).collect();
        let c: Vec<f64> = (0..5).map(|_| 0.0).scan(RngStream::new(3, 2).rng(), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn half_order_density_is_levy() {
        // D = 1/(2G²) for s = 1/2: density x^{-3/2} e^{-1/(4x)} / (2√π).
        for x in [0.05f64, 0.3, 1.0, 7.0, 200.0] {
            let exact = x.powf(-1.5) * (-0.25 / x).exp() / (2.0 * PI.sqrt());
            assert!((stable_density(0.5, x) / exact - 1.0).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn density_integrates_to_laplace_transform() {
        for s in [0.3, 0.7] {
            let lt = adaptive(|v: f64| { let x = v.exp(); x * stable_density(s, x) * (-x).exp() }, -12.0, 6.0, Tolerance::new(1e-13, 1e-10));
            assert!((lt.value - (-1.0f64).exp()).abs() < 1e-7, "s = {s}: {}", lt.value);
        }
    }

    #[test]
    fn bin_probabilities_match_far_fraction() {
        let fp = FracParams::new(2, 0.4).unwrap();
        let bins = exterior_bins(0.5);
        let p = exterior_bin_probabilities(&fp, 0.5, &bins);
        let far: f64 = bins.iter().zip(&p).filter(|(b, _)| b.tau.0 >= 0.25).map(|(_, v)| v).sum();
        assert!((far - fp.far_time_fraction()).abs() < 1e-8, "{far} vs {}", fp.far_time_fraction());
    }

    #[test]
    fn ks_distance_of_identical_samples_is_zero() {
        let a = [0.3, 0.1, 0.2];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }
}
