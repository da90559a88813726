//! Infinity fractional heat operators `H^{s,±}_∞`, the directional mean
//! value operators `M^{s,y}_{ε,±}`, `M^{s,y,z}_{ε,±}`, `M^{s,∞}_{ε,±}`, and
//! the sup-inf over a discrete sphere.
//!
//! Along a unit direction `y` every operator reduces to a one-dimensional
//! one applied to the line field `r ↦ u(x + r y, t)`. The forward
//! orientation is the backward one applied to `u(x, -t)` at `(x, -t)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::fields::{ScalarField, SpaceTimePoint};
use crate::fracheat::{
    check_inputs, eval_hs, heat_defect, lag_integral, Averager, LagModel, OperatorValue, QuadratureSpec, Route, Scheme,
};
use crate::kernel::FracParams;
use crate::meanvalue::{check_eps, check_grid, exterior_defect, fit_report, to_mean_value, ExpansionReport, MeanValue, Sides};

/// Default gradient threshold separating the two branches.
pub const GRADIENT_THRESHOLD: f64 = 1e-8;
/// Upper edge of the band in which both branches are reported.
pub const HYSTERESIS_BAND: f64 = 1e-4;

/// Time orientation of the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Integrates past values, `K(η, -τ)`.
    Backward,
    /// Integrates future values, `K(η, +τ)`.
    Forward,
}

impl Orientation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bwd" | "backward" | "-" => Ok(Self::Backward),
            "fwd" | "forward" | "+" => Ok(Self::Forward),
            other => Err(Error::InvalidParameter(format!("unknown orientation `{other}`"))),
        }
    }
}

/// Antipodally symmetric directions on the unit sphere of `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereGrid {
    pub points: Vec<Vec<f64>>,
    pub resolution: usize,
    antipodes: Vec<usize>,
}

/// Point `k` of `2·resolution` equally spaced angles. For even resolutions
/// the point is a quarter-turn image of a first-octant point, so the grid is
/// exactly invariant under the symmetries of the square.
fn circle_point(k: usize, resolution: usize) -> Vec<f64> {
    if resolution % 2 == 1 {
        let a = PI * k as f64 / resolution as f64;
        return vec![a.cos(), a.sin()];
    }
    let quarter = resolution / 2;
    let (turns, r) = (k / quarter, k % quarter);
    let (mut x, mut y) = if 2 * r <= quarter {
        let a = PI * r as f64 / resolution as f64;
        (a.cos(), a.sin())
    } else {
        let a = PI * (quarter - r) as f64 / resolution as f64;
        (a.sin(), a.cos())
    };
    for _ in 0..turns {
        (x, y) = (-y, x);
    }
    vec![x, y]
}

impl SphereGrid {
    /// `n = 1`: `{±1}`; `n = 2`: `2·resolution` equally spaced angles;
    /// `n = 3`: a subdivided icosahedron whose edges are at most about
    /// `π/resolution`.
    pub fn new(n: usize, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        let points = match n {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..2 * resolution).map(|k| circle_point(k, resolution)).collect(),
            3 => geodesic(resolution),
            _ => return Err(Error::InvalidParameter(format!("sphere grids are available for n <= 3, got {n}"))),
        };
        let antipodes = points
            .iter()
            .map(|p| {
                points
                    .iter()
                    .position(|q| p.iter().zip(q).all(|(a, b)| (a + b).abs() < 1e-9))
                    .expect("grid is antipodally symmetric")
            })
            .collect();
        Ok(Self { points, resolution, antipodes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of `-points[i]`.
    pub fn antipode(&self, i: usize) -> usize {
        self.antipodes[i]
    }

    /// Rotates an `n = 2` grid by `angle`; other dimensions are unchanged.
    pub fn rotated(&self, angle: f64) -> Self {
        let (c, s) = (angle.cos(), angle.sin());
        let points = self
            .points
            .iter()
            .map(|p| if p.len() == 2 { vec![c * p[0] - s * p[1], s * p[0] + c * p[1]] } else { p.clone() })
            .collect();
        Self { points, resolution: self.resolution, antipodes: self.antipodes.clone() }
    }
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

/// Vertices of the icosahedron subdivided with the smallest frequency whose
/// edges are at most `π/resolution` before projection.
fn geodesic(resolution: usize) -> Vec<Vec<f64>> {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let v = [
        [-1.0, g, 0.0],
        [1.0, g, 0.0],
        [-1.0, -g, 0.0],
        [1.0, -g, 0.0],
        [0.0, -1.0, g],
        [0.0, 1.0, g],
        [0.0, -1.0, -g],
        [0.0, 1.0, -g],
        [g, 0.0, -1.0],
        [g, 0.0, 1.0],
        [-g, 0.0, -1.0],
        [-g, 0.0, 1.0],
    ];
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let edge_angle = (1.0 / 5f64.sqrt()).acos();
    let freq = ((edge_angle * resolution as f64 / PI).ceil() as usize).max(1);
    let mut out: BTreeMap<[i64; 3], [f64; 3]> = BTreeMap::new();
    for f in faces {
        let [a, b, c] = [normalized(v[f[0]]), normalized(v[f[1]]), normalized(v[f[2]])];
        for i in 0..=freq {
            for j in 0..=freq - i {
                let k = freq - i - j;
                let (wi, wj, wk) = (i as f64, j as f64, k as f64);
                let p = normalized([
                    wi * a[0] + wj * b[0] + wk * c[0],
                    wi * a[1] + wj * b[1] + wk * c[1],
                    wi * a[2] + wj * b[2] + wk * c[2],
                ]);
                let key = p.map(|x| (x * 1e9).round() as i64);
                out.entry(key).or_insert(p);
            }
        }
    }
    out.into_values().map(|p| p.to_vec()).collect()
}

/// Result of a discrete sup-inf.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Minimax {
    /// `max_i min_j a_ij`.
    pub sup_inf: f64,
    /// `min_j max_i a_ij`.
    pub inf_sup: f64,
    /// Maximizing row; ties go to the lowest index.
    pub argmax_row: usize,
    /// Minimizing column in that row; ties go to the lowest index.
    pub argmin_col: usize,
}

/// Sup-inf and inf-sup of a matrix given by rows.
pub fn minimax(a: &[Vec<f64>]) -> Result<Minimax> {
    if a.is_empty() || a[0].is_empty() || a.iter().any(|r| r.len() != a[0].len()) {
        return Err(Error::InvalidParameter("minimax needs a non-empty rectangular matrix".into()));
    }
    let argmin = |r: &[f64]| (1..r.len()).fold(0, |best, j| if r[j] < r[best] { j } else { best });
    let row_min: Vec<f64> = a.iter().map(|r| r[argmin(r)]).collect();
    let argmax_row = (1..a.len()).fold(0, |best, i| if row_min[i] > row_min[best] { i } else { best });
    let inf_sup =
        (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).fold(f64::INFINITY, f64::min);
    Ok(Minimax { sup_inf: row_min[argmax_row], inf_sup, argmax_row, argmin_col: argmin(&a[argmax_row]) })
}

/// Which part of the definition produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Nonzero gradient: the single direction `∇u/|∇u|`.
    Gradient,
    /// Vanishing gradient: sup/inf over the sphere grid.
    Critical,
}

/// Value of `H^{s,±}_∞ u(p)` or `M^{s,∞}_{ε,±} u(p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfinityValue {
    pub value: f64,
    pub error_estimate: f64,
    pub branch: Branch,
    /// The gradient direction, or the maximizing grid direction.
    pub direction: Vec<f64>,
    /// The critical-branch value as well, when the gradient is inside the
    /// hysteresis band.
    pub alternate: Option<f64>,
}

/// Field and point after mapping the forward orientation to the backward.
fn oriented(u: &ScalarField, p: &SpaceTimePoint, orient: Orientation) -> (ScalarField, SpaceTimePoint) {
    match orient {
        Orientation::Backward => (u.clone(), p.clone()),
        Orientation::Forward => (u.time_reversed(), SpaceTimePoint { x: p.x.clone(), t: -p.t }),
    }
}

fn line_params(fp: &FracParams) -> Result<FracParams> {
    FracParams::new(1, fp.s)
}

fn check_direction(u: &ScalarField, y: &[f64]) -> Result<()> {
    if y.len() != u.dim() {
        return Err(Error::InvalidParameter(format!("direction has length {} but n = {}", y.len(), u.dim())));
    }
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("direction must be a unit vector, |y| = {norm}")));
    }
    Ok(())
}

/// The line field through `p` along `y` in backward orientation, and the
/// matching point `(0, t)`.
fn line_setup(u: &ScalarField, p: &SpaceTimePoint, y: &[f64], orient: Orientation) -> Result<(ScalarField, SpaceTimePoint)> {
    check_direction(u, y)?;
    let (w, pw) = oriented(u, p, orient);
    let line = w.line(&pw.x, y)?;
    Ok((line, SpaceTimePoint { x: vec![0.0], t: pw.t }))
}

/// `½ ∬ [2u(x,t) - u(x+|η|y, t∓τ) - u(x-|η|y, t∓τ)] K_{1,s}(η,τ) dη dτ`.
pub fn directional(
    u: &ScalarField,
    p: &SpaceTimePoint,
    y: &[f64],
    fp: &FracParams,
    orient: Orientation,
    q: &QuadratureSpec,
) -> Result<OperatorValue> {
    directional_with(u, p, y, fp, orient, Route::Hypersingular, q)
}

/// [`directional`] with an explicit route for the one-dimensional operator.
pub fn directional_with(
    u: &ScalarField,
    p: &SpaceTimePoint,
    y: &[f64],
    fp: &FracParams,
    orient: Orientation,
    route: Route,
    q: &QuadratureSpec,
) -> Result<OperatorValue> {
    check_inputs(u, p, fp, q)?;
    let (line, p0) = line_setup(u, p, y, orient)?;
    eval_hs(&line, &p0, &line_params(fp)?, q, route)
}

/// One-sided `∬ [u(x,t) - u(x+|η|y, t∓τ)] K_{1,s}(η,τ) dη dτ`. Finite
/// for `s >= ½` only when `∇u·y = 0`.
pub fn one_sided(
    u: &ScalarField,
    p: &SpaceTimePoint,
    y: &[f64],
    fp: &FracParams,
    orient: Orientation,
    q: &QuadratureSpec,
) -> Result<OperatorValue> {
    check_inputs(u, p, fp, q)?;
    let (line, p0) = line_setup(u, p, y, orient)?;
    one_sided_line(&line, &p0, &line_params(fp)?, q)
}

fn one_sided_line(line: &ScalarField, p0: &SpaceTimePoint, fp1: &FracParams, q: &QuadratureSpec) -> Result<OperatorValue> {
    let avg = Averager::new(line, &p0.x, q);
    let zmax = avg.z_max();
    let center = line.eval(p0);
    let far = line.far_field();
    let grad = line.gradient(p0).map_or(0.0, |g| g[0]);
    // E[v(σ|Z|)] ≈ v + v_r σ E|Z| + ..., with σ E|Z| = 2√(τ/π).
    let model = LagModel {
        center,
        far,
        slope: heat_defect(line, p0),
        root: -2.0 * grad / PI.sqrt(),
        bound: line.bound() + far.abs(),
        period: line.time_period(),
    };
    let lag = |tau: f64| -avg.half_line(p0.t - tau, (2.0 * tau).sqrt(), 0.0, zmax, center);
    let est = lag_integral(fp1, &model, &lag, Scheme::Hypersingular, q);
    crate::fracheat::finish(est, Route::Hypersingular, q)
}

fn gradient_at(u: &ScalarField, p: &SpaceTimePoint) -> Result<(Vec<f64>, f64)> {
    let g = u.gradient(p).ok_or(Error::MissingDerivative("spatial gradient"))?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((g, norm))
}

fn critical_operator(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp1: &FracParams,
    orient: Orientation,
    grid: &SphereGrid,
    q: &QuadratureSpec,
) -> Result<(f64, f64, usize)> {
    let (w, pw) = oriented(u, p, orient);
    let phis: Vec<Result<OperatorValue>> = grid
        .points
        .par_iter()
        .map(|y| {
            let line = w.line(&pw.x, y)?;
            one_sided_line(&line, &SpaceTimePoint { x: vec![0.0], t: pw.t }, fp1, q)
        })
        .collect();
    let phis = phis.into_iter().collect::<Result<Vec<_>>>()?;
    // ½ sup_y Φ(y) + ½ inf_z Φ(-z); the grid is closed under y ↦ -y.
    let imax = (1..phis.len()).fold(0, |b, i| if phis[i].value > phis[b].value { i } else { b });
    let imin = (1..phis.len()).fold(0, |b, i| if phis[i].value < phis[b].value { i } else { b });
    let err = phis.iter().map(|v| v.error_estimate).fold(0.0, f64::max);
    Ok((0.5 * (phis[imax].value + phis[imin].value), err, imax))
}

/// `H^{s,±}_∞ u(p)`: the directional operator along `∇u/|∇u|` when
/// `|∇u(p)| > gradient_threshold`, the sup/inf over `grid` otherwise.
pub fn eval_hs_infinity(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    orient: Orientation,
    grid: &SphereGrid,
    gradient_threshold: f64,
    q: &QuadratureSpec,
) -> Result<InfinityValue> {
    check_inputs(u, p, fp, q)?;
    check_positive("gradient threshold", gradient_threshold)?;
    let fp1 = line_params(fp)?;
    let (g, norm) = gradient_at(u, p)?;
    if norm > gradient_threshold {
        let v: Vec<f64> = g.iter().map(|c| c / norm).collect();
        let d = directional(u, p, &v, fp, orient, q)?;
        let alternate = if norm <= HYSTERESIS_BAND {
            critical_operator(u, p, &fp1, orient, grid, q).ok().map(|c| c.0)
        } else {
            None
        };
        return Ok(InfinityValue { value: d.value, error_estimate: d.error_estimate, branch: Branch::Gradient, direction: v, alternate });
    }
    let (value, error_estimate, imax) = critical_operator(u, p, &fp1, orient, grid, q)?;
    Ok(InfinityValue { value, error_estimate, branch: Branch::Critical, direction: grid.points[imax].clone(), alternate: None })
}

/// `M^{s,y}_{ε,±} u(p) = κ(1,s) ε^{2s} ∬_{ext C_ε} u(x+|η|y, t∓τ) K_{1,s}(η,τ)`.
pub fn mean_value_directional(
    u: &ScalarField,
    p: &SpaceTimePoint,
    eps: f64,
    y: &[f64],
    fp: &FracParams,
    orient: Orientation,
    q: &QuadratureSpec,
) -> Result<MeanValue> {
    check_inputs(u, p, fp, q)?;
    let (line, p0) = line_setup(u, p, y, orient)?;
    mean_value_line(&line, &p0, eps, &line_params(fp)?, q)
}

fn mean_value_line(line: &ScalarField, p0: &SpaceTimePoint, eps: f64, fp1: &FracParams, q: &QuadratureSpec) -> Result<MeanValue> {
    check_eps(line, p0, eps)?;
    let center = line.eval(p0);
    let scale = fp1.kappa() * eps.powf(2.0 * fp1.s);
    to_mean_value(center, scale, exterior_defect(line, p0, fp1, eps, center, Sides::Positive, q), q)
}

/// `M^{s,y,z}_{ε,±} = ½ M^{s,y}_{ε,±} + ½ M^{s,-z}_{ε,±}`.
pub fn mean_value_yz(
    u: &ScalarField,
    p: &SpaceTimePoint,
    eps: f64,
    y: &[f64],
    z: &[f64],
    fp: &FracParams,
    orient: Orientation,
    q: &QuadratureSpec,
) -> Result<MeanValue> {
    let minus_z: Vec<f64> = z.iter().map(|v| -v).collect();
    let a = mean_value_directional(u, p, eps, y, fp, orient, q)?;
    let b = mean_value_directional(u, p, eps, &minus_z, fp, orient, q)?;
    Ok(MeanValue { value: 0.5 * (a.value + b.value), error_estimate: 0.5 * (a.error_estimate + b.error_estimate) })
}

/// `M^{s,y}` at every grid direction.
pub fn directional_table(
    u: &ScalarField,
    p: &SpaceTimePoint,
    eps: f64,
    fp: &FracParams,
    orient: Orientation,
    grid: &SphereGrid,
    q: &QuadratureSpec,
) -> Result<Vec<MeanValue>> {
    check_inputs(u, p, fp, q)?;
    let fp1 = line_params(fp)?;
    fp1.kappa();
    let (w, pw) = oriented(u, p, orient);
    let rows: Vec<Result<MeanValue>> = grid
        .points
        .par_iter()
        .map(|y| {
            let line = w.line(&pw.x, y)?;
            mean_value_line(&line, &SpaceTimePoint { x: vec![0.0], t: pw.t }, eps, &fp1, q)
        })
        .collect();
    rows.into_iter().collect()
}

/// The matrix `a_ij = M^{s,y_i,y_j}_{ε,±} u(p)` from a directional table.
pub fn yz_matrix(table: &[MeanValue], grid: &SphereGrid) -> Vec<Vec<f64>> {
    (0..grid.len())
        .map(|i| (0..grid.len()).map(|j| 0.5 * (table[i].value + table[grid.antipode(j)].value)).collect())
        .collect()
}

/// `M^{s,∞}_{ε,±} u(p)`: `M^{s,v,v}` along `v = ∇u/|∇u|` when the gradient
/// exceeds the threshold, `sup_y inf_z M^{s,y,z}` over `grid` otherwise.
#[allow(clippy::too_many_arguments)]
pub fn mean_value_infinity(
    u: &ScalarField,
    p: &SpaceTimePoint,
    eps: f64,
    fp: &FracParams,
    orient: Orientation,
    grid: &SphereGrid,
    gradient_threshold: f64,
    q: &QuadratureSpec,
) -> Result<InfinityValue> {
    check_inputs(u, p, fp, q)?;
    check_positive("gradient threshold", gradient_threshold)?;
    let (g, norm) = gradient_at(u, p)?;
    let critical = || -> Result<(f64, f64, usize)> {
        let table = directional_table(u, p, eps, fp, orient, grid, q)?;
        let mm = minimax(&yz_matrix(&table, grid))?;
        let err = table.iter().map(|m| m.error_estimate).fold(0.0, f64::max);
        Ok((mm.sup_inf, err, mm.argmax_row))
    };
    if norm > gradient_threshold {
        let v: Vec<f64> = g.iter().map(|c| c / norm).collect();
        let m = mean_value_yz(u, p, eps, &v, &v, fp, orient, q)?;
        let alternate = if norm <= HYSTERESIS_BAND { critical().ok().map(|c| c.0) } else { None };
        return Ok(InfinityValue { value: m.value, error_estimate: m.error_estimate, branch: Branch::Gradient, direction: v, alternate });
    }
    let (value, error_estimate, imax) = critical()?;
    Ok(InfinityValue { value, error_estimate, branch: Branch::Critical, direction: grid.points[imax].clone(), alternate: None })
}

/// Remainders `|u - M^{s,∞}_{ε,±} u - κ(1,s) ε^{2s} H^{s,±}_∞ u|` on an
/// ε-grid.
#[allow(clippy::too_many_arguments)]
pub fn expansion_report_infinity(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    orient: Orientation,
    eps_grid: &[f64],
    grid: &SphereGrid,
    gradient_threshold: f64,
    q: &QuadratureSpec,
) -> Result<ExpansionReport> {
    check_grid(eps_grid)?;
    let h = eval_hs_infinity(u, p, fp, orient, grid, gradient_threshold, q)?;
    let kappa1 = line_params(fp)?.kappa();
    let center = u.eval(p);
    let rows: Vec<Result<(f64, f64, f64)>> = eps_grid
        .par_iter()
        .map(|&eps| {
            let m = mean_value_infinity(u, p, eps, fp, orient, grid, gradient_threshold, q)?;
            let scale = kappa1 * eps.powf(2.0 * fp.s);
            let rem = (center - m.value - scale * h.value).abs();
            Ok((m.value, rem, m.error_estimate + scale * h.error_estimate))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mv = rows.iter().map(|r| r.0).collect();
    let rem = rows.iter().map(|r| r.1).collect();
    let err = rows.iter().map(|r| r.2).collect();
    fit_report(eps_grid, mv, rem, err, h.value, q.abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field;

    #[test]
    fn grids_are_antipodal_and_fine() {
        for (n, res) in [(1, 4), (2, 8), (3, 6)] {
            let g = SphereGrid::new(n, res).unwrap();
            for i in 0..g.len() {
                let j = g.antipode(i);
                assert!(g.points[i].iter().zip(&g.points[j]).all(|(a, b)| (a + b).abs() < 1e-9));
                let norm: f64 = g.points[i].iter().map(|v| v * v).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
        // Covering radius on the 2-sphere, probed with a Fibonacci lattice.
        let g = SphereGrid::new(3, 10).unwrap();
        let golden = PI * (3.0 - 5f64.sqrt());
        let probes = 2000;
        for k in 0..probes {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / probes as f64;
            let r = (1.0 - z * z).sqrt();
            let p = [r * (golden * k as f64).cos(), r * (golden * k as f64).sin(), z];
            let best = g.points.iter().map(|q| (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]).clamp(-1.0, 1.0).acos()).fold(f64::INFINITY, f64::min);
            assert!(best <= PI / 10.0, "probe {k} is {best} away");
        }
    }

    #[test]
    fn minimax_inequality_and_ties() {
        let a = vec![vec![1.0, 3.0], vec![2.0, 0.0]];
        let m = minimax(&a).unwrap();
        assert_eq!(m.sup_inf, 1.0);
        assert_eq!(m.inf_sup, 2.0);
        assert_eq!(m.argmax_row, 0);
        let tie = minimax(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!((tie.argmax_row, tie.argmin_col), (0, 0));
    }

    #[test]
    fn constants_vanish_and_average_to_themselves() {
        let q = QuadratureSpec::default();
        let fp = FracParams::new(2, 0.5).unwrap();
        let u = parse_field("const:2", 2).unwrap();
        let p = SpaceTimePoint::origin(2);
        let grid = SphereGrid::new(2, 4).unwrap();
        for orient in [Orientation::Backward, Orientation::Forward] {
            let h = eval_hs_infinity(&u, &p, &fp, orient, &grid, GRADIENT_THRESHOLD, &q).unwrap();
            assert_eq!(h.branch, Branch::Critical);
            assert!(h.value.abs() <= 1e-10);
            let m = mean_value_infinity(&u, &p, 0.2, &fp, orient, &grid, GRADIENT_THRESHOLD, &q).unwrap();
            assert_eq!(m.value, 2.0);
        }
    }
}
