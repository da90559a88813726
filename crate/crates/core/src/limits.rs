//! Local operators and the limits `s ↗ 1`: the heat operator, the
//! normalized infinity Laplacian, the classical backward-cylinder mean
//! value formula, and sweeps of `H^s` and `H^{s,±}_∞` against their local
//! limits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::fields::{ScalarField, SpaceTimePoint};
use crate::fracheat::{eval_hs_balakrishnan, QuadratureSpec, Route};
use crate::infinity::{directional_with, Orientation, GRADIENT_THRESHOLD};
use crate::kernel::FracParams;
use crate::meanvalue::check_grid;
use crate::quad::{half_sphere, GaussRule};

/// `(∂_t - Δ) u(p)` from the exact derivative closures.
pub fn heat_operator(u: &ScalarField, p: &SpaceTimePoint) -> Result<f64> {
    let dt = u.dt(p).ok_or(Error::MissingDerivative("time derivative"))?;
    let h = u.hessian(p).ok_or(Error::MissingDerivative("spatial Hessian"))?;
    Ok(dt - h.trace())
}

/// `|∇u|^{-2} ⟨∇²u ∇u, ∇u⟩` at `p`.
pub fn infinity_laplacian_normalized(u: &ScalarField, p: &SpaceTimePoint, threshold: f64) -> Result<f64> {
    let g = u.gradient(p).ok_or(Error::MissingDerivative("spatial gradient"))?;
    let h = u.hessian(p).ok_or(Error::MissingDerivative("spatial Hessian"))?;
    let norm2: f64 = g.iter().map(|v| v * v).sum();
    if norm2.sqrt() <= threshold {
        return Err(Error::VanishingGradient(norm2.sqrt()));
    }
    let gv = nalgebra::DVector::from_column_slice(&g);
    Ok(gv.dot(&(&h * &gv)) / norm2)
}

/// Classical mean value formula on backward cylinders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalReport {
    pub eps_grid: Vec<f64>,
    /// Solid averages of `u` over `B(x,ε) × (t-ε², t)`.
    pub averages: Vec<f64>,
    /// Signed `average - u(p)`.
    pub remainder: Vec<f64>,
    pub remainder_error: Vec<f64>,
    /// `remainder / ε²`.
    pub scaled_remainder: Vec<f64>,
    /// Leading coefficient `-½ (∂_t - Δ/(n+2)) u(p)` of the remainder in ε².
    pub predicted_scaled: Option<f64>,
}

/// Average of `u` over `B(x,ε) × (t-ε², t)` with a tensor Gauss rule of
/// `m` points per direction.
fn cylinder_average(u: &ScalarField, p: &SpaceTimePoint, eps: f64, m: usize) -> f64 {
    let n = p.dim();
    let time = GaussRule::legendre(m);
    let radial = GaussRule::legendre(m);
    let dirs = half_sphere(n, m);
    let mut y = vec![0.0; n];
    let mut total = 0.0;
    for (tn, tw) in time.nodes.iter().zip(&time.weights) {
        let t = p.t - 0.5 * eps * eps * (1.0 + tn);
        let mut ball = 0.0;
        for (rn, rw) in radial.nodes.iter().zip(&radial.weights) {
            // Radius on (0, ε) with the shell density n r^{n-1}/ε^n.
            let r = 0.5 * eps * (1.0 + rn);
            let wr = 0.5 * rw * n as f64 * (r / eps).powi(n as i32 - 1);
            let mut sphere = 0.0;
            for (dir, wd) in &dirs {
                for d in 0..n {
                    y[d] = p.x[d] + r * dir[d];
                }
                let plus = u.value(&y, t);
                for d in 0..n {
                    y[d] = p.x[d] - r * dir[d];
                }
                sphere += wd * 0.5 * (plus + u.value(&y, t));
            }
            ball += wr * sphere;
        }
        total += 0.5 * tw * ball;
    }
    total
}

/// Averages of `u` over the backward cylinders `C_ε^-(p)` and the signed
/// remainders `average - u(p) = -(ε²/2)(∂_t - Δ/(n+2)) u(p) + o(ε²)`.
pub fn classical_mvf_check(u: &ScalarField, p: &SpaceTimePoint, eps_grid: &[f64]) -> Result<ClassicalReport> {
    u.check_point(p)?;
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("empty eps grid".into()));
    }
    for &eps in eps_grid {
        check_positive("eps", eps)?;
        let margin = u.smooth_margin(p);
        if eps >= margin {
            return Err(Error::OutsideSmoothRegion(format!("eps = {eps} exceeds the smooth margin {margin:.3e}")));
        }
    }
    let center = u.eval(p);
    let rows: Vec<(f64, f64)> = eps_grid
        .par_iter()
        .map(|&eps| {
            let fine = cylinder_average(u, p, eps, 24);
            let coarse = cylinder_average(u, p, eps, 16);
            (fine, (fine - coarse).abs())
        })
        .collect();
    let averages: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let remainder: Vec<f64> = averages.iter().map(|a| a - center).collect();
    let scaled_remainder = remainder.iter().zip(eps_grid).map(|(r, e)| r / (e * e)).collect();
    let n = p.dim() as f64;
    let predicted_scaled = match (u.dt(p), u.hessian(p)) {
        (Some(dt), Some(h)) => Some(-0.5 * (dt - h.trace() / (n + 2.0))),
        _ => None,
    };
    Ok(ClassicalReport {
        eps_grid: eps_grid.to_vec(),
        averages,
        remainder,
        remainder_error: rows.iter().map(|r| r.1).collect(),
        scaled_remainder,
        predicted_scaled,
    })
}

/// Operator values along an `s`-grid against their local limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitSweep {
    pub s_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub local_target: f64,
    pub gaps: Vec<f64>,
    /// Linear extrapolation in `1 - s` through the last two points.
    pub extrapolated: f64,
}

fn check_s_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.len() < 2 {
        return Err(Error::InvalidParameter("need at least two orders".into()));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("s grid must be strictly increasing".into()));
    }
    s_grid.iter().try_for_each(|&s| crate::error::check_order(s))
}

/// Spec used by the sweeps: the Taylor model is subtracted on the whole
/// near-origin stretch so the vanishing prefactor meets a regular integrand.
pub fn limit_spec(q: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec { subtract_taylor: true, ..q.clone() }
}

fn sweep(s_grid: &[f64], target: f64, eval: impl Fn(f64) -> Result<(f64, f64)> + Sync) -> Result<LimitSweep> {
    check_s_grid(s_grid)?;
    let rows: Vec<Result<(f64, f64)>> = s_grid.par_iter().map(|&s| eval(s)).collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let k = values.len();
    let (x1, x2) = (1.0 - s_grid[k - 2], 1.0 - s_grid[k - 1]);
    let extrapolated = (values[k - 1] * x1 - values[k - 2] * x2) / (x1 - x2);
    Ok(LimitSweep {
        s_grid: s_grid.to_vec(),
        gaps: values.iter().map(|v| (v - target).abs()).collect(),
        values,
        errors: rows.iter().map(|r| r.1).collect(),
        local_target: target,
        extrapolated,
    })
}

/// `H^s u(p)` on the grid against `(∂_t - Δ) u(p)`.
pub fn limit_sweep_hs(u: &ScalarField, p: &SpaceTimePoint, s_grid: &[f64], q: &QuadratureSpec) -> Result<LimitSweep> {
    let target = heat_operator(u, p)?;
    let spec = limit_spec(q);
    sweep(s_grid, target, |s| {
        let fp = FracParams::new(u.dim(), s)?;
        let v = eval_hs_balakrishnan(u, p, &fp, &spec)?;
        Ok((v.value, v.error_estimate))
    })
}

/// Local limit of `H^{s,±}_∞ u(p)` at a point with nonzero gradient:
/// `∂_t u - Δ^N_∞ u` backward and `-(∂_t u + Δ^N_∞ u)` forward, the
/// latter being the backward limit for `u(x,-t)`.
pub fn infinity_target(u: &ScalarField, p: &SpaceTimePoint, orient: Orientation) -> Result<f64> {
    let dt = u.dt(p).ok_or(Error::MissingDerivative("time derivative"))?;
    let lap = infinity_laplacian_normalized(u, p, GRADIENT_THRESHOLD)?;
    Ok(match orient {
        Orientation::Backward => dt - lap,
        Orientation::Forward => -(dt + lap),
    })
}

/// `H^{s,±}_∞ u(p)` on the grid against [`infinity_target`].
pub fn limit_sweep_infinity(
    u: &ScalarField,
    p: &SpaceTimePoint,
    s_grid: &[f64],
    orient: Orientation,
    q: &QuadratureSpec,
) -> Result<LimitSweep> {
    let target = infinity_target(u, p, orient)?;
    let g = u.gradient(p).ok_or(Error::MissingDerivative("spatial gradient"))?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let v: Vec<f64> = g.iter().map(|c| c / norm).collect();
    let spec = limit_spec(q);
    sweep(s_grid, target, |s| {
        let fp = FracParams::new(u.dim(), s)?;
        let h = directional_with(u, p, &v, &fp, orient, Route::Balakrishnan, &spec)?;
        Ok((h.value, h.error_estimate))
    })
}

/// Validates an ε-grid for convergence studies.
pub fn check_eps_grid(eps_grid: &[f64]) -> Result<()> {
    check_grid(eps_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t).unwrap()
    }

    #[test]
    fn local_operators() {
        let caloric = parse_field("quadratic:1,0,2", 1).unwrap();
        assert!(heat_operator(&caloric, &pt(&[0.3], 0.1)).unwrap().abs() < 1e-12);
        let sq = parse_field("quadratic:1,0,0", 1).unwrap();
        assert!((infinity_laplacian_normalized(&sq, &pt(&[1.0], 0.0), 1e-8).unwrap() - 2.0).abs() < 1e-12);
        let radial = parse_field("quadratic:1,1,0,0,0", 2).unwrap();
        assert!((infinity_laplacian_normalized(&radial, &pt(&[0.3, -0.7], 0.0), 1e-8).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            infinity_laplacian_normalized(&radial, &pt(&[0.0, 0.0], 0.0), 1e-8),
            Err(Error::VanishingGradient(_))
        ));
    }

    #[test]
    fn classical_formula_on_quadratics() {
        let caloric = parse_field("quadratic:1,0,0.6666666666666666", 1).unwrap();
        let r = classical_mvf_check(&caloric, &pt(&[0.2], 0.1), &[0.1, 0.2]).unwrap();
        assert!(r.remainder.iter().all(|v| v.abs() < 1e-12), "{r:?}");
        let sq = parse_field("quadratic:1,0,0", 1).unwrap();
        let r = classical_mvf_check(&sq, &pt(&[0.0], 0.0), &[0.1, 0.2]).unwrap();
        assert!(r.scaled_remainder.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12), "{r:?}");
    }
}
