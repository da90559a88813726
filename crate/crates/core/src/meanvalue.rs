//! The mean value operator
//! `M^s_ε u(p) = κ ε^{2s} ∬_{ext} ½(u(x+w,t-τ) + u(x-w,t-τ)) k(w,τ) dw dτ`
//! over the complement of the backward cylinder `|w| < ε, 0 < τ < ε²`, the
//! expansion `u = M^s_ε u + κ ε^{2s} H^s u + O(ε²)`, and the splice test
//! behind the viscosity definitions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::fields::{ScalarField, SpaceTimePoint};
use crate::fracheat::{
    check_inputs, eval_hs_balakrishnan, eval_hs_hypersingular, heat_defect, lag_integral_from, Averager, LagModel,
    QuadratureSpec, Scheme,
};
use crate::kernel::FracParams;
use crate::quad::{power_weight_finite, Estimate, HeadMap};

/// A mean value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanValue {
    pub value: f64,
    pub error_estimate: f64,
}

/// Which spatial values enter the exterior average.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sides {
    /// `½(u(x+w) + u(x-w))`.
    Symmetric,
    /// `u(x+|η|)` for a one-dimensional field.
    Positive,
}

/// `c_s ∬_{ext} k(w,τ) (offset - ū(w, t-τ)) dw dτ` over the exterior of the
/// backward ε-cylinder, integrated directly: a shell `|w| >= ε` for
/// `τ < ε²` and the whole space afterwards.
pub(crate) fn exterior_defect(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    eps: f64,
    offset: f64,
    sides: Sides,
    q: &QuadratureSpec,
) -> Estimate {
    let avg = Averager::new(u, &p.x, q);
    let zmax = avg.z_max();
    let e2 = eps * eps;
    let tol = q.piece_tolerance(0.25 / fp.positive_prefactor);
    let band = |t: f64, sigma: f64, a: f64| match sides {
        Sides::Symmetric => avg.shell(t, sigma, a, zmax, offset),
        Sides::Positive => avg.half_line(t, sigma, a, zmax, offset),
    };

    // Below τ_lo the shell starts beyond the truncation radius.
    let tau_lo = e2 / (2.0 * zmax * zmax);
    let inner_g = |tau: f64| {
        let sigma = (2.0 * tau).sqrt();
        -band(p.t - tau, sigma, eps / sigma)
    };
    let inner = power_weight_finite(inner_g, fp.s, tau_lo, e2, HeadMap::Log, tol).scale(fp.positive_prefactor);

    let far = u.far_field();
    let model =
        LagModel { center: offset, far, slope: 0.0, root: 0.0, bound: u.bound() + far.abs(), period: u.time_period() };
    let outer_g = |tau: f64| {
        let sigma = (2.0 * tau).sqrt();
        match sides {
            Sides::Symmetric => -avg.gaussian(p.t - tau, sigma, offset),
            Sides::Positive => -band(p.t - tau, sigma, 0.0),
        }
    };
    let outer_spec = QuadratureSpec { subtract_taylor: false, ..q.clone() };
    inner + lag_integral_from(fp, &model, &outer_g, Scheme::Semigroup, &outer_spec, e2)
}

/// `c_s ∬_{C_ε^-} k(w,τ) (u(p) - ½(u(x+w,t-τ) + u(x-w,t-τ))) dw dτ`, the
/// part of `H^s u(p)` inside the backward cylinder.
pub(crate) fn cylinder_defect(u: &ScalarField, p: &SpaceTimePoint, fp: &FracParams, eps: f64, q: &QuadratureSpec) -> Estimate {
    let avg = Averager::new(u, &p.x, q);
    let s = fp.s;
    let center = u.eval(p);
    let tc = q.taylor_cutoff.min(1e-4 * eps * eps);
    let g = |tau: f64| {
        let sigma = (2.0 * tau).sqrt();
        -avg.shell(p.t - tau, sigma, 0.0, eps / sigma, center)
    };
    let slope = heat_defect(u, p);
    let near = Estimate {
        value: slope * tc.powf(1.0 - s) / (1.0 - s),
        error: (g(tc) / tc - slope).abs() * tc.powf(1.0 - s) / (2.0 - s),
        evals: 1,
        converged: true,
    };
    let tol = q.piece_tolerance(0.25 / fp.positive_prefactor);
    (near + power_weight_finite(g, s, tc, eps * eps, HeadMap::Power, tol)).scale(fp.positive_prefactor)
}

pub(crate) fn check_eps(u: &ScalarField, p: &SpaceTimePoint, eps: f64) -> Result<()> {
    check_positive("eps", eps)?;
    let margin = u.smooth_margin(p);
    if eps >= margin {
        return Err(Error::OutsideSmoothRegion(format!("eps = {eps} exceeds the smooth margin {margin:.3e} at p")));
    }
    Ok(())
}

fn mean_value_checked(u: &ScalarField, p: &SpaceTimePoint, eps: f64, fp: &FracParams, q: &QuadratureSpec) -> Result<f64> {
    check_inputs(u, p, fp, q)?;
    check_eps(u, p, eps)?;
    Ok(fp.kappa() * eps.powf(2.0 * fp.s))
}

pub(crate) fn to_mean_value(center: f64, scale: f64, defect: Estimate, q: &QuadratureSpec) -> Result<MeanValue> {
    let value = center - scale * defect.value;
    let error = scale * defect.error;
    if !value.is_finite() || (!defect.converged && error > 10.0 * q.abs_tol.max(q.rel_tol * value.abs())) {
        return Err(Error::QuadratureFailure { value, error });
    }
    Ok(MeanValue { value, error_estimate: error.max(q.abs_tol) })
}

/// `M^s_ε u(p)` as `u(p) - κ ε^{2s} ∬_{ext} k (u(p) - ū)`, which reproduces
/// constants exactly and keeps small deviations from `u(p)` accurate.
pub fn mean_value_ms(u: &ScalarField, p: &SpaceTimePoint, eps: f64, fp: &FracParams, q: &QuadratureSpec) -> Result<MeanValue> {
    let scale = mean_value_checked(u, p, eps, fp, q)?;
    let center = u.eval(p);
    to_mean_value(center, scale, exterior_defect(u, p, fp, eps, center, Sides::Symmetric, q), q)
}

/// `M^s_ε u(p)` as the plain κ-normalized kernel average, with no use of
/// the normalization identity; on constants it tests κ itself.
pub fn mean_value_ms_raw(u: &ScalarField, p: &SpaceTimePoint, eps: f64, fp: &FracParams, q: &QuadratureSpec) -> Result<MeanValue> {
    let scale = mean_value_checked(u, p, eps, fp, q)?;
    to_mean_value(0.0, scale, exterior_defect(u, p, fp, eps, 0.0, Sides::Symmetric, q), q)
}

/// `M^s_ε u(p)` as `u(p) - κ ε^{2s} (H^s u(p) - J_ε)` where `J_ε` is the
/// cylinder part of the hypersingular integral.
pub fn mean_value_ms_cylinder(
    u: &ScalarField,
    p: &SpaceTimePoint,
    eps: f64,
    fp: &FracParams,
    q: &QuadratureSpec,
) -> Result<MeanValue> {
    let scale = mean_value_checked(u, p, eps, fp, q)?;
    let h = eval_hs_hypersingular(u, p, fp, q)?;
    let j = cylinder_defect(u, p, fp, eps, q);
    let defect = Estimate { value: h.value - j.value, error: h.error_estimate + j.error, ..j };
    to_mean_value(u.eval(p), scale, defect, q)
}

/// Remainders of `u = M^s_ε u + κ ε^{2s} H^s u + O(ε²)` on an ε-grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub eps_grid: Vec<f64>,
    pub mean_values: Vec<f64>,
    pub remainder: Vec<f64>,
    /// Quadrature error bound on each remainder.
    pub remainder_error: Vec<f64>,
    /// Log-log slope of remainder against ε; `None` when exact.
    pub fitted_order: Option<f64>,
    /// Every remainder is within its error bound of zero.
    pub exact: bool,
    pub operator_value: f64,
}

pub(crate) fn check_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 grid points, got {}", eps_grid.len())));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two positive values".into()));
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (u, v)| (a + u / m, b + v / m));
    let sxx: f64 = pts.iter().map(|(u, _)| (u - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Builds the report from remainders and their error bounds.
pub(crate) fn fit_report(
    eps_grid: &[f64],
    mean_values: Vec<f64>,
    remainder: Vec<f64>,
    remainder_error: Vec<f64>,
    operator_value: f64,
    abs_tol: f64,
) -> Result<ExpansionReport> {
    let exact = remainder.iter().zip(&remainder_error).all(|(r, e)| *r <= abs_tol.max(2.0 * e));
    let fitted_order = if exact { None } else { Some(loglog_slope(eps_grid, &remainder)?) };
    Ok(ExpansionReport {
        eps_grid: eps_grid.to_vec(),
        mean_values,
        remainder,
        remainder_error,
        fitted_order,
        exact,
        operator_value,
    })
}

/// Remainders `|u - M^s_ε u - κ ε^{2s} H^s u|` with `M` from the direct
/// exterior integral and `H^s` from the semigroup route, so the two sides
/// share no quadrature.
pub fn expansion_report(
    u: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    eps_grid: &[f64],
    q: &QuadratureSpec,
) -> Result<ExpansionReport> {
    check_grid(eps_grid)?;
    let h = eval_hs_balakrishnan(u, p, fp, q)?;
    let center = u.eval(p);
    let rows: Vec<Result<(f64, f64, f64)>> = eps_grid
        .par_iter()
        .map(|&eps| {
            let m = mean_value_ms(u, p, eps, fp, q)?;
            let scale = fp.kappa() * eps.powf(2.0 * fp.s);
            let rem = (center - m.value - scale * h.value).abs();
            Ok((m.value, rem, m.error_estimate + scale * h.error_estimate))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (mv, rest): (Vec<f64>, Vec<(f64, f64)>) = rows.into_iter().map(|(a, b, c)| (a, (b, c))).unzip();
    let (rem, err): (Vec<f64>, Vec<f64>) = rest.into_iter().unzip();
    fit_report(eps_grid, mv, rem, err, h.value, q.abs_tol)
}

/// Side from which the test function touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Touch {
    /// `φ <= u` near `p`: the supersolution test.
    Below,
    /// `φ >= u` near `p`: the subsolution test.
    Above,
}

/// Outcome of [`viscosity_touch_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TouchVerdict {
    pub touch: Touch,
    /// `H^s v(p)` for the spliced field `v`.
    pub value: f64,
    /// Quadrature estimate plus the disagreement of the two routes.
    pub error_estimate: f64,
    /// `+1`, `-1`, or `0` when `|value|` is within the error bar.
    pub sign: i8,
    pub samples: usize,
}

/// Points of the Halton sequence in `[0,1)^d`, skipping the origin.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    assert!(dim <= PRIMES.len(), "halton: dimension too large");
    (1..=count as u64)
        .map(|i| {
            PRIMES[..dim]
                .iter()
                .map(|&b| {
                    let (mut k, mut f, mut r) = (i, 1.0, 0.0);
                    while k > 0 {
                        f /= b as f64;
                        r += f * (k % b) as f64;
                        k /= b;
                    }
                    r
                })
                .collect()
        })
        .collect()
}

/// Deterministic low-discrepancy sample of the full cylinder `C_r(p)`.
pub fn cylinder_sample(p: &SpaceTimePoint, r: f64, count: usize) -> Vec<SpaceTimePoint> {
    let n = p.dim();
    let mut out = Vec::with_capacity(count);
    let mut batch = count;
    while out.len() < count {
        out.clear();
        for h in halton(batch, n + 1) {
            let x: Vec<f64> = (0..n).map(|i| p.x[i] + r * (2.0 * h[i] - 1.0)).collect();
            if p.x.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < r * r {
                out.push(SpaceTimePoint { x, t: p.t + r * r * (2.0 * h[n] - 1.0) });
                if out.len() == count {
                    break;
                }
            }
        }
        batch *= 2;
    }
    out
}

/// Number of sample points used for the touching test.
pub const TOUCH_SAMPLES: usize = 4096;
/// Tolerance for `φ(p) = u(p)` and for the one-sided order on the sample.
pub const TOUCH_TOL: f64 = 1e-12;

/// Splices `v = φ` on the cylinder `C_r(p)` and `u` outside, checks that
/// `φ` touches `u` at `p` from one side on a low-discrepancy sample, and
/// reports the sign of `H^s v(p)`.
pub fn viscosity_touch_check(
    u: &ScalarField,
    phi: &ScalarField,
    p: &SpaceTimePoint,
    fp: &FracParams,
    radius: f64,
    q: &QuadratureSpec,
) -> Result<TouchVerdict> {
    check_positive("touch radius", radius)?;
    let gap0 = phi.eval(p) - u.eval(p);
    if gap0.abs() > TOUCH_TOL {
        return Err(Error::TouchingViolated(format!("phi(p) - u(p) = {gap0:e}")));
    }
    let sample = cylinder_sample(p, radius, TOUCH_SAMPLES);
    let (lo, hi) = sample.iter().fold((0.0f64, 0.0f64), |(lo, hi), y| {
        let d = phi.eval(y) - u.eval(y);
        (lo.min(d), hi.max(d))
    });
    let touch = if hi <= TOUCH_TOL {
        Touch::Below
    } else if lo >= -TOUCH_TOL {
        Touch::Above
    } else {
        return Err(Error::TouchingViolated(format!("phi - u takes both signs on the sample ({lo:e}, {hi:e})")));
    };
    let v = u.splice(phi, p, radius)?;
    let a = eval_hs_hypersingular(&v, p, fp, q)?;
    let b = eval_hs_balakrishnan(&v, p, fp, q)?;
    let value = 0.5 * (a.value + b.value);
    let error_estimate = a.error_estimate.max(b.error_estimate) + (a.value - b.value).abs();
    let sign = if value.abs() <= error_estimate {
        0
    } else if value > 0.0 {
        1
    } else {
        -1
    };
    Ok(TouchVerdict { touch, value, error_estimate, sign, samples: sample.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t).unwrap()
    }

    #[test]
    fn constants_are_fixed() {
        let q = QuadratureSpec::default();
        for n in 1..=2 {
            let fp = FracParams::new(n, 0.4).unwrap();
            let u = parse_field("const:3", n).unwrap();
            let p = SpaceTimePoint::origin(n);
            assert_eq!(mean_value_ms(&u, &p, 0.3, &fp, &q).unwrap().value, 3.0);
            let raw = mean_value_ms_raw(&u, &p, 0.3, &fp, &q).unwrap();
            assert!((raw.value - 3.0).abs() < 1e-8, "{raw:?}");
        }
    }

    #[test]
    fn routes_agree_on_gaussian() {
        let q = QuadratureSpec::default();
        let fp = FracParams::new(1, 0.5).unwrap();
        let u = parse_field("gaussian:1,1,1", 1).unwrap();
        let p = pt(&[0.3], 0.2);
        for eps in [0.4, 0.1] {
            let a = mean_value_ms(&u, &p, eps, &fp, &q).unwrap();
            let b = mean_value_ms_cylinder(&u, &p, eps, &fp, &q).unwrap();
            let c = mean_value_ms_raw(&u, &p, eps, &fp, &q).unwrap();
            assert!((a.value - b.value).abs() < 1e-8, "{a:?} {b:?}");
            assert!((a.value - c.value).abs() < 1e-8, "{a:?} {c:?}");
        }
    }

    #[test]
    fn halton_is_deterministic_and_in_unit_cube() {
        let h = halton(100, 3);
        assert_eq!(h, halton(100, 3));
        assert!(h.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(h[0], vec![0.5, 1.0 / 3.0, 0.2]);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(check_grid(&[0.2, 0.1]), Err(Error::DegenerateFit(_))));
        assert!(check_grid(&[0.1, 0.2, 0.05]).is_err());
    }
}
