//! Heat kernel, the space-time kernel `k(w,τ) = c_s W_n(w,τ) τ^{-1-s}`, the
//! normalization κ(n,s), and parabolic cylinders.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{check_order, check_positive, Error, Result};
use crate::fields::SpaceTimePoint;
use crate::quad::{adaptive, Estimate, Tolerance};

/// Prefactor convention for the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SignMode {
    /// `s/Γ(1-s) = 1/|Γ(-s)|`, a positive density.
    #[default]
    PositiveKernel,
    /// The literal `1/Γ(-s)`, negative for `s ∈ (0,1)`.
    LiteralGamma,
}

/// Dimension, order and the constants derived from them.
#[derive(Clone, Debug)]
pub struct FracParams {
    pub n: usize,
    pub s: f64,
    pub gamma_1ms: f64,
    pub positive_prefactor: f64,
    kappa: OnceLock<Estimate>,
}

/// Tolerance used for the cached κ.
pub const KAPPA_TOL: Tolerance = Tolerance { abs: 1e-14, rel: 1e-13, max_subdivisions: 400 };

impl FracParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        check_order(s)?;
        let gamma_1ms = gamma(1.0 - s);
        Ok(Self { n, s, gamma_1ms, positive_prefactor: s / gamma_1ms, kappa: OnceLock::new() })
    }

    pub fn prefactor(&self, mode: SignMode) -> f64 {
        match mode {
            SignMode::PositiveKernel => self.positive_prefactor,
            SignMode::LiteralGamma => 1.0 / gamma(-self.s),
        }
    }

    /// κ(n,s), computed once at tight tolerance and cached.
    pub fn kappa(&self) -> f64 {
        self.kappa_estimate().value
    }

    pub fn kappa_estimate(&self) -> Estimate {
        *self.kappa.get_or_init(|| {
            let inv = kappa_inverse(self, KAPPA_TOL);
            let k = 1.0 / inv.value;
            Estimate { value: k, error: inv.error * k * k, ..inv }
        })
    }

    /// Probability that the normalized exterior law has `τ >= ε²`; the same
    /// for every ε.
    pub fn far_time_fraction(&self) -> f64 {
        self.kappa() / self.gamma_1ms
    }

    /// Kernel mass of the exterior of `C_ε^+`: `ε^{-2s}/κ`.
    pub fn exterior_mass_scaled(&self, eps: f64) -> f64 {
        eps.powf(-2.0 * self.s) / self.kappa()
    }

    /// Time marginal `c_s τ^{-1-s}` of the kernel.
    pub fn time_marginal(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else {
            self.positive_prefactor * tau.powf(-1.0 - self.s)
        }
    }
}

impl PartialEq for FracParams {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.s == other.s
    }
}

/// Gaussian heat kernel `(4πτ)^{-n/2} e^{-|w|²/(4τ)}`, zero for `τ <= 0`.
pub fn heat_kernel(w: &[f64], tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let r2: f64 = w.iter().map(|v| v * v).sum();
    (4.0 * PI * tau).powf(-0.5 * w.len() as f64) * (-r2 / (4.0 * tau)).exp()
}

/// Kernel density in the positive convention.
pub fn kernel_density(w: &[f64], tau: f64, fp: &FracParams) -> f64 {
    kernel_density_with(w, tau, fp, SignMode::PositiveKernel)
}

pub fn kernel_density_with(w: &[f64], tau: f64, fp: &FracParams, mode: SignMode) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    fp.prefactor(mode) * heat_kernel(w, tau) * tau.powf(-1.0 - fp.s)
}

/// `P(|W| > r)` for `W ~ N(0, 2τ I_n)`.
pub fn gaussian_exterior_probability(n: usize, r: f64, tau: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    let x = r * r / (4.0 * tau);
    if x > 745.0 + n as f64 * 2.0 {
        return 0.0;
    }
    gamma_ur(0.5 * n as f64, x)
}

/// `1/κ(n,s)`: the kernel mass outside the unit forward cylinder, reduced to
/// one dimension. For `τ >= 1` the spatial integral is 1 and the time
/// integral is `1/Γ(1-s)`; for `τ < 1` the spatial integral is a chi-square
/// tail and the time integral runs through `τ = e^{-r}`.
pub fn kappa_inverse(fp: &FracParams, tol: Tolerance) -> Estimate {
    let s = fp.s;
    let n = fp.n;
    let far = 1.0 / fp.gamma_1ms;
    // Beyond r_max the chi-square tail is below the f64 range.
    let r_max = (4.0 * (760.0 + 2.0 * n as f64)).ln();
    let near = adaptive(
        |r: f64| (s * r).exp() * gaussian_exterior_probability(n, 1.0, (-r).exp()),
        0.0,
        r_max,
        tol,
    );
    Estimate::exact(far) + near.scale(fp.positive_prefactor)
}

/// κ(n,s) at the requested tolerance (uncached).
pub fn kappa(fp: &FracParams, tol: Tolerance) -> Result<Estimate> {
    check_positive("tolerance", tol.abs.max(tol.rel))?;
    let inv = kappa_inverse(fp, tol);
    if !inv.converged {
        return Err(Error::QuadratureFailure { value: 1.0 / inv.value, error: inv.error });
    }
    let k = 1.0 / inv.value;
    Ok(Estimate { value: k, error: inv.error * k * k, ..inv })
}

/// Kernel mass of the exterior of `C_ε^+(0,0)` by nested quadrature in the
/// unscaled variables: closed-form time tail for `τ >= ε²`, and for
/// `τ < ε²` a radial integral of the heat kernel over `|w| >= ε`.
pub fn exterior_mass(fp: &FracParams, eps: f64, tol: Tolerance) -> Estimate {
    let s = fp.s;
    let n = fp.n as f64;
    let e2 = eps * eps;
    let sphere = 2.0 * PI.powf(0.5 * n) / gamma(0.5 * n);
    let tail = fp.positive_prefactor * e2.powf(-s) / s;
    let inner_tol = Tolerance { abs: tol.abs * 1e-3, ..tol };
    let radial = |tau: f64| -> f64 {
        let scale = (4.0 * tau).sqrt();
        if eps / scale > 40.0 {
            return 0.0;
        }
        let f = |v: f64| {
            let r = eps + scale * v;
            sphere * r.powf(n - 1.0) * (4.0 * PI * tau).powf(-0.5 * n) * (-r * r / (4.0 * tau)).exp() * scale
        };
        adaptive(f, 0.0, 40.0, inner_tol).value
    };
    // τ = ε² e^{-r}: τ^{-1-s} dτ = ε^{-2s} e^{s r} dr
    let r_max = (4.0 * 1700.0f64).ln();
    let near = adaptive(|r: f64| (s * r).exp() * radial(e2 * (-r).exp()), 0.0, r_max, tol.scaled(e2.powf(s)));
    Estimate::exact(tail) + near.scale(fp.positive_prefactor * e2.powf(-s))
}

/// Which part of the parabolic cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CylinderVariant {
    Full,
    Forward,
    Backward,
}

/// `B(x, ε) × I` with `I` one of `(t-ε², t+ε²)`, `(t, t+ε²)`, `(t-ε², t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub center: SpaceTimePoint,
    pub radius: f64,
    pub variant: CylinderVariant,
}

impl Cylinder {
    pub fn new(center: SpaceTimePoint, radius: f64, variant: CylinderVariant) -> Result<Self> {
        check_positive("cylinder radius", radius)?;
        Ok(Self { center, radius, variant })
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let r2 = self.radius * self.radius;
        let d2: f64 = p.x.iter().zip(&self.center.x).map(|(a, b)| (a - b).powi(2)).sum();
        if d2 >= r2 {
            return false;
        }
        let dt = p.t - self.center.t;
        match self.variant {
            CylinderVariant::Full => dt.abs() < r2,
            CylinderVariant::Forward => dt > 0.0 && dt < r2,
            CylinderVariant::Backward => dt < 0.0 && dt > -r2,
        }
    }
}

pub fn cylinder_contains(c: &Cylinder, p: &SpaceTimePoint) -> bool {
    c.contains(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussRule;

    #[test]
    fn heat_kernel_values() {
        assert!((heat_kernel(&[0.0], 1.0 / (4.0 * PI)) - 1.0).abs() < 1e-15);
        assert_eq!(heat_kernel(&[0.3], -1.0), 0.0);
    }

    #[test]
    fn heat_kernel_normalized_in_2d() {
        let tau = 0.7;
        let rule = GaussRule::composite(-12.0, 12.0, 48, 8);
        let mut total = 0.0;
        for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
            for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
                total += wx * wy * heat_kernel(&[*x, *y], tau);
            }
        }
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn density_at_unit_time() {
        let fp = FracParams::new(1, 0.5).unwrap();
        assert!((kernel_density(&[0.0], 1.0, &fp) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(kernel_density(&[0.0], 0.0, &fp), 0.0);
        assert!(fp.prefactor(SignMode::LiteralGamma) < 0.0);
        assert!((fp.prefactor(SignMode::LiteralGamma) + fp.positive_prefactor).abs() < 1e-14);
    }

    #[test]
    fn kappa_exceeds_far_part() {
        for n in 1..=3 {
            for s in [0.2, 0.5, 0.8] {
                let fp = FracParams::new(n, s).unwrap();
                assert!(1.0 / fp.kappa() > 1.0 / fp.gamma_1ms);
            }
        }
    }

    #[test]
    fn cylinder_membership() {
        let o = SpaceTimePoint::origin(1);
        let full = Cylinder::new(o.clone(), 1.0, CylinderVariant::Full).unwrap();
        assert!(full.contains(&o));
        let fwd = Cylinder::new(o.clone(), 1.0, CylinderVariant::Forward).unwrap();
        assert!(!fwd.contains(&SpaceTimePoint::new(vec![0.0], -0.5).unwrap()));
        let bwd = Cylinder::new(SpaceTimePoint::origin(2), 2.0, CylinderVariant::Backward).unwrap();
        assert!(bwd.contains(&SpaceTimePoint::new(vec![1.9, 0.0], -3.9).unwrap()));
    }
}
