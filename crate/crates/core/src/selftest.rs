//! The self-test suite: one pass/fail check per acceptance property, each
//! against a reference computed by an independent route of the library.
//! Stochastic checks draw from streams derived from a single seed, and the
//! report carries no timings, so equal seeds give byte-identical reports at
//! any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::ctrw::{transform_check, RngStream, TRANSFORM_NODES};
use crate::dpp::{dpp_solve, walk_estimate, DppOperator, GameConfig, SlabGrid, ValueSlab};
use crate::error::{Error, Result};
use crate::fields::{parse_field, ScalarField, SpaceTimePoint};
use crate::fracheat::{eval_hs, plane_wave_value, QuadratureSpec, Route};
use crate::infinity::{eval_hs_infinity, expansion_report_infinity, minimax, Orientation, SphereGrid, GRADIENT_THRESHOLD};
use crate::kernel::{exterior_mass, FracParams, KAPPA_TOL};
use crate::limits::{classical_mvf_check, limit_sweep_hs, limit_sweep_infinity};
use crate::meanvalue::{expansion_report, mean_value_ms};

/// Plane-wave pairs `(ξ, ρ)` of the symbol check.
pub const SYMBOL_PAIRS: [(f64, f64); 5] = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 0.5), (0.5, 2.0)];
/// Orders of the symbol check.
pub const SYMBOL_ORDERS: [f64; 3] = [0.25, 0.5, 0.75];
/// ε-grid of the expansion-order fits.
pub const EXPANSION_GRID: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
/// Draws per order of the transform check.
pub const TRANSFORM_DRAWS: usize = 1_000_000;
/// Walks per point of the game cross-validation.
pub const GAME_WALKS: usize = 10_000;

/// One pass/fail line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    /// The measured quantity compared against `tolerance`.
    pub metric: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// All checks of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width table, one line per check.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {:>2} {:<34} metric {:>12.4e}  tol {:>10.3e}  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                c.metric,
                c.tolerance,
                c.detail
            ));
        }
        out
    }
}

fn check(id: usize, name: &str, metric: f64, tolerance: f64, detail: String) -> Check {
    Check { id, name: name.into(), passed: metric.is_finite() && metric <= tolerance, metric, tolerance, detail }
}

fn point(x: &[f64], t: f64) -> Result<SpaceTimePoint> {
    SpaceTimePoint::new(x.to_vec(), t)
}

/// Both quadrature routes against the plane-wave symbol.
pub fn symbol_agreement() -> Result<Check> {
    let q = QuadratureSpec::default();
    let p = point(&[0.3], 0.2)?;
    let cases: Vec<(f64, f64, f64)> =
        SYMBOL_ORDERS.iter().flat_map(|&s| SYMBOL_PAIRS.iter().map(move |&(xi, rho)| (s, xi, rho))).collect();
    let errs: Vec<Result<f64>> = cases
        .par_iter()
        .map(|&(s, xi, rho)| {
            let spec = if xi == 0.0 { format!("time-cos:{rho}") } else { format!("planewave:{xi},{rho}") };
            let u = parse_field(&spec, 1)?;
            let fp = FracParams::new(1, s)?;
            let exact = plane_wave_value(&[xi], rho, s, &p)?;
            let h = eval_hs(&u, &p, &fp, &q, Route::Hypersingular)?.value;
            let b = eval_hs(&u, &p, &fp, &q, Route::Balakrishnan)?.value;
            Ok((h - exact).abs().max((b - exact).abs()))
        })
        .collect();
    let worst = errs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(check(1, "symbol agreement", worst, 1e-3, format!("{} cases, two routes", cases.len())))
}

/// `ε^{2s} κ(n,s) ∫_{ext C_ε^+} K = 1`.
pub fn kappa_scaling() -> Result<Check> {
    let mut worst = 0.0f64;
    for n in [1, 2] {
        for s in [0.3, 0.7] {
            let fp = FracParams::new(n, s)?;
            for eps in [0.25, 1.0, 4.0] {
                let mass = exterior_mass(&fp, eps, KAPPA_TOL).value;
                worst = worst.max((eps.powf(2.0 * s) * fp.kappa() * mass - 1.0).abs());
            }
        }
    }
    Ok(check(2, "kappa scaling", worst, 1e-6, "n in {1,2}, s in {0.3,0.7}, eps in {1/4,1,4}".into()))
}

fn order_check(id: usize, name: &str, orders: &[(f64, Option<f64>)]) -> Check {
    let dev = orders.iter().map(|(_, o)| o.map_or(f64::INFINITY, |o| (o - 2.0).abs())).fold(0.0, f64::max);
    let detail = orders.iter().map(|(s, o)| format!("s={s}: {}", o.map_or("exact".into(), |o| format!("{o:.3}")))).collect::<Vec<_>>().join(", ");
    check(id, name, dev, 0.3, format!("|order - 2|; {detail}"))
}

/// Remainder order of the mean value expansion for `H^s`.
pub fn expansion_order() -> Result<Check> {
    let q = QuadratureSpec::default();
    let u = parse_field("gaussian:1,1,1", 2)?;
    let p = point(&[0.3, -0.4], 0.2)?;
    let orders = [0.25, 0.75]
        .iter()
        .map(|&s| Ok((s, expansion_report(&u, &p, &FracParams::new(2, s)?, &EXPANSION_GRID, &q)?.fitted_order)))
        .collect::<Result<Vec<_>>>()?;
    Ok(order_check(3, "expansion order H^s", &orders))
}

/// Remainder order of the mean value expansion for `H^{s,-}_∞`.
pub fn infinity_expansion_order() -> Result<Check> {
    let q = QuadratureSpec::default();
    let u = parse_field("gaussian:1,1,1", 2)?;
    let p = point(&[0.3, -0.4], 0.2)?;
    let grid = SphereGrid::new(2, 8)?;
    let orders = [0.25, 0.75]
        .iter()
        .map(|&s| {
            let fp = FracParams::new(2, s)?;
            let r = expansion_report_infinity(&u, &p, &fp, Orientation::Backward, &EXPANSION_GRID, &grid, GRADIENT_THRESHOLD, &q)?;
            Ok((s, r.fitted_order))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(order_check(4, "expansion order H_inf^{s,-}", &orders))
}

/// Classical backward-cylinder formula: exact on the caloric quadratic and
/// `remainder/ε² → 1/3` on `x₁²`.
pub fn classical_formula() -> Result<Check> {
    let p = point(&[0.2], 0.1)?;
    let caloric = parse_field("quadratic:1,0,0.6666666666666666", 1)?;
    let exact = classical_mvf_check(&caloric, &p, &[0.1, 0.2])?.remainder.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let sq = parse_field("quadratic:1,0,0", 1)?;
    let r = classical_mvf_check(&sq, &p, &[0.1, 0.2])?;
    let rel = r.scaled_remainder.iter().map(|v| (v * 3.0 - 1.0).abs()).fold(0.0, f64::max);
    // Both parts are scaled to a unit tolerance.
    let metric = (exact / 1e-8).max(rel / 0.05);
    Ok(check(5, "classical mean value formula", metric, 1.0, format!("caloric remainder {exact:.2e} (tol 1e-8), relative gap to 1/3 {rel:.2e} (tol 5%)")))
}

/// Empirical transforms of the coupled jump against `exp(-(τ+|k|²)^s)`.
pub fn ctrw_transforms(seed: u64, draws: usize) -> Result<Check> {
    let mut worst = 0.0f64;
    for (i, s) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let r = transform_check(s, 1, draws, &TRANSFORM_NODES, RngStream::new(seed, 100 + i as u64))?;
        worst = worst.max(r.max_z);
    }
    Ok(check(6, "ctrw transforms", worst, 3.0, format!("max |z| over {} nodes x 3 orders, {draws} draws", TRANSFORM_NODES.len())))
}

/// Instance of the game cross-validation.
pub struct GameInstance {
    pub slab: ValueSlab,
    pub fp: FracParams,
    pub points: Vec<SpaceTimePoint>,
}

/// `s = ½`, `ε = 0.2`, `Ω = (-1,1)`, `t ∈ [0,1]`, data `cos x`.
pub fn game_instance(cells: usize) -> Result<GameInstance> {
    let grid = SlabGrid::new(vec![-1.0], vec![1.0], cells, 0.0, 1.0, cells)?;
    let slab = ValueSlab::new(grid, parse_field("planewave:1,0", 1)?, 0.2)?;
    let points = [-0.5, 0.0, 0.5].iter().map(|&x| point(&[x], 0.0)).collect::<Result<_>>()?;
    Ok(GameInstance { slab, fp: FracParams::new(1, 0.5)?, points })
}

/// Value iteration against simulated walks at three interior points.
pub fn game_cross_validation(seed: u64, cells: usize, walks: usize) -> Result<Check> {
    let g = game_instance(cells)?;
    let solved = dpp_solve(&g.slab, &GameConfig::linear(), &g.fp, 1e-10, 500)?;
    if !solved.converged {
        return Err(Error::InvalidParameter("value iteration did not converge".into()));
    }
    let bound = solved.interpolation_bound;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (i, p) in g.points.iter().enumerate() {
        let w = walk_estimate(p, &g.slab.grid, &g.slab.exterior, g.slab.eps, &g.fp, walks, RngStream::new(seed, 200 + i as u64))?;
        let v = solved.slab.read(&p.x, p.t);
        // Gap in units of the allowed band 3σ + bound.
        worst = worst.max((v - w.value).abs() / (3.0 * w.std_error + bound));
        detail.push(format!("x={}: {v:.4} vs {:.4}±{:.4}", p.x[0], w.value, w.std_error));
    }
    Ok(check(7, "game cross-validation", worst, 1.0, format!("gap/(3se+{bound:.3e}); {}", detail.join(", "))))
}

/// `s ↗ 1` gaps at `s = 0.999` relative to `|target| + 1`.
pub fn limits_at_one() -> Result<Check> {
    let q = QuadratureSpec::default();
    let grid = [0.5, 0.9, 0.99, 0.999];
    let g = parse_field("gaussian:1,1,1", 1)?;
    let hs = limit_sweep_hs(&g, &point(&[0.3], 0.2)?, &grid, &q)?;
    let u = parse_field("quadratic:1,0,1", 1)?;
    let inf = limit_sweep_infinity(&u, &point(&[1.0], 0.0)?, &grid, Orientation::Backward, &q)?;
    let rel = |sw: &crate::limits::LimitSweep| sw.gaps[grid.len() - 1] / (sw.local_target.abs() + 1.0);
    let (a, b) = (rel(&hs), rel(&inf));
    Ok(check(8, "limits as s -> 1", a.max(b), 0.05, format!("H^s {a:.2e}, H_inf^- {b:.2e}")))
}

/// Stochastic sub-results whose bytes must not depend on the thread count.
fn stochastic_digest(seed: u64) -> Result<String> {
    let t = transform_check(0.5, 2, 50_000, &TRANSFORM_NODES, RngStream::new(seed, 300))?;
    let g = game_instance(8)?;
    let w = walk_estimate(&g.points[1], &g.slab.grid, &g.slab.exterior, g.slab.eps, &g.fp, 2000, RngStream::new(seed, 301))?;
    serde_json::to_string(&(t, w)).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Stochastic results computed on one thread and on the ambient pool.
pub fn determinism(seed: u64) -> Result<Check> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let single = pool.install(|| stochastic_digest(seed))?;
    let ambient = stochastic_digest(seed)?;
    let differs = if single == ambient { 0.0 } else { 1.0 };
    Ok(check(9, "determinism", differs, 0.0, "single-thread pool vs ambient pool".into()))
}

/// Normalization, monotonicity, minimax and duality invariants.
pub fn invariants(seed: u64) -> Result<Check> {
    let q = QuadratureSpec::default();
    let fp = FracParams::new(2, 0.6)?;
    let p = point(&[0.3, -0.4], 0.2)?;
    let mut failures = Vec::new();

    let one = mean_value_ms(&parse_field("constant:1", 2)?, &p, 0.3, &fp, &q)?.value;
    if (one - 1.0).abs() > 1e-8 {
        failures.push(format!("M1 = {one}"));
    }

    // Gaussian + bump >= Gaussian everywhere.
    let lo = parse_field("gaussian:1,1,1", 2)?;
    let hi = ScalarField::combination(vec![(1.0, lo.clone()), (1.0, parse_field("bump:0.5,1", 2)?)])?;
    let (ml, mh) = (mean_value_ms(&lo, &p, 0.3, &fp, &q)?, mean_value_ms(&hi, &p, 0.3, &fp, &q)?);
    if ml.value > mh.value + 2.0 * q.abs_tol {
        failures.push(format!("M monotonicity {} > {}", ml.value, mh.value));
    }

    let grid = SphereGrid::new(2, 6)?;
    let table = crate::infinity::directional_table(&lo, &p, 0.3, &fp, Orientation::Backward, &grid, &q)?;
    let mm = minimax(&crate::infinity::yz_matrix(&table, &grid))?;
    if mm.sup_inf > mm.inf_sup + 1e-14 {
        failures.push(format!("minimax {} > {}", mm.sup_inf, mm.inf_sup));
    }

    let fwd = eval_hs_infinity(&lo.time_reversed(), &point(&p.x, -p.t)?, &fp, Orientation::Forward, &grid, GRADIENT_THRESHOLD, &q)?;
    let bwd = eval_hs_infinity(&lo, &p, &fp, Orientation::Backward, &grid, GRADIENT_THRESHOLD, &q)?;
    if (fwd.value - bwd.value).abs() > 10.0 * (fwd.error_estimate + bwd.error_estimate).max(q.abs_tol) {
        failures.push(format!("duality {} vs {}", fwd.value, bwd.value));
    }

    // DPP monotonicity on a random ordered pair of data.
    let mut rng = RngStream::new(seed, 400).rng();
    let (a, shift): (f64, f64) = (rand::Rng::random_range(&mut rng, 0.5..2.0), rand::Rng::random_range(&mut rng, 0.0..0.5));
    let base = parse_field(&format!("planewave:{a},0"), 1)?;
    let raised = ScalarField::combination(vec![(1.0, base.clone()), (1.0, parse_field(&format!("constant:{shift}"), 1)?)])?;
    let grid1 = SlabGrid::new(vec![-1.0], vec![1.0], 16, 0.0, 1.0, 16)?;
    let fp1 = FracParams::new(1, 0.5)?;
    let cfg = GameConfig::linear();
    let (sl, sh) = (ValueSlab::new(grid1.clone(), base, 0.2)?, ValueSlab::new(grid1, raised, 0.2)?);
    let (ol, oh) = (DppOperator::new(&sl, &cfg, &fp1)?, DppOperator::new(&sh, &cfg, &fp1)?);
    let (mut vl, mut vh) = (sl.values.clone(), sh.values.clone());
    for _ in 0..5 {
        vl = ol.apply(&vl).0;
        vh = oh.apply(&vh).0;
    }
    if vl.iter().zip(&vh).any(|(l, h)| *l > h + 1e-12) {
        failures.push("DPP monotonicity".into());
    }

    let metric = failures.len() as f64;
    let detail = if failures.is_empty() { "normalization, monotonicity (M, DPP), minimax, duality".into() } else { failures.join("; ") };
    Ok(check(10, "invariant suite", metric, 0.0, detail))
}

/// Runs every check.
pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let checks = vec![
        symbol_agreement()?,
        kappa_scaling()?,
        expansion_order()?,
        infinity_expansion_order()?,
        classical_formula()?,
        ctrw_transforms(seed, TRANSFORM_DRAWS)?,
        game_cross_validation(seed, 64, GAME_WALKS)?,
        limits_at_one()?,
        determinism(seed)?,
        invariants(seed)?,
    ];
    Ok(SelftestReport { seed, checks })
}
