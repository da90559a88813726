//! Acceptance suite: one PASS/FAIL line per criterion. Every reference value
//! is computed here, independently of the library routines under test.

use std::time::Instant;

use num_complex::Complex64;
use statrs::function::gamma::{gamma, gamma_ur};

use heatlab::ctrw::{sample_coupled_pair, RngStream};
use heatlab::dpp::{dpp_solve, walk_estimate, DppOperator, GameConfig, SlabGrid, ValueSlab};
use heatlab::fracheat::{eval_hs, QuadratureSpec, Route};
use heatlab::infinity::{
    directional_table, eval_hs_infinity, expansion_report_infinity, minimax, yz_matrix, Orientation, SphereGrid,
    GRADIENT_THRESHOLD,
};
use heatlab::kernel::{exterior_mass, KAPPA_TOL};
use heatlab::limits::{classical_mvf_check, limit_sweep_hs, limit_sweep_infinity};
use heatlab::meanvalue::{expansion_report, mean_value_ms};
use heatlab::{parse_field, FracParams, ScalarField, SpaceTimePoint};

struct Outcome {
    passed: bool,
    detail: String,
}

fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
    SpaceTimePoint::new(x.to_vec(), t).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn symbol_agreement() -> Outcome {
    let q = QuadratureSpec::default();
    let (x, t) = (0.3, 0.2);
    let pairs = [(1.0, 0.0), (0.0, 1.5), (1.0, 1.0), (2.0, 0.5), (0.5, 2.0)];
    let mut worst = 0.0f64;
    for s in [0.25, 0.5, 0.75] {
        let fp = FracParams::new(1, s).unwrap();
        for (xi, rho) in pairs {
            let spec = if xi == 0.0 { format!("time-cos:{rho}") } else { format!("planewave:{xi},{rho}") };
            let u = parse_field(&spec, 1).unwrap();
            let theta = xi * x + rho * t;
            let exact = (Complex64::new(xi * xi, rho).powf(s) * Complex64::from_polar(1.0, theta)).re;
            for route in [Route::Hypersingular, Route::Balakrishnan] {
                let v = eval_hs(&u, &pt(&[x], t), &fp, &q, route).unwrap().value;
                worst = worst.max((v - exact).abs());
            }
        }
    }
    Outcome { passed: worst <= 1e-3, detail: format!("max |H^s u - symbol| = {worst:.2e} over 15 cases x 2 routes (tol 1e-3)") }
}

/// `1/κ(n,s)` in closed form through regularized upper incomplete gammas.
fn kappa_closed_form(n: usize, s: f64) -> f64 {
    let h = n as f64 / 2.0;
    let inv = (1.0 + 4f64.powf(s) * gamma(h + s) / gamma(h) * gamma_ur(h + s, 0.25) - gamma_ur(h, 0.25)) / gamma(1.0 - s);
    1.0 / inv
}

fn kappa_scaling() -> Outcome {
    let mut worst = 0.0f64;
    for n in [1, 2] {
        for s in [0.3, 0.7] {
            let fp = FracParams::new(n, s).unwrap();
            let k = kappa_closed_form(n, s);
            for eps in [0.25, 1.0, 4.0] {
                let mass = exterior_mass(&fp, eps, KAPPA_TOL).value;
                worst = worst.max((eps.powf(2.0 * s) * k * mass - 1.0).abs());
            }
        }
    }
    Outcome { passed: worst <= 1e-6, detail: format!("max relative deviation {worst:.2e} (tol 1e-6)") }
}

const EPS_GRID: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

fn expansion_order() -> Outcome {
    let q = QuadratureSpec::default();
    let u = parse_field("gaussian:1,1,1", 2).unwrap();
    let mut orders = Vec::new();
    for s in [0.25, 0.75] {
        let r = expansion_report(&u, &pt(&[0.3, -0.4], 0.2), &FracParams::new(2, s).unwrap(), &EPS_GRID, &q).unwrap();
        orders.push(slope(&EPS_GRID, &r.remainder));
    }
    let passed = orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
    Outcome { passed, detail: format!("fitted orders {orders:.3?} for s = 0.25, 0.75 (2 +- 0.3)") }
}

fn infinity_expansion_order() -> Outcome {
    let q = QuadratureSpec::default();
    let u = parse_field("gaussian:1,1,1", 2).unwrap();
    let grid = SphereGrid::new(2, 8).unwrap();
    let mut orders = Vec::new();
    for s in [0.25, 0.75] {
        let fp = FracParams::new(2, s).unwrap();
        let r = expansion_report_infinity(&u, &pt(&[0.3, -0.4], 0.2), &fp, Orientation::Backward, &EPS_GRID, &grid, GRADIENT_THRESHOLD, &q)
            .unwrap();
        orders.push(slope(&EPS_GRID, &r.remainder));
    }
    let passed = orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
    Outcome { passed, detail: format!("fitted orders {orders:.3?} for s = 0.25, 0.75 (2 +- 0.3)") }
}

fn classical_formula() -> Outcome {
    let p = pt(&[0.2], 0.1);
    let caloric = parse_field("quadratic:1,0,0.6666666666666666", 1).unwrap();
    let exact = classical_mvf_check(&caloric, &p, &[0.1, 0.2]).unwrap().remainder.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let sq = parse_field("quadratic:1,0,0", 1).unwrap();
    // Average of x² over the ball minus its centre value is ε²/(n+2).
    let ratio: Vec<f64> = classical_mvf_check(&sq, &p, &[0.1, 0.2]).unwrap().scaled_remainder.iter().map(|v| v * 3.0).collect();
    let passed = exact <= 1e-8 && ratio.iter().all(|r| (r - 1.0).abs() <= 0.05);
    Outcome { passed, detail: format!("caloric remainder {exact:.2e} (tol 1e-8); remainder/eps^2 / (1/3) = {ratio:.6?} (5%)") }
}

fn ctrw_transforms() -> Outcome {
    let nodes = [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (0.5, 0.5), (2.0, 0.25), (0.25, 2.0)];
    let draws = 1_000_000;
    let mut worst = 0.0f64;
    for (i, s) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let mut rng = RngStream::new(2024, i as u64).rng();
        let mut acc = vec![(0.0, 0.0); nodes.len()];
        for _ in 0..draws {
            let j = sample_coupled_pair(s, 1, &mut rng);
            for (a, &(k, tau)) in acc.iter_mut().zip(&nodes) {
                let v = (k * j.w[0]).cos() * (-tau * j.tau).exp();
                a.0 += v;
                a.1 += v * v;
            }
        }
        for (&(sum, sq), &(k, tau)) in acc.iter().zip(&nodes) {
            let m = draws as f64;
            let mean = sum / m;
            let se = ((sq / m - mean * mean) / (m - 1.0)).sqrt();
            let exact = (-(tau + k * k).powf(s)).exp();
            worst = worst.max((mean - exact).abs() / se);
        }
    }
    Outcome { passed: worst <= 3.0, detail: format!("max |empirical - exp(-(tau+k^2)^s)| / se = {worst:.3} over 6 nodes x 3 orders, 1e6 draws") }
}

fn game_cross_validation() -> Outcome {
    let grid = SlabGrid::new(vec![-1.0], vec![1.0], 64, 0.0, 1.0, 64).unwrap();
    let slab = ValueSlab::new(grid.clone(), parse_field("planewave:1,0", 1).unwrap(), 0.2).unwrap();
    let fp = FracParams::new(1, 0.5).unwrap();
    let solved = dpp_solve(&slab, &GameConfig::linear(), &fp, 1e-10, 500).unwrap();
    let bound = solved.interpolation_bound;
    let mut passed = solved.converged;
    let mut parts = Vec::new();
    for (i, x) in [-0.5, 0.0, 0.5].into_iter().enumerate() {
        let w = walk_estimate(&pt(&[x], 0.0), &grid, &slab.exterior, 0.2, &fp, 10_000, RngStream::new(99, i as u64)).unwrap();
        let v = solved.slab.read(&[x], 0.0);
        passed &= (v - w.value).abs() <= 3.0 * w.std_error + bound;
        parts.push(format!("x={x}: dpp {v:.4} walk {:.4}+-{:.4}", w.value, w.std_error));
    }
    Outcome { passed, detail: format!("{} (allowed 3se + {bound:.4})", parts.join("; ")) }
}

fn limits_at_one() -> Outcome {
    let q = QuadratureSpec::default();
    let grid = [0.5, 0.9, 0.99, 0.999];
    // u = exp(-x²/2 - t²/2): (∂_t - ∂_xx) u = (1 - t - x²) u.
    let (x, t) = (0.3, 0.2);
    let heat = (1.0 - t - x * x) * (-(x * x + t * t) / 2.0f64).exp();
    let g = parse_field("gaussian:1,1,1", 1).unwrap();
    let hs = limit_sweep_hs(&g, &pt(&[x], t), &grid, &q).unwrap();
    let gap_hs = (hs.values[3] - heat).abs() / (heat.abs() + 1.0);
    // u = x² + t at x = 1: ∂_t u - Δ^N_∞ u = 1 - 2.
    let u = parse_field("quadratic:1,0,1", 1).unwrap();
    let inf = limit_sweep_infinity(&u, &pt(&[1.0], 0.0), &grid, Orientation::Backward, &q).unwrap();
    let gap_inf = (inf.values[3] + 1.0).abs() / 2.0;
    let passed = gap_hs <= 0.05 && gap_inf <= 0.05;
    Outcome { passed, detail: format!("relative gaps at s = 0.999: H^s {gap_hs:.2e}, H_inf^- {gap_inf:.2e} (tol 5e-2)") }
}

fn selftest_bytes(threads: &str) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = heatlab_cli::run(["heatlab", "selftest", "--seed", "7", "--threads", threads], &mut out, &mut err);
    (code, out)
}

fn determinism() -> Outcome {
    let (c1, a) = selftest_bytes("1");
    let (c8, b) = selftest_bytes("8");
    let passed = a == b && !a.is_empty() && c1 != 1 && c8 != 1;
    Outcome { passed, detail: format!("selftest --seed 7: {} bytes (1 thread) vs {} bytes (8 threads), identical = {}", a.len(), b.len(), a == b) }
}

fn invariant_suite() -> Outcome {
    let q = QuadratureSpec::default();
    let mut failures = Vec::new();
    let p = pt(&[0.3, -0.4], 0.2);
    for s in [0.3, 0.7] {
        let fp = FracParams::new(2, s).unwrap();
        let one = mean_value_ms(&parse_field("constant:1", 2).unwrap(), &p, 0.25, &fp, &q).unwrap().value;
        if (one - 1.0).abs() > 1e-8 {
            failures.push(format!("M 1 = {one}"));
        }
        let lo = parse_field("gaussian:1,1,1", 2).unwrap();
        let hi = ScalarField::combination(vec![(1.0, lo.clone()), (1.0, parse_field("bump:0.3,1.2", 2).unwrap())]).unwrap();
        let (a, b) = (mean_value_ms(&lo, &p, 0.25, &fp, &q).unwrap().value, mean_value_ms(&hi, &p, 0.25, &fp, &q).unwrap().value);
        if a > b + 2.0 * q.abs_tol {
            failures.push(format!("M monotonicity {a} > {b}"));
        }
        let grid = SphereGrid::new(2, 6).unwrap();
        let table = directional_table(&lo, &pt(&[0.0, 0.0], 0.2), 0.25, &fp, Orientation::Backward, &grid, &q).unwrap();
        let mm = minimax(&yz_matrix(&table, &grid)).unwrap();
        if mm.sup_inf > mm.inf_sup + 1e-14 {
            failures.push(format!("minimax {} > {}", mm.sup_inf, mm.inf_sup));
        }
        let fwd = eval_hs_infinity(&lo.time_reversed(), &pt(&p.x, -p.t), &fp, Orientation::Forward, &grid, GRADIENT_THRESHOLD, &q).unwrap();
        let bwd = eval_hs_infinity(&lo, &p, &fp, Orientation::Backward, &grid, GRADIENT_THRESHOLD, &q).unwrap();
        if (fwd.value - bwd.value).abs() > 1e-7 {
            failures.push(format!("duality {} vs {}", fwd.value, bwd.value));
        }
    }
    let grid = SlabGrid::new(vec![-1.0], vec![1.0], 16, 0.0, 1.0, 16).unwrap();
    let fp = FracParams::new(1, 0.5).unwrap();
    let lo = ValueSlab::new(grid.clone(), parse_field("planewave:1.3,0", 1).unwrap(), 0.2).unwrap();
    let raised = ScalarField::combination(vec![(1.0, lo.exterior.clone()), (0.2, parse_field("bump:1,0.8", 1).unwrap())]).unwrap();
    let hi = ValueSlab::new(grid, raised, 0.2).unwrap();
    let cfg = GameConfig::linear();
    let (ol, oh) = (DppOperator::new(&lo, &cfg, &fp).unwrap(), DppOperator::new(&hi, &cfg, &fp).unwrap());
    let (mut vl, mut vh) = (lo.values.clone(), hi.values.clone());
    for _ in 0..6 {
        vl = ol.apply(&vl).0;
        vh = oh.apply(&vh).0;
    }
    if vl.iter().zip(&vh).any(|(a, b)| *a > b + 1e-12) {
        failures.push("DPP monotonicity".into());
    }
    let passed = failures.is_empty();
    let detail = if passed { "normalization, monotonicity (M, DPP), minimax, duality".to_string() } else { failures.join("; ") };
    Outcome { passed, detail }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("symbol-oracle agreement", symbol_agreement),
        ("kappa scaling identity", kappa_scaling),
        ("H^s expansion order", expansion_order),
        ("H_inf expansion order", infinity_expansion_order),
        ("classical mean value formula", classical_formula),
        ("ctrw transforms", ctrw_transforms),
        ("dpp cross-validation", game_cross_validation),
        ("s -> 1 limits", limits_at_one),
        ("determinism", determinism),
        ("invariant suite", invariant_suite),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {:>2} {name}: {} [{:.1} s]", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
