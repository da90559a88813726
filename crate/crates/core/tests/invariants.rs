//! Property tests of the structural invariants: kernel scaling,
//! normalization and monotonicity of the averages, the minimax inequality,
//! duality, homogeneity of the normalized infinity Laplacian and
//! reproducibility of the samplers.

use proptest::prelude::*;

use heatlab::ctrw::{sample_exterior_batch, ExteriorMethod, RngStream, ACCEPTANCE_FLOOR};
use heatlab::dpp::{DppOperator, GameConfig, QuadPlan, SlabGrid, ValueSlab};
use heatlab::fracheat::{eval_hs, QuadratureSpec, Route};
use heatlab::infinity::{eval_hs_infinity, minimax, Orientation, SphereGrid, GRADIENT_THRESHOLD};
use heatlab::kernel::kernel_density;
use heatlab::limits::infinity_laplacian_normalized;
use heatlab::meanvalue::mean_value_ms;
use heatlab::{parse_field, FracParams, ScalarField, SpaceTimePoint};

fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
    SpaceTimePoint::new(x.to_vec(), t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn kernel_is_nonnegative_and_scales_parabolically(
        s in 0.05f64..0.95, w in -3.0f64..3.0, w2 in -3.0f64..3.0, tau in -1.0f64..4.0, eps in 0.1f64..5.0,
    ) {
        let fp = FracParams::new(2, s).unwrap();
        let k = kernel_density(&[w, w2], tau, &fp);
        prop_assert!(k >= 0.0);
        if tau <= 0.0 {
            prop_assert_eq!(k, 0.0);
        } else {
            let scaled = kernel_density(&[eps * w, eps * w2], eps * eps * tau, &fp);
            let expected = eps.powf(-(2.0 + 2.0 + 2.0 * s)) * k;
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn minimax_inequality_holds(values in proptest::collection::vec(-5.0f64..5.0, 16)) {
        let a: Vec<Vec<f64>> = values.chunks(4).map(|c| c.to_vec()).collect();
        let m = minimax(&a).unwrap();
        prop_assert!(m.sup_inf <= m.inf_sup);
    }

    #[test]
    fn normalized_infinity_laplacian_is_one_homogeneous(c in 0.1f64..10.0, x in 0.2f64..2.0, y in -2.0f64..2.0) {
        let u = parse_field("quadratic:1,3,0.5,-0.2,0", 2).unwrap();
        let cu = ScalarField::combination(vec![(c, u.clone())]).unwrap();
        let p = pt(&[x, y], 0.0);
        let a = infinity_laplacian_normalized(&u, &p, 1e-8).unwrap();
        let b = infinity_laplacian_normalized(&cu, &p, 1e-8).unwrap();
        prop_assert!((c * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn sphere_grids_are_antipodal(n in 1usize..4, res in 1usize..6) {
        let g = SphereGrid::new(n, res).unwrap();
        for i in 0..g.len() {
            let j = g.antipode(i);
            for d in 0..n {
                prop_assert!((g.points[i][d] + g.points[j][d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fields_respect_their_bounds(x in -30.0f64..30.0, y in -30.0f64..30.0, t in -30.0f64..30.0) {
        for spec in ["gaussian:2,0.7,1.3", "planewave:1,-2,0.5", "quadratic:1,-0.5,0.3,0.2,1", "bump:1.5,2", "constant:-3"] {
            let u = parse_field(spec, 2).unwrap();
            prop_assert!(u.value(&[x, y], t).abs() <= u.bound() * (1.0 + 1e-12), "{}", spec);
        }
    }

    #[test]
    fn sampler_batches_are_reproducible(seed in 0u64..1000, s in 0.2f64..0.8) {
        let fp = FracParams::new(2, s).unwrap();
        let a = sample_exterior_batch(&fp, 0.5, 500, ExteriorMethod::TwoRegion, ACCEPTANCE_FLOOR, RngStream::new(seed, 3)).unwrap();
        let b = sample_exterior_batch(&fp, 0.5, 500, ExteriorMethod::TwoRegion, ACCEPTANCE_FLOOR, RngStream::new(seed, 3)).unwrap();
        prop_assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn quadrature_plans_have_unit_mass(s in 0.1f64..0.9, eps in 0.05f64..0.6, x in -1.0f64..1.0, t in 0.0f64..1.0) {
        let grid = SlabGrid::new(vec![-1.0], vec![1.0], 8, 0.0, 1.0, 8).unwrap();
        let plan = QuadPlan::isotropic(1, s, eps, 1).unwrap();
        let mut total = 0.0;
        plan.visit(&grid, &[x], t, &mut |_, _, w| total += w);
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn mean_value_of_constants_is_the_constant(s in 0.1f64..0.9, eps in 0.05f64..2.0, c in -5.0f64..5.0) {
        let fp = FracParams::new(2, s).unwrap();
        let u = parse_field(&format!("constant:{c}"), 2).unwrap();
        let m = mean_value_ms(&u, &pt(&[0.1, 0.2], 0.0), eps, &fp, &QuadratureSpec::default()).unwrap();
        prop_assert!((m.value - c).abs() <= 1e-8 * c.abs().max(1.0));
    }

    #[test]
    fn mean_value_is_monotone(s in 0.1f64..0.9, eps in 0.1f64..1.0, a in 0.01f64..2.0, r in 0.3f64..2.0) {
        let q = QuadratureSpec::default();
        let fp = FracParams::new(1, s).unwrap();
        let lo = parse_field("gaussian:1,1,1", 1).unwrap();
        let hi = ScalarField::combination(vec![(1.0, lo.clone()), (a, parse_field(&format!("gaussian:1,{r},1"), 1).unwrap())]).unwrap();
        let p = pt(&[0.2], 0.1);
        let ml = mean_value_ms(&lo, &p, eps, &fp, &q).unwrap().value;
        let mh = mean_value_ms(&hi, &p, eps, &fp, &q).unwrap().value;
        prop_assert!(ml <= mh + 2.0 * q.abs_tol);
    }

    #[test]
    fn operator_is_linear(s in 0.2f64..0.8, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let q = QuadratureSpec::default();
        let fp = FracParams::new(1, s).unwrap();
        let (u, v) = (parse_field("gaussian:1,1,1", 1).unwrap(), parse_field("planewave:1.5,0.5", 1).unwrap());
        let w = ScalarField::combination(vec![(a, u.clone()), (b, v.clone())]).unwrap();
        let p = pt(&[0.3], 0.2);
        let h = |f: &ScalarField| eval_hs(f, &p, &fp, &q, Route::Hypersingular).unwrap();
        let (hu, hv, hw) = (h(&u), h(&v), h(&w));
        let tol = a.abs() * hu.error_estimate + b.abs() * hv.error_estimate + hw.error_estimate + 1e-9;
        prop_assert!((hw.value - a * hu.value - b * hv.value).abs() <= tol);
    }

    #[test]
    fn forward_and_backward_operators_are_dual(s in 0.2f64..0.8, x in -1.0f64..1.0, y in -1.0f64..1.0, t in -1.0f64..1.0) {
        let q = QuadratureSpec::default();
        let fp = FracParams::new(2, s).unwrap();
        let grid = SphereGrid::new(2, 4).unwrap();
        let u = parse_field("gaussian:1,1,1", 2).unwrap();
        let fwd = eval_hs_infinity(&u.time_reversed(), &pt(&[x, y], -t), &fp, Orientation::Forward, &grid, GRADIENT_THRESHOLD, &q).unwrap();
        let bwd = eval_hs_infinity(&u, &pt(&[x, y], t), &fp, Orientation::Backward, &grid, GRADIENT_THRESHOLD, &q).unwrap();
        prop_assert!((fwd.value - bwd.value).abs() <= 10.0 * (fwd.error_estimate + bwd.error_estimate) + 1e-9);
    }

    #[test]
    fn game_sweeps_preserve_order(shift in 0.0f64..0.5, a in 0.5f64..2.0, tug in any::<bool>()) {
        let grid = SlabGrid::new(vec![-1.0], vec![1.0], 8, 0.0, 1.0, 8).unwrap();
        let fp = FracParams::new(1, 0.5).unwrap();
        let base = parse_field(&format!("planewave:{a},0"), 1).unwrap();
        let raised = ScalarField::combination(vec![(1.0, base.clone()), (shift, parse_field("bump:1,0.7", 1).unwrap())]).unwrap();
        let (lo, hi) = (ValueSlab::new(grid.clone(), base, 0.25).unwrap(), ValueSlab::new(grid, raised, 0.25).unwrap());
        let cfg = if tug { GameConfig::tug(1) } else { GameConfig::linear() };
        let (ol, oh) = (DppOperator::new(&lo, &cfg, &fp).unwrap(), DppOperator::new(&hi, &cfg, &fp).unwrap());
        let (mut vl, mut vh) = (lo.values.clone(), hi.values.clone());
        for _ in 0..4 {
            vl = ol.apply(&vl).0;
            vh = oh.apply(&vh).0;
        }
        prop_assert!(vl.iter().zip(&vh).all(|(l, h)| *l <= h + 1e-12));
        let (lo_data, hi_data) = (-1.0, 1.0 + shift);
        prop_assert!(vl.iter().all(|v| *v >= lo_data - 1e-12 && *v <= hi_data + 1e-12));
    }
}
