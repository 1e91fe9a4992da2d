//! Property tests for the invariants each module promises.

mod common;

use common::{normals, random_model, random_panel, theta_by_summation, unit};
use proptest::prelude::*;

use soboot::bootstrap::{critical_value, BootstrapDraws, BootstrapScheme};
use soboot::derivative::{
    closed_form_deriv_squared_mean, cvm_deriv, gms_deriv_moment_ineq, structural_deriv_ch, DerivEstimator,
    DerivKind, QuadDirection,
};
use soboot::inference::{ch_feature_test, squared_mean_draws, KappaRule};
use soboot::moments::{fit_quadratic_moments, SphereVec};
use soboot::montecarlo::{mc_std_err, run_design, McConfig};
use soboot::rng::stream_rng;
use soboot::simulate::{simulate_ch_panel, DesignSpec, PanelData};
use soboot::sphereopt::{estimate_identified_set, grid_oracle_sphere, minimize_on_sphere, IdentifiedSetEstimate};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn panels_are_deterministic_in_seed(design in 0usize..5, t in 20usize..120, seed in any::<u64>()) {
        let d = DesignSpec::preset(["D1", "D2", "D3", "D4", "D5"][design]).unwrap();
        let a = simulate_ch_panel(&d, t, &mut stream_rng(seed, 0)).unwrap();
        let b = simulate_ch_panel(&d, t, &mut stream_rng(seed, 0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn representation_identity(seed in any::<u64>(), k in 2usize..5, m in 1usize..4, t in 10usize..80) {
        let panel = random_panel(t, m, k, seed);
        let model = fit_quadratic_moments(&panel, None).unwrap();
        let g = unit(k, seed ^ 1);
        let fast = model.eval_theta(&g).unwrap();
        let slow = theta_by_summation(&panel, g.coords());
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn theta_and_phi_are_even(seed in any::<u64>(), k in 2usize..5) {
        let panel = random_panel(40, 3, k, seed);
        let model = fit_quadratic_moments(&panel, None).unwrap();
        let g = unit(k, seed ^ 2);
        prop_assert_eq!(model.eval_theta(&g).unwrap(), model.eval_theta(&g.negated()).unwrap());
        prop_assert_eq!(model.eval_phi(&g).unwrap(), model.eval_phi(&g.negated()).unwrap());
    }

    #[test]
    fn outcome_scaling_is_quartic_in_phi(seed in any::<u64>(), e in -3i32..4) {
        let s = 2f64.powi(e);
        let panel = random_panel(50, 2, 3, seed);
        let a = fit_quadratic_moments(&panel, None).unwrap();
        let b = fit_quadratic_moments(&panel.scale_outcomes(s), None).unwrap();
        for (x, y) in a.g_mat().iter().zip(b.g_mat()) {
            prop_assert_eq!(x * s * s, *y);
        }
        let g = unit(3, seed ^ 3);
        prop_assert_eq!(a.eval_phi(&g).unwrap() * s.powi(4), b.eval_phi(&g).unwrap());
    }

    #[test]
    fn sphere_search_matches_grid_and_stays_unit(seed in any::<u64>(), k in 2usize..4) {
        let model = random_model(k, 3, seed);
        let local = minimize_on_sphere(&model, 121, 1e-10);
        let grid = grid_oracle_sphere(&model, 2000).unwrap();
        prop_assert!(local.value <= grid.value + 1e-9);
        let n: f64 = local.minimizer.coords().iter().map(|x| x * x).sum();
        prop_assert!((n - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn identified_set_is_monotone_and_sign_symmetric(seed in any::<u64>(), k in 2usize..4) {
        let model = random_model(k, 2, seed);
        let mut last = 0;
        for kappa in [0.01, 0.1, 0.3, 1.0, 3.0] {
            let set = estimate_identified_set(&model, kappa, 600).unwrap();
            prop_assert!(set.len() >= last);
            last = set.len();
            for pair in set.points.chunks(2) {
                prop_assert_eq!(&pair[1], &pair[0].negated());
                prop_assert!(model.eval_phi(&pair[0]).unwrap() - set.phi_min <= set.threshold + 1e-15);
            }
        }
    }

    #[test]
    fn structural_is_nonnegative_and_monotone(seed in any::<u64>(), r in 0.2f64..3.0) {
        let model = random_model(2, 2, seed);
        let gammas: Vec<SphereVec> = (0..4).map(|i| unit(2, seed ^ (10 + i))).collect();
        let h = QuadDirection::new(2, 2, normals(8, seed ^ 4)).unwrap();
        let small = IdentifiedSetEstimate::from_points(&gammas[..2], 0.01, 0.0).unwrap();
        let large = IdentifiedSetEstimate::from_points(&gammas, 0.01, 0.0).unwrap();
        let est = |radius: f64| DerivEstimator::structural(0.1).unwrap().with_radius(radius).unwrap();
        let a = structural_deriv_ch(&model, &small, &est(r), &h, 4).unwrap();
        let b = structural_deriv_ch(&model, &large, &est(r), &h, 4).unwrap();
        let c = structural_deriv_ch(&model, &small, &est(2.0 * r), &h, 4).unwrap();
        prop_assert!(a >= 0.0 && b >= 0.0 && c >= 0.0);
        prop_assert!(b <= a * (1.0 + 1e-9) + 1e-15, "set: {b} > {a}");
        prop_assert!(c <= a * (1.0 + 1e-9) + 1e-15, "radius: {c} > {a}");
        let zero = QuadDirection::zero(2, 2);
        prop_assert_eq!(structural_deriv_ch(&model, &large, &est(r), &zero, 4).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_are_exactly_homogeneous(h in -1e3f64..1e3, e in -4i32..5, xbar in -1.0f64..1.0) {
        let t = 2f64.powi(e);
        prop_assert_eq!(closed_form_deriv_squared_mean(t * h), t * t * closed_form_deriv_squared_mean(h));
        let kappa = 0.1;
        if t > 0.0 {
            prop_assert_eq!(
                gms_deriv_moment_ineq(xbar, kappa, t * h).unwrap(),
                t * t * gms_deriv_moment_ineq(xbar, kappa, h).unwrap()
            );
        }
        let grid: Vec<f64> = (0..8).map(|i| h * (i as f64 - 3.5)).collect();
        let w = vec![0.125; 8];
        let scaled: Vec<f64> = grid.iter().map(|x| t * x).collect();
        prop_assert_eq!(cvm_deriv(&scaled, &w).unwrap(), t * t * cvm_deriv(&grid, &w).unwrap());
    }

    #[test]
    fn critical_value_is_monotone_and_order_free(seed in any::<u64>(), b in 1usize..300) {
        let v = normals(b, seed);
        let mut shuffled = v.clone();
        shuffled.reverse();
        shuffled.rotate_left(b / 3);
        let d1 = BootstrapDraws::new(v, BootstrapScheme::Iid).unwrap();
        let d2 = BootstrapDraws::new(shuffled, BootstrapScheme::Iid).unwrap();
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.5, 0.2, 0.1, 0.05, 0.01] {
            let c = critical_value(&d1, alpha).unwrap();
            prop_assert_eq!(c, critical_value(&d2, alpha).unwrap());
            prop_assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn squared_mean_draws_are_reproducible_and_babu_nonnegative(seed in any::<u64>(), n in 2usize..200) {
        let sample = normals(n, seed);
        let a = squared_mean_draws(&sample, 50, seed).unwrap();
        let b = squared_mean_draws(&sample, 50, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a[1].iter().all(|&x| x >= 0.0));
        prop_assert_eq!(&a[1], &a[2]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ch_test_scaling_and_permutation(seed in any::<u64>(), e in -2i32..3) {
        let d = DesignSpec::preset("D1").unwrap();
        let panel = simulate_ch_panel(&d, 150, &mut stream_rng(seed, 0)).unwrap();
        let run = |p: &PanelData, kind: DerivKind| {
            ch_feature_test(p, KappaRule::Third, kind, 40, 0.05, BootstrapScheme::Iid, &mut stream_rng(seed, 1)).unwrap()
        };
        let s = 2f64.powi(e);
        let s4 = s.powi(4);
        let base = run(&panel, DerivKind::StructuralCh);
        let scaled = run(&panel.scale_outcomes(s), DerivKind::StructuralCh);
        prop_assert!((scaled.statistic - s4 * base.statistic).abs() <= 1e-9 * s4 * base.statistic.max(1e-12));
        // The kappa^2 slack of the set estimate is not scale free, so draw
        // equivariance is checked on the numerical estimator.
        let nb = run(&panel, DerivKind::Numerical);
        let ns = run(&panel.scale_outcomes(s), DerivKind::Numerical);
        prop_assert_eq!(ns.reject, nb.reject);
        for (x, y) in nb.draws.values().iter().zip(ns.draws.values()) {
            prop_assert!((y - s4 * x).abs() <= 1e-6 * s4 * x.abs().max(1e-3), "{y} vs {}", s4 * x);
        }
        let swapped = run(&panel.permute_instruments(&[1, 0]).unwrap(), DerivKind::StructuralCh);
        prop_assert!((swapped.statistic - base.statistic).abs() <= 1e-12 * base.statistic.max(1e-12));
        for (x, y) in base.draws.values().iter().zip(swapped.draws.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-6));
        }
    }
}

#[test]
fn mc_table_is_thread_invariant_and_std_err_consistent() {
    let mut cfg = McConfig::new(DesignSpec::preset("D2").unwrap(), vec![120, 240]);
    cfg.reps = 12;
    cfg.b = 30;
    cfg.kappa_rules = vec![KappaRule::Quarter];
    cfg.est_kinds = vec![DerivKind::StructuralCh, DerivKind::Numerical];
    let one = run_design(&cfg).unwrap();
    cfg.workers = 3;
    let three = run_design(&cfg).unwrap();
    assert_eq!(one, three);
    for row in &one.rows {
        assert_eq!(row.mc_se, mc_std_err(row.reject_rate, row.reps));
    }
}
