use berkcal::simulation::{generate_dataset, SimConfig};
use berkcal::*;
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = (SimConfig, u64)> {
    (
        prop::sample::select(vec![5usize, 8, 20, 50]),
        prop::sample::select(vec![2usize, 5, 20]),
        -0.2..2.2f64,
        0.0..0.15f64,
        any::<u64>(),
    )
        .prop_map(|(n, k, x0, d, seed)| {
            (
                SimConfig {
                    seed,
                    replications: 1,
                    ..SimConfig::study_cell(n, k, x0, d)
                },
                seed % 1000,
            )
        })
}

proptest! {
    #[test]
    fn usual_and_unknown_delta_share_point_estimates((cfg, r) in cell()) {
        let s = generate_dataset(&cfg, r).summarize();
        let u = fit_usual(&s).unwrap();
        let c = fit_unknown_delta(&s).unwrap();
        prop_assert_eq!(u.alpha_hat, c.alpha_hat);
        prop_assert_eq!(u.beta_hat, c.beta_hat);
        prop_assert_eq!(u.x0_hat, c.x0_hat);
        prop_assert!((c.gamma_hat - s.residual_mean_square(c.beta_hat)).abs() <= 1e-12 * c.gamma_hat.abs().max(1e-300));
        prop_assert_eq!(c.negative_delta_variance, c.sigma_delta_sq_hat < 0.0);
    }

    #[test]
    fn known_delta_fit_is_a_root((cfg, r) in cell()) {
        let s = generate_dataset(&cfg, r).summarize();
        if let Ok(f) = fit_known_delta(&s, cfg.sigma_delta_sq, &SolverConfig::default()) {
            prop_assert!(f.sigma_eps_sq_hat > 0.0);
            let res = known_delta_residual(&s, cfg.sigma_delta_sq, f.beta_hat, f.sigma_eps_sq_hat);
            prop_assert!(res < 1e-10, "{}", res);
            prop_assert!((f.alpha_hat + f.beta_hat * f.x0_hat - s.y0_bar).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_estimate_is_invariant_to_response_units((cfg, r) in cell(), c in 0.01..100.0f64, shift in -10.0..10.0f64) {
        let data = generate_dataset(&cfg, r);
        let first: Vec<_> = data.first_stage().iter().map(|&(x, y)| (x, c * y + shift)).collect();
        let second: Vec<_> = data.second_stage().iter().map(|&y| c * y + shift).collect();
        let scaled = CalibrationData::new(first, second).unwrap().summarize();
        let a = fit_unknown_delta(&data.summarize()).unwrap();
        let b = fit_unknown_delta(&scaled).unwrap();
        prop_assert!((a.x0_hat - b.x0_hat).abs() < 1e-8 * (1.0 + a.x0_hat.abs()));
        let va = variance_v1_controlled(&a.params(), &data.summarize().design()).unwrap();
        let vb = variance_v1_controlled(&b.params(), &scaled.design()).unwrap();
        prop_assert!((va / vb - 1.0).abs() < 1e-7);
    }

    #[test]
    fn intervals_contain_estimate_and_widen_with_level((cfg, r) in cell(), lo in 0.5..0.9f64) {
        let s = generate_dataset(&cfg, r).summarize();
        let p = fit_unknown_delta(&s).unwrap().params();
        let narrow = UncertaintyReport::new(VarianceFormula::V1Controlled, &p, &s.design(), lo).unwrap();
        let wide = UncertaintyReport::new(VarianceFormula::V1Controlled, &p, &s.design(), 0.99).unwrap();
        prop_assert!(narrow.ci_lower < p.x0 && p.x0 < narrow.ci_upper);
        prop_assert!(wide.amplitude() > narrow.amplitude());
    }
}
