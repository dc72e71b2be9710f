use elg::cli::{parse_dataset, sample_text};
use elg::distributions::{elg_cdf, elg_pdf, elg_quantile, elg_sample, elg_survival};
use elg::estimation::log_likelihood;
use elg::{Dataset, ElgParams, Seed};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ElgParams> {
    (0.2f64..20.0, 0.1f64..5.0, -5.0f64..0.99).prop_map(|(a, t, p)| ElgParams::new(a, t, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cdf_inverts_quantile(pr in params(), u in 0.001f64..0.999) {
        let x = elg_quantile(pr, u).unwrap();
        prop_assert!(x > 0.0);
        prop_assert!((elg_cdf(pr, x).unwrap() - u).abs() < 1e-9);
    }

    #[test]
    fn cdf_and_survival_are_complementary(pr in params(), x in 1e-3f64..50.0) {
        let f = elg_cdf(pr, x).unwrap();
        let s = elg_survival(pr, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f + s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cdf_is_monotone(pr in params(), x in 1e-3f64..20.0, dx in 1e-3f64..5.0) {
        prop_assert!(elg_cdf(pr, x + dx).unwrap() >= elg_cdf(pr, x).unwrap());
    }

    #[test]
    fn loglik_sums_log_densities(pr in params(), seed in any::<u64>()) {
        let xs = elg_sample(pr, 25, Seed(seed)).unwrap();
        prop_assert!(xs.iter().all(|&x| x > 0.0 && x.is_finite()));
        let direct: f64 = xs.iter().map(|&x| elg_pdf(pr, x).unwrap().ln()).sum();
        let data = Dataset::new(xs, "p").unwrap();
        let ll = log_likelihood(pr, &data);
        prop_assert!((ll - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn sample_text_parses_back(pr in params(), seed in any::<u64>()) {
        let xs = elg_sample(pr, 40, Seed(seed)).unwrap();
        let parsed = parse_dataset(&sample_text(&xs), "p").unwrap();
        prop_assert_eq!(parsed.values(), xs.as_slice());
    }
}
