mod common;

use proptest::prelude::*;

use frontier_sfa::optimizer::{from_unconstrained, minimize, ParamLayout};
use frontier_sfa::synthetic::{sample_truncated_normal, substream};
use frontier_sfa::{bc_efficiency, jlms, loglik_panel, FitOptions, FrontierSpec, PosteriorMoments};

use common::{random_params, rng, small_panel, SPECS};

fn spec(k: usize) -> FrontierSpec {
    let (d, t) = SPECS[k];
    FrontierSpec::new(0, d, t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scores_are_bounded_and_ordered(mu in -30.0f64..30.0, s in 1e-4f64..5.0) {
        let m = PosteriorMoments { mu_star: mu, sigma_star: s };
        let u = jlms(&m);
        let te = bc_efficiency(&m, 1.0);
        prop_assert!(u >= 0.0 && u.is_finite());
        prop_assert!(te > 0.0 && te <= 1.0);
        // E[exp(-u)] >= exp(-E[u])
        prop_assert!(te >= (-u).exp() * (1.0 - 1e-12));
    }

    #[test]
    fn every_search_vector_is_valid(k in 0usize..4, x in prop::collection::vec(-1e3f64..1e3, 13)) {
        let s = spec(k);
        let layout = ParamLayout::new(&s, 6, 1);
        let p = from_unconstrained(&layout, &x[..layout.len()]).unwrap();
        prop_assert!(p.validate().is_ok());
    }

    #[test]
    fn truncated_draws_are_non_negative(seed in 0u64..1000, mu in -50.0f64..50.0, s in 1e-3f64..10.0) {
        let mut r = substream(seed, 0);
        for _ in 0..20 {
            let u = sample_truncated_normal(mu, s, &mut r);
            prop_assert!(u >= 0.0 && u.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Shifting every output and the intercept by the same amount leaves
    /// the residuals, hence the likelihood, unchanged.
    #[test]
    fn likelihood_invariant_to_level_shift(seed in 0u64..10_000, k in 0usize..4, shift in -5.0f64..5.0) {
        let s = spec(k);
        let mut r = rng(seed);
        let p = random_params(&mut r, &s, 2, 1);
        let mut ds = small_panel(&mut r, &p, 5);
        let before = loglik_panel(&ds, &s, &p).unwrap();
        for o in &mut ds.observations {
            o.outputs[0] = o.outputs[0].map(|y| y + shift);
        }
        let mut q = p.clone();
        q.alpha += shift;
        let after = loglik_panel(&ds, &s, &q).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn line_search_never_raises_the_objective(seed in 0u64..10_000, k in 0usize..4) {
        let s = spec(k);
        let mut r = rng(seed);
        let p = random_params(&mut r, &s, 2, 1);
        let layout = ParamLayout::new(&s, 2, 1);
        // With too few observations the likelihood is unbounded and the
        // fit rightly ends in a non-finite objective, so redraw.
        let ds = loop {
            let ds = small_panel(&mut r, &p, 12);
            if ds.observations.len() >= 2 * layout.len() {
                break ds;
            }
        };
        let x0 = frontier_sfa::optimizer::to_unconstrained(&layout, &p).unwrap();
        let f = |x: &[f64]| -> f64 {
            from_unconstrained(&layout, x)
                .and_then(|q| loglik_panel(&ds, &s, &q))
                .map_or(f64::INFINITY, |v| -v)
        };
        let options = FitOptions { max_iterations: 200, ..FitOptions::default() };
        let run = minimize(f, &x0, &options).unwrap();
        prop_assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(run.value, *run.trace.last().unwrap());
    }
}
