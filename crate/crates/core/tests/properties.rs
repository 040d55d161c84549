use bsdesign::baseline::{run_grid, GridDesign};
use bsdesign::cost::{predict_stage_size, total_cost, CostFitCoeffs};
use bsdesign::likelihood::{fit_mle, mle_exists, FitOptions, ObservationSet};
use bsdesign::oracle::{ResponseOracle, SimulatedOracle};
use bsdesign::response_models::{cdf, pdf, quantile, LinkParams, ModelKind};
use bsdesign::search::{Limits, Phase, SearchState, StageRole};
use bsdesign::simulation::summarize;
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Logit), Just(ModelKind::Probit), Just(ModelKind::Cloglog)]
}

fn observations() -> impl Strategy<Value = Vec<(f64, u64, u64)>> {
    prop::collection::vec((-20.0f64..20.0, 1u64..8), 1..8).prop_flat_map(|levels| {
        let ks: Vec<_> = levels.iter().map(|&(_, n)| 0..=n).collect();
        (Just(levels), ks).prop_map(|(levels, ks)| {
            levels.into_iter().zip(ks).map(|((x, n), k)| (x, n, k)).collect()
        })
    })
}

fn search(model: ModelKind, lo: f64, width: f64, nk: u64, seed: u64) -> SearchState {
    let mut oracle = SimulatedOracle::new(model, LinkParams::canonical(), seed);
    let mut st = SearchState::new(lo, lo + width, nk, Limits::default(), seed.rotate_left(17)).unwrap();
    st.drive(&mut oracle).unwrap();
    st
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cdf_is_increasing_and_inverts(m in model(), e1 in -30.0f64..30.0, gap in 1e-3f64..5.0) {
        let (f1, f2) = (cdf(m, e1).unwrap(), cdf(m, e1 + gap).unwrap());
        prop_assert!(f1 <= f2);
        prop_assert!(pdf(m, e1).unwrap() >= 0.0);
        if f1 > 1e-8 && f1 < 1.0 - 1e-8 {
            let back = quantile(m, f1).unwrap();
            prop_assert!((back - e1).abs() < 1e-6 * e1.abs().max(1.0), "{back} vs {e1}");
        }
    }

    #[test]
    fn existence_ignores_increasing_affine_maps(data in observations(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let set = ObservationSet::from_triples(&data).unwrap();
        let moved = set.map_levels(|x| scale * x + shift);
        prop_assert_eq!(mle_exists(&set), mle_exists(&moved));
        prop_assert_eq!(mle_exists(&set), mle_exists(&set.scale_counts(3)));
    }

    #[test]
    fn fit_is_affine_equivariant(data in observations(), m in model(), scale in 0.2f64..5.0, shift in -5.0f64..5.0) {
        let set = ObservationSet::from_triples(&data).unwrap();
        prop_assume!(mle_exists(&set));
        let opts = FitOptions::default();
        let base = fit_mle(m, &set, &opts).unwrap();
        prop_assume!(base.converged && base.a_hat.abs() < 50.0);
        let moved = fit_mle(m, &set.map_levels(|x| scale * x + shift), &opts).unwrap();
        prop_assume!(moved.converged);
        let a = base.a_hat / scale;
        let b = base.b_hat - a * shift;
        prop_assert!((moved.a_hat - a).abs() < 1e-5 * a.abs().max(1.0), "{} vs {a}", moved.a_hat);
        prop_assert!((moved.b_hat - b).abs() < 1e-5 * b.abs().max(1.0), "{} vs {b}", moved.b_hat);
    }

    #[test]
    fn search_replays_bit_for_bit(m in model(), lo in -60.0f64..-4.0, width in 9.0f64..500.0, nk in 2u64..12, seed in any::<u64>()) {
        let hi = lo + width;
        prop_assume!(hi > 4.0);
        let a = search(m, lo, width, nk, seed);
        let b = search(m, lo, width, nk, seed);
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = SearchState::from_json(&a.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn stepping_by_hand_matches_drive(m in model(), lo in -40.0f64..-4.0, width in 9.0f64..200.0, nk in 2u64..8, seed in any::<u64>()) {
        prop_assume!(lo + width > 4.0);
        let driven = search(m, lo, width, nk, seed);
        let mut oracle = SimulatedOracle::new(m, LinkParams::canonical(), seed);
        let mut st = SearchState::new(lo, lo + width, nk, Limits::default(), seed.rotate_left(17)).unwrap();
        while !st.phase.is_terminal() {
            // round trip through JSON between every stage, as a resumed run would
            st = SearchState::from_json(&st.to_json().unwrap()).unwrap();
            let x = st.next_level().unwrap();
            let k = oracle.measure(x, nk).unwrap();
            st.apply_response(k).unwrap();
        }
        prop_assert_eq!(st, driven);
    }

    #[test]
    fn brackets_nest_and_probes_halve(m in model(), lo in -40.0f64..-4.0, width in 9.0f64..200.0, nk in 2u64..8, seed in any::<u64>()) {
        prop_assume!(lo + width > 4.0);
        let mut oracle = SimulatedOracle::new(m, LinkParams::canonical(), seed);
        let mut st = SearchState::new(lo, lo + width, nk, Limits::default(), seed).unwrap();
        let (mut l, mut u) = (st.lower, st.upper);
        while !st.phase.is_terminal() {
            let x = st.next_level().unwrap();
            if st.phase == Phase::Bisection {
                prop_assert!(l < x && x < u);
            }
            st.apply_response(oracle.measure(x, nk).unwrap()).unwrap();
            prop_assert!(l <= st.lower && st.upper <= u && st.lower < st.upper);
            l = st.lower;
            u = st.upper;
        }
        prop_assert_eq!(st.phase, Phase::Done);
        prop_assert!(mle_exists(&st.observations()));
        prop_assert!(st.stages() >= 2);
        if let Some(anchor) = st.anchor {
            let offsets: Vec<f64> = st.history.iter()
                .filter(|r| r.role == StageRole::EpsilonProbe)
                .map(|r| (r.x - anchor).abs())
                .collect();
            for w in offsets.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn more_measurements_per_level_never_hurt(seed in any::<u64>(), levels in 2usize..20, lo in -30.0f64..-1.0, width in 2.0f64..40.0) {
        let truth = LinkParams::canonical();
        let small = GridDesign::new(levels, 2, lo, lo + width).unwrap();
        let large = GridDesign { per_level: 9, ..small };
        let (_, a) = run_grid(ModelKind::Cloglog, &truth, &small, seed);
        let (_, b) = run_grid(ModelKind::Cloglog, &truth, &large, seed);
        prop_assert!(!a || b);
    }

    #[test]
    fn cost_is_linear(k in 1.0f64..30.0, n in 1.0f64..1000.0, c in 0.0f64..1000.0, t in 0.1f64..10.0) {
        let base = total_cost(k, n, c);
        prop_assert!((total_cost(t * k, n, c) - t * base).abs() < 1e-9 * base.max(1.0) * t);
        let step = total_cost(k, n + t, c) - total_cost(k, n, c);
        prop_assert!((step - k * t).abs() < 1e-8 * base.max(1.0));
        let step = total_cost(k, n, c + t) - total_cost(k, n, c);
        prop_assert!((step - k * t).abs() < 1e-8 * base.max(1.0));
    }

    #[test]
    fn predicted_stage_size_is_monotone(m in model(), d in 1.0f64..2000.0, c in 1e-3f64..1e3, f in 1.0f64..10.0) {
        let coeffs = CostFitCoeffs::published(m);
        let n = predict_stage_size(&coeffs, d, c).unwrap();
        prop_assert!(n >= 2);
        prop_assert!(predict_stage_size(&coeffs, d, c * f).unwrap() >= n);
        prop_assert!(predict_stage_size(&coeffs, d * f, c).unwrap() <= n);
    }

    #[test]
    fn percentiles_are_ordered(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let s = summarize(&values).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= s.p5 && s.p5 <= s.p95 && s.p95 <= hi);
        prop_assert!(lo <= s.mean + 1e-9 && s.mean <= hi + 1e-9);
        prop_assert!(values.contains(&s.p5) && values.contains(&s.p95));
    }
}
