//! Properties of the welfare targets and the discount-factor bounds.

mod common;

use common::*;
use intervene_core::design::{
    check_guarantees, delta_bar, delta_mu, deviation_stats, fixed_point_term, nu_thresholds, optimize_on_simplex,
};
use intervene_core::sweep::delta_bar_at;
use intervene_core::Welfare;
use proptest::prelude::*;
use rand::Rng;

/// Positive solo values and guarantees whose normalized sum is below one.
fn simplex_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=5)
        .prop_flat_map(|n| (proptest::collection::vec(1.0f64..100.0, n), proptest::collection::vec(0.0f64..1.0, n), 0.05f64..0.95))
        .prop_map(|(v_bar, w, total)| {
            let s: f64 = w.iter().sum::<f64>().max(1e-9);
            let gamma = v_bar.iter().zip(&w).map(|(b, x)| b * total * x / s).collect();
            (v_bar, gamma)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn welfare_optima_beat_random_feasible_points((v_bar, gamma) in simplex_problem(), seed in any::<u64>()) {
        let n = v_bar.len();
        let sum = optimize_on_simplex(&v_bar, &gamma, Welfare::Sum);
        let fair = optimize_on_simplex(&v_bar, &gamma, Welfare::MaxMin);
        for v in [&sum, &fair] {
            let r: f64 = v.iter().zip(&v_bar).map(|(a, b)| a / b).sum();
            prop_assert!((r - 1.0).abs() < 1e-9);
            for i in 0..n {
                prop_assert!(v[i] >= gamma[i] - 1e-12);
            }
        }
        let best_sum = Welfare::Sum.evaluate(&sum);
        let best_min = Welfare::MaxMin.evaluate(&fair);
        let mut rng = rng(seed);
        let room = 1.0 - gamma.iter().zip(&v_bar).map(|(g, b)| g / b).sum::<f64>();
        for _ in 0..200 {
            let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
            let s: f64 = e.iter().sum();
            let v: Vec<f64> = (0..n).map(|i| gamma[i] + v_bar[i] * room * e[i] / s).collect();
            prop_assert!(Welfare::Sum.evaluate(&v) <= best_sum + 1e-9);
            prop_assert!(Welfare::MaxMin.evaluate(&v) <= best_min + 1e-9);
        }
        // raising every component at the floor of the maxmin optimum leaves the simplex
        let raised: f64 = fair
            .iter()
            .zip(&gamma)
            .zip(&v_bar)
            .map(|((v, g), b)| if *v <= best_min + 1e-12 { (v + 1e-6) / b } else { g.max(best_min + 1e-6) / b })
            .sum();
        prop_assert!(raised > 1.0);
    }

    #[test]
    fn sum_target_sits_at_the_best_vertex((v_bar, gamma) in simplex_problem()) {
        let v = optimize_on_simplex(&v_bar, &gamma, Welfare::Sum);
        let k = (0..v_bar.len()).fold(0, |k, i| if v_bar[i] > v_bar[k] { i } else { k });
        for j in (0..v_bar.len()).filter(|&j| j != k) {
            prop_assert_eq!(v[j], gamma[j]);
        }
    }
}

#[test]
fn delta_mu_at_nu_recovers_the_bound() {
    let mut rng = rng(11);
    for _ in 0..200 {
        let (_, stats, target, db) = random_instance(&mut rng, 1.0);
        let nu = nu_thresholds(&stats, db);
        for j in 0..stats.n() {
            assert!(target[j] >= nu[j] - 1e-9, "target below nu");
        }
        let d = delta_mu(&stats, &nu).unwrap();
        assert!((d - db).abs() < 1e-12, "{d} vs {db}");
        assert!(db >= fixed_point_term(stats.n(), stats.ratio_t, stats.ratio_s) - 1e-15);
        assert!(db > 0.0 && db <= 1.0);
    }
}

#[test]
fn bound_is_non_increasing_in_the_intervention_cap() {
    let mut rng = rng(12);
    for _ in 0..40 {
        let n = rng.gen_range(2..=4);
        let base = random_flow(&mut rng, n);
        // the zero-cap floor is the highest, so this target is valid at every cap
        let stats = deviation_stats(&base.with_a0_max(0.0).unwrap()).unwrap();
        let Some(target) = random_target(&mut rng, &stats, 0.02) else { continue };
        let mut last = f64::INFINITY;
        for k in 0..=20 {
            let game = base.with_a0_max(base.mu() * k as f64 / 20.0).unwrap();
            let s = deviation_stats(&game).unwrap();
            let d = delta_bar(&s, &target);
            assert!(d <= last + 1e-12, "cap {k}/20: {d} > {last}");
            last = d;
        }
    }
    let reference = reference_flow(2.5);
    for g in [1.0, 3.0, 7.0, 14.0] {
        let bounds: Vec<f64> = (0..=25)
            .filter_map(|k| delta_bar_at(&reference, k as f64 / 10.0, g, Welfare::Sum).unwrap())
            .collect();
        assert!(bounds.windows(2).all(|w| w[1] <= w[0] + 1e-12), "gamma {g}: {bounds:?}");
    }
}

#[test]
fn large_caps_leave_the_bound_unchanged() {
    let reference = reference_flow(2.5);
    let at = |a0: f64| delta_bar_at(&reference, a0, 3.0, Welfare::Sum).unwrap().unwrap();
    assert_eq!(at(2.5), at(5.0));
    assert_eq!(at(2.5), at(10.0));
}

/// Sum welfare hands every user but the best one its guarantee, so raising a
/// guarantee moves that user away from its deviation payoff.
#[test]
fn sum_bound_is_non_increasing_in_gamma_while_the_top_user_is_rich() {
    let mut rng = rng(13);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.gen_range(2..=4);
        let game = random_flow(&mut rng, n);
        let stats = deviation_stats(&game).unwrap();
        let i = rng.gen_range(0..n);
        let base: Vec<f64> = (0..n).map(|j| stats.floor()[j] + rng.gen_range(0.01..0.1) * stats.v_bar[j]).collect();
        let mut raised = base.clone();
        raised[i] += rng.gen_range(0.0..0.1) * stats.v_bar[i];
        if check_guarantees(&stats.v_bar, stats.floor(), &raised, true).is_err() {
            continue;
        }
        let lo = optimize_on_simplex(&stats.v_bar, &base, Welfare::Sum);
        let hi = optimize_on_simplex(&stats.v_bar, &raised, Welfare::Sum);
        let k = (0..n).fold(0, |k, j| if stats.v_bar[j] > stats.v_bar[k] { j } else { k });
        if hi[k] < stats.w[k] {
            continue;
        }
        assert!(delta_bar(&stats, &hi) <= delta_bar(&stats, &lo) + 1e-12);
        checked += 1;
    }
}

#[test]
fn reference_sum_bounds_fall_with_gamma() {
    let reference = reference_flow(2.5);
    let bounds: Vec<f64> = [1.0, 3.0, 7.0, 14.0]
        .iter()
        .map(|&g| delta_bar_at(&reference, 2.5, g, Welfare::Sum).unwrap().unwrap())
        .collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
    let fair: Vec<f64> = [1.0, 3.0, 7.0, 14.0]
        .iter()
        .map(|&g| delta_bar_at(&reference, 2.5, g, Welfare::MaxMin).unwrap().unwrap())
        .collect();
    assert!(fair.windows(2).all(|w| w[1] == w[0]));
}
