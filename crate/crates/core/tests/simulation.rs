//! Simulator traces against the analytic state values.

mod common;

use common::*;
use intervene_core::automaton::{build_grim_automaton, build_minmax_automaton, PunishmentLength, PunishmentPlay};
use intervene_core::sim::{deviation_gain, profitability_scan, run, Deviation, DeviationPlan};
use intervene_core::spe::{min_delta_for_l, state_values, verify_spe, DEVIATION_GRID};
use intervene_core::stage::{minmax_vector, mutual_minmax};
use intervene_core::{ActionProfile, StageGame, StateLabel};
use proptest::prelude::*;

fn path_profile() -> ActionProfile {
    ActionProfile::new(vec![0.0], vec![1.0, 1.0, 2.5, 2.5])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn accumulated_payoff_converges(delta in 0.05f64..0.97, horizon in 1usize..400) {
        let game = reference_flow(2.5);
        let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
        let trace = run(&game, &a, delta, horizon, &DeviationPlan::none()).unwrap();
        let v = state_values(&a, &game, delta).unwrap();
        let u_max = game.eval(&[0.0], &path_profile().a).into_iter().fold(0.0, f64::max);
        for i in 0..game.n() {
            let gap = (trace.accumulated[i] - v.get(a.initial())[i]).abs();
            prop_assert!(gap <= u_max * delta.powi(horizon as i32) + 1e-9);
        }
        prop_assert_eq!(trace.recompute_accumulated(), trace.accumulated.clone());
        prop_assert_eq!(trace.horizon(), horizon);
    }

    #[test]
    fn traces_are_deterministic(delta in 0.0f64..0.99, t in 0usize..20, user in 0usize..4, x in 0.0f64..2.5) {
        let game = reference_flow(2.5);
        let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
        let plan = DeviationPlan::single(t, user, x);
        let one = run(&game, &a, delta, 40, &plan).unwrap();
        let two = run(&game, &a, delta, 40, &plan).unwrap();
        prop_assert_eq!(one, two);
    }

    #[test]
    fn prescribed_action_has_zero_gain(delta in 0.0f64..0.99, t in 0usize..10, user in 0usize..4) {
        let game = reference_flow(2.5);
        let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
        let x = path_profile().a[user];
        prop_assert_eq!(deviation_gain(&game, &a, delta, t, user, x).unwrap(), 0.0);
    }
}

#[test]
fn deviation_at_five_is_punished_from_six_on() {
    let game = reference_flow(2.5);
    let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
    let trace = run(&game, &a, 0.9, 30, &DeviationPlan::single(5, 2, 0.5)).unwrap();
    let wp = a.find(StateLabel::Absorbing).unwrap();
    let floor = minmax_vector(&game, true);
    for (t, r) in trace.records.iter().enumerate() {
        if t <= 5 {
            assert_eq!(r.state, 0);
        } else {
            assert_eq!(r.state, wp);
            assert_eq!(r.payoffs, floor);
        }
    }
    assert_eq!(trace.records[5].realized.a[2], 0.5);
    assert_eq!(trace.records[5].prescribed.a[2], 2.5);
}

#[test]
fn joint_deviations_and_plans() {
    let game = reference_flow(2.5);
    let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
    let plan = DeviationPlan::new([
        Deviation { period: 2, user: 0, action: 0.0 },
        Deviation { period: 2, user: 1, action: 0.0 },
    ])
    .unwrap();
    let trace = run(&game, &a, 0.9, 5, &plan).unwrap();
    assert_eq!(trace.states(), vec![0, 0, 0, 1, 1]);
    assert!(DeviationPlan::new([
        Deviation { period: 1, user: 0, action: 0.0 },
        Deviation { period: 1, user: 0, action: 1.0 },
    ])
    .is_err());
    assert!(run(&game, &a, 0.9, 5, &DeviationPlan::single(0, 0, 3.0)).is_err());
    assert!(run(&game, &a, 0.9, 5, &DeviationPlan::single(0, 7, 1.0)).is_err());
    assert!(run(&game, &a, 0.9, 0, &DeviationPlan::none()).is_err());
}

#[test]
fn gain_changes_sign_at_the_grim_bound() {
    let game = reference_flow(2.5);
    let (mutual, _) = mutual_minmax(&game, true);
    let bound = min_delta_for_l(&game, &path_profile(), &mutual, PunishmentLength::Unbounded).unwrap().delta.unwrap();
    let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
    let below = profitability_scan(&game, &a, bound - 1e-3, DEVIATION_GRID).unwrap();
    assert!(below.worst.gain > 0.0);
    assert_eq!(a.state(below.worst.state).label, StateLabel::Path(0));
    let above = profitability_scan(&game, &a, bound + 1e-5, DEVIATION_GRID).unwrap();
    assert!(above.is_ok(), "{:?}", above.worst);
    // myopic best response of the binding user
    let br = game.best_response(0, &[0.0], &path_profile().a);
    assert!(deviation_gain(&game, &a, bound + 1e-5, 0, 0, br).unwrap() <= 1e-9);
    assert!(deviation_gain(&game, &a, 0.0, 0, 0, br).unwrap() > 0.0);
}

#[test]
fn punishment_states_never_pay_to_leave() {
    let game = reference_flow(2.5);
    let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
    let wp = a.find(StateLabel::Absorbing).unwrap();
    for delta in [0.0, 0.5, 0.9] {
        let values = state_values(&a, &game, delta).unwrap();
        for i in 0..game.n() {
            for x in axis(2.5, 51) {
                let f = a.output(wp).with_user(i, x);
                let dev = (1.0 - delta) * game.eval_user(i, &f.a0, &f.a) + delta * values.get(wp)[i];
                assert!(dev <= values.get(wp)[i] + 1e-12);
            }
        }
    }
}

#[test]
fn scanners_agree_on_minmax_automata() {
    let game = reference_flow(1.0);
    let (mutual, _) = mutual_minmax(&game, true);
    for play in [PunishmentPlay::MutualMinmax, PunishmentPlay::DeviatorBestResponds] {
        for l in [1, 3, 8] {
            let a = build_minmax_automaton(&game, &[path_profile()], 0, &mutual, PunishmentLength::Finite(l), play).unwrap();
            for delta in [0.3, 0.8, 0.95, 0.99] {
                let x = verify_spe(&a, &game, delta, DEVIATION_GRID).unwrap();
                let y = profitability_scan(&game, &a, delta, DEVIATION_GRID).unwrap();
                assert!((x.worst.gain - y.worst.gain).abs() <= 1e-8, "{play:?} L={l} delta={delta}");
                assert_eq!(x.is_ok(), y.is_ok());
            }
        }
    }
}

#[test]
fn trace_csv_layout() {
    let game = reference_flow(2.5);
    let a = build_grim_automaton(&game, &[path_profile()], 0).unwrap();
    let trace = run(&game, &a, 0.9, 3, &DeviationPlan::single(1, 0, 0.0)).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&a, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "period,state,label,deviated,a0_1,a_1,a_2,a_3,a_4,u_1,u_2,u_3,u_4");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,0,w_e(0),false,0,1,1,2.5,2.5,"));
    assert!(lines[2].starts_with("1,0,w_e(0),true,0,0,1,2.5,2.5,"));
    assert!(lines[3].starts_with("2,1,w_p,false,2.5,2.5,2.5,2.5,2.5,0,0,0,0"));
}
