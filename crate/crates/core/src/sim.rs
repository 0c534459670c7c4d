//! Finite-horizon play of an automaton under perfect monitoring, with
//! optional single-period deviations.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::automaton::Automaton;
use crate::error::{Error, Result};
use crate::game::{ActionProfile, StageGame, BOX_SLACK};
use crate::spe::{deviation_candidates, state_values, worse, SpeReport, StateValues, Violation};

/// Periods simulated explicitly before the tail correction in
/// [`deviation_gain`].
pub const GAIN_LOOKAHEAD: usize = 8;
pub const MAX_HORIZON: usize = 1_000_000;
/// Horizons are chosen so the discounted tail weighs less than this.
pub const TAIL_WEIGHT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub period: usize,
    pub user: usize,
    pub action: f64,
}

/// Action overrides keyed by period. Empty means full compliance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviationPlan {
    by_period: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl DeviationPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(entries: impl IntoIterator<Item = Deviation>) -> Result<Self> {
        let mut by_period: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for d in entries {
            let slot = by_period.entry(d.period).or_default();
            if slot.iter().any(|&(u, _)| u == d.user) {
                return Err(Error::InvalidParameter(format!(
                    "user {} deviates twice in period {}",
                    d.user + 1,
                    d.period
                )));
            }
            slot.push((d.user, d.action));
        }
        Ok(DeviationPlan { by_period })
    }

    pub fn single(period: usize, user: usize, action: f64) -> Self {
        DeviationPlan { by_period: BTreeMap::from([(period, vec![(user, action)])]) }
    }

    pub fn is_empty(&self) -> bool {
        self.by_period.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = Deviation> + '_ {
        self.by_period
            .iter()
            .flat_map(|(&period, v)| v.iter().map(move |&(user, action)| Deviation { period, user, action }))
    }

    fn validate(&self, game: &dyn StageGame) -> Result<()> {
        let n = game.n();
        for d in self.entries() {
            if d.user >= n {
                return Err(Error::InvalidParameter(format!("plan names user {} of {n}", d.user + 1)));
            }
            let hi = game.a_max()[d.user];
            if !(d.action >= -BOX_SLACK && d.action <= hi + BOX_SLACK) {
                return Err(Error::OutOfBox(format!(
                    "planned action {} of user {} outside [0, {hi}]",
                    d.action,
                    d.user + 1
                )));
            }
        }
        Ok(())
    }

    fn apply(&self, t: usize, prescribed: &ActionProfile) -> ActionProfile {
        let mut realized = prescribed.clone();
        if let Some(v) = self.by_period.get(&t) {
            for &(i, x) in v {
                realized.a[i] = x;
            }
        }
        realized
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub state: usize,
    pub prescribed: ActionProfile,
    pub realized: ActionProfile,
    pub payoffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<Record>,
    pub discount: f64,
    /// `(1 - delta) * sum_t delta^t u(t)` over the records.
    pub accumulated: Vec<f64>,
    /// State after the last recorded period.
    pub final_state: usize,
}

fn accumulate(records: &[Record], delta: f64, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    let mut weight = 1.0 - delta;
    for r in records {
        for (a, u) in acc.iter_mut().zip(&r.payoffs) {
            *a += weight * u;
        }
        weight *= delta;
    }
    acc
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn recompute_accumulated(&self) -> Vec<f64> {
        accumulate(&self.records, self.discount, self.accumulated.len())
    }

    pub fn states(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.state).collect()
    }

    /// CSV with one row per period: state, realized actions, payoffs.
    pub fn write_csv<W: Write>(&self, automaton: &Automaton, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidParameter(format!("writing trace: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let n = self.accumulated.len();
        let first = self.records.first();
        let n0 = first.map_or(0, |r| r.realized.a0.len());
        let mut header = vec!["period".to_string(), "state".into(), "label".into(), "deviated".into()];
        header.extend((1..=n0).map(|k| format!("a0_{k}")));
        header.extend((1..=n).map(|k| format!("a_{k}")));
        header.extend((1..=n).map(|k| format!("u_{k}")));
        w.write_record(&header).map_err(io)?;
        for (t, r) in self.records.iter().enumerate() {
            let mut row = vec![
                t.to_string(),
                r.state.to_string(),
                automaton.state(r.state).label.to_string(),
                (!automaton.deviators(r.state, &r.realized).is_empty()).to_string(),
            ];
            row.extend(r.realized.a0.iter().chain(&r.realized.a).chain(&r.payoffs).map(|x| x.to_string()));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParameter(format!("writing trace: {e}")))?;
        Ok(())
    }
}

/// Smallest horizon with `delta^H < TAIL_WEIGHT`, capped at [`MAX_HORIZON`].
pub fn horizon_for(delta: f64) -> usize {
    if delta <= 0.0 {
        return 1;
    }
    let h = (TAIL_WEIGHT.ln() / delta.ln()).floor() as usize + 1;
    h.clamp(1, MAX_HORIZON)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("discount factor {delta} outside [0, 1)")));
    }
    Ok(())
}

fn run_from(
    game: &dyn StageGame,
    automaton: &Automaton,
    start: usize,
    delta: f64,
    horizon: usize,
    plan: &DeviationPlan,
) -> Trace {
    let mut records = Vec::with_capacity(horizon);
    let mut w = start;
    for t in 0..horizon {
        let prescribed = automaton.output(w).clone();
        let realized = plan.apply(t, &prescribed);
        let payoffs = game.eval(&realized.a0, &realized.a);
        let next = automaton.transition(w, &realized);
        records.push(Record { state: w, prescribed, realized, payoffs });
        w = next;
    }
    let accumulated = accumulate(&records, delta, game.n());
    Trace { records, discount: delta, accumulated, final_state: w }
}

pub fn run(
    game: &dyn StageGame,
    automaton: &Automaton,
    delta: f64,
    horizon: usize,
    plan: &DeviationPlan,
) -> Result<Trace> {
    check_delta(delta)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if automaton.users() != game.n() {
        return Err(Error::InvalidParameter("automaton and game disagree on the user count".into()));
    }
    plan.validate(game)?;
    Ok(run_from(game, automaton, automaton.initial(), delta, horizon, plan))
}

/// Gain of user `i` from playing `x` once in state `w` and complying
/// afterwards, normalized to that period.
fn gain_from_state(
    game: &dyn StageGame,
    automaton: &Automaton,
    values: &StateValues,
    w: usize,
    i: usize,
    x: f64,
) -> f64 {
    let delta = values.discount;
    let k = GAIN_LOOKAHEAD;
    let comply = run_from(game, automaton, w, delta, k, &DeviationPlan::none());
    let deviate = run_from(game, automaton, w, delta, k, &DeviationPlan::single(0, i, x));
    let tail = delta.powi(k as i32) * (values.get(deviate.final_state)[i] - values.get(comply.final_state)[i]);
    deviate.accumulated[i] - comply.accumulated[i] + tail
}

/// Continuation gain of a one-period deviation by user `i` at period `t` of
/// compliant play, normalized to period `t`.
pub fn deviation_gain(
    game: &dyn StageGame,
    automaton: &Automaton,
    delta: f64,
    t: usize,
    i: usize,
    action: f64,
) -> Result<f64> {
    check_delta(delta)?;
    DeviationPlan::single(t, i, action).validate(game)?;
    let values = state_values(automaton, game, delta)?;
    let mut w = automaton.initial();
    for _ in 0..t {
        w = automaton.state(w).next;
    }
    Ok(gain_from_state(game, automaton, &values, w, i, action))
}

/// Normalized payoff of user `i` from `steps` compliant periods starting at
/// `w`, plus the discounted state value where they end.
fn rollout(game: &dyn StageGame, automaton: &Automaton, values: &StateValues, w: usize, i: usize, steps: usize) -> f64 {
    let delta = values.discount;
    let mut acc = 0.0;
    let mut weight = 1.0 - delta;
    let mut w = w;
    for _ in 0..steps {
        let f = automaton.output(w);
        acc += weight * game.eval_user(i, &f.a0, &f.a);
        weight *= delta;
        w = automaton.state(w).next;
    }
    acc + delta.powi(steps as i32) * values.get(w)[i]
}

/// Largest one-period deviation gain over reachable states, users and the
/// candidate actions used by [`crate::spe::verify_spe`], measured by
/// simulating [`GAIN_LOOKAHEAD`] periods of both branches.
pub fn profitability_scan(game: &dyn StageGame, automaton: &Automaton, delta: f64, grid: usize) -> Result<SpeReport> {
    check_delta(delta)?;
    let values = state_values(automaton, game, delta)?;
    let reachable = automaton.reachable();
    let n = game.n();
    let k = GAIN_LOOKAHEAD;
    // rollouts[i][w] for k and k - 1 periods; every successor of a reachable
    // state is reachable.
    let mut full = vec![vec![f64::NAN; automaton.len()]; n];
    let mut short = full.clone();
    for i in 0..n {
        for &w in &reachable {
            full[i][w] = rollout(game, automaton, &values, w, i, k);
            short[i][w] = rollout(game, automaton, &values, w, i, k - 1);
        }
    }
    let worst = reachable
        .par_iter()
        .flat_map_iter(|&w| (0..n).map(move |i| (w, i)))
        .map_init(Vec::new, |scratch: &mut Vec<f64>, (w, i)| {
            let f = automaton.output(w);
            scratch.clear();
            scratch.extend_from_slice(&f.a);
            let mut worst = Violation { state: w, user: i, action: f.a[i], gain: f64::NEG_INFINITY };
            for x in deviation_candidates(game, i, f, grid) {
                scratch[i] = x;
                let nxt = automaton.unilateral_transition(w, i, x);
                let dev = (1.0 - delta) * game.eval_user(i, &f.a0, scratch) + delta * short[i][nxt];
                let gain = dev - full[i][w];
                if gain > worst.gain {
                    worst = Violation { state: w, user: i, action: x, gain };
                }
            }
            worst
        })
        .reduce_with(worse)
        .ok_or_else(|| Error::InvalidAutomaton("automaton has no states".into()))?;
    Ok(SpeReport { worst, states_checked: reachable.len() })
}
