//! Equilibrium outcome paths: sequences of solo profiles whose discounted
//! average equals a target payoff on the Pareto boundary.
//!
//! The generator keeps the continuation payoff `v(tau)` on the simplex and
//! above the thresholds `nu`, activating the smallest-index user that keeps it
//! there. Real orbits rarely return to the target exactly, so the sequence is
//! closed into a loop once doing so moves every state value by a negligible
//! amount while keeping every incentive constraint of the grim protocol
//! satisfied.

use std::collections::BTreeMap;

use crate::design::{delta_bar, nu_thresholds, DeviationStats, ASSUMPTION_TOL};
use crate::error::{Error, Result};
use crate::game::{ActionProfile, StageGame};

/// Two continuation payoffs this close (sup norm) are the same state.
pub const CYCLE_TOL: f64 = 1e-9;
/// Largest change of the initial value accepted when closing the loop.
pub const CLOSURE_TOL: f64 = 1e-7;
/// Slack on the `nu` floor when selecting the active user.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Slack on the exact incentive margins of a closed path.
pub const MARGIN_TOL: f64 = 1e-10;
pub const MAX_PATH_LEN: usize = 1_000_000;
/// Best-effort paths are cut once the discounted tail weighs less than this.
pub const TAIL_WEIGHT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathMode {
    /// Every continuation payoff stays above `nu`; fails if that is impossible.
    #[default]
    Strict,
    /// Picks the least-violating user when no feasible one exists. Used to
    /// build protocols below the discount bound so their failure can be shown.
    BestEffort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePath {
    /// Active user of each on-path state.
    pub active: Vec<usize>,
    /// The last state loops back to this one.
    pub cycle_start: usize,
    pub discount: f64,
    pub delta_bar: f64,
    pub nu: Vec<f64>,
    /// Generator continuation payoffs `v(tau)`, one per state.
    pub continuation: Vec<Vec<f64>>,
    /// Exact normalized values of the looped path at each state.
    pub values: Vec<Vec<f64>>,
    /// Whether all selections respected the `nu` floor.
    pub feasible: bool,
}

impl OutcomePath {
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn payoff(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn profiles(&self, stats: &DeviationStats) -> Vec<ActionProfile> {
        self.active.iter().map(|&i| stats.solo_profiles[i].clone()).collect()
    }
}

/// Exact values of a looped active-user sequence: state `h - 1` continues to
/// `cycle_start`. Only user `i` earns `v_bar_i` while active.
pub fn loop_values(v_bar: &[f64], active: &[usize], cycle_start: usize, delta: f64) -> Vec<Vec<f64>> {
    let n = v_bar.len();
    let h = active.len();
    let len = h - cycle_start;
    let mut values = vec![vec![0.0; n]; h];
    let scale = (1.0 - delta) / (1.0 - delta.powi(len as i32));
    let mut d = 1.0;
    for &i in &active[cycle_start..] {
        values[cycle_start][i] += scale * d * v_bar[i];
        d *= delta;
    }
    let mut after = values[cycle_start].clone();
    for tau in (0..h).rev() {
        if tau == cycle_start {
            after = values[cycle_start].clone();
            continue;
        }
        let mut v: Vec<f64> = after.iter().map(|x| delta * x).collect();
        v[active[tau]] += (1.0 - delta) * v_bar[active[tau]];
        values[tau] = v.clone();
        after = v;
    }
    values
}

/// Keeps `v` on the simplex by solving for coordinate `i`.
fn project(v: &mut [f64], v_bar: &[f64], i: usize) {
    let rest: f64 = (0..v.len()).filter(|&j| j != i).map(|j| v[j] / v_bar[j]).sum();
    v[i] = v_bar[i] * (1.0 - rest);
}

fn step(v: &[f64], v_bar: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut next: Vec<f64> = v.iter().map(|x| x / delta).collect();
    next[i] -= (1.0 - delta) / delta * v_bar[i];
    next
}

struct Ctx<'a> {
    stats: &'a DeviationStats,
    delta: f64,
}

impl Ctx<'_> {
    /// Incentive margin of user `j` at a state with value `v` and active user `i`.
    fn margin(&self, v: &[f64], i: usize, j: usize) -> f64 {
        v[j] - (1.0 - self.delta) * self.stats.y[i][j] - self.delta * self.stats.floor()[j]
    }

    fn exact_ok(&self, active: &[usize], values: &[Vec<f64>]) -> bool {
        let n = self.stats.n();
        active.iter().zip(values).all(|(&i, v)| (0..n).all(|j| self.margin(v, i, j) >= -MARGIN_TOL))
    }
}

fn key(x: f64) -> i64 {
    (x / CYCLE_TOL).floor() as i64
}

/// Builds the on-path sequence for `target` at discount `delta`.
pub fn generate_outcome_path(
    game: &dyn StageGame,
    stats: &DeviationStats,
    target: &[f64],
    delta: f64,
    mode: PathMode,
) -> Result<OutcomePath> {
    let n = stats.n();
    if target.len() != n {
        return Err(Error::InvalidParameter("target has the wrong dimension".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("discount factor {delta} outside (0, 1)")));
    }
    for (i, p) in stats.solo_profiles.iter().enumerate() {
        let u = game.eval(&p.a0, &p.a);
        if (0..n).any(|j| j != i && u[j].abs() > ASSUMPTION_TOL) {
            return Err(Error::InvalidParameter(format!(
                "solo profile of user {} gives other users a positive payoff",
                i + 1
            )));
        }
    }
    let v_bar = &stats.v_bar;
    let residual: f64 = target.iter().zip(v_bar).map(|(a, b)| a / b).sum::<f64>() - 1.0;
    if residual.abs() > ASSUMPTION_TOL {
        return Err(Error::InvalidParameter(format!("target is off the simplex by {residual:e}")));
    }
    let bound = delta_bar(stats, target);
    if mode == PathMode::Strict && delta < bound - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "discount factor {delta} is below the bound {bound}"
        )));
    }
    let nu = nu_thresholds(stats, bound);
    let ctx = Ctx { stats, delta };

    let mut v = target.to_vec();
    let mut continuation = vec![v.clone()];
    let mut active: Vec<usize> = Vec::new();
    let mut slack = vec![f64::INFINITY; n];
    let mut seen: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut feasible = true;
    let mut weight = 1.0;

    let finish = |active: Vec<usize>, cycle_start: usize, continuation: Vec<Vec<f64>>, values: Vec<Vec<f64>>, feasible| {
        OutcomePath { active, cycle_start, discount: delta, delta_bar: bound, nu: nu.clone(), continuation, values, feasible }
    };

    for h in 0..=MAX_PATH_LEN {
        if h >= 1 {
            match mode {
                PathMode::Strict => {
                    let k = key(v[0]);
                    let near: Vec<usize> = seen
                        .range(k - 1..=k + 1)
                        .flat_map(|(_, ts)| ts.iter().copied())
                        .filter(|&t| (0..n).all(|j| (v[j] - continuation[t][j]).abs() <= CYCLE_TOL))
                        .collect();
                    for t in near {
                        let values = loop_values(v_bar, &active, t, delta);
                        if ctx.exact_ok(&active, &values) && close_enough(&values[0], target) {
                            continuation.pop();
                            return Ok(finish(active, t, continuation, values, feasible));
                        }
                    }
                    let dh = weight;
                    let ok = (0..n).all(|j| {
                        let d = (target[j] - v[j]) / (1.0 - dh);
                        (dh * d).abs() <= CLOSURE_TOL && (d >= 0.0 || slack[j] >= -d)
                    });
                    if ok {
                        let values = loop_values(v_bar, &active, 0, delta);
                        if ctx.exact_ok(&active, &values) && close_enough(&values[0], target) {
                            continuation.pop();
                            return Ok(finish(active, 0, continuation, values, feasible));
                        }
                    }
                    seen.entry(k).or_default().push(h);
                }
                PathMode::BestEffort => {
                    if weight < TAIL_WEIGHT {
                        let values = loop_values(v_bar, &active, 0, delta);
                        continuation.pop();
                        return Ok(finish(active, 0, continuation, values, feasible));
                    }
                }
            }
        }
        if h == MAX_PATH_LEN {
            break;
        }

        let shortfall = |i: usize| {
            let next = step(&v, v_bar, i, delta);
            (0..n).map(|j| next[j] - nu[j]).fold(f64::INFINITY, f64::min)
        };
        let chosen = (0..n).find(|&i| shortfall(i) >= -FEASIBILITY_TOL);
        let i = match (chosen, mode) {
            (Some(i), _) => i,
            (None, PathMode::Strict) => {
                return Err(Error::Consistency(format!(
                    "no user can be activated at step {h} with continuation {v:?} and floor {nu:?}"
                )))
            }
            (None, PathMode::BestEffort) => {
                feasible = false;
                (0..n).fold(0, |b, i| if shortfall(i) > shortfall(b) { i } else { b })
            }
        };
        for j in 0..n {
            slack[j] = slack[j].min(ctx.margin(&v, i, j)) / delta;
        }
        let mut next = step(&v, v_bar, i, delta);
        if mode == PathMode::BestEffort {
            for (x, b) in next.iter_mut().zip(v_bar) {
                *x = x.clamp(0.0, *b);
            }
            let r: f64 = next.iter().zip(v_bar).map(|(a, b)| a / b).sum();
            if r > 0.0 {
                for x in next.iter_mut() {
                    *x /= r;
                }
            }
        }
        project(&mut next, v_bar, i);
        v = next;
        active.push(i);
        continuation.push(v.clone());
        weight *= delta;
    }
    Err(Error::Consistency(format!("outcome path did not close within {MAX_PATH_LEN} periods")))
}

fn close_enough(v: &[f64], target: &[f64]) -> bool {
    v.iter().zip(target).all(|(a, b)| (a - b).abs() <= 10.0 * CLOSURE_TOL)
}
