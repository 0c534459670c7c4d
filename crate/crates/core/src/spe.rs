//! State values and subgame-perfection checks for strategy automata, plus the
//! discount-factor inequality families behind the folk theorems.

use rayon::prelude::*;

use crate::automaton::{Automaton, PunishmentLength};
use crate::error::{Error, Result};
use crate::game::{ActionProfile, PayoffVector, StageGame};
use crate::stage::{self, mutual_minmax, solo_values};

/// Deviation gains up to this size are treated as rounding noise.
pub const SPE_TOL: f64 = 1e-9;
/// Default number of grid actions scanned per user and state.
pub const DEVIATION_GRID: usize = 200;
pub const BISECTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StateValues {
    pub values: Vec<PayoffVector>,
    pub discount: f64,
}

impl StateValues {
    pub fn get(&self, w: usize) -> &[f64] {
        &self.values[w]
    }
}

fn check_discount(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("discount factor {delta} outside [0, 1)")));
    }
    Ok(())
}

/// Normalized discounted values of every state under compliant play.
///
/// Compliant play follows `next`, so each state eventually enters a cycle.
/// Cycle values use the geometric closed form at one entry point and are then
/// filled backward, which keeps rounding errors contracting.
pub fn state_values(automaton: &Automaton, game: &dyn StageGame, delta: f64) -> Result<StateValues> {
    check_discount(delta)?;
    let k = automaton.len();
    let stage: Vec<PayoffVector> = automaton
        .states()
        .iter()
        .map(|s| game.eval(&s.output.a0, &s.output.a))
        .collect();
    let n = game.n();
    let mut values: Vec<Option<PayoffVector>> = vec![None; k];
    // 0 = unvisited, 1 = on the current walk, 2 = done
    let mut mark = vec![0u8; k];
    for root in 0..k {
        if mark[root] != 0 {
            continue;
        }
        let mut walk = Vec::new();
        let mut w = root;
        while mark[w] == 0 {
            mark[w] = 1;
            walk.push(w);
            w = automaton.state(w).next;
        }
        let mut tail_end = walk.len();
        if mark[w] == 1 {
            // closed a new cycle starting at position `pos` of the walk
            let pos = walk.iter().position(|&x| x == w).unwrap();
            let cycle = &walk[pos..];
            let len = cycle.len();
            let scale = (1.0 - delta) / (1.0 - delta.powi(len as i32));
            let mut head = vec![0.0; n];
            let mut d = 1.0;
            for &c in cycle {
                for (h, u) in head.iter_mut().zip(&stage[c]) {
                    *h += scale * d * u;
                }
                d *= delta;
            }
            values[cycle[0]] = Some(head);
            let mut after = cycle[0];
            for &c in cycle[1..].iter().rev() {
                let v = backup(&stage[c], values[after].as_ref().unwrap(), delta);
                values[c] = Some(v);
                after = c;
            }
            tail_end = pos;
        }
        for &c in walk[..tail_end].iter().rev() {
            let nxt = automaton.state(c).next;
            let v = backup(&stage[c], values[nxt].as_ref().unwrap(), delta);
            values[c] = Some(v);
        }
        for &c in &walk {
            mark[c] = 2;
        }
    }
    Ok(StateValues { values: values.into_iter().map(Option::unwrap).collect(), discount: delta })
}

fn backup(u: &[f64], next: &[f64], delta: f64) -> Vec<f64> {
    u.iter().zip(next).map(|(u, v)| (1.0 - delta) * u + delta * v).collect()
}

/// Largest componentwise violation of `V(w) = (1-d) u(f(w)) + d V(next(w))`.
pub fn bellman_residual(automaton: &Automaton, game: &dyn StageGame, values: &StateValues) -> f64 {
    let d = values.discount;
    (0..automaton.len())
        .map(|w| {
            let s = automaton.state(w);
            let u = game.eval(&s.output.a0, &s.output.a);
            let rhs = backup(&u, &values.values[s.next], d);
            rhs.iter().zip(&values.values[w]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: usize,
    pub user: usize,
    pub action: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeReport {
    /// Most profitable one-shot deviation found, even when it is not
    /// profitable.
    pub worst: Violation,
    pub states_checked: usize,
}

impl SpeReport {
    pub fn is_ok(&self) -> bool {
        self.worst.gain <= SPE_TOL
    }

    pub fn violation(&self) -> Option<&Violation> {
        (!self.is_ok()).then_some(&self.worst)
    }
}

/// Candidate deviations of user `i` at profile `f`: a uniform grid over the
/// action box plus the stage best response.
pub fn deviation_candidates(game: &dyn StageGame, i: usize, f: &ActionProfile, grid: usize) -> Vec<f64> {
    let hi = game.a_max()[i];
    let mut c: Vec<f64> = if grid >= 2 {
        (0..grid).map(|k| hi * k as f64 / (grid - 1) as f64).collect()
    } else {
        vec![0.0, hi]
    };
    c.push(game.best_response(i, &f.a0, &f.a));
    c
}

/// One-shot deviation gain of user `i` playing `x` at state `w`.
pub fn one_shot_gain(
    automaton: &Automaton,
    game: &dyn StageGame,
    values: &StateValues,
    w: usize,
    i: usize,
    x: f64,
) -> f64 {
    let d = values.discount;
    let s = automaton.state(w);
    let comply = (1.0 - d) * game.eval_user(i, &s.output.a0, &s.output.a) + d * values.values[s.next][i];
    let dev = s.output.with_user(i, x);
    let nxt = automaton.transition(w, &dev);
    let deviate = (1.0 - d) * game.eval_user(i, &dev.a0, &dev.a) + d * values.values[nxt][i];
    deviate - comply
}

/// Worst candidate deviation of user `i` at state `w`.
fn worst_at(
    automaton: &Automaton,
    game: &dyn StageGame,
    values: &StateValues,
    w: usize,
    i: usize,
    grid: usize,
    scratch: &mut Vec<f64>,
) -> Violation {
    let d = values.discount;
    let s = automaton.state(w);
    let f = &s.output;
    let comply = (1.0 - d) * game.eval_user(i, &f.a0, &f.a) + d * values.values[s.next][i];
    scratch.clear();
    scratch.extend_from_slice(&f.a);
    let mut worst = Violation { state: w, user: i, action: f.a[i], gain: f64::NEG_INFINITY };
    for x in deviation_candidates(game, i, f, grid) {
        scratch[i] = x;
        let nxt = automaton.unilateral_transition(w, i, x);
        let gain = (1.0 - d) * game.eval_user(i, &f.a0, scratch) + d * values.values[nxt][i] - comply;
        if gain > worst.gain {
            worst = Violation { state: w, user: i, action: x, gain };
        }
    }
    worst
}

/// Keeps the larger gain; ties go to the smaller (state, user).
pub(crate) fn worse(a: Violation, b: Violation) -> Violation {
    if b.gain > a.gain || (b.gain == a.gain && (b.state, b.user) < (a.state, a.user)) {
        b
    } else {
        a
    }
}

/// One-shot deviation check over every reachable state and user.
pub fn verify_spe(automaton: &Automaton, game: &dyn StageGame, delta: f64, grid: usize) -> Result<SpeReport> {
    let values = state_values(automaton, game, delta)?;
    let reachable = automaton.reachable();
    let n = game.n();
    let worst = reachable
        .par_iter()
        .flat_map_iter(|&w| (0..n).map(move |i| (w, i)))
        .map_init(Vec::new, |scratch, (w, i)| worst_at(automaton, game, &values, w, i, grid, scratch))
        .reduce_with(worse)
        .expect("automaton has at least one state");
    Ok(SpeReport { worst, states_checked: reachable.len() })
}

/// Which inequality family determines the minimum discount factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// Following the path beats a one-period deviation plus punishment.
    Path,
    /// The punished user prefers to sit out its punishment.
    Punishment,
    /// Already satisfied at a zero discount factor.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinDelta {
    /// `None` when no discount factor below one works.
    pub delta: Option<f64>,
    pub binding: Binding,
}

/// Payoff gaps entering the two families for a single-profile path.
#[derive(Debug, Clone)]
struct FamilyData {
    on_path: Vec<f64>,
    punished: Vec<f64>,
    path_gain: Vec<f64>,
    punish_gain: Vec<f64>,
}

fn family_data(game: &dyn StageGame, path: &ActionProfile, mutual: &ActionProfile) -> FamilyData {
    let n = game.n();
    let on_path = game.eval(&path.a0, &path.a);
    let punished = game.eval(&mutual.a0, &mutual.a);
    let path_gain = (0..n).map(|i| stage::unilateral_gain(game, i, path).max(0.0)).collect();
    let punish_gain = (0..n).map(|i| stage::unilateral_gain(game, i, mutual).max(0.0)).collect();
    FamilyData { on_path, punished, path_gain, punish_gain }
}

fn geometric_sum(delta: f64, length: PunishmentLength) -> f64 {
    match length {
        PunishmentLength::Unbounded => delta / (1.0 - delta),
        PunishmentLength::Finite(l) => (1..=l).map(|k| delta.powi(k as i32)).sum(),
    }
}

/// Margins of both families at `delta` (all users), without the M bound.
/// The second family is empty for unbounded punishment.
fn family_margins(data: &FamilyData, delta: f64, length: PunishmentLength) -> (f64, f64) {
    let g = geometric_sum(delta, length);
    let path = (0..data.on_path.len())
        .map(|i| g * (data.on_path[i] - data.punished[i]) - data.path_gain[i])
        .fold(f64::INFINITY, f64::min);
    let punish = match length {
        PunishmentLength::Unbounded => f64::INFINITY,
        PunishmentLength::Finite(l) => {
            let dl = delta.powi(l as i32);
            (0..data.on_path.len())
                .map(|i| dl * (data.on_path[i] - data.punished[i]) - data.punish_gain[i])
                .fold(f64::INFINITY, f64::min)
        }
    };
    (path, punish)
}

/// Smallest `delta` satisfying both inequality families for the minmax
/// automaton with `mutual` as the punishment played by everyone, bisected to
/// `BISECTION_TOL`. Unbounded punishment requires `mutual` to be a stage
/// equilibrium, and then only the path family applies.
pub fn min_delta_for_l(
    game: &dyn StageGame,
    path: &ActionProfile,
    mutual: &ActionProfile,
    length: PunishmentLength,
) -> Result<MinDelta> {
    let data = family_data(game, path, mutual);
    if length == PunishmentLength::Unbounded && data.punish_gain.iter().any(|&g| g > stage::NASH_CERT_TOL) {
        return Err(Error::InvalidParameter(
            "unbounded punishment requires the mutual minmax profile to be a stage equilibrium".into(),
        ));
    }
    let feasible = |d: f64| {
        let (a, b) = family_margins(&data, d, length);
        a >= 0.0 && b >= 0.0
    };
    if feasible(0.0) {
        return Ok(MinDelta { delta: Some(0.0), binding: Binding::None });
    }
    let top = 1.0 - 1e-12;
    if !feasible(top) {
        let (a, _) = family_margins(&data, top, length);
        let binding = if a < 0.0 { Binding::Path } else { Binding::Punishment };
        return Ok(MinDelta { delta: None, binding });
    }
    let (mut lo, mut hi) = (0.0, top);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (a, b) = family_margins(&data, lo, length);
    let binding = if a < 0.0 && (b >= 0.0 || a <= b) { Binding::Path } else { Binding::Punishment };
    Ok(MinDelta { delta: Some(hi), binding })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLRow {
    pub length: PunishmentLength,
    pub min_delta: MinDelta,
}

/// Minimum discount factor for each punishment length.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLRegion {
    pub rows: Vec<DeltaLRow>,
}

/// `min_delta_for_l` over several lengths, using the game's mutual minmax
/// profile (with intervention). Unbounded lengths are skipped when that
/// profile is not a stage equilibrium.
pub fn delta_l_region(game: &dyn StageGame, path: &ActionProfile, lengths: &[PunishmentLength]) -> Result<DeltaLRegion> {
    let (mutual, ne) = mutual_minmax(game, true);
    let mut rows = Vec::new();
    for &length in lengths {
        if length == PunishmentLength::Unbounded && !ne {
            continue;
        }
        rows.push(DeltaLRow { length, min_delta: min_delta_for_l(game, path, &mutual, length)? });
    }
    Ok(DeltaLRegion { rows })
}

/// Upper bound on every stage payoff: a grid maximum at the null
/// intervention, combined with the solo optima.
pub fn payoff_bound(game: &dyn StageGame, per_axis: usize) -> f64 {
    let n = game.n();
    let per_axis = per_axis.max(2);
    let total = (per_axis as f64).powi(n as i32);
    let mut best = solo_values(game).into_iter().fold(f64::NEG_INFINITY, f64::max);
    if total <= 2e6 {
        let a0 = game.null_a0();
        let caps = game.a_max();
        let mut idx = vec![0usize; n];
        loop {
            let a: Vec<f64> = idx.iter().zip(caps).map(|(&k, &c)| c * k as f64 / (per_axis - 1) as f64).collect();
            best = game.eval(&a0, &a).into_iter().fold(best, f64::max);
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] < per_axis {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
    best
}

/// Margins of the two families used with a generic payoff bound `M`:
/// path incentive and sitting out one's own punishment.
#[derive(Debug, Clone, PartialEq)]
pub struct MinmaxFolkReport {
    pub path: Vec<f64>,
    pub punishment: Vec<f64>,
}

impl MinmaxFolkReport {
    pub fn all_satisfied(&self) -> bool {
        self.path.iter().chain(&self.punishment).all(|&m| m >= 0.0)
    }
}

/// For a single-profile path with payoff `v` and mutual minmax payoff `p`:
/// `(d + ... + d^L)(v_i - p_i) >= M - v_i` and
/// `(1 - d^L) p_i + d^L v_i >= vlow_i`.
pub fn minmax_folk_constraints(v: &[f64], punished: &[f64], vlow: &[f64], m: f64, l: usize, delta: f64) -> MinmaxFolkReport {
    let g = geometric_sum(delta, PunishmentLength::Finite(l));
    let dl = delta.powi(l as i32);
    MinmaxFolkReport {
        path: (0..v.len()).map(|i| g * (v[i] - punished[i]) - (m - v[i])).collect(),
        punishment: (0..v.len()).map(|i| (1.0 - dl) * punished[i] + dl * v[i] - vlow[i]).collect(),
    }
}

/// Smallest `L` with `L (v_i - p_i) > M - v_i` for all users.
pub fn minmax_folk_length(v: &[f64], punished: &[f64], m: f64) -> Option<usize> {
    let mut l = 1usize;
    for i in 0..v.len() {
        let gap = v[i] - punished[i];
        if !(gap > 0.0) {
            return None;
        }
        l = l.max(((m - v[i]) / gap).floor() as usize + 1);
    }
    Some(l)
}

/// Payoff data of a player-specific punishment scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSpecificData {
    /// Path payoff.
    pub v: Vec<f64>,
    /// `rewards[i]` is the payoff vector `v^i` of the reward state after
    /// punishing user `i`.
    pub rewards: Vec<Vec<f64>>,
    /// `punish_payoffs[i]` is the stage payoff vector while minmaxing user `i`.
    pub punish_payoffs: Vec<Vec<f64>>,
    /// Minmax payoffs with intervention.
    pub vlow: Vec<f64>,
    pub m: f64,
}

impl PlayerSpecificData {
    pub fn from_profiles(
        game: &dyn StageGame,
        path: &ActionProfile,
        minmax_profiles: &[ActionProfile],
        reward_profiles: &[ActionProfile],
        m: f64,
    ) -> Self {
        let eval = |p: &ActionProfile| game.eval(&p.a0, &p.a);
        PlayerSpecificData {
            v: eval(path),
            rewards: reward_profiles.iter().map(eval).collect(),
            punish_payoffs: minmax_profiles.iter().map(eval).collect(),
            vlow: stage::minmax_vector(game, true),
            m,
        }
    }

    /// Smallest `L` with `L (v_j^j - vlow_j) > M - v_j^j` for all users.
    pub fn prescribed_length(&self) -> Option<usize> {
        let own: Vec<f64> = (0..self.v.len()).map(|j| self.rewards[j][j]).collect();
        minmax_folk_length(&own, &self.vlow, self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSpecificReport {
    /// Per user `i`: following the path.
    pub path: Vec<f64>,
    /// Per `(i, j, l)` with `j != i`: user `j` during period `l` of `i`'s
    /// punishment.
    pub punishment: Vec<(usize, usize, usize, f64)>,
    /// Per `(i, j)` with `j != i`: user `j` in `i`'s reward state.
    pub reward_others: Vec<(usize, usize, f64)>,
    /// Per user `j`: its own reward state.
    pub reward_self: Vec<f64>,
}

impl PlayerSpecificReport {
    pub fn families_satisfied(&self) -> [bool; 4] {
        [
            self.path.iter().all(|&m| m >= 0.0),
            self.punishment.iter().all(|t| t.3 >= 0.0),
            self.reward_others.iter().all(|t| t.2 >= 0.0),
            self.reward_self.iter().all(|&m| m >= 0.0),
        ]
    }

    pub fn all_satisfied(&self) -> bool {
        self.families_satisfied().iter().all(|&b| b)
    }

    pub fn min_margin(&self) -> f64 {
        self.path
            .iter()
            .copied()
            .chain(self.punishment.iter().map(|t| t.3))
            .chain(self.reward_others.iter().map(|t| t.2))
            .chain(self.reward_self.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Margins (left side minus right side) of the four families of sufficient
/// conditions for the player-specific automaton.
pub fn player_specific_delta_constraints(data: &PlayerSpecificData, l: usize, delta: f64) -> PlayerSpecificReport {
    let n = data.v.len();
    let dl = delta.powi(l as i32);
    // value of deviating once against the bound M and then being punished
    let threat = |j: usize| (1.0 - delta) * data.m + delta * ((1.0 - dl) * data.vlow[j] + dl * data.rewards[j][j]);
    let path = (0..n).map(|i| data.v[i] - threat(i)).collect();
    let mut punishment = Vec::new();
    let mut reward_others = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for step in 0..l {
                let rest = delta.powi((l - step) as i32);
                let value = (1.0 - rest) * data.punish_payoffs[i][j] + rest * data.rewards[i][j];
                punishment.push((i, j, step, value - threat(j)));
            }
            reward_others.push((i, j, data.rewards[i][j] - threat(j)));
        }
    }
    let g = geometric_sum(delta, PunishmentLength::Finite(l));
    let reward_self = (0..n)
        .map(|j| g * (data.rewards[j][j] - data.vlow[j]) - (data.m - data.rewards[j][j]))
        .collect();
    PlayerSpecificReport { path, punishment, reward_others, reward_self }
}

/// Smallest `delta` on a bisection of `[0, 1)` at which `satisfied` holds,
/// assuming it is monotone; `None` when it fails just below one.
pub fn bisect_delta<F: Fn(f64) -> bool>(satisfied: F) -> Option<f64> {
    if satisfied(0.0) {
        return Some(0.0);
    }
    let top = 1.0 - 1e-12;
    if !satisfied(top) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, top);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if satisfied(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build_grim_automaton, build_minmax_automaton, PunishmentPlay, StateLabel};
    use crate::games::FlowControl;

    fn fig3(a0_max: f64) -> FlowControl {
        FlowControl::new(10.0, vec![2.0, 2.0, 3.0, 3.0], vec![2.5; 4], a0_max).unwrap()
    }

    fn target() -> ActionProfile {
        ActionProfile::new(vec![0.0], vec![1.0, 1.0, 2.5, 2.5])
    }

    #[test]
    fn single_state_value_is_stage_payoff() {
        let g = fig3(2.5);
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        let v = state_values(&a, &g, 0.9).unwrap();
        let u = g.eval(&[0.0], &target().a);
        for (x, y) in v.get(0).iter().zip(&u) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(v.get(1), &[0.0; 4]);
    }

    #[test]
    fn punishment_values_match_closed_form() {
        let g = fig3(0.5);
        let (mutual, _) = mutual_minmax(&g, true);
        let l = 4;
        let a = build_minmax_automaton(&g, &[target()], 0, &mutual, PunishmentLength::Finite(l), PunishmentPlay::default())
            .unwrap();
        let d = 0.8;
        let v = state_values(&a, &g, d).unwrap();
        let u_path = g.eval(&[0.0], &target().a);
        for i in 0..4 {
            let punish = a.output(a.find(StateLabel::Punish { user: i, step: 0 }).unwrap());
            let u_p = g.eval(&punish.a0, &punish.a);
            for step in 0..l {
                let w = a.find(StateLabel::Punish { user: i, step }).unwrap();
                let r = d.powi((l - step) as i32);
                for k in 0..4 {
                    let want = (1.0 - r) * u_p[k] + r * u_path[k];
                    assert!((v.get(w)[k] - want).abs() < 1e-12);
                }
            }
        }
        assert!(bellman_residual(&a, &g, &v) < 1e-12);
    }

    #[test]
    fn cyclic_path_values() {
        let g = fig3(2.5);
        let p0 = ActionProfile::new(vec![0.0], vec![2.5, 0.0, 0.0, 0.0]);
        let p1 = ActionProfile::new(vec![0.0], vec![0.0, 0.0, 2.5, 0.0]);
        let a = build_grim_automaton(&g, &[p0, p1], 0).unwrap();
        let d = 0.6;
        let v = state_values(&a, &g, d).unwrap();
        assert!((v.get(0)[0] - 46.875 / (1.0 + d)).abs() < 1e-12);
        assert!((v.get(0)[2] - d * 117.1875 / (1.0 + d)).abs() < 1e-12);
        assert!(bellman_residual(&a, &g, &v) < 1e-12);
    }

    #[test]
    fn myopic_users_deviate() {
        let g = fig3(2.5);
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        let r = verify_spe(&a, &g, 0.0, DEVIATION_GRID).unwrap();
        let v = r.violation().expect("deviation must pay at delta = 0");
        assert_eq!(v.state, 0);
        assert!(v.gain > 0.0);
    }

    #[test]
    fn patient_users_comply() {
        let g = fig3(2.5);
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        let r = verify_spe(&a, &g, 0.99, DEVIATION_GRID).unwrap();
        assert!(r.is_ok(), "{:?}", r.worst);
        assert_eq!(r.states_checked, 2);
    }

    #[test]
    fn rejects_bad_discount() {
        let g = fig3(2.5);
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        assert!(state_values(&a, &g, 1.0).is_err());
        assert!(state_values(&a, &g, -0.1).is_err());
    }

    #[test]
    fn unbounded_bound_solves_path_family_only() {
        let g = fig3(2.5);
        let (mutual, _) = mutual_minmax(&g, true);
        let m = min_delta_for_l(&g, &target(), &mutual, PunishmentLength::Unbounded).unwrap();
        // delta/(1-delta) * u_i >= gain_i, tightest for the beta = 2 users
        let u = 3.0;
        let gain = 2.5f64.powi(2) * 1.5 - u;
        let want = gain / (u + gain);
        assert!((m.delta.unwrap() - want).abs() < 2e-6, "{m:?} vs {want}");
        assert_eq!(m.binding, Binding::Path);
    }

    #[test]
    fn grim_bound_matches_deviation_scan() {
        let g = fig3(2.5);
        let (mutual, _) = mutual_minmax(&g, true);
        let d = min_delta_for_l(&g, &target(), &mutual, PunishmentLength::Unbounded).unwrap().delta.unwrap();
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        assert!(verify_spe(&a, &g, d + 1e-5, DEVIATION_GRID).unwrap().is_ok());
        assert!(!verify_spe(&a, &g, d - 1e-3, DEVIATION_GRID).unwrap().is_ok());
    }

    #[test]
    fn unbounded_rejected_without_equilibrium() {
        let g = fig3(0.0);
        let (mutual, _) = mutual_minmax(&g, true);
        assert!(min_delta_for_l(&g, &target(), &mutual, PunishmentLength::Unbounded).is_err());
    }

    #[test]
    fn region_skips_unbounded_when_not_equilibrium() {
        let lengths = [PunishmentLength::Finite(1), PunishmentLength::Unbounded];
        assert_eq!(delta_l_region(&fig3(0.0), &target(), &lengths).unwrap().rows.len(), 1);
        assert_eq!(delta_l_region(&fig3(2.5), &target(), &lengths).unwrap().rows.len(), 2);
    }

    #[test]
    fn reward_self_family_matches_rearranged_form() {
        let data = PlayerSpecificData {
            v: vec![5.0, 4.0],
            rewards: vec![vec![3.0, 4.5], vec![4.5, 2.0]],
            punish_payoffs: vec![vec![0.0, 3.0], vec![3.0, 0.0]],
            vlow: vec![0.0, 0.0],
            m: 9.0,
        };
        let l = data.prescribed_length().unwrap();
        assert_eq!(l, 4);
        for d in [0.3, 0.8, 0.95] {
            let r = player_specific_delta_constraints(&data, l, d);
            for j in 0..2 {
                let own = data.rewards[j][j];
                let unrearranged = own - ((1.0 - d) * data.m + d * ((1.0 - d.powi(l as i32)) * data.vlow[j] + d.powi(l as i32) * own));
                // both sides differ by the positive factor 1 - d
                assert!((r.reward_self[j] * (1.0 - d) - unrearranged).abs() < 1e-12);
            }
        }
        assert!(!player_specific_delta_constraints(&data, l, 0.0).families_satisfied()[0]);
    }

    #[test]
    fn bisect_finds_threshold() {
        let t = bisect_delta(|d| d >= 0.37).unwrap();
        assert!((t - 0.37).abs() <= BISECTION_TOL);
        assert_eq!(bisect_delta(|_| true), Some(0.0));
        assert_eq!(bisect_delta(|_| false), None);
    }
}
