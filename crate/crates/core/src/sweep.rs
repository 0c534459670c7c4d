//! Scheme comparisons and parameter sweeps over flow-control games.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::automaton::PunishmentLength;
use crate::design::{deviation_stats, design_repeated, DeviationStats, Welfare};
use crate::error::Result;
use crate::game::{ActionProfile, StageGame};
use crate::games::FlowControl;
use crate::spe::{min_delta_for_l, Binding};
use crate::stage::{mutual_minmax, solve_stage_nash};
use crate::table::{Cell, ResultTable};

pub const ONE_SHOT_STEP: f64 = 0.05;
pub const ONE_SHOT_REFINEMENTS: usize = 50;
/// Largest full grid searched by the one-shot baseline.
pub const ONE_SHOT_MAX_GRID: usize = 10_000_000;
/// Points per coordinate scan during refinement.
const REFINE_POINTS: usize = 21;
pub const A0_TOL: f64 = 1e-4;
/// Margin that keeps a clamped guarantee strictly above the minmax payoff.
pub const GAMMA_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    StageNash,
    OneShot,
    RepeatedWithout,
    RepeatedWith,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::StageNash, Scheme::OneShot, Scheme::RepeatedWithout, Scheme::RepeatedWith];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StageNash => "stage_nash",
            Scheme::OneShot => "one_shot",
            Scheme::RepeatedWithout => "repeated_without",
            Scheme::RepeatedWith => "repeated_with",
        }
    }
}

/// Welfare of one scheme and, for repeated schemes, its discount bound.
/// `value == None` marks unsatisfiable guarantees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeResult {
    pub value: Option<f64>,
    pub min_delta: Option<f64>,
}

fn meets(u: &[f64], gamma: &[f64]) -> bool {
    u.iter().zip(gamma).all(|(x, g)| *x >= *g)
}

pub fn stage_nash_welfare(game: &dyn StageGame, gamma: &[f64], welfare: Welfare) -> Result<Option<f64>> {
    let ne = solve_stage_nash(game, &game.null_a0())?;
    let u = game.eval(&ne.a0, &ne.a);
    Ok(meets(&u, gamma).then(|| welfare.evaluate(&u)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneShotOptimum {
    pub profile: ActionProfile,
    pub payoff: Vec<f64>,
    pub value: f64,
}

/// Users with identical caps and identical payoff as a function of the
/// sorted profile. Only flow games are grouped; others keep singletons.
fn groups(game: &dyn StageGame, beta: Option<&[f64]>) -> Vec<Vec<usize>> {
    let n = game.n();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let key = |j: usize| (beta.map(|b| b[j]), game.a_max()[j]);
        match (beta, out.iter_mut().find(|g| key(g[0]) == key(i))) {
            (Some(_), Some(g)) => g.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// One guarantee vector and welfare for the one-shot search.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub gamma: Vec<f64>,
    pub welfare: Welfare,
}

impl Objective {
    fn score(&self, u: &[f64]) -> f64 {
        if meets(u, &self.gamma) {
            self.welfare.evaluate(u)
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Best welfare over pure profiles at the null intervention subject to
/// `u >= gamma`: a uniform grid (grouped for many users) refined by
/// coordinate ascent. Approximate by construction.
pub fn one_shot_optimum(
    game: &dyn StageGame,
    beta: Option<&[f64]>,
    gamma: &[f64],
    welfare: Welfare,
    step: f64,
    refinements: usize,
) -> Option<OneShotOptimum> {
    let obj = [Objective { gamma: gamma.to_vec(), welfare }];
    one_shot_optima(game, beta, &obj, step, refinements).pop().flatten()
}

/// [`one_shot_optimum`] for several objectives sharing one grid pass.
pub fn one_shot_optima(
    game: &dyn StageGame,
    beta: Option<&[f64]>,
    objectives: &[Objective],
    step: f64,
    refinements: usize,
) -> Vec<Option<OneShotOptimum>> {
    let n = game.n();
    let a0 = game.null_a0();
    let a_max = game.a_max().to_vec();
    let eval = |a: &[f64], u: &mut Vec<f64>| {
        u.clear();
        u.extend((0..n).map(|i| game.eval_user(i, &a0, a)));
    };
    let axis = |hi: f64| -> Vec<f64> {
        let k = (hi / step).round().max(1.0) as usize;
        (0..=k).map(|m| hi * m as f64 / k as f64).collect()
    };
    let full: f64 = a_max.iter().map(|&h| axis(h).len() as f64).product();
    let units: Vec<Vec<usize>> = if full <= ONE_SHOT_MAX_GRID as f64 {
        (0..n).map(|i| vec![i]).collect()
    } else {
        groups(game, beta)
    };
    let axes: Vec<Vec<f64>> = units.iter().map(|g| axis(a_max[g[0]])).collect();
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    let decode = |mut k: usize, a: &mut [f64]| {
        for (u, g) in units.iter().enumerate() {
            let x = axes[u][k % sizes[u]];
            k /= sizes[u];
            for &i in g {
                a[i] = x;
            }
        }
    };
    let m = objectives.len();
    let none = || vec![(usize::MAX, f64::NEG_INFINITY); m];
    let merge = |mut p: Vec<(usize, f64)>, q: Vec<(usize, f64)>| {
        for (x, y) in p.iter_mut().zip(q) {
            if y.1 > x.1 || (y.1 == x.1 && y.0 < x.0) {
                *x = y;
            }
        }
        p
    };
    let best = (0..total)
        .into_par_iter()
        .fold(
            || (none(), vec![0.0; n], Vec::with_capacity(n)),
            |(mut acc, mut a, mut u), k| {
                decode(k, &mut a);
                eval(&a, &mut u);
                for (slot, o) in acc.iter_mut().zip(objectives) {
                    let s = o.score(&u);
                    if s > slot.1 {
                        *slot = (k, s);
                    }
                }
                (acc, a, u)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(none, merge);
    objectives
        .iter()
        .zip(best)
        .map(|(o, (k, value))| {
            if value == f64::NEG_INFINITY {
                return None;
            }
            let mut a = vec![0.0; n];
            decode(k, &mut a);
            let mut u = Vec::with_capacity(n);
            let mut value = value;
            let mut width = step;
            for _ in 0..refinements {
                let mut improved = false;
                for i in 0..n {
                    let lo = (a[i] - width).max(0.0);
                    let hi = (a[i] + width).min(a_max[i]);
                    for m in 0..REFINE_POINTS {
                        let x = lo + (hi - lo) * m as f64 / (REFINE_POINTS - 1) as f64;
                        let old = a[i];
                        a[i] = x;
                        eval(&a, &mut u);
                        let s = o.score(&u);
                        if s > value {
                            value = s;
                            improved = true;
                        } else {
                            a[i] = old;
                        }
                    }
                }
                if !improved {
                    width *= 0.5;
                }
            }
            let payoff = game.eval(&a0, &a);
            Some(OneShotOptimum { profile: ActionProfile::new(a0.clone(), a), payoff, value })
        })
        .collect()
}

fn repeated(stats: &DeviationStats, gamma: &[f64], welfare: Welfare, with: bool) -> SchemeResult {
    match design_repeated(stats, gamma, welfare, with) {
        Ok(r) => SchemeResult { value: Some(welfare.evaluate(&r.target.v)), min_delta: Some(r.delta_bar) },
        Err(_) => SchemeResult { value: None, min_delta: None },
    }
}

/// All four schemes for each objective.
pub fn compare_schemes(game: &FlowControl, objectives: &[Objective]) -> Result<Vec<[SchemeResult; 4]>> {
    let stats = deviation_stats(game)?;
    let one_shot = one_shot_optima(game, Some(game.beta()), objectives, ONE_SHOT_STEP, ONE_SHOT_REFINEMENTS);
    objectives
        .iter()
        .zip(one_shot)
        .map(|(o, os)| {
            Ok([
                SchemeResult { value: stage_nash_welfare(game, &o.gamma, o.welfare)?, min_delta: None },
                SchemeResult { value: os.map(|x| x.value), min_delta: None },
                repeated(&stats, &o.gamma, o.welfare, false),
                repeated(&stats, &o.gamma, o.welfare, true),
            ])
        })
        .collect()
}

fn objectives(gammas: &[Vec<f64>], welfares: &[Welfare]) -> Vec<Objective> {
    gammas
        .iter()
        .flat_map(|g| welfares.iter().map(move |&w| Objective { gamma: g.clone(), welfare: w }))
        .collect()
}

fn push_schemes(table: &mut ResultTable, lead: &[Cell], welfare: Welfare, results: &[SchemeResult; 4]) -> Result<()> {
    for (s, r) in Scheme::ALL.iter().zip(results) {
        let mut row = vec![Cell::from(s.name())];
        row.extend_from_slice(lead);
        row.extend([Cell::from(welfare.name()), r.value.into(), r.min_delta.into()]);
        table.push(row)?;
    }
    Ok(())
}

/// Scheme comparison over symmetric guarantees, one row per
/// (gamma, welfare, scheme).
pub fn baseline_comparison(game: &FlowControl, gammas: &[f64], welfares: &[Welfare]) -> Result<ResultTable> {
    let mut table = ResultTable::new(["scheme", "gamma", "welfare_kind", "value", "min_delta"]);
    let vectors: Vec<Vec<f64>> = gammas.iter().map(|&g| vec![g; game.n()]).collect();
    let objs = objectives(&vectors, welfares);
    for (o, r) in objs.iter().zip(compare_schemes(game, &objs)?) {
        push_schemes(&mut table, &[Cell::from(o.gamma[0])], o.welfare, &r)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    /// `mu = N`.
    Linear,
    /// `mu = min(N, cap)`.
    Capped(u32),
}

impl Capacity {
    pub fn mu(self, n: usize) -> f64 {
        match self {
            Capacity::Linear => n as f64,
            Capacity::Capped(c) => n.min(c as usize) as f64,
        }
    }

    pub fn name(self) -> String {
        match self {
            Capacity::Linear => "linear".into(),
            Capacity::Capped(c) => format!("capped_{c}"),
        }
    }
}

pub fn scaling_gamma(stats: &DeviationStats, mu: f64) -> Vec<f64> {
    let n = stats.n() as f64;
    stats
        .v_bar
        .iter()
        .zip(&stats.minmax_with)
        .map(|(vb, vl)| (0.1 * vb).min(mu / n).max(vl + GAMMA_MARGIN))
        .collect()
}

/// Symmetric users with `a_max = 1`; intervention cap `max(mu - (N - 1), 0)`.
pub fn scaling_game(n: usize, beta: f64, capacity: Capacity) -> Result<FlowControl> {
    let mu = capacity.mu(n);
    FlowControl::symmetric(n, mu, beta, 1.0, (mu - (n as f64 - 1.0)).max(0.0))
}

pub fn scaling_comparison(ns: &[usize], beta: f64, capacities: &[Capacity], welfares: &[Welfare]) -> Result<ResultTable> {
    let mut table = ResultTable::new(["scheme", "capacity", "n", "mu", "welfare_kind", "value", "min_delta"]);
    for &cap in capacities {
        for &n in ns {
            let game = scaling_game(n, beta, cap)?;
            let stats = deviation_stats(&game)?;
            let gamma = scaling_gamma(&stats, game.mu());
            let objs = objectives(&[gamma], welfares);
            for (o, r) in objs.iter().zip(compare_schemes(&game, &objs)?) {
                push_schemes(&mut table, &[Cell::from(cap.name()), Cell::from(n), Cell::from(game.mu())], o.welfare, &r)?;
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeoffAxis {
    /// Discount bound against the guarantee, one curve per intervention cap.
    DeltaVsGamma,
    /// Required intervention cap against the discount factor, per guarantee.
    A0VsDelta,
    /// Required intervention cap against the guarantee, per discount factor.
    A0VsGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffGrid {
    pub a0: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    /// Search interval for the required intervention cap is `[0, a0_upper]`.
    pub a0_upper: f64,
}

/// Discount bound with intervention at cap `a0` and symmetric guarantee.
pub fn delta_bar_at(base: &FlowControl, a0: f64, gamma: f64, welfare: Welfare) -> Result<Option<f64>> {
    let game = base.with_a0_max(a0)?;
    let stats = deviation_stats(&game)?;
    Ok(repeated(&stats, &vec![gamma; game.n()], welfare, true).min_delta)
}

/// Smallest intervention cap in `[0, upper]` whose discount bound is at
/// most `delta`, to within [`A0_TOL`]. Relies on the bound being
/// non-increasing in the cap.
pub fn required_a0(base: &FlowControl, gamma: f64, delta: f64, welfare: Welfare, upper: f64) -> Result<Option<f64>> {
    let ok = |a0: f64| -> Result<bool> { Ok(delta_bar_at(base, a0, gamma, welfare)?.is_some_and(|d| d <= delta)) };
    if !ok(upper)? {
        return Ok(None);
    }
    if ok(0.0)? {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, upper);
    while hi - lo > A0_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

pub fn tradeoff_sweep(base: &FlowControl, welfare: Welfare, axis: TradeoffAxis, grid: &TradeoffGrid) -> Result<ResultTable> {
    let mut table;
    match axis {
        TradeoffAxis::DeltaVsGamma => {
            table = ResultTable::new(["a0_max", "gamma", "delta_bar"]);
            let cells: Vec<(f64, f64)> = grid.a0.iter().flat_map(|&a| grid.gamma.iter().map(move |&g| (a, g))).collect();
            let values: Vec<Option<f64>> =
                cells.par_iter().map(|&(a, g)| delta_bar_at(base, a, g, welfare)).collect::<Result<_>>()?;
            for ((a, g), d) in cells.into_iter().zip(values) {
                table.push(vec![a.into(), g.into(), d.into()])?;
            }
        }
        TradeoffAxis::A0VsDelta | TradeoffAxis::A0VsGamma => {
            let (outer, inner, names) = match axis {
                TradeoffAxis::A0VsDelta => (&grid.gamma, &grid.delta, ["gamma", "delta", "a0_required"]),
                _ => (&grid.delta, &grid.gamma, ["delta", "gamma", "a0_required"]),
            };
            table = ResultTable::new(names);
            let cells: Vec<(f64, f64)> = outer.iter().flat_map(|&o| inner.iter().map(move |&i| (o, i))).collect();
            let values: Vec<Option<f64>> = cells
                .par_iter()
                .map(|&(o, i)| {
                    let (g, d) = if axis == TradeoffAxis::A0VsDelta { (o, i) } else { (i, o) };
                    required_a0(base, g, d, welfare, grid.a0_upper)
                })
                .collect::<Result<_>>()?;
            for ((o, i), a) in cells.into_iter().zip(values) {
                table.push(vec![o.into(), i.into(), a.into()])?;
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub a0: f64,
    pub length: PunishmentLength,
    /// Punishment length the protocol actually uses: unbounded whenever the
    /// mutual minmax profile is a stage equilibrium.
    pub effective: PunishmentLength,
    pub min_delta: Option<f64>,
    pub binding: Option<Binding>,
}

/// Minimum discount factor of the single-profile minmax protocol against
/// the punishment length, for each intervention cap. When the mutual minmax
/// profile is a stage equilibrium the punishment never needs to end, so
/// every length reports the unbounded bound, which is the smallest. Otherwise
/// unbounded lengths are reported as infeasible.
pub fn delta_vs_length(base: &FlowControl, path: &ActionProfile, a0s: &[f64], lengths: &[PunishmentLength]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    for &a0 in a0s {
        let game = base.with_a0_max(a0)?;
        let (mutual, ne) = mutual_minmax(&game, true);
        if ne {
            let m = min_delta_for_l(&game, path, &mutual, PunishmentLength::Unbounded)?;
            for &length in lengths {
                let effective = PunishmentLength::Unbounded;
                out.push(CurvePoint { a0, length, effective, min_delta: m.delta, binding: Some(m.binding) });
            }
            continue;
        }
        for &length in lengths {
            if length == PunishmentLength::Unbounded {
                out.push(CurvePoint { a0, length, effective: length, min_delta: None, binding: None });
                continue;
            }
            let m = min_delta_for_l(&game, path, &mutual, length)?;
            out.push(CurvePoint { a0, length, effective: length, min_delta: m.delta, binding: Some(m.binding) });
        }
    }
    Ok(out)
}

pub fn curve_table(points: &[CurvePoint]) -> Result<ResultTable> {
    let mut t = ResultTable::new(["a0_max", "punishment_length", "effective_length", "min_delta", "binding"]);
    for p in points {
        let binding = match p.binding {
            Some(Binding::Path) => "path",
            Some(Binding::Punishment) => "punishment",
            Some(Binding::None) => "none",
            None => "infeasible",
        };
        t.push(vec![
            p.a0.into(),
            p.length.to_string().into(),
            p.effective.to_string().into(),
            p.min_delta.into(),
            binding.into(),
        ])?;
    }
    Ok(t)
}
