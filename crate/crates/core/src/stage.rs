//! Stage-game solution concepts: best responses, equilibria, minmax payoffs,
//! solo optima and sampled payoff hulls.

use crate::error::{Error, Result};
use crate::game::{check_a0, check_actions, ActionProfile, PayoffVector, StageGame};

pub const NASH_DAMPING: f64 = 0.5;
pub const NASH_STEP_TOL: f64 = 1e-10;
pub const NASH_MAX_ITER: usize = 100_000;
/// Largest unilateral improvement accepted as an equilibrium certificate.
pub const NASH_CERT_TOL: f64 = 1e-9;
/// Largest sampled hull size accepted by `payoff_hull_sample`.
pub const MAX_HULL_POINTS: usize = 4_000_000;

/// Checked best response of user `i` against `a0` and `others` (`others[i]`
/// is ignored).
pub fn best_response(game: &dyn StageGame, i: usize, a0: &[f64], others: &[f64]) -> Result<f64> {
    if i >= game.n() {
        return Err(Error::InvalidParameter(format!("user {i} out of range")));
    }
    check_a0(game, a0)?;
    check_actions(game, others)?;
    Ok(game.best_response(i, a0, others))
}

/// What user `i` gains by switching to its best response at `profile`.
pub fn unilateral_gain(game: &dyn StageGame, i: usize, profile: &ActionProfile) -> f64 {
    let br = game.best_response(i, &profile.a0, &profile.a);
    let dev = profile.with_user(i, br);
    game.eval_user(i, &dev.a0, &dev.a) - game.eval_user(i, &profile.a0, &profile.a)
}

pub fn max_unilateral_gain(game: &dyn StageGame, profile: &ActionProfile) -> (usize, f64) {
    (0..game.n())
        .map(|i| (i, unilateral_gain(game, i, profile)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Best gain over a uniform grid of `points` actions in user `i`'s box.
pub fn grid_unilateral_gain(game: &dyn StageGame, i: usize, profile: &ActionProfile, points: usize) -> f64 {
    let base = game.eval_user(i, &profile.a0, &profile.a);
    let hi = game.a_max()[i];
    let mut a = profile.a.clone();
    let mut best = f64::NEG_INFINITY;
    for k in 0..points {
        a[i] = hi * k as f64 / (points - 1) as f64;
        best = best.max(game.eval_user(i, &profile.a0, &a) - base);
    }
    best
}

/// Nash equilibrium of the stage game with the intervention fixed at `a0`,
/// by damped best-response iteration from the all-max profile. Users update
/// in turn against the current profile; simultaneous updates cycle on
/// crowded flow games.
pub fn solve_stage_nash(game: &dyn StageGame, a0: &[f64]) -> Result<ActionProfile> {
    check_a0(game, a0)?;
    let n = game.n();
    let mut a = game.max_profile();
    for _ in 0..NASH_MAX_ITER {
        let mut step = 0.0f64;
        for i in 0..n {
            let br = game.best_response(i, a0, &a);
            step = step.max((br - a[i]).abs());
            a[i] = (1.0 - NASH_DAMPING) * a[i] + NASH_DAMPING * br;
        }
        if step <= NASH_STEP_TOL {
            let profile = ActionProfile::new(a0.to_vec(), a);
            let (_, gain) = max_unilateral_gain(game, &profile);
            if gain <= NASH_CERT_TOL {
                return Ok(profile);
            }
            return Err(Error::NonConvergence { iterations: NASH_MAX_ITER, last: profile.a });
        }
    }
    Err(Error::NonConvergence { iterations: NASH_MAX_ITER, last: a })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minmax {
    pub value: f64,
    /// Minimizing intervention and opponents, with user `i` best-responding.
    pub profile: ActionProfile,
}

/// Pure-action minmax payoff of user `i`. Every game in scope is monotone, so
/// the minimizers are the harshest intervention and everybody else at full
/// rate; `with_intervention = false` pins the device to its null action.
pub fn minmax(game: &dyn StageGame, i: usize, with_intervention: bool) -> Minmax {
    let a0 = if with_intervention { game.minmax_a0(i) } else { game.null_a0() };
    let mut a = game.max_profile();
    a[i] = game.best_response(i, &a0, &a);
    let value = game.eval_user(i, &a0, &a);
    Minmax { value, profile: ActionProfile::new(a0, a) }
}

pub fn minmax_vector(game: &dyn StageGame, with_intervention: bool) -> Vec<f64> {
    (0..game.n()).map(|i| minmax(game, i, with_intervention).value).collect()
}

/// The all-max profile (with the harshest intervention, or none), which
/// minmaxes every user at once, and whether it is a stage equilibrium.
pub fn mutual_minmax(game: &dyn StageGame, with_intervention: bool) -> (ActionProfile, bool) {
    let a0 = if with_intervention { game.a0_max().to_vec() } else { game.null_a0() };
    let profile = ActionProfile::new(a0, game.max_profile());
    let (_, gain) = max_unilateral_gain(game, &profile);
    (profile, gain <= NASH_CERT_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoloOptimum {
    pub value: f64,
    pub profile: ActionProfile,
}

/// Best payoff of user `i` when it is alone on the channel.
pub fn solo_optimum(game: &dyn StageGame, i: usize) -> SoloOptimum {
    let a0 = game.null_a0();
    let mut a = vec![0.0; game.n()];
    a[i] = game.best_response(i, &a0, &a);
    let value = game.eval_user(i, &a0, &a);
    SoloOptimum { value, profile: ActionProfile::new(a0, a) }
}

pub fn solo_values(game: &dyn StageGame) -> Vec<f64> {
    (0..game.n()).map(|i| solo_optimum(game, i).value).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullPoint {
    pub profile: ActionProfile,
    pub payoff: PayoffVector,
    /// Strictly above the minmax payoff with intervention in every coordinate.
    pub individually_rational: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullSample {
    pub points: Vec<HullPoint>,
    /// Counter-clockwise convex hull of the sampled payoffs (two users only).
    pub hull: Option<Vec<[f64; 2]>>,
}

/// Samples payoffs on a grid with `1/resolution` steps per action axis,
/// including the intervention axes.
pub fn payoff_hull_sample(game: &dyn StageGame, resolution: f64) -> Result<HullSample> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let per_axis = (1.0 / resolution).round() as usize + 1;
    if per_axis < 2 {
        return Err(Error::InvalidParameter(format!("grid resolution {resolution} is too coarse")));
    }
    let caps: Vec<f64> = game.a0_max().iter().chain(game.a_max()).copied().collect();
    let dims = caps.len();
    let total = (per_axis as f64).powi(dims as i32);
    if total > MAX_HULL_POINTS as f64 {
        return Err(Error::InvalidParameter(format!(
            "grid of {total} points exceeds the limit of {MAX_HULL_POINTS}"
        )));
    }
    let floor = minmax_vector(game, true);
    let k0 = game.a0_max().len();
    let mut idx = vec![0usize; dims];
    let mut points = Vec::with_capacity(total as usize);
    loop {
        let x: Vec<f64> = idx
            .iter()
            .zip(&caps)
            .map(|(&k, &c)| c * k as f64 / (per_axis - 1) as f64)
            .collect();
        let profile = ActionProfile::new(x[..k0].to_vec(), x[k0..].to_vec());
        let payoff = game.eval(&profile.a0, &profile.a);
        let individually_rational = payoff.iter().zip(&floor).all(|(v, f)| v > f);
        points.push(HullPoint { profile, payoff, individually_rational });
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < per_axis {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    let hull = (game.n() == 2).then(|| {
        let pts: Vec<[f64; 2]> = points.iter().map(|p| [p.payoff[0], p.payoff[1]]).collect();
        convex_hull(&pts)
    });
    Ok(HullSample { points, hull })
}

/// Andrew's monotone chain; collinear points are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}
