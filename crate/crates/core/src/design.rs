//! Protocol design: guarantees, welfare targets on the Pareto boundary and
//! the discount-factor bounds that make them sustainable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionProfile, StageGame};
use crate::games::AnyGame;
use crate::stage::{self, minmax_vector, mutual_minmax, solo_optimum};

/// Tolerance for payoffs that must vanish or stay on the simplex.
pub const ASSUMPTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Welfare {
    Sum,
    #[serde(rename = "maxmin", alias = "max_min", alias = "fairness")]
    MaxMin,
}

impl Welfare {
    pub fn evaluate(self, v: &[f64]) -> f64 {
        match self {
            Welfare::Sum => v.iter().sum(),
            Welfare::MaxMin => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Welfare::Sum => "sum",
            Welfare::MaxMin => "maxmin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub game: AnyGame,
    pub welfare: Welfare,
    pub gamma: Vec<f64>,
}

impl DesignProblem {
    pub fn new(game: AnyGame, welfare: Welfare, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != game.n() {
            return Err(Error::InvalidParameter(format!(
                "{} guarantees for {} users",
                gamma.len(),
                game.n()
            )));
        }
        Ok(DesignProblem { game, welfare, gamma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub witness: Option<String>,
}

impl Check {
    fn pass() -> Self {
        Check { passed: true, witness: None }
    }

    fn fail(witness: String) -> Self {
        Check { passed: false, witness: Some(witness) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// The mutual minmax profile with intervention is a stage equilibrium.
    pub minmax_is_nash: Check,
    /// Each solo optimum leaves every other user with zero payoff.
    pub solo_optima: Check,
    /// Sampled payoffs lie inside the simplex spanned by the solo optima.
    pub hull_in_simplex: Check,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.minmax_is_nash.passed && self.solo_optima.passed && self.hull_in_simplex.passed
    }
}

fn grid_per_axis(n: usize) -> usize {
    // keep the sampled grid near 1e5 profiles
    ((1e5f64).powf(1.0 / n as f64).floor() as usize).clamp(2, 21)
}

pub fn validate_assumptions(game: &dyn StageGame) -> AssumptionReport {
    let n = game.n();

    let (mutual, _) = mutual_minmax(game, true);
    let (who, gain) = stage::max_unilateral_gain(game, &mutual);
    let minmax_is_nash = if gain <= stage::NASH_CERT_TOL {
        Check::pass()
    } else {
        let br = game.best_response(who, &mutual.a0, &mutual.a);
        Check::fail(format!(
            "user {} gains {gain:.6} by moving from {} to {br:.6} at the mutual minmax profile",
            who + 1,
            mutual.a[who]
        ))
    };

    let mut solo_optima = Check::pass();
    let mut vbar = vec![0.0; n];
    'outer: for i in 0..n {
        let s = solo_optimum(game, i);
        vbar[i] = s.value;
        if !(s.value > 0.0) {
            solo_optima = Check::fail(format!("user {} has no positive solo payoff", i + 1));
            break;
        }
        let u = game.eval(&s.profile.a0, &s.profile.a);
        for j in (0..n).filter(|&j| j != i) {
            if u[j].abs() > ASSUMPTION_TOL {
                solo_optima = Check::fail(format!(
                    "user {} gets {} at the solo optimum of user {}",
                    j + 1,
                    u[j],
                    i + 1
                ));
                break 'outer;
            }
        }
    }

    let hull_in_simplex = if !solo_optima.passed {
        Check::fail("solo optima unavailable".into())
    } else {
        let per_axis = grid_per_axis(n);
        let a0 = game.null_a0();
        let caps = game.a_max();
        let mut idx = vec![0usize; n];
        let mut worst = (f64::NEG_INFINITY, Vec::new());
        loop {
            let a: Vec<f64> = idx.iter().zip(caps).map(|(&k, &c)| c * k as f64 / (per_axis - 1) as f64).collect();
            let u = game.eval(&a0, &a);
            let r: f64 = u.iter().zip(&vbar).map(|(x, b)| x / b).sum();
            if r > worst.0 {
                worst = (r, a);
            }
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
        if worst.0 <= 1.0 + ASSUMPTION_TOL {
            Check::pass()
        } else {
            Check::fail(format!("profile {:?} has sum u_i / vbar_i = {:.6} > 1", worst.1, worst.0))
        }
    };

    AssumptionReport { minmax_is_nash, solo_optima, hull_in_simplex }
}

/// Per-game constants entering the discount-factor bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationStats {
    pub v_bar: Vec<f64>,
    pub solo_profiles: Vec<ActionProfile>,
    /// `y[i][j]`: best payoff of `j` deviating from user `i`'s solo profile;
    /// the diagonal holds `v_bar`.
    pub y: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub minmax_with: Vec<f64>,
    pub minmax_without: Vec<f64>,
    pub ratio_t: f64,
    pub ratio_s: f64,
}

impl DeviationStats {
    pub fn n(&self) -> usize {
        self.v_bar.len()
    }

    /// Punishment floor used by the bounds.
    pub fn floor(&self) -> &[f64] {
        &self.minmax_with
    }

    /// The same constants when the device can only play its null action.
    pub fn without_intervention(&self) -> DeviationStats {
        let mut s = self.clone();
        s.minmax_with = self.minmax_without.clone();
        s.ratio_s = ratio(&s.minmax_with, &s.v_bar);
        s
    }
}

fn ratio(x: &[f64], v_bar: &[f64]) -> f64 {
    x.iter().zip(v_bar).map(|(a, b)| a / b).sum()
}

pub fn deviation_stats(game: &dyn StageGame) -> Result<DeviationStats> {
    let n = game.n();
    if n < 2 {
        return Err(Error::InvalidParameter("deviation statistics need at least two users".into()));
    }
    let solos: Vec<_> = (0..n).map(|i| solo_optimum(game, i)).collect();
    if let Some(i) = solos.iter().position(|s| !(s.value > 0.0)) {
        return Err(Error::InvalidParameter(format!("user {} has no positive solo payoff", i + 1)));
    }
    let v_bar: Vec<f64> = solos.iter().map(|s| s.value).collect();
    let solo_profiles: Vec<ActionProfile> = solos.into_iter().map(|s| s.profile).collect();
    let mut y = vec![vec![0.0; n]; n];
    for i in 0..n {
        let p = &solo_profiles[i];
        for j in 0..n {
            y[i][j] = if i == j {
                v_bar[i]
            } else {
                let br = game.best_response(j, &p.a0, &p.a);
                game.eval_user(j, &p.a0, &p.with_user(j, br).a).max(0.0)
            };
        }
    }
    let w: Vec<f64> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j).map(|i| y[i][j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let minmax_with = minmax_vector(game, true);
    let minmax_without = minmax_vector(game, false);
    let ratio_t = ratio(&w, &v_bar);
    let ratio_s = ratio(&minmax_with, &v_bar);
    Ok(DeviationStats { v_bar, solo_profiles, y, w, minmax_with, minmax_without, ratio_t, ratio_s })
}

/// A welfare-optimal point of the Pareto boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPayoff {
    pub v: Vec<f64>,
}

impl TargetPayoff {
    /// `sum v_i / v_bar_i - 1`.
    pub fn simplex_residual(&self, v_bar: &[f64]) -> f64 {
        ratio(&self.v, v_bar) - 1.0
    }
}

/// Feasibility of the guarantees: `sum gamma_i / v_bar_i < 1` and
/// `floor_i < gamma_i <= v_bar_i` (non-strict at the floor when `strict` is
/// off).
pub fn check_guarantees(v_bar: &[f64], floor: &[f64], gamma: &[f64], strict: bool) -> Result<()> {
    if gamma.len() != v_bar.len() {
        return Err(Error::InvalidParameter("one guarantee per user is required".into()));
    }
    let r = ratio(gamma, v_bar);
    if !(r < 1.0) {
        return Err(Error::InfeasibleGuarantees(format!("sum gamma_i / v_bar_i = {r:.6} is not below 1")));
    }
    for i in 0..gamma.len() {
        let above = if strict { gamma[i] > floor[i] } else { gamma[i] >= floor[i] };
        if !above || gamma[i] > v_bar[i] {
            return Err(Error::InfeasibleGuarantees(format!(
                "user {}: guarantee {} outside ({}, {}]",
                i + 1,
                gamma[i],
                floor[i],
                v_bar[i]
            )));
        }
    }
    Ok(())
}

/// Welfare maximizer over `{v : sum v_i / v_bar_i = 1, v >= gamma}`.
pub fn optimize_on_simplex(v_bar: &[f64], gamma: &[f64], welfare: Welfare) -> Vec<f64> {
    let n = v_bar.len();
    match welfare {
        Welfare::Sum => {
            let k = (0..n).fold(0, |k, i| if v_bar[i] > v_bar[k] { i } else { k });
            let rest: f64 = (0..n).filter(|&j| j != k).map(|j| gamma[j] / v_bar[j]).sum();
            let mut v = gamma.to_vec();
            v[k] = v_bar[k] * (1.0 - rest);
            v
        }
        Welfare::MaxMin => {
            let mut bound = vec![false; n];
            loop {
                let used: f64 = (0..n).filter(|&i| bound[i]).map(|i| gamma[i] / v_bar[i]).sum();
                let weight: f64 = (0..n).filter(|&i| !bound[i]).map(|i| 1.0 / v_bar[i]).sum();
                let c = (1.0 - used) / weight;
                let newly: Vec<usize> = (0..n).filter(|&i| !bound[i] && gamma[i] > c).collect();
                if newly.is_empty() {
                    return (0..n).map(|i| if bound[i] { gamma[i] } else { c }).collect();
                }
                for i in newly {
                    bound[i] = true;
                }
            }
        }
    }
}

pub fn optimize_welfare(problem: &DesignProblem) -> Result<TargetPayoff> {
    let v_bar = stage::solo_values(&problem.game);
    let floor = minmax_vector(&problem.game, true);
    check_guarantees(&v_bar, &floor, &problem.gamma, true)?;
    Ok(TargetPayoff { v: optimize_on_simplex(&v_bar, &problem.gamma, problem.welfare) })
}

/// First term of the bound for user `j`, with the `w_j = floor_j` limit.
fn incentive_ratio(w: f64, v: f64, floor: f64) -> f64 {
    if w - floor <= 0.0 {
        return if v >= w { 0.0 } else { 1.0 };
    }
    (w - v) / (w - floor)
}

/// Fixed point `2(N-1) / ((N-T) + sqrt((N-T)^2 + 4(T-S)(N-1)))`.
pub fn fixed_point_term(n: usize, ratio_t: f64, ratio_s: f64) -> f64 {
    let n = n as f64;
    let a = n - ratio_t;
    let den = a + (a * a + 4.0 * (ratio_t - ratio_s) * (n - 1.0)).max(0.0).sqrt();
    if den <= 0.0 {
        return 1.0;
    }
    2.0 * (n - 1.0) / den
}

/// Upper bound on the minimum discount factor sustaining `target`.
pub fn delta_bar(stats: &DeviationStats, target: &[f64]) -> f64 {
    let floor = stats.floor();
    let first = (0..stats.n())
        .map(|j| incentive_ratio(stats.w[j], target[j], floor[j]))
        .fold(f64::NEG_INFINITY, f64::max);
    first.max(fixed_point_term(stats.n(), stats.ratio_t, stats.ratio_s))
}

/// Closed-form minimum discount factor under which the set
/// `{v on the simplex : v >= mu}` is self-generating.
pub fn delta_mu(stats: &DeviationStats, mu: &[f64]) -> Result<f64> {
    let n = stats.n();
    let floor = stats.floor();
    if mu.len() != n {
        return Err(Error::InvalidParameter("one threshold per user is required".into()));
    }
    if let Some(i) = (0..n).find(|&i| mu[i] < floor[i] - ASSUMPTION_TOL) {
        return Err(Error::InvalidParameter(format!("threshold of user {} is below its minmax payoff", i + 1)));
    }
    let r = ratio(mu, &stats.v_bar);
    if !(r < 1.0) {
        return Err(Error::EmptySet(format!("sum mu_i / v_bar_i = {r:.6} is not below 1")));
    }
    let mut best = (n as f64 - 1.0) / (n as f64 - r);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            best = best.max(incentive_ratio(stats.y[i][j], mu[j], floor[j]));
        }
    }
    Ok(best)
}

/// Matrix whose min-max over a payoff `v` is the discount factor needed to
/// decompose `v` on the set cut out by `mu`: the diagonal measures room for a
/// continuation payoff, off-diagonal entries the incentive of `j` to deviate
/// from `i`'s solo profile.
pub fn decomposition_matrix(stats: &DeviationStats, mu: &[f64], v: &[f64]) -> Vec<Vec<f64>> {
    let n = stats.n();
    let floor = stats.floor();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        (stats.v_bar[i] - v[i]) / (stats.v_bar[i] - mu[i])
                    } else {
                        incentive_ratio(stats.y[i][j], v[j], floor[j])
                    }
                })
                .collect()
        })
        .collect()
}

/// `min_i max_j x_ij(v)`.
pub fn decomposition_delta(stats: &DeviationStats, mu: &[f64], v: &[f64]) -> f64 {
    decomposition_matrix(stats, mu, v)
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Threshold vector `nu_j = w_j - (w_j - floor_j) * d`.
pub fn nu_thresholds(stats: &DeviationStats, d: f64) -> Vec<f64> {
    (0..stats.n()).map(|j| stats.w[j] - (stats.w[j] - stats.floor()[j]) * d).collect()
}

/// Target payoff and discount bound of the repeated-game design.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedDesign {
    pub target: TargetPayoff,
    pub delta_bar: f64,
    /// Guarantees actually imposed.
    pub gamma: Vec<f64>,
    pub stats: DeviationStats,
}

/// Runs the design pipeline with or without intervention. Without it, the
/// guarantees are raised to the no-intervention minmax payoffs.
pub fn design_repeated(
    stats: &DeviationStats,
    gamma: &[f64],
    welfare: Welfare,
    with_intervention: bool,
) -> Result<RepeatedDesign> {
    let stats = if with_intervention { stats.clone() } else { stats.without_intervention() };
    let floor = stats.floor().to_vec();
    let gamma: Vec<f64> = if with_intervention {
        gamma.to_vec()
    } else {
        gamma.iter().zip(&floor).map(|(g, f)| g.max(*f)).collect()
    };
    check_guarantees(&stats.v_bar, &floor, &gamma, with_intervention)?;
    let target = TargetPayoff { v: optimize_on_simplex(&stats.v_bar, &gamma, welfare) };
    let delta_bar = delta_bar(&stats, &target.v);
    Ok(RepeatedDesign { target, delta_bar, gamma, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{FlowControl, PowerControl};

    fn fig3(a0: f64) -> AnyGame {
        FlowControl::new(10.0, vec![2.0, 2.0, 3.0, 3.0], vec![2.5; 4], a0).unwrap().into()
    }

    #[test]
    fn fig3_stats() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        assert_eq!(s.v_bar, vec![46.875, 46.875, 117.1875, 117.1875]);
        assert_eq!(s.w, vec![31.25, 31.25, 78.125, 78.125]);
        assert!((s.ratio_t - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.ratio_s, 0.0);
        assert!(s.ratio_s <= s.ratio_t);
        for i in 0..4 {
            for j in 0..4 {
                assert!(s.y[i][j] >= 0.0);
            }
        }
    }

    #[test]
    fn sum_targets_and_bounds() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        let rows = [(1.0, 114.19, 0.987), (3.0, 108.19, 0.962), (7.0, 96.19, 0.910), (14.0, 75.19, 0.840)];
        for (g, sum, d) in rows {
            let r = design_repeated(&s, &[g; 4], Welfare::Sum, true).unwrap();
            assert!((Welfare::Sum.evaluate(&r.target.v) - sum).abs() < 0.01, "{g}: {:?}", r.target.v);
            assert!((r.delta_bar - d).abs() < 1e-3, "{g}: {}", r.delta_bar);
            assert!(r.target.simplex_residual(&s.v_bar).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_vertex_goes_to_smallest_index() {
        let v = optimize_on_simplex(&[2.0, 5.0, 5.0], &[0.1, 0.1, 0.1], Welfare::Sum);
        assert_eq!(v[2], 0.1);
        assert!(v[1] > 0.1);
    }

    #[test]
    fn maxmin_target() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        let r = design_repeated(&s, &[1.0; 4], Welfare::MaxMin, true).unwrap();
        let c = 1.0 / s.v_bar.iter().map(|b| 1.0 / b).sum::<f64>();
        for x in &r.target.v {
            assert!((x - c).abs() < 1e-12);
        }
        assert!((c - 16.74).abs() < 0.01);
        let second = 6.0 / (4.0 / 3.0 + (16.0f64 / 9.0 + 32.0).sqrt());
        assert!((r.delta_bar - second).abs() < 1e-12);
        assert!((r.delta_bar - 0.840).abs() < 1e-3);
    }

    #[test]
    fn maxmin_binding_set() {
        let v = optimize_on_simplex(&[10.0, 10.0, 10.0], &[5.0, 1.0, 1.0], Welfare::MaxMin);
        assert_eq!(v[0], 5.0);
        assert!((v[1] - 2.5).abs() < 1e-12 && (v[2] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn without_intervention_rows() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        let r = design_repeated(&s, &[1.0; 4], Welfare::Sum, false).unwrap();
        assert!((Welfare::Sum.evaluate(&r.target.v) - 110.2).abs() < 0.1);
        assert!((r.delta_bar - 1.0).abs() < 1e-12);
        let r = design_repeated(&s, &[1.0; 4], Welfare::MaxMin, false).unwrap();
        assert!((r.delta_bar - 0.861).abs() < 1e-3, "{}", r.delta_bar);
    }

    #[test]
    fn guarantees_checked() {
        let v_bar = [10.0, 10.0];
        assert!(check_guarantees(&v_bar, &[0.0, 0.0], &[5.0, 5.0], true).is_err());
        assert!(check_guarantees(&v_bar, &[1.0, 0.0], &[1.0, 1.0], true).is_err());
        assert!(check_guarantees(&v_bar, &[1.0, 0.0], &[1.0, 1.0], false).is_ok());
        assert!(check_guarantees(&v_bar, &[0.0, 0.0], &[11.0, 0.1], true).is_err());
        let p = DesignProblem::new(fig3(2.5), Welfare::Sum, vec![30.0; 4]).unwrap();
        assert!(matches!(optimize_welfare(&p), Err(Error::InfeasibleGuarantees(_))));
    }

    #[test]
    fn optimize_welfare_sum_gamma_one() {
        let p = DesignProblem::new(fig3(2.5), Welfare::Sum, vec![1.0; 4]).unwrap();
        let t = optimize_welfare(&p).unwrap();
        assert_eq!(t.v[0], 1.0);
        assert_eq!(t.v[3], 1.0);
        assert!((t.v[2] - 111.19).abs() < 0.01);
    }

    #[test]
    fn delta_mu_at_minmax_is_degenerate() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        assert_eq!(delta_mu(&s, &[0.0; 4]).unwrap(), 1.0);
    }

    #[test]
    fn delta_mu_at_nu_equals_delta_bar() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        for g in [1.0, 7.0] {
            for welfare in [Welfare::Sum, Welfare::MaxMin] {
                let r = design_repeated(&s, &[g; 4], welfare, true).unwrap();
                let nu = nu_thresholds(&s, r.delta_bar);
                let d = delta_mu(&s, &nu).unwrap();
                assert!((d - r.delta_bar).abs() < 1e-12, "{d} vs {}", r.delta_bar);
            }
        }
    }

    #[test]
    fn delta_mu_rejects_empty_set() {
        let s = deviation_stats(&fig3(2.5)).unwrap();
        assert!(matches!(delta_mu(&s, &[46.875, 0.0, 0.0, 0.0]), Err(Error::EmptySet(_))));
    }

    #[test]
    fn assumptions_fig3() {
        let r = validate_assumptions(&fig3(2.5));
        assert!(r.minmax_is_nash.passed);
        assert!(r.solo_optima.passed);
        assert!(!r.hull_in_simplex.passed);
        assert!(r.hull_in_simplex.witness.is_some());
        let r = validate_assumptions(&fig3(0.0));
        assert!(!r.minmax_is_nash.passed);
        assert!(r.minmax_is_nash.witness.unwrap().contains("user 3"));
    }

    #[test]
    fn assumptions_simplex_game() {
        let g = FlowControl::new(4.0, vec![1.0, 1.0], vec![2.0, 2.0], 4.0).unwrap();
        assert!(validate_assumptions(&g).all_pass());
    }

    #[test]
    fn assumptions_power() {
        for a0 in [0.01, 1.0, 10.0] {
            let g = PowerControl::new(
                vec![vec![1.0, 0.5], vec![0.5, 1.0]],
                vec![1.0, 1.0],
                vec![0.1, 0.1],
                vec![1.0, 1.0],
                a0,
            )
            .unwrap();
            assert!(validate_assumptions(&g).minmax_is_nash.passed);
        }
    }
}
