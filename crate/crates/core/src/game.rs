//! Stage-game abstraction shared by every concrete game.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that an action lies in its box.
pub const BOX_SLACK: f64 = 1e-12;

/// Absolute tolerance of the scalar maximizer on the action.
pub const GOLDEN_TOL: f64 = 1e-9;

pub type PayoffVector = Vec<f64>;

/// Intervention action `a0` together with the users' actions `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub a0: Vec<f64>,
    pub a: Vec<f64>,
}

impl ActionProfile {
    pub fn new(a0: Vec<f64>, a: Vec<f64>) -> Self {
        ActionProfile { a0, a }
    }

    /// Copy of `self` with user `i` playing `x`.
    pub fn with_user(&self, i: usize, x: f64) -> Self {
        let mut p = self.clone();
        p.a[i] = x;
        p
    }
}

/// One-period game between `n` users and a non-strategic intervention device.
///
/// User `i` picks `a_i` in `[0, a_max[i]]`. The intervention action is a vector
/// in the box `[0, a0_max]`; its lower corner is the null action, which never
/// punishes anybody.
pub trait StageGame: Send + Sync + std::fmt::Debug {
    fn n(&self) -> usize;

    fn a_max(&self) -> &[f64];

    fn a0_max(&self) -> &[f64];

    fn kind(&self) -> &'static str;

    /// Payoff vector without any box checks.
    fn eval(&self, a0: &[f64], a: &[f64]) -> PayoffVector {
        (0..self.n()).map(|i| self.eval_user(i, a0, a)).collect()
    }

    fn eval_user(&self, i: usize, a0: &[f64], a: &[f64]) -> f64;

    /// Best action of user `i` against `a0` and the other entries of `a`
    /// (`a[i]` is ignored). The default is a golden-section search.
    fn best_response(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        let mut scratch = a.to_vec();
        let (x, fx) = maximize_scalar(
            |x| {
                scratch[i] = x;
                self.eval_user(i, a0, &scratch)
            },
            0.0,
            self.a_max()[i],
            GOLDEN_TOL,
        );
        if fx <= 0.0 {
            scratch[i] = self.a_max()[i];
            if self.eval_user(i, a0, &scratch) >= fx {
                // nothing to gain anywhere: play the cap
                return self.a_max()[i];
            }
        }
        x
    }

    /// Intervention used to hold user `i` to its minmax payoff.
    fn minmax_a0(&self, _i: usize) -> Vec<f64> {
        self.a0_max().to_vec()
    }

    fn null_a0(&self) -> Vec<f64> {
        vec![0.0; self.a0_max().len()]
    }

    fn max_profile(&self) -> Vec<f64> {
        self.a_max().to_vec()
    }
}

/// Checked payoff evaluation.
pub fn payoff(game: &dyn StageGame, profile: &ActionProfile) -> Result<PayoffVector> {
    check_profile(game, profile)?;
    Ok(game.eval(&profile.a0, &profile.a))
}

pub fn check_profile(game: &dyn StageGame, profile: &ActionProfile) -> Result<()> {
    check_a0(game, &profile.a0)?;
    check_actions(game, &profile.a)
}

pub fn check_a0(game: &dyn StageGame, a0: &[f64]) -> Result<()> {
    let cap = game.a0_max();
    if a0.len() != cap.len() {
        return Err(Error::OutOfBox(format!(
            "intervention action has {} components, expected {}",
            a0.len(),
            cap.len()
        )));
    }
    for (k, (&x, &hi)) in a0.iter().zip(cap).enumerate() {
        if !x.is_finite() || x < -BOX_SLACK || x > hi + BOX_SLACK {
            return Err(Error::OutOfBox(format!("a0[{k}] = {x} outside [0, {hi}]")));
        }
    }
    Ok(())
}

pub fn check_actions(game: &dyn StageGame, a: &[f64]) -> Result<()> {
    if a.len() != game.n() {
        return Err(Error::OutOfBox(format!(
            "profile has {} users, expected {}",
            a.len(),
            game.n()
        )));
    }
    for (i, (&x, &hi)) in a.iter().zip(game.a_max()).enumerate() {
        if !x.is_finite() || x < -BOX_SLACK || x > hi + BOX_SLACK {
            return Err(Error::OutOfBox(format!("a[{i}] = {x} outside [0, {hi}]")));
        }
    }
    Ok(())
}

/// Golden-section maximization of `f` on `[lo, hi]`, also checking both end
/// points. Ties go to the smaller argument.
pub fn maximize_scalar<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (lo, f(lo));
    for x in [mid, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}
