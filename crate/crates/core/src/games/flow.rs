use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StageGame;

/// Flow control over a shared M/M/1 link. The intervention device injects its
/// own flow `a0`, eating into the service rate.
///
/// `u_i = a_i^beta_i * max(0, mu - a0 - sum_j a_j)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowControl {
    mu: f64,
    beta: Vec<f64>,
    a_max: Vec<f64>,
    a0_max: Vec<f64>,
}

impl FlowControl {
    pub fn new(mu: f64, beta: Vec<f64>, a_max: Vec<f64>, a0_max: f64) -> Result<Self> {
        if beta.is_empty() || beta.len() != a_max.len() {
            return Err(Error::InvalidParameter(format!(
                "beta has {} entries, a_max has {}",
                beta.len(),
                a_max.len()
            )));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if beta.iter().chain(&a_max).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter("beta and a_max must be positive".into()));
        }
        if !(a0_max >= 0.0 && a0_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("a0_max must be >= 0, got {a0_max}")));
        }
        Ok(FlowControl { mu, beta, a_max, a0_max: vec![a0_max] })
    }

    /// `n` identical users.
    pub fn symmetric(n: usize, mu: f64, beta: f64, a_max: f64, a0_max: f64) -> Result<Self> {
        FlowControl::new(mu, vec![beta; n], vec![a_max; n], a0_max)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Whether the link can carry every user at full rate.
    pub fn capacity_covers_demand(&self) -> bool {
        self.mu >= self.a_max.iter().sum::<f64>()
    }

    pub fn with_a0_max(&self, a0_max: f64) -> Result<Self> {
        FlowControl::new(self.mu, self.beta.clone(), self.a_max.clone(), a0_max)
    }

    /// Closed-form check that the all-max profile is a stage equilibrium.
    pub fn all_max_is_nash(&self, with_intervention: bool) -> bool {
        let total: f64 = self.a_max.iter().sum();
        let a0 = if with_intervention { self.a0_max[0] } else { 0.0 };
        (0..self.a_max.len()).all(|i| {
            let rest = self.mu - (total - self.a_max[i]) - a0;
            rest <= 0.0 || self.a_max[i] <= self.beta[i] / (1.0 + self.beta[i]) * rest
        })
    }
}

impl StageGame for FlowControl {
    fn n(&self) -> usize {
        self.beta.len()
    }

    fn a_max(&self) -> &[f64] {
        &self.a_max
    }

    fn a0_max(&self) -> &[f64] {
        &self.a0_max
    }

    fn kind(&self) -> &'static str {
        "flow"
    }

    fn eval_user(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        let rest = self.mu - a0[0] - a.iter().sum::<f64>();
        if rest <= 0.0 || a[i] <= 0.0 {
            return 0.0;
        }
        a[i].powf(self.beta[i]) * rest
    }

    fn best_response(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        let others: f64 = a.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum();
        let rest = self.mu - a0[0] - others;
        if rest <= 0.0 {
            return self.a_max[i];
        }
        (self.beta[i] / (1.0 + self.beta[i]) * rest).clamp(0.0, self.a_max[i])
    }
}
