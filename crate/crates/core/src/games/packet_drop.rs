use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StageGame;

/// Flow control where the intervention device drops user `i`'s packets with
/// probability `a0[i]`.
///
/// `u_i = ((1 - a0_i) a_i)^beta_i * (mu - sum_j a_j)`, with `0^beta = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketDrop {
    mu: f64,
    beta: Vec<f64>,
    a_max: Vec<f64>,
    a0_max: Vec<f64>,
}

impl PacketDrop {
    /// Drop probabilities range over `[0, 1]` for every user.
    pub fn new(mu: f64, beta: Vec<f64>, a_max: Vec<f64>) -> Result<Self> {
        let n = beta.len();
        PacketDrop::with_drop_caps(mu, beta, a_max, vec![1.0; n])
    }

    pub fn with_drop_caps(mu: f64, beta: Vec<f64>, a_max: Vec<f64>, a0_max: Vec<f64>) -> Result<Self> {
        let n = beta.len();
        if n == 0 || a_max.len() != n || a0_max.len() != n {
            return Err(Error::InvalidParameter(
                "beta, a_max and drop caps need one entry per user".into(),
            ));
        }
        if beta.iter().chain(&a_max).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter("beta and a_max must be positive".into()));
        }
        if a0_max.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter("drop probabilities must lie in [0, 1]".into()));
        }
        if mu < a_max.iter().sum::<f64>() {
            return Err(Error::InvalidParameter(format!(
                "mu = {mu} is below the total peak rate {}",
                a_max.iter().sum::<f64>()
            )));
        }
        Ok(PacketDrop { mu, beta, a_max, a0_max })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

impl StageGame for PacketDrop {
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
        "packet_drop"
    }

    fn eval_user(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        let delivered = (1.0 - a0[i]) * a[i];
        if delivered <= 0.0 {
            return 0.0;
        }
        delivered.powf(self.beta[i]) * (self.mu - a.iter().sum::<f64>())
    }

    /// Same maximizer as flow control: the drop factor scales the payoff
    /// without moving the argmax.
    fn best_response(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        let others: f64 = a.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum();
        let rest = self.mu - others;
        if a0[i] >= 1.0 || rest <= 0.0 {
            return self.a_max[i];
        }
        (self.beta[i] / (1.0 + self.beta[i]) * rest).clamp(0.0, self.a_max[i])
    }

    /// Dropping only user `i` at the highest probability allowed.
    fn minmax_a0(&self, i: usize) -> Vec<f64> {
        let mut a0 = vec![0.0; self.n()];
        a0[i] = self.a0_max[i];
        a0
    }
}
