use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StageGame;

/// Uplink power control. Each user's payoff is its Shannon throughput; the
/// intervention device transmits interference at power `a0`.
///
/// `u_i = log2(1 + h_ii a_i / (h_i0 a0 + sum_{j != i} h_ij a_j + n_i))`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerControl {
    gain: Vec<Vec<f64>>,
    intervention_gain: Vec<f64>,
    noise: Vec<f64>,
    a_max: Vec<f64>,
    a0_max: Vec<f64>,
}

impl PowerControl {
    pub fn new(
        gain: Vec<Vec<f64>>,
        intervention_gain: Vec<f64>,
        noise: Vec<f64>,
        a_max: Vec<f64>,
        a0_max: f64,
    ) -> Result<Self> {
        let n = a_max.len();
        if n == 0 || gain.len() != n || gain.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!("gain must be a {n}x{n} matrix")));
        }
        if intervention_gain.len() != n || noise.len() != n {
            return Err(Error::InvalidParameter(
                "intervention_gain and noise need one entry per user".into(),
            ));
        }
        let positive = |x: &f64| *x > 0.0 && x.is_finite();
        if !gain.iter().flatten().all(positive)
            || !intervention_gain.iter().all(positive)
            || !noise.iter().all(positive)
            || !a_max.iter().all(positive)
            || !positive(&a0_max)
        {
            return Err(Error::InvalidParameter(
                "gains, noise and power caps must be positive".into(),
            ));
        }
        Ok(PowerControl { gain, intervention_gain, noise, a_max, a0_max: vec![a0_max] })
    }

    pub fn sinr(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        let interference: f64 = a
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, &x)| self.gain[i][j] * x)
            .sum();
        self.gain[i][i] * a[i] / (self.intervention_gain[i] * a0[0] + interference + self.noise[i])
    }
}

impl StageGame for PowerControl {
    fn n(&self) -> usize {
        self.a_max.len()
    }

    fn a_max(&self) -> &[f64] {
        &self.a_max
    }

    fn a0_max(&self) -> &[f64] {
        &self.a0_max
    }

    fn kind(&self) -> &'static str {
        "power"
    }

    fn eval_user(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        self.sinr(i, a0, a).ln_1p() / std::f64::consts::LN_2
    }

    fn best_response(&self, i: usize, _a0: &[f64], _a: &[f64]) -> f64 {
        self.a_max[i]
    }
}
