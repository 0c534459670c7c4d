mod flow;
mod packet_drop;
mod power;

pub use flow::FlowControl;
pub use packet_drop::PacketDrop;
pub use power::PowerControl;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PayoffVector, StageGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Flow,
    Power,
    PacketDrop,
}

/// Declarative game description, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub kind: GameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    pub a_max: Vec<f64>,
    /// Intervention cap: a rate for flow control, a power for power control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0_max: Option<f64>,
    /// Per-user drop-probability caps for the packet-drop game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_max: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention_gains: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<f64>>,
}

fn required<T: Clone>(field: &Option<T>, name: &str, kind: &str) -> Result<T> {
    field
        .clone()
        .ok_or_else(|| Error::InvalidParameter(format!("`{name}` is required for {kind} games")))
}

impl GameSpec {
    pub fn build(&self) -> Result<AnyGame> {
        match self.kind {
            GameKind::Flow => Ok(AnyGame::Flow(FlowControl::new(
                required(&self.mu, "mu", "flow")?,
                required(&self.beta, "beta", "flow")?,
                self.a_max.clone(),
                self.a0_max.unwrap_or(0.0),
            )?)),
            GameKind::Power => Ok(AnyGame::Power(PowerControl::new(
                required(&self.gains, "gains", "power")?,
                required(&self.intervention_gains, "intervention_gains", "power")?,
                required(&self.noise, "noise", "power")?,
                self.a_max.clone(),
                required(&self.a0_max, "a0_max", "power")?,
            )?)),
            GameKind::PacketDrop => {
                let beta = required(&self.beta, "beta", "packet_drop")?;
                let caps = self.drop_max.clone().unwrap_or_else(|| vec![1.0; beta.len()]);
                Ok(AnyGame::PacketDrop(PacketDrop::with_drop_caps(
                    required(&self.mu, "mu", "packet_drop")?,
                    beta,
                    self.a_max.clone(),
                    caps,
                )?))
            }
        }
    }
}

/// Closed set of concrete games, so configs can pick one at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnyGame {
    Flow(FlowControl),
    Power(PowerControl),
    PacketDrop(PacketDrop),
}

macro_rules! delegate {
    ($self:ident, $g:ident => $e:expr) => {
        match $self {
            AnyGame::Flow($g) => $e,
            AnyGame::Power($g) => $e,
            AnyGame::PacketDrop($g) => $e,
        }
    };
}

impl AnyGame {
    pub fn as_flow(&self) -> Option<&FlowControl> {
        match self {
            AnyGame::Flow(g) => Some(g),
            _ => None,
        }
    }
}

impl StageGame for AnyGame {
    fn n(&self) -> usize {
        delegate!(self, g => g.n())
    }

    fn a_max(&self) -> &[f64] {
        delegate!(self, g => g.a_max())
    }

    fn a0_max(&self) -> &[f64] {
        delegate!(self, g => g.a0_max())
    }

    fn kind(&self) -> &'static str {
        delegate!(self, g => g.kind())
    }

    fn eval(&self, a0: &[f64], a: &[f64]) -> PayoffVector {
        delegate!(self, g => g.eval(a0, a))
    }

    fn eval_user(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        delegate!(self, g => g.eval_user(i, a0, a))
    }

    fn best_response(&self, i: usize, a0: &[f64], a: &[f64]) -> f64 {
        delegate!(self, g => g.best_response(i, a0, a))
    }

    fn minmax_a0(&self, i: usize) -> Vec<f64> {
        delegate!(self, g => g.minmax_a0(i))
    }
}

impl From<FlowControl> for AnyGame {
    fn from(g: FlowControl) -> Self {
        AnyGame::Flow(g)
    }
}

impl From<PowerControl> for AnyGame {
    fn from(g: PowerControl) -> Self {
        AnyGame::Power(g)
    }
}

impl From<PacketDrop> for AnyGame {
    fn from(g: PacketDrop) -> Self {
        AnyGame::PacketDrop(g)
    }
}
