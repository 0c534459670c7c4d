//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use intervene_core::sweep::{Capacity, TradeoffAxis};
use intervene_core::{GameKind, GameSpec, Welfare};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Table2,
    Fig3,
    Scaling,
    Tradeoff,
    Verify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Table2,
        ExperimentKind::Fig3,
        ExperimentKind::Scaling,
        ExperimentKind::Tradeoff,
        ExperimentKind::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::Verify => "verify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// Sweep parameters. Every field has a default matching the reference
/// experiment it is used by, so configs only list what they change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Symmetric minimum payoff guarantees.
    pub gamma: Vec<f64>,
    pub welfare: Vec<Welfare>,
    /// Finite punishment lengths for `fig3`.
    pub lengths: Vec<usize>,
    /// Also evaluate unbounded punishment in `fig3`.
    pub unbounded: bool,
    /// Intervention caps.
    pub a0: Vec<f64>,
    /// Upper end of the required-cap search in `tradeoff`.
    pub a0_upper: f64,
    /// Discount factors. Empty means a default grid for `tradeoff` and a set
    /// derived from the discount bound for `verify`.
    pub delta: Vec<f64>,
    pub n: Vec<usize>,
    pub beta: f64,
    pub capacity: Vec<Capacity>,
    pub axis: Vec<TradeoffAxis>,
    /// Fixed on-path profile for `fig3`; otherwise the one-shot sum optimum
    /// under `path_gamma` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_profile: Option<Vec<f64>>,
    pub path_gamma: f64,
    /// Deviation grid points per action box.
    pub grid: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gamma: vec![1.0, 3.0, 7.0, 14.0],
            welfare: vec![Welfare::Sum, Welfare::MaxMin],
            lengths: (1..=20).collect(),
            unbounded: true,
            a0: vec![0.0, 0.5, 1.0, 2.5],
            a0_upper: 2.5,
            delta: Vec::new(),
            n: (2..=20).collect(),
            beta: 3.0,
            capacity: vec![Capacity::Linear, Capacity::Capped(10)],
            axis: vec![TradeoffAxis::DeltaVsGamma, TradeoffAxis::A0VsDelta, TradeoffAxis::A0VsGamma],
            path_profile: None,
            path_gamma: 3.0,
            grid: intervene_core::spe::DEVIATION_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    /// Inline game description.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    /// Game description in a separate file, relative to this config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_file: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Stem of the output file names; defaults to the experiment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// The flow-control game of the reference experiments.
pub fn reference_game() -> GameSpec {
    GameSpec {
        kind: GameKind::Flow,
        mu: Some(10.0),
        beta: Some(vec![2.0, 2.0, 3.0, 3.0]),
        a_max: vec![2.5; 4],
        a0_max: Some(2.5),
        drop_max: None,
        gains: None,
        intervention_gains: None,
        noise: None,
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig { experiment: Some(experiment), game: None, game_file: None, sweep: SweepConfig::default(), output: None }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config and inlines its `game_file`, if any.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(rel) = cfg.game_file.take() {
            if cfg.game.is_some() {
                return Err(CliError::Config("give either `game` or `game_file`, not both".into()));
            }
            let file = path.parent().unwrap_or(Path::new(".")).join(&rel);
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::Config(format!("reading game file {}: {e}", file.display())))?;
            cfg.game = Some(toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?);
        }
        Ok(cfg)
    }

    pub fn game_spec(&self) -> GameSpec {
        self.game.clone().unwrap_or_else(reference_game)
    }

    /// Checks that grids used by `experiment` are nonempty.
    pub fn validate(&self, experiment: ExperimentKind) -> Result<(), CliError> {
        let s = &self.sweep;
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(CliError::Config(format!("`sweep.{name}` must be nonempty for {experiment}")))
            } else {
                Ok(())
            }
        };
        match experiment {
            ExperimentKind::Table2 => {
                empty("gamma", s.gamma.len())?;
                empty("welfare", s.welfare.len())
            }
            ExperimentKind::Fig3 => {
                empty("a0", s.a0.len())?;
                empty("lengths", s.lengths.len() + usize::from(s.unbounded))?;
                if s.lengths.contains(&0) {
                    return Err(CliError::Config("punishment lengths must be positive".into()));
                }
                Ok(())
            }
            ExperimentKind::Scaling => {
                empty("n", s.n.len())?;
                empty("capacity", s.capacity.len())?;
                empty("welfare", s.welfare.len())
            }
            ExperimentKind::Tradeoff => {
                empty("axis", s.axis.len())?;
                empty("gamma", s.gamma.len())?;
                if s.axis.contains(&TradeoffAxis::DeltaVsGamma) {
                    empty("a0", s.a0.len())?;
                }
                Ok(())
            }
            ExperimentKind::Verify => {
                empty("gamma", s.gamma.len())?;
                empty("welfare", s.welfare.len())?;
                if s.delta.iter().any(|d| !(0.0..1.0).contains(d)) {
                    return Err(CliError::Config("discount factors must lie in [0, 1)".into()));
                }
                Ok(())
            }
        }
    }
}
