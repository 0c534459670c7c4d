//! Experiment runner: loads TOML configs, runs the reference experiments and
//! writes CSV tables with a provenance sidecar.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, SweepConfig};
pub use experiments::{run_experiment, ExperimentOutput, NamedTable};
pub use output::{emit_curves, write_outputs, Provenance};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] intervene_core::Error),
}

impl CliError {
    /// 2 for bad input, 3 for internal-consistency failures.
    pub fn exit_code(&self) -> i32 {
        use intervene_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::InvalidParameter(_) | E::OutOfBox(_) | E::InfeasibleGuarantees(_) | E::EmptySet(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}
