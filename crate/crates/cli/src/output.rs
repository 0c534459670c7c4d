//! CSV emission and provenance sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use intervene_core::ResultTable;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiments::ExperimentOutput;
use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub experiment: String,
    /// SHA-256 of the canonical TOML form of the config.
    pub config_sha256: String,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig, experiment: &str) -> Result<Self, CliError> {
        let digest = Sha256::digest(cfg.to_toml()?.as_bytes());
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Provenance { experiment: experiment.into(), config_sha256, tool_version: TOOL_VERSION.into() })
    }

    pub fn render(&self) -> String {
        format!(
            "experiment = \"{}\"\nconfig_sha256 = \"{}\"\ntool_version = \"{}\"\n",
            self.experiment, self.config_sha256, self.tool_version
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes `table` as CSV at `path`. Same table, same bytes.
pub fn emit_curves(table: &ResultTable, path: &Path) -> Result<(), CliError> {
    fs::write(path, table.to_csv()).map_err(io_err(path))
}

/// Writes every table of `out` into `dir` as `<stem>[_<suffix>].csv`, each
/// with a `.provenance` sidecar. Returns the CSV paths.
pub fn write_outputs(dir: &Path, stem: &str, out: &ExperimentOutput, provenance: &Provenance) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for t in &out.tables {
        let name = if t.suffix.is_empty() { format!("{stem}.csv") } else { format!("{stem}_{}.csv", t.suffix) };
        let path = dir.join(name);
        emit_curves(&t.table, &path)?;
        let side = path.with_extension("csv.provenance");
        fs::write(&side, provenance.render()).map_err(io_err(&side))?;
        written.push(path);
    }
    Ok(written)
}
