use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use intervene_cli::{run_experiment, write_outputs, CliError, ExperimentConfig, ExperimentKind, Provenance};

#[derive(Parser, Debug)]
#[command(name = "intervene", version, about = "Repeated games with intervention: reference experiments")]
struct Args {
    /// table2, fig3, scaling, tradeoff or verify
    #[arg(long)]
    experiment: ExperimentKind,
    /// TOML experiment config; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    if let Some(k) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(args.experiment),
    };
    let out = run_experiment(&cfg, Some(args.experiment))?;
    let provenance = Provenance::new(&cfg, args.experiment.name())?;
    let stem = cfg.output.clone().unwrap_or_else(|| args.experiment.name().to_string());
    write_outputs(&args.out, &stem, &out, &provenance)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("intervene: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
