//! The experiments behind each `--experiment` name.

use intervene_core::automaton::PunishmentLength;
use intervene_core::design::{deviation_stats, design_repeated};
use intervene_core::path::generate_outcome_path;
use intervene_core::sim::profitability_scan;
use intervene_core::spe::verify_spe;
use intervene_core::sweep::{
    baseline_comparison, curve_table, delta_vs_length, one_shot_optimum, scaling_comparison, tradeoff_sweep,
    TradeoffAxis, TradeoffGrid, ONE_SHOT_REFINEMENTS, ONE_SHOT_STEP,
};
use intervene_core::{assemble_protocol, ActionProfile, AnyGame, Cell, Error, FlowControl, PathMode, ResultTable, StageGame, Welfare};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::CliError;

/// Largest allowed difference between the two deviation scanners.
pub const SCANNER_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTable {
    /// File name suffix; empty for single-table experiments.
    pub suffix: String,
    pub table: ResultTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub tables: Vec<NamedTable>,
}

fn single(experiment: ExperimentKind, table: ResultTable) -> ExperimentOutput {
    ExperimentOutput { experiment, tables: vec![NamedTable { suffix: String::new(), table }] }
}

fn flow_game(cfg: &ExperimentConfig, experiment: ExperimentKind) -> Result<FlowControl, CliError> {
    match cfg.game_spec().build().map_err(|e| CliError::Config(e.to_string()))? {
        AnyGame::Flow(g) => Ok(g),
        _ => Err(CliError::Config(format!("{experiment} needs a flow-control game"))),
    }
}

/// Runs `experiment` (or the one named in the config).
pub fn run_experiment(cfg: &ExperimentConfig, experiment: Option<ExperimentKind>) -> Result<ExperimentOutput, CliError> {
    let kind = match (experiment, cfg.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!("config is for `{b}` but `{a}` was requested")));
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::Config("no experiment given".into())),
    };
    cfg.validate(kind)?;
    let s = &cfg.sweep;
    match kind {
        ExperimentKind::Table2 => {
            let game = flow_game(cfg, kind)?;
            Ok(single(kind, baseline_comparison(&game, &s.gamma, &s.welfare)?))
        }
        ExperimentKind::Fig3 => {
            let game = flow_game(cfg, kind)?;
            let path = match &s.path_profile {
                Some(a) => ActionProfile::new(game.null_a0(), a.clone()),
                None => {
                    let gamma = vec![s.path_gamma; game.n()];
                    one_shot_optimum(&game, Some(game.beta()), &gamma, Welfare::Sum, ONE_SHOT_STEP, ONE_SHOT_REFINEMENTS)
                        .ok_or_else(|| CliError::Config(format!("no profile meets path_gamma = {}", s.path_gamma)))?
                        .profile
                }
            };
            intervene_core::game::check_profile(&game, &path).map_err(|e| CliError::Config(e.to_string()))?;
            let mut lengths: Vec<PunishmentLength> = s.lengths.iter().map(|&l| PunishmentLength::Finite(l)).collect();
            if s.unbounded {
                lengths.push(PunishmentLength::Unbounded);
            }
            let points = delta_vs_length(&game, &path, &s.a0, &lengths)?;
            Ok(single(kind, curve_table(&points)?))
        }
        ExperimentKind::Scaling => Ok(single(kind, scaling_comparison(&s.n, s.beta, &s.capacity, &s.welfare)?)),
        ExperimentKind::Tradeoff => {
            let game = flow_game(cfg, kind)?;
            let delta = if s.delta.is_empty() { default_tradeoff_deltas() } else { s.delta.clone() };
            let grid = TradeoffGrid { a0: s.a0.clone(), gamma: s.gamma.clone(), delta, a0_upper: s.a0_upper };
            let mut tables = Vec::new();
            for &axis in &s.axis {
                let suffix = match axis {
                    TradeoffAxis::DeltaVsGamma => "delta_vs_gamma",
                    TradeoffAxis::A0VsDelta => "a0_vs_delta",
                    TradeoffAxis::A0VsGamma => "a0_vs_gamma",
                };
                let table = tradeoff_sweep(&game, Welfare::Sum, axis, &grid)?;
                tables.push(NamedTable { suffix: suffix.into(), table });
            }
            Ok(ExperimentOutput { experiment: kind, tables })
        }
        ExperimentKind::Verify => {
            let game = cfg.game_spec().build().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(single(kind, verify_table(&game, cfg)?))
        }
    }
}

/// Discount grid for `tradeoff` when none is configured: 0.80 to 0.99 in
/// steps of 0.01, then 0.995 and 0.999.
pub fn default_tradeoff_deltas() -> Vec<f64> {
    (80..=99).map(|k| k as f64 / 100.0).chain([0.995, 0.999]).collect()
}

/// Discount factors checked by `verify` when none are configured: just
/// above the bound, halfway to one, 0.999, and 0.5 (usually below it).
pub fn default_verify_deltas(delta_bar: f64) -> Vec<f64> {
    let mut d: Vec<f64> = [delta_bar + 1e-3, 0.5 * (delta_bar + 1.0), 0.999, 0.5].into_iter().filter(|x| *x < 1.0).collect();
    d.dedup();
    d
}

fn verify_table(game: &AnyGame, cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let s = &cfg.sweep;
    let stats = deviation_stats(game)?;
    let mut table = ResultTable::new([
        "gamma",
        "welfare_kind",
        "delta",
        "delta_bar",
        "path_mode",
        "path_len",
        "cycle_start",
        "payoff_error",
        "verify_worst_gain",
        "scan_worst_gain",
        "worst_state",
        "worst_user",
        "spe",
    ]);
    for &g in &s.gamma {
        for &w in &s.welfare {
            let design = match design_repeated(&stats, &vec![g; game.n()], w, true) {
                Ok(d) => d,
                Err(Error::InfeasibleGuarantees(_)) => {
                    let mut row = vec![Cell::from(g), w.name().into()];
                    row.resize(table.headers.len(), Cell::Na);
                    table.push(row)?;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let deltas = if s.delta.is_empty() { default_verify_deltas(design.delta_bar) } else { s.delta.clone() };
            for d in deltas {
                let expect_spe = d >= design.delta_bar;
                let mode = if expect_spe { PathMode::Strict } else { PathMode::BestEffort };
                let path = generate_outcome_path(game, &stats, &design.target.v, d, mode)?;
                let automaton = assemble_protocol(game, &stats, &path)?;
                let spe = verify_spe(&automaton, game, d, s.grid)?;
                let scan = profitability_scan(game, &automaton, d, s.grid)?;
                let err = path.payoff().iter().zip(&design.target.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if (spe.worst.gain - scan.worst.gain).abs() > SCANNER_AGREEMENT {
                    return Err(Error::Consistency(format!(
                        "deviation scanners disagree at delta {d}: {} vs {}",
                        spe.worst.gain, scan.worst.gain
                    ))
                    .into());
                }
                if expect_spe && !spe.is_ok() {
                    return Err(Error::Consistency(format!(
                        "protocol at delta {d} >= bound {} is not deviation-proof: {:?}",
                        design.delta_bar, spe.worst
                    ))
                    .into());
                }
                let mode_name = if expect_spe { "strict" } else { "best_effort" };
                table.push(vec![
                    g.into(),
                    w.name().into(),
                    d.into(),
                    design.delta_bar.into(),
                    mode_name.into(),
                    path.len().into(),
                    path.cycle_start.into(),
                    err.into(),
                    spe.worst.gain.into(),
                    scan.worst.gain.into(),
                    automaton.state(spe.worst.state).label.to_string().into(),
                    (spe.worst.user + 1).into(),
                    if spe.is_ok() { "ok" } else { "violated" }.into(),
                ])?;
            }
        }
    }
    Ok(table)
}
