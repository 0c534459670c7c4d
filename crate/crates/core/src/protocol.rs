//! Protocol assembly: outcome path plus absorbing mutual minmax punishment.

use crate::automaton::{build_grim_automaton, Automaton};
use crate::design::{deviation_stats, design_repeated, DesignProblem, DeviationStats, RepeatedDesign};
use crate::error::{Error, Result};
use crate::game::StageGame;
use crate::path::{generate_outcome_path, OutcomePath, PathMode};
use crate::stage::{max_unilateral_gain, mutual_minmax, NASH_CERT_TOL};

/// Grim automaton cycling through the solo profiles of `path`.
pub fn assemble_protocol(game: &dyn StageGame, stats: &DeviationStats, path: &OutcomePath) -> Result<Automaton> {
    let (mutual, _) = mutual_minmax(game, true);
    let (user, gain) = max_unilateral_gain(game, &mutual);
    if gain > NASH_CERT_TOL {
        return Err(Error::InvalidAutomaton(format!(
            "mutual minmax profile is not a stage equilibrium: user {} gains {gain}",
            user + 1
        )));
    }
    build_grim_automaton(game, &path.profiles(stats), path.cycle_start)
}

#[derive(Debug, Clone)]
pub struct Protocol {
    pub design: RepeatedDesign,
    pub path: OutcomePath,
    pub automaton: Automaton,
}

/// Full pipeline with intervention: target, bound, path and automaton.
/// `delta = None` uses the bound itself.
pub fn design_protocol(problem: &DesignProblem, delta: Option<f64>, mode: PathMode) -> Result<Protocol> {
    let stats = deviation_stats(&problem.game)?;
    let design = design_repeated(&stats, &problem.gamma, problem.welfare, true)?;
    let delta = delta.unwrap_or(design.delta_bar);
    let path = generate_outcome_path(&problem.game, &stats, &design.target.v, delta, mode)?;
    let automaton = assemble_protocol(&problem.game, &stats, &path)?;
    Ok(Protocol { design, path, automaton })
}
