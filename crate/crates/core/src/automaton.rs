//! Finite-state strategy machines for the intervention device and all users.
//!
//! Every state prescribes one action profile. The next state depends only on
//! who deviated from it: nobody, exactly one user, or several users at once.
//! Changes in the intervention action are never treated as deviations.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::game::{ActionProfile, StageGame};
use crate::stage::{self, mutual_minmax, NASH_CERT_TOL};

/// Actions closer than this to the prescription count as compliance.
pub const DEVIATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PunishmentLength {
    Finite(usize),
    Unbounded,
}

impl fmt::Display for PunishmentLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PunishmentLength::Finite(l) => write!(f, "{l}"),
            PunishmentLength::Unbounded => f.write_str("inf"),
        }
    }
}

/// What is played while user `i` is being punished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PunishmentPlay {
    /// `(a0_hat, a_i*, a_hat_-i)`: the punished user best-responds to the
    /// mutual minmax actions of everybody else.
    #[default]
    DeviatorBestResponds,
    /// Everybody, the punished user included, plays the mutual minmax profile.
    MutualMinmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    /// On-path state `w_e(tau)`.
    Path(usize),
    /// Punishment of `user`, period `step`. In player-specific automata
    /// `step == L` is the reward state.
    Punish { user: usize, step: usize },
    /// Absorbing punishment shared by all users.
    Absorbing,
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Path(t) => write!(f, "w_e({t})"),
            StateLabel::Punish { user, step } => write!(f, "w_p^{}({step})", user + 1),
            StateLabel::Absorbing => f.write_str("w_p"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub label: StateLabel,
    pub output: ActionProfile,
    /// Successor when everybody complies.
    pub next: usize,
    /// Successor when only user `j` deviates.
    pub on_deviation: Vec<usize>,
    /// Successor when two or more users deviate together.
    pub on_joint: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Automaton {
    states: Vec<State>,
    initial: usize,
    path_len: usize,
    punishment: PunishmentLength,
}

impl Automaton {
    pub fn from_states(states: Vec<State>, initial: usize, path_len: usize, punishment: PunishmentLength) -> Result<Self> {
        let n_states = states.len();
        if initial >= n_states || path_len > n_states {
            return Err(Error::InvalidAutomaton("initial state or path length out of range".into()));
        }
        let users = states.first().map_or(0, |s| s.on_deviation.len());
        for (k, s) in states.iter().enumerate() {
            let targets = std::iter::once(s.next).chain(s.on_deviation.iter().copied()).chain([s.on_joint]);
            if s.on_deviation.len() != users || s.output.a.len() != users {
                return Err(Error::InvalidAutomaton(format!("state {k} has the wrong user count")));
            }
            if targets.into_iter().any(|t| t >= n_states) {
                return Err(Error::InvalidAutomaton(format!("state {k} points outside the machine")));
            }
        }
        Ok(Automaton { states, initial, path_len, punishment })
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, w: usize) -> &State {
        &self.states[w]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn users(&self) -> usize {
        self.states[0].on_deviation.len()
    }

    /// Number of on-path states; they occupy indices `0..path_len`.
    pub fn path_len(&self) -> usize {
        self.path_len
    }

    pub fn punishment_length(&self) -> PunishmentLength {
        self.punishment
    }

    pub fn output(&self, w: usize) -> &ActionProfile {
        &self.states[w].output
    }

    /// Users whose action differs from the prescription of state `w`.
    pub fn deviators(&self, w: usize, observed: &ActionProfile) -> Vec<usize> {
        let f = &self.states[w].output;
        (0..f.a.len()).filter(|&j| (observed.a[j] - f.a[j]).abs() > DEVIATION_TOL).collect()
    }

    pub fn transition(&self, w: usize, observed: &ActionProfile) -> usize {
        let s = &self.states[w];
        match self.deviators(w, observed).as_slice() {
            [] => s.next,
            [j] => s.on_deviation[*j],
            _ => s.on_joint,
        }
    }

    /// Successor when only user `i` may differ from the prescription, playing `x`.
    pub fn unilateral_transition(&self, w: usize, i: usize, x: f64) -> usize {
        let s = &self.states[w];
        if (x - s.output.a[i]).abs() > DEVIATION_TOL {
            s.on_deviation[i]
        } else {
            s.next
        }
    }

    /// States reachable from the initial state, in breadth-first order.
    pub fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.states.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(w) = queue.pop_front() {
            order.push(w);
            let s = &self.states[w];
            for t in std::iter::once(s.next).chain(s.on_deviation.iter().copied()).chain([s.on_joint]) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        order
    }

    pub fn find(&self, label: StateLabel) -> Option<usize> {
        self.states.iter().position(|s| s.label == label)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_idx(v: &[usize]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

impl fmt::Display for Automaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "automaton states={} users={} initial={} path={} punishment={}",
            self.states.len(),
            self.users(),
            self.initial,
            self.path_len,
            self.punishment
        )?;
        writeln!(f, "# outputs")?;
        for (k, s) in self.states.iter().enumerate() {
            writeln!(f, "{k} {} a0={} a={}", s.label, fmt_vec(&s.output.a0), fmt_vec(&s.output.a))?;
        }
        writeln!(f, "# transitions")?;
        for (k, s) in self.states.iter().enumerate() {
            writeln!(f, "{k} next={} dev={} joint={}", s.next, fmt_idx(&s.on_deviation), s.on_joint)?;
        }
        Ok(())
    }
}

/// Successor of each on-path state: `tau + 1`, except the last, which loops
/// to `cycle_start`.
fn path_next(len: usize, cycle_start: usize, tau: usize) -> usize {
    if tau + 1 < len {
        tau + 1
    } else {
        cycle_start
    }
}

fn check_path(game: &dyn StageGame, path: &[ActionProfile], cycle_start: usize) -> Result<()> {
    if path.is_empty() || cycle_start >= path.len() {
        return Err(Error::InvalidAutomaton("path must be nonempty with cycle_start inside it".into()));
    }
    for p in path {
        crate::game::check_profile(game, p)?;
    }
    Ok(())
}

/// Automaton with minmax punishments: any unilateral deviation triggers `L`
/// periods of punishment against the deviator, after which play returns to
/// `w_e(0)`; a deviation during punishment restarts it against the new
/// deviator. With `L` unbounded the punishment is a single absorbing state
/// playing the mutual minmax profile, which must then be a stage equilibrium.
pub fn build_minmax_automaton(
    game: &dyn StageGame,
    path: &[ActionProfile],
    cycle_start: usize,
    mutual: &ActionProfile,
    length: PunishmentLength,
    play: PunishmentPlay,
) -> Result<Automaton> {
    check_path(game, path, cycle_start)?;
    crate::game::check_profile(game, mutual)?;
    let n = game.n();
    let t = path.len();
    let mut states = Vec::new();

    match length {
        PunishmentLength::Unbounded => {
            let (_, gain) = stage::max_unilateral_gain(game, mutual);
            if gain > NASH_CERT_TOL {
                return Err(Error::InvalidAutomaton(format!(
                    "unbounded punishment needs a stage equilibrium; a user gains {gain} by deviating"
                )));
            }
            let wp = t;
            for (tau, p) in path.iter().enumerate() {
                states.push(State {
                    label: StateLabel::Path(tau),
                    output: p.clone(),
                    next: path_next(t, cycle_start, tau),
                    on_deviation: vec![wp; n],
                    on_joint: wp,
                });
            }
            states.push(State {
                label: StateLabel::Absorbing,
                output: mutual.clone(),
                next: wp,
                on_deviation: vec![wp; n],
                on_joint: wp,
            });
        }
        PunishmentLength::Finite(l) => {
            if l == 0 {
                return Err(Error::InvalidAutomaton("punishment length must be at least 1".into()));
            }
            let start = |j: usize| t + j * l;
            for (tau, p) in path.iter().enumerate() {
                let next = path_next(t, cycle_start, tau);
                states.push(State {
                    label: StateLabel::Path(tau),
                    output: p.clone(),
                    next,
                    on_deviation: (0..n).map(start).collect(),
                    on_joint: next,
                });
            }
            for i in 0..n {
                let output = match play {
                    PunishmentPlay::MutualMinmax => mutual.clone(),
                    PunishmentPlay::DeviatorBestResponds => {
                        let br = game.best_response(i, &mutual.a0, &mutual.a);
                        mutual.with_user(i, br)
                    }
                };
                for step in 0..l {
                    let next = if step + 1 < l { start(i) + step + 1 } else { 0 };
                    states.push(State {
                        label: StateLabel::Punish { user: i, step },
                        output: output.clone(),
                        next,
                        on_deviation: (0..n).map(start).collect(),
                        on_joint: next,
                    });
                }
            }
        }
    }
    Automaton::from_states(states, 0, t, length)
}

/// Grim protocol: the on-path cycle with absorbing mutual minmax punishment.
pub fn build_grim_automaton(game: &dyn StageGame, path: &[ActionProfile], cycle_start: usize) -> Result<Automaton> {
    let (mutual, _) = mutual_minmax(game, true);
    build_minmax_automaton(game, path, cycle_start, &mutual, PunishmentLength::Unbounded, PunishmentPlay::default())
}

/// Average stage payoff over the cycle part of a path.
pub fn cycle_average(game: &dyn StageGame, path: &[ActionProfile], cycle_start: usize) -> Vec<f64> {
    let cycle = &path[cycle_start..];
    let mut avg = vec![0.0; game.n()];
    for p in cycle {
        for (s, u) in avg.iter_mut().zip(game.eval(&p.a0, &p.a)) {
            *s += u / cycle.len() as f64;
        }
    }
    avg
}

/// Automaton with player-specific punishments. A deviation by `j` anywhere
/// leads to `L` periods of `minmax_profiles[j]` followed by absorbing play of
/// `reward_profiles[j]`.
pub fn build_player_specific_automaton(
    game: &dyn StageGame,
    path: &[ActionProfile],
    cycle_start: usize,
    minmax_profiles: &[ActionProfile],
    reward_profiles: &[ActionProfile],
    l: usize,
) -> Result<Automaton> {
    check_path(game, path, cycle_start)?;
    let n = game.n();
    if minmax_profiles.len() != n || reward_profiles.len() != n {
        return Err(Error::InvalidAutomaton("need one minmax and one reward profile per user".into()));
    }
    if l == 0 {
        return Err(Error::InvalidAutomaton("punishment length must be at least 1".into()));
    }
    for p in minmax_profiles.iter().chain(reward_profiles) {
        crate::game::check_profile(game, p)?;
    }
    let v = cycle_average(game, path, cycle_start);
    let rewards: Vec<Vec<f64>> = reward_profiles.iter().map(|p| game.eval(&p.a0, &p.a)).collect();
    for i in 0..n {
        if !(v[i] > rewards[i][i]) {
            return Err(Error::InvalidAutomaton(format!(
                "user {i}: path payoff {} must exceed its own punishment reward {}",
                v[i], rewards[i][i]
            )));
        }
        for j in (0..n).filter(|&j| j != i) {
            if !(rewards[j][i] > rewards[i][i]) {
                return Err(Error::InvalidAutomaton(format!(
                    "user {i} must prefer the reward of user {j}'s punishment ({}) to its own ({})",
                    rewards[j][i], rewards[i][i]
                )));
            }
        }
    }

    let t = path.len();
    let start = |j: usize| t + j * (l + 1);
    let mut states = Vec::new();
    for (tau, p) in path.iter().enumerate() {
        let next = path_next(t, cycle_start, tau);
        states.push(State {
            label: StateLabel::Path(tau),
            output: p.clone(),
            next,
            on_deviation: (0..n).map(start).collect(),
            on_joint: next,
        });
    }
    for i in 0..n {
        for step in 0..=l {
            let here = start(i) + step;
            let (output, next) = if step < l {
                (minmax_profiles[i].clone(), here + 1)
            } else {
                (reward_profiles[i].clone(), here)
            };
            states.push(State {
                label: StateLabel::Punish { user: i, step },
                output,
                next,
                on_deviation: (0..n).map(start).collect(),
                on_joint: next,
            });
        }
    }
    Automaton::from_states(states, 0, t, PunishmentLength::Finite(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{FlowControl, PacketDrop};

    fn fig3() -> FlowControl {
        FlowControl::new(10.0, vec![2.0, 2.0, 3.0, 3.0], vec![2.5; 4], 2.5).unwrap()
    }

    fn target() -> ActionProfile {
        ActionProfile::new(vec![0.0], vec![1.0, 1.0, 2.5, 2.5])
    }

    #[test]
    fn finite_punishment_layout() {
        let g = fig3();
        let (mutual, _) = mutual_minmax(&g, true);
        let a = build_minmax_automaton(&g, &[target()], 0, &mutual, PunishmentLength::Finite(2), PunishmentPlay::default())
            .unwrap();
        assert_eq!(a.len(), 1 + 2 * 4);
        let last = a.find(StateLabel::Punish { user: 0, step: 1 }).unwrap();
        assert_eq!(a.transition(last, a.output(last)), 0);
        let p1 = a.find(StateLabel::Punish { user: 1, step: 0 }).unwrap();
        let first = a.find(StateLabel::Punish { user: 0, step: 0 }).unwrap();
        let dev = a.output(first).with_user(1, 0.3);
        assert_eq!(a.transition(first, &dev), p1);
    }

    #[test]
    fn punished_user_best_responds_by_default() {
        let g = FlowControl::new(10.0, vec![2.0, 2.0, 3.0, 3.0], vec![2.5; 4], 0.0).unwrap();
        let (mutual, ne) = mutual_minmax(&g, true);
        assert!(!ne);
        let a = build_minmax_automaton(&g, &[target()], 0, &mutual, PunishmentLength::Finite(1), PunishmentPlay::default())
            .unwrap();
        let w = a.find(StateLabel::Punish { user: 0, step: 0 }).unwrap();
        assert!((a.output(w).a[0] - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.output(w).a[1], 2.5);
    }

    #[test]
    fn unbounded_needs_stage_equilibrium() {
        let g = FlowControl::new(10.0, vec![2.0, 2.0, 3.0, 3.0], vec![2.5; 4], 0.0).unwrap();
        let (mutual, _) = mutual_minmax(&g, true);
        let r = build_minmax_automaton(&g, &[target()], 0, &mutual, PunishmentLength::Unbounded, PunishmentPlay::default());
        assert!(r.is_err());
    }

    #[test]
    fn grim_is_absorbing() {
        let g = fig3();
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        assert_eq!(a.len(), 2);
        let wp = a.find(StateLabel::Absorbing).unwrap();
        assert_eq!(a.transition(0, &target().with_user(2, 1.0)), wp);
        assert_eq!(a.transition(wp, &target()), wp);
        assert_eq!(a.transition(0, &target()), 0);
    }

    #[test]
    fn intervention_changes_are_not_deviations() {
        let g = fig3();
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        let mut p = target();
        p.a0 = vec![1.0];
        assert_eq!(a.transition(0, &p), 0);
    }

    #[test]
    fn player_specific_layout() {
        let g = PacketDrop::new(10.0, vec![1.0, 1.0], vec![2.0, 2.0]).unwrap();
        let path = [ActionProfile::new(vec![0.0, 0.0], vec![1.0, 1.0])];
        let minmax = [
            ActionProfile::new(vec![1.0, 0.0], vec![2.0, 1.0]),
            ActionProfile::new(vec![0.0, 1.0], vec![1.0, 2.0]),
        ];
        let reward = [
            ActionProfile::new(vec![0.5, 0.0], vec![1.0, 1.0]),
            ActionProfile::new(vec![0.0, 0.5], vec![1.0, 1.0]),
        ];
        let a = build_player_specific_automaton(&g, &path, 0, &minmax, &reward, 3).unwrap();
        assert_eq!(a.len(), 1 + 2 * 4);
        let r0 = a.find(StateLabel::Punish { user: 0, step: 3 }).unwrap();
        assert_eq!(a.transition(r0, a.output(r0)), r0);
        let dev = a.output(r0).with_user(1, 0.2);
        assert_eq!(a.transition(r0, &dev), a.find(StateLabel::Punish { user: 1, step: 0 }).unwrap());

        // swapping the rewards breaks the ordering
        let swapped = [reward[1].clone(), reward[0].clone()];
        assert!(build_player_specific_automaton(&g, &path, 0, &minmax, &swapped, 3).is_err());
    }

    #[test]
    fn text_format_is_stable() {
        let g = fig3();
        let a = build_grim_automaton(&g, &[target()], 0).unwrap();
        let text = a.to_string();
        let want = "automaton states=2 users=4 initial=0 path=1 punishment=inf\n\
                    # outputs\n\
                    0 w_e(0) a0=[0] a=[1, 1, 2.5, 2.5]\n\
                    1 w_p a0=[2.5] a=[2.5, 2.5, 2.5, 2.5]\n\
                    # transitions\n\
                    0 next=0 dev=[1, 1, 1, 1] joint=1\n\
                    1 next=1 dev=[1, 1, 1, 1] joint=1\n";
        assert_eq!(text, want);
    }

    #[test]
    fn reachable_covers_punishments() {
        let g = fig3();
        let (mutual, _) = mutual_minmax(&g, true);
        let path = [target(), ActionProfile::new(vec![0.0], vec![0.0, 0.0, 2.5, 0.0])];
        let a = build_minmax_automaton(&g, &path, 0, &mutual, PunishmentLength::Finite(3), PunishmentPlay::MutualMinmax)
            .unwrap();
        assert_eq!(a.reachable().len(), a.len());
    }
}
