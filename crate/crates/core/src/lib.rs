//! Repeated games in which a non-strategic intervention device can punish
//! users, with tools to design deviation-proof protocols for them.

pub mod automaton;
pub mod design;
pub mod error;
pub mod game;
pub mod games;
pub mod path;
pub mod protocol;
pub mod sim;
pub mod spe;
pub mod stage;
pub mod sweep;
pub mod table;

pub use automaton::{Automaton, PunishmentLength, PunishmentPlay, StateLabel};
pub use design::{DesignProblem, DeviationStats, TargetPayoff, Welfare};
pub use error::{Error, Result};
pub use game::{payoff, ActionProfile, PayoffVector, StageGame};
pub use games::{AnyGame, FlowControl, GameKind, GameSpec, PacketDrop, PowerControl};
pub use path::{OutcomePath, PathMode};
pub use protocol::{assemble_protocol, design_protocol, Protocol};
pub use sim::{DeviationPlan, Trace};
pub use spe::{SpeReport, StateValues};
pub use table::{Cell, ResultTable};
