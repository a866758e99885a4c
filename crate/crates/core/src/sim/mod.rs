//! Episode generation, the observe → act → transition loop, termination
//! rules and the in-process policies.

mod engine;
mod episode;
pub mod log;
mod policy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use engine::{
    run_episode, run_suite, run_suite_sequential, EpisodeState, ObservationMode, Outcome, SimConfig, SimError,
    Simulator, StepObservation, StepRecord, StepResult, Trajectory,
};
pub use episode::{generate_episodes, load_episodes, parse_episodes, write_episodes, EpisodeSpec, MAX_CONSECUTIVE_REJECTIONS};
pub use policy::{
    EpisodeSummary, GreedyPolicy, OraclePolicy, Policy, PolicyError, PolicyFactory, RandomPolicy,
};

/// The discrete action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    /// Commanded forward translation, meters.
    pub const FORWARD_STEP: f64 = 0.25;
    /// Commanded turn, radians (10°).
    pub const TURN_STEP: f64 = 10.0 * std::f64::consts::PI / 180.0;

    pub const ALL: [Action; 4] = [Action::MoveForward, Action::TurnLeft, Action::TurnRight, Action::Stop];

    pub fn wire_name(self) -> &'static str {
        match self {
            Action::MoveForward => "MOVE_FORWARD",
            Action::TurnLeft => "TURN_LEFT",
            Action::TurnRight => "TURN_RIGHT",
            Action::Stop => "STOP",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.wire_name() == s)
            .ok_or_else(|| format!("invalid action name {s:?}"))
    }
}
