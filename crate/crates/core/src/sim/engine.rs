use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, EpisodeSpec, EpisodeSummary, Policy, PolicyError};
use crate::geometry::{GeometryError, Pose3};
use crate::noise::{apply_actuation_noise, apply_sensor_noise, NoiseConfig, NoiseError};
use crate::retrieval::RetrievalIndex;
use crate::rng::{step_rng, Stream};
use crate::world::{MapError, OccupancyGrid};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("episode {0} is already over")]
    EpisodeOver(u64),
    #[error("no episode spec accepted after {rejections} consecutive rejections (min_ratio {min_ratio})")]
    InfeasibleMap { rejections: usize, min_ratio: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// What the observation image is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationMode {
    /// A renderer tag for the virtual model; no database needed.
    Virtual,
    /// The retrieved real image.
    #[default]
    Real,
    /// Both, for dataset generation.
    Hybrid,
}

impl std::str::FromStr for ObservationMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "virtual" => Ok(Self::Virtual),
            "real" => Ok(Self::Real),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(SimError::Config(format!("unknown observation mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub max_steps: u32,
    pub success_radius: f64,
    pub mode: ObservationMode,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            max_steps: 200,
            success_radius: 0.20,
            mode: ObservationMode::Real,
            noise: NoiseConfig::none(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.max_steps < 1 {
            return Err(SimError::Config("max_steps must be >= 1".into()));
        }
        if !(self.success_radius > 0.0 && self.success_radius.is_finite()) {
            return Err(SimError::Config(format!(
                "success_radius must be positive, got {}",
                self.success_radius
            )));
        }
        self.noise.validate()?;
        Ok(())
    }
}

/// What the policy sees at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepObservation {
    pub episode_id: u64,
    pub step: u32,
    /// Retrieved real image reference (real and hybrid modes).
    pub image: Option<String>,
    /// Renderer tag (virtual and hybrid modes).
    pub virtual_tag: Option<String>,
    pub record_id: Option<u64>,
    pub retrieval_fallback: bool,
    pub goal_distance: f64,
    /// Radians in (−π, π], positive to the left.
    pub goal_bearing: f64,
    pub prev_action: Option<Action>,
    /// Noisy pose the goal vector was computed from. In-process policies may
    /// use it; it is never sent over the wire.
    pub perceived_pose: Pose3,
}

impl StepObservation {
    /// Whatever the wire should carry as `image`.
    pub fn image_ref(&self) -> &str {
        self.image
            .as_deref()
            .or(self.virtual_tag.as_deref())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub true_pose: Pose3,
    pub perceived_pose: Pose3,
    pub action: Action,
    pub record_id: Option<u64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
    Aborted(String),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Aborted(_) => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: EpisodeSpec,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub final_pose: Pose3,
    pub final_distance: f64,
    pub path_length: f64,
}

/// Mutable per-episode state. Owned by exactly one running episode.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub spec: EpisodeSpec,
    pub true_pose: Pose3,
    pub step: u32,
    pub path_length: f64,
    pub steps: Vec<StepRecord>,
    pub outcome: Option<Outcome>,
    observation: StepObservation,
}

impl EpisodeState {
    pub fn observation(&self) -> &StepObservation {
        &self.observation
    }

    pub fn is_over(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn final_distance(&self) -> f64 {
        self.true_pose.distance_to(self.spec.goal_x, self.spec.goal_z)
    }

    pub fn into_trajectory(self) -> Trajectory {
        let final_distance = self.final_distance();
        Trajectory {
            outcome: self.outcome.unwrap_or_else(|| Outcome::Aborted("episode not finished".into())),
            spec: self.spec,
            steps: self.steps,
            final_pose: self.true_pose,
            final_distance,
            path_length: self.path_length,
        }
    }
}

pub enum StepResult<'s> {
    Continue(&'s StepObservation),
    Terminal(Outcome),
}

/// Shared read-only world: occupancy grid, optional image index and config.
#[derive(Clone, Copy)]
pub struct Simulator<'w> {
    grid: &'w OccupancyGrid,
    index: Option<&'w RetrievalIndex>,
    cfg: SimConfig,
}

impl<'w> Simulator<'w> {
    pub fn new(grid: &'w OccupancyGrid, index: Option<&'w RetrievalIndex>, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        if cfg.mode != ObservationMode::Virtual && index.is_none() {
            return Err(SimError::Config(format!(
                "{:?} observation mode needs an image database",
                cfg.mode
            )));
        }
        Ok(Self { grid, index, cfg })
    }

    pub fn grid(&self) -> &'w OccupancyGrid {
        self.grid
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn observe(&self, spec: &EpisodeSpec, true_pose: &Pose3, step: u32, prev: Option<Action>) -> StepObservation {
        let mut rng = step_rng(self.cfg.seed, spec.id, step as u64, Stream::Sensor);
        let perceived = apply_sensor_noise(true_pose, &self.cfg.noise, &mut rng);
        let (goal_distance, goal_bearing) = perceived.goal_vector(spec.goal_x, spec.goal_z);
        let mut obs = StepObservation {
            episode_id: spec.id,
            step,
            image: None,
            virtual_tag: None,
            record_id: None,
            retrieval_fallback: false,
            goal_distance,
            goal_bearing,
            prev_action: prev,
            perceived_pose: perceived,
        };
        if self.cfg.mode != ObservationMode::Real {
            obs.virtual_tag = Some(format!(
                "virtual:{:.4},{:.4},{:.6}",
                perceived.x,
                perceived.z,
                perceived.heading.angle()
            ));
        }
        if self.cfg.mode != ObservationMode::Virtual {
            if let Some(index) = self.index {
                let hit = index.retrieve(&perceived);
                obs.image = Some(hit.record.image_ref.clone());
                obs.record_id = Some(hit.record.id);
                obs.retrieval_fallback = hit.fallback;
            }
        }
        obs
    }

    /// Places the agent at the start and produces the step-0 observation.
    pub fn reset(&self, spec: &EpisodeSpec) -> Result<EpisodeState, SimError> {
        let start = spec.start_pose()?;
        if !self.grid.is_navigable(start.x, start.z) {
            return Err(MapError::InvalidEndpoint { x: start.x, z: start.z }.into());
        }
        if !self.grid.is_navigable(spec.goal_x, spec.goal_z) {
            return Err(MapError::InvalidEndpoint {
                x: spec.goal_x,
                z: spec.goal_z,
            }
            .into());
        }
        let observation = self.observe(spec, &start, 0, None);
        Ok(EpisodeState {
            spec: *spec,
            true_pose: start,
            step: 0,
            path_length: 0.0,
            steps: Vec::new(),
            outcome: None,
            observation,
        })
    }

    /// Applies one action. STOP ends the episode with success iff the true
    /// position is within the success radius; otherwise the step budget is
    /// checked after the move.
    pub fn step<'s>(&self, state: &'s mut EpisodeState, action: Action) -> Result<StepResult<'s>, SimError> {
        if state.is_over() {
            return Err(SimError::EpisodeOver(state.spec.id));
        }
        let obs = &state.observation;
        state.steps.push(StepRecord {
            step: state.step,
            true_pose: state.true_pose,
            perceived_pose: obs.perceived_pose,
            action,
            record_id: obs.record_id,
            fallback: obs.retrieval_fallback,
        });

        if action == Action::Stop {
            let outcome = if state.final_distance() <= self.cfg.success_radius {
                Outcome::Success
            } else {
                Outcome::Failure
            };
            state.outcome = Some(outcome.clone());
            return Ok(StepResult::Terminal(outcome));
        }

        let mut rng = step_rng(self.cfg.seed, state.spec.id, state.step as u64, Stream::Actuation);
        let motion = apply_actuation_noise(action, &self.cfg.noise, &mut rng)?;
        let mut pose = state.true_pose;
        if motion.rotation != 0.0 {
            pose.heading = pose.heading.rotated(motion.rotation);
        }
        if motion.distance > 0.0 {
            let moved = self.grid.attempt_move(&pose, motion.distance);
            state.path_length += pose.distance_to(moved.x, moved.z);
            pose = moved;
        }
        state.true_pose = pose;
        state.step += 1;

        if state.step >= self.cfg.max_steps {
            state.outcome = Some(Outcome::Failure);
            return Ok(StepResult::Terminal(Outcome::Failure));
        }
        state.observation = self.observe(&state.spec, &pose, state.step, Some(action));
        Ok(StepResult::Continue(&state.observation))
    }

    /// Runs one episode to completion. Policy failures end the episode as
    /// `Outcome::Aborted` instead of propagating.
    pub fn run_episode(&self, policy: &mut dyn Policy, spec: &EpisodeSpec) -> Result<Trajectory, SimError> {
        let mut state = self.reset(spec)?;
        if let Err(e) = policy.reset(spec) {
            return Ok(aborted(state, e));
        }
        loop {
            let action = match policy.act(state.observation()) {
                Ok(a) => a,
                Err(e) => return Ok(aborted(state, e)),
            };
            if let StepResult::Terminal(_) = self.step(&mut state, action)? {
                break;
            }
        }
        let summary = EpisodeSummary {
            episode_id: spec.id,
            outcome: state.outcome.clone().expect("terminal state"),
            final_distance: state.final_distance(),
        };
        if let Err(e) = policy.finish(&summary) {
            return Ok(aborted(state, e));
        }
        Ok(state.into_trajectory())
    }

    pub fn run_suite<F>(&self, make_policy: F, specs: &[EpisodeSpec]) -> Result<Vec<Trajectory>, SimError>
    where
        F: Fn(&EpisodeSpec) -> Box<dyn Policy> + Sync,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            specs
                .par_iter()
                .map(|s| self.run_episode(make_policy(s).as_mut(), s))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.run_suite_sequential(make_policy, specs)
        }
    }

    pub fn run_suite_sequential<F>(&self, make_policy: F, specs: &[EpisodeSpec]) -> Result<Vec<Trajectory>, SimError>
    where
        F: Fn(&EpisodeSpec) -> Box<dyn Policy>,
    {
        specs
            .iter()
            .map(|s| self.run_episode(make_policy(s).as_mut(), s))
            .collect()
    }
}

fn aborted(mut state: EpisodeState, err: PolicyError) -> Trajectory {
    state.outcome = Some(Outcome::Aborted(err.to_string()));
    state.into_trajectory()
}

pub fn run_episode(
    policy: &mut dyn Policy,
    spec: &EpisodeSpec,
    grid: &OccupancyGrid,
    index: Option<&RetrievalIndex>,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    Simulator::new(grid, index, *cfg)?.run_episode(policy, spec)
}

/// All episodes, output in spec order. Episodes run on the rayon pool when
/// the `parallel` feature is enabled; results do not depend on scheduling.
pub fn run_suite<F>(
    make_policy: F,
    specs: &[EpisodeSpec],
    grid: &OccupancyGrid,
    index: Option<&RetrievalIndex>,
    cfg: &SimConfig,
) -> Result<Vec<Trajectory>, SimError>
where
    F: Fn(&EpisodeSpec) -> Box<dyn Policy> + Sync,
{
    Simulator::new(grid, index, *cfg)?.run_suite(make_policy, specs)
}

pub fn run_suite_sequential<F>(
    make_policy: F,
    specs: &[EpisodeSpec],
    grid: &OccupancyGrid,
    index: Option<&RetrievalIndex>,
    cfg: &SimConfig,
) -> Result<Vec<Trajectory>, SimError>
where
    F: Fn(&EpisodeSpec) -> Box<dyn Policy>,
{
    Simulator::new(grid, index, *cfg)?.run_suite_sequential(make_policy, specs)
}
