//! The policy abstraction and the built-in baselines.

use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use thiserror::Error;

use super::{Action, EpisodeSpec, Outcome, StepObservation};
use crate::geometry::{wrap_angle, Pose3};
use crate::noise::NoiseConfig;
use crate::rng::{step_rng, Stream};
use crate::world::{DistanceField, OccupancyGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("transport: {0}")]
    Transport(String),
    #[error("invalid action name {0:?}")]
    InvalidAction(String),
    #[error("remote error: {0}")]
    Remote(String),
    #[error("{0}")]
    Other(String),
}

/// Sent to the policy once an episode ends.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode_id: u64,
    pub outcome: Outcome,
    pub final_distance: f64,
}

/// Chooses an action from each observation. One instance serves one episode
/// at a time.
pub trait Policy: Send {
    fn reset(&mut self, _spec: &EpisodeSpec) -> Result<(), PolicyError> {
        Ok(())
    }

    fn act(&mut self, obs: &StepObservation) -> Result<Action, PolicyError>;

    fn finish(&mut self, _summary: &EpisodeSummary) -> Result<(), PolicyError> {
        Ok(())
    }
}

/// Builds a fresh policy per episode.
pub type PolicyFactory = dyn Fn(&EpisodeSpec) -> Box<dyn Policy> + Sync + Send;

/// Alignment tolerance before moving: half a turn step.
const ALIGN_TOL: f64 = 0.5 * Action::TURN_STEP;

fn turn_toward(bearing: f64) -> Action {
    if bearing > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

/// Turns toward the goal, walks straight, stops within 0.15 m. Ignores
/// obstacles.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy;

impl GreedyPolicy {
    pub const STOP_DISTANCE: f64 = 0.15;

    pub fn decide(goal_distance: f64, goal_bearing: f64) -> Action {
        if goal_distance <= Self::STOP_DISTANCE {
            Action::Stop
        } else if goal_bearing.abs() > ALIGN_TOL {
            turn_toward(goal_bearing)
        } else {
            Action::MoveForward
        }
    }
}

impl Policy for GreedyPolicy {
    fn act(&mut self, obs: &StepObservation) -> Result<Action, PolicyError> {
        Ok(Self::decide(obs.goal_distance, obs.goal_bearing))
    }
}

/// Uniform over the three motion actions; STOP only once the reported goal
/// distance is within the success radius.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    seed: u64,
    success_radius: f64,
}

impl RandomPolicy {
    pub fn new(seed: u64, success_radius: f64) -> Self {
        Self { seed, success_radius }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, obs: &StepObservation) -> Result<Action, PolicyError> {
        if obs.goal_distance <= self.success_radius {
            return Ok(Action::Stop);
        }
        let mut rng = step_rng(self.seed, obs.episode_id, obs.step as u64, Stream::Policy);
        Ok([Action::MoveForward, Action::TurnLeft, Action::TurnRight][rng.random_range(0..3)])
    }
}

/// Pose belief that fuses the noisy fixes with the commanded motion. Position
/// variance is isotropic, one scalar per axis.
#[derive(Debug, Clone, Copy)]
struct Belief {
    pose: Pose3,
    pos_var: f64,
    ang_var: f64,
}

/// Shortest-path follower with map access. Each step it re-plans from its
/// pose belief: it walks the goal's distance field downhill and aims at the
/// farthest waypoint still in line of sight.
///
/// Given the noise model it filters the perceived pose against its own
/// commanded (map-clipped) motion, and near the goal it turns in place to
/// gather fixes until the belief is tight enough to stop on. Without noise
/// the belief is just the perceived pose.
pub struct OraclePolicy {
    grid: Arc<OccupancyGrid>,
    /// Obstacles grown by a safety margin; planned on first when noise is on.
    padded: Option<OccupancyGrid>,
    success_radius: f64,
    noise: NoiseConfig,
    goal: (f64, f64),
    field: Option<DistanceField>,
    padded_field: Option<DistanceField>,
    belief: Option<Belief>,
    last: Option<(Pose3, Action)>,
    short_sight: u32,
}

impl OraclePolicy {
    pub const STOP_FRACTION: f64 = 0.75;
    /// Largest per-axis position std worth stopping on, as a fraction of the
    /// success radius.
    pub const STOP_STD_FRACTION: f64 = 0.25;
    /// Extra per-axis variance per forward move when noise is modelled, for
    /// the contacts and clipping the motion model misses.
    const MOVE_VAR_FLOOR: f64 = 0.025 * 0.025;
    /// Margin kept from obstacles when planning under noise, meters.
    const CLEARANCE: f64 = 0.10;
    /// Waypoints considered per step, in cells.
    const LOOKAHEAD: usize = 80;
    /// Steps of one-cell lookahead after a blocked move.
    const RECOVERY_STEPS: u32 = 3;

    /// An oracle that takes every fix at face value.
    pub fn new(grid: Arc<OccupancyGrid>, success_radius: f64) -> Self {
        Self::with_noise(grid, success_radius, NoiseConfig::none())
    }

    pub fn with_noise(grid: Arc<OccupancyGrid>, success_radius: f64, noise: NoiseConfig) -> Self {
        let padded = (!noise.is_noiseless()).then(|| grid.inflated(Self::CLEARANCE));
        Self {
            grid,
            padded,
            success_radius,
            noise,
            goal: (0.0, 0.0),
            field: None,
            padded_field: None,
            belief: None,
            last: None,
            short_sight: 0,
        }
    }

    fn waypoint(&self, pose: &Pose3) -> Option<(f64, f64)> {
        if let (Some(grid), Some(field)) = (&self.padded, &self.padded_field) {
            if let Some(p) = self.waypoint_on(grid, field, pose) {
                return Some(p);
            }
        }
        self.waypoint_on(&self.grid, self.field.as_ref()?, pose)
    }

    fn waypoint_on(&self, grid: &OccupancyGrid, field: &DistanceField, pose: &Pose3) -> Option<(f64, f64)> {
        let (c, r) = grid.cell_of(pose.x, pose.z)?;
        let mut cur = grid.index(c, r);
        field.cost(cur)?;
        let here = pose.position();
        let lookahead = if self.short_sight > 0 { 1 } else { Self::LOOKAHEAD };
        if lookahead > 1 && grid.segment_clear(here, self.goal) {
            return Some(self.goal);
        }
        let mut first = None;
        let mut best = None;
        for _ in 0..lookahead {
            let Some(next) = field.descend(grid, cur) else {
                // Reached the goal cell.
                if best.is_some() && grid.segment_clear(here, self.goal) {
                    best = Some(self.goal);
                }
                break;
            };
            cur = next;
            let (nc, nr) = grid.cell_coords(cur);
            let p = grid.cell_center(nc, nr);
            first.get_or_insert(p);
            if !grid.segment_clear(here, p) {
                break;
            }
            best = Some(p);
        }
        best.or(first)
    }

    /// Moves the belief by the last commanded action.
    fn predict(&self, b: &mut Belief, action: Action) {
        let n = &self.noise;
        let drift = if action == Action::MoveForward && !n.move_heading_drift { 0.0 } else { n.act_rot_sigma.powi(2) };
        match action {
            Action::MoveForward => {
                let moved = self.grid.attempt_move(&b.pose, Action::FORWARD_STEP);
                b.pose = if self.grid.is_navigable(b.pose.x, b.pose.z) {
                    moved
                } else {
                    let (dx, dz) = b.pose.heading.forward();
                    Pose3 {
                        x: b.pose.x + Action::FORWARD_STEP * dx,
                        z: b.pose.z + Action::FORWARD_STEP * dz,
                        heading: b.pose.heading,
                    }
                };
                let lateral = Action::FORWARD_STEP.powi(2) * (b.ang_var + drift);
                b.pos_var += n.act_trans_sigma.powi(2) + lateral + Self::MOVE_VAR_FLOOR;
            }
            Action::TurnLeft => b.pose.heading = b.pose.heading.rotated(Action::TURN_STEP),
            Action::TurnRight => b.pose.heading = b.pose.heading.rotated(-Action::TURN_STEP),
            Action::Stop => {}
        }
        b.ang_var += drift;
    }

    /// Fuses one fix into the belief (a scalar Kalman update per channel).
    fn correct(&self, b: &mut Belief, fix: &Pose3) {
        let gain = |prior: f64, meas: f64| if meas > 0.0 { prior / (prior + meas) } else { 1.0 };
        // Radial noise of std σ splits into σ²/2 per axis.
        let meas_pos = 0.5 * self.noise.sensor_pos_sigma.powi(2);
        // A fix far outside the predicted spread means the model broke (a
        // blocked move, usually); widen the belief instead of trusting it.
        let miss2 = (fix.x - b.pose.x).powi(2) + (fix.z - b.pose.z).powi(2);
        if miss2 > 18.0 * (b.pos_var + meas_pos) {
            b.pos_var += 0.5 * miss2;
        }
        let k = gain(b.pos_var, meas_pos);
        if k == 1.0 {
            (b.pose.x, b.pose.z) = (fix.x, fix.z);
        } else {
            b.pose.x += k * (fix.x - b.pose.x);
            b.pose.z += k * (fix.z - b.pose.z);
        }
        b.pos_var *= 1.0 - k;
        let meas_ang = self.noise.sensor_ang_sigma.powi(2);
        let k = gain(b.ang_var, meas_ang);
        if k == 1.0 {
            b.pose.heading = fix.heading;
        } else {
            let innovation = wrap_angle(fix.heading.angle() - b.pose.heading.angle());
            b.pose.heading = b.pose.heading.rotated(k * innovation);
        }
        b.ang_var *= 1.0 - k;
    }

    fn update_belief(&mut self, fix: &Pose3) -> Belief {
        let mut b = match (self.belief, self.last) {
            (Some(mut b), Some((_, action))) => {
                self.predict(&mut b, action);
                b
            }
            _ => Belief {
                pose: *fix,
                pos_var: f64::INFINITY,
                ang_var: f64::INFINITY,
            },
        };
        if b.pos_var.is_infinite() {
            b.pose.x = fix.x;
            b.pose.z = fix.z;
            b.pos_var = 0.5 * self.noise.sensor_pos_sigma.powi(2);
        }
        if b.ang_var.is_infinite() {
            b.pose.heading = fix.heading;
            b.ang_var = self.noise.sensor_ang_sigma.powi(2);
        } else {
            self.correct(&mut b, fix);
        }
        self.belief = Some(b);
        b
    }
}

impl Policy for OraclePolicy {
    fn reset(&mut self, spec: &EpisodeSpec) -> Result<(), PolicyError> {
        self.goal = spec.goal();
        self.field = Some(
            self.grid
                .distance_field(self.goal)
                .map_err(|e| PolicyError::Other(e.to_string()))?,
        );
        // The goal may sit inside the margin; then only the plain map is used.
        self.padded_field = self.padded.as_ref().and_then(|g| g.distance_field(self.goal).ok());
        self.belief = None;
        self.last = None;
        self.short_sight = 0;
        Ok(())
    }

    fn act(&mut self, obs: &StepObservation) -> Result<Action, PolicyError> {
        let fix = obs.perceived_pose;
        let belief = self.update_belief(&fix);
        let pose = belief.pose;
        let distance = pose.distance_to(self.goal.0, self.goal.1);
        if distance <= Self::STOP_FRACTION * self.success_radius {
            if belief.pos_var.sqrt() <= Self::STOP_STD_FRACTION * self.success_radius {
                return Ok(Action::Stop);
            }
            // Close but unsure: turning costs no path length and buys a fix.
            self.last = Some((fix, Action::TurnLeft));
            return Ok(Action::TurnLeft);
        }
        // A forward move that left the fix untouched hit a wall.
        if self.last == Some((fix, Action::MoveForward)) {
            self.short_sight = Self::RECOVERY_STEPS;
        }
        let (x, z) = self.waypoint(&pose).unwrap_or(self.goal);
        let bearing = pose.goal_vector(x, z).1;
        // Chasing a heading finer than the belief knows it only oscillates.
        let tol = ALIGN_TOL.max(1.5 * belief.ang_var.sqrt());
        let action = if bearing.abs() > tol {
            turn_toward(bearing)
        } else {
            Action::MoveForward
        };
        if action == Action::MoveForward {
            self.short_sight = self.short_sight.saturating_sub(1);
        }
        self.last = Some((fix, action));
        Ok(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_decisions() {
        assert_eq!(GreedyPolicy::decide(0.05, 1.0), Action::Stop);
        assert_eq!(GreedyPolicy::decide(2.0, 90f64.to_radians()), Action::TurnLeft);
        assert_eq!(GreedyPolicy::decide(2.0, -90f64.to_radians()), Action::TurnRight);
        assert_eq!(GreedyPolicy::decide(2.0, 0.0), Action::MoveForward);
        assert_eq!(GreedyPolicy::decide(2.0, 4.9f64.to_radians()), Action::MoveForward);
    }

    fn obs(x: f64, z: f64, theta: f64, step: u32) -> StepObservation {
        let perceived_pose = Pose3::from_xz_theta(x, z, theta).unwrap();
        let (goal_distance, goal_bearing) = perceived_pose.goal_vector(2.0, 1.0);
        StepObservation {
            episode_id: 0,
            step,
            image: None,
            virtual_tag: None,
            record_id: None,
            retrieval_fallback: false,
            goal_distance,
            goal_bearing,
            prev_action: None,
            perceived_pose,
        }
    }

    fn open_oracle(noise: NoiseConfig) -> OraclePolicy {
        let grid = OccupancyGrid::new(60, 60, 0.05, (0.0, 0.0), vec![true; 3600]).unwrap();
        let mut p = OraclePolicy::with_noise(Arc::new(grid), 0.2, noise);
        let spec = EpisodeSpec {
            id: 0,
            start_x: 1.0,
            start_z: 1.0,
            start_theta: 0.0,
            goal_x: 2.0,
            goal_z: 1.0,
            geodesic: 1.0,
        };
        p.reset(&spec).unwrap();
        p
    }

    #[test]
    fn filter_averages_repeated_fixes() {
        let noise = NoiseConfig::from_presets(crate::noise::NoiseLevel::Small, crate::noise::NoiseLevel::None);
        let mut p = open_oracle(noise);
        // Sitting near the goal, the first fix is not trusted enough to stop on.
        assert_eq!(p.act(&obs(1.9, 1.0, 0.0, 0)).unwrap(), Action::TurnLeft);
        let first = p.belief.unwrap().pos_var;
        p.act(&obs(2.1, 1.0, 0.0, 1)).unwrap();
        let b = p.belief.unwrap();
        assert!(b.pos_var < first);
        assert!((b.pose.x - 2.0).abs() < 1e-12, "equal-weight fixes average, got {}", b.pose.x);
    }

    #[test]
    fn noiseless_belief_is_the_fix() {
        let mut p = open_oracle(NoiseConfig::none());
        p.act(&obs(1.0, 1.0, 1.0, 0)).unwrap();
        p.act(&obs(1.3, 0.7, 1.2, 1)).unwrap();
        assert_eq!(p.belief.unwrap().pose, Pose3::from_xz_theta(1.3, 0.7, 1.2).unwrap());
        assert_eq!(p.act(&obs(1.95, 1.0, 0.0, 2)).unwrap(), Action::Stop);
    }
}
