//! Gaussian localization and actuation noise.
//!
//! Preset standard deviations per channel:
//!
//! | level  | localization   | actuation      |
//! |--------|----------------|----------------|
//! | small  | 0.20 m, 7°     | 0.05 m, 5°     |
//! | medium | 0.40 m, 15°    | 0.10 m, 10°    |
//! | large  | 0.80 m, 30°    | 0.20 m, 20°    |
//!
//! Positional sensor noise is radial: a uniform direction times a
//! half-normal magnitude `|N(0, σ)|`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose3;
use crate::sim::Action;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown noise preset {0:?} (expected none|small|medium|large)")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    #[default]
    None,
    Small,
    Medium,
    Large,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 4] = [NoiseLevel::None, NoiseLevel::Small, NoiseLevel::Medium, NoiseLevel::Large];

    /// Localization `(meters, degrees)`.
    pub fn sensor_sigmas(self) -> (f64, f64) {
        match self {
            NoiseLevel::None => (0.0, 0.0),
            NoiseLevel::Small => (0.20, 7.0),
            NoiseLevel::Medium => (0.40, 15.0),
            NoiseLevel::Large => (0.80, 30.0),
        }
    }

    /// Actuation `(meters, degrees)`.
    pub fn actuation_sigmas(self) -> (f64, f64) {
        match self {
            NoiseLevel::None => (0.0, 0.0),
            NoiseLevel::Small => (0.05, 5.0),
            NoiseLevel::Medium => (0.10, 10.0),
            NoiseLevel::Large => (0.20, 20.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::Small => "small",
            NoiseLevel::Medium => "medium",
            NoiseLevel::Large => "large",
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseLevel {
    type Err = NoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "no" => Ok(NoiseLevel::None),
            "small" => Ok(NoiseLevel::Small),
            "medium" => Ok(NoiseLevel::Medium),
            "large" => Ok(NoiseLevel::Large),
            _ => Err(NoiseError::UnknownPreset(s.to_string())),
        }
    }
}

/// Standard deviations; angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub sensor_pos_sigma: f64,
    pub sensor_ang_sigma: f64,
    pub act_trans_sigma: f64,
    pub act_rot_sigma: f64,
    /// Perturb heading on straight moves as well as on turns.
    pub move_heading_drift: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            sensor_pos_sigma: 0.0,
            sensor_ang_sigma: 0.0,
            act_trans_sigma: 0.0,
            act_rot_sigma: 0.0,
            move_heading_drift: true,
        }
    }

    pub fn from_presets(sensor: NoiseLevel, actuator: NoiseLevel) -> Self {
        let (sp, sa) = sensor.sensor_sigmas();
        let (at, ar) = actuator.actuation_sigmas();
        Self {
            sensor_pos_sigma: sp,
            sensor_ang_sigma: sa.to_radians(),
            act_trans_sigma: at,
            act_rot_sigma: ar.to_radians(),
            move_heading_drift: true,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let all = [
            self.sensor_pos_sigma,
            self.sensor_ang_sigma,
            self.act_trans_sigma,
            self.act_rot_sigma,
        ];
        if all.iter().all(|s| s.is_finite() && *s >= 0.0) {
            Ok(())
        } else {
            Err(NoiseError::InvalidArgument(format!("sigmas must be finite and >= 0, got {all:?}")))
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sensor_pos_sigma == 0.0
            && self.sensor_ang_sigma == 0.0
            && self.act_trans_sigma == 0.0
            && self.act_rot_sigma == 0.0
    }
}

#[inline]
fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Pose reported by the localization sensor. The true pose is untouched.
pub fn apply_sensor_noise<R: Rng + ?Sized>(true_pose: &Pose3, cfg: &NoiseConfig, rng: &mut R) -> Pose3 {
    let mut out = *true_pose;
    if cfg.sensor_pos_sigma > 0.0 {
        let dir = rng.random::<f64>() * std::f64::consts::TAU;
        let mag = gaussian(rng, cfg.sensor_pos_sigma).abs();
        let (s, c) = dir.sin_cos();
        out.x += mag * c;
        out.z += mag * s;
    }
    if cfg.sensor_ang_sigma > 0.0 {
        out.heading = out.heading.rotated(gaussian(rng, cfg.sensor_ang_sigma));
    }
    out
}

/// Realized motion for one action: `rotation` (radians, positive left) is
/// applied first, then a straight move of `distance` meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationOutcome {
    pub rotation: f64,
    pub distance: f64,
    /// Raw Gaussian draw added to the commanded translation (before clamping).
    pub translation_error: f64,
    /// Raw Gaussian draw added to the commanded rotation.
    pub rotation_error: f64,
}

/// Perturbs the commanded motion. Negative realized distances clamp to 0.
pub fn apply_actuation_noise<R: Rng + ?Sized>(
    action: Action,
    cfg: &NoiseConfig,
    rng: &mut R,
) -> Result<ActuationOutcome, NoiseError> {
    let rot_err = |rng: &mut R| if cfg.act_rot_sigma > 0.0 { gaussian(rng, cfg.act_rot_sigma) } else { 0.0 };
    match action {
        Action::Stop => Err(NoiseError::InvalidArgument("STOP has no actuation".into())),
        Action::MoveForward => {
            let translation_error = if cfg.act_trans_sigma > 0.0 { gaussian(rng, cfg.act_trans_sigma) } else { 0.0 };
            let rotation_error = if cfg.move_heading_drift { rot_err(rng) } else { 0.0 };
            Ok(ActuationOutcome {
                rotation: rotation_error,
                distance: (Action::FORWARD_STEP + translation_error).max(0.0),
                translation_error,
                rotation_error,
            })
        }
        Action::TurnLeft | Action::TurnRight => {
            let rotation_error = rot_err(rng);
            let commanded = if action == Action::TurnLeft { Action::TURN_STEP } else { -Action::TURN_STEP };
            Ok(ActuationOutcome {
                rotation: commanded + rotation_error,
                distance: 0.0,
                translation_error: 0.0,
                rotation_error,
            })
        }
    }
}

/// Independent sample of `N(0, σ)` for statistics checks.
pub fn normal_sampler(sigma: f64) -> Result<Normal<f64>, NoiseError> {
    Normal::new(0.0, sigma).map_err(|e| NoiseError::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{wrap_angle, Heading};
    use crate::rng::seeded;

    fn pose() -> Pose3 {
        Pose3::new(1.25, -0.5, Heading::from_angle(0.4).unwrap()).unwrap()
    }

    #[test]
    fn table_values() {
        let s = NoiseConfig::from_presets(NoiseLevel::Medium, NoiseLevel::Large);
        assert_eq!(s.sensor_pos_sigma, 0.40);
        assert!((s.sensor_ang_sigma - 15f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.act_trans_sigma, 0.20);
        assert!((s.act_rot_sigma - 20f64.to_radians()).abs() < 1e-15);
        assert_eq!(NoiseLevel::Small.sensor_sigmas(), (0.20, 7.0));
        assert_eq!(NoiseLevel::Large.sensor_sigmas(), (0.80, 30.0));
        assert_eq!(NoiseLevel::Small.actuation_sigmas(), (0.05, 5.0));
        assert_eq!(NoiseLevel::Medium.actuation_sigmas(), (0.10, 10.0));
        assert_eq!("LARGE".parse::<NoiseLevel>().unwrap(), NoiseLevel::Large);
        assert!("huge".parse::<NoiseLevel>().is_err());
    }

    #[test]
    fn zero_sigma_is_bitwise_identity() {
        let cfg = NoiseConfig::none();
        let mut rng = seeded(1);
        assert_eq!(apply_sensor_noise(&pose(), &cfg, &mut rng), pose());
        let m = apply_actuation_noise(Action::MoveForward, &cfg, &mut rng).unwrap();
        assert_eq!((m.distance, m.rotation), (0.25, 0.0));
        let t = apply_actuation_noise(Action::TurnRight, &cfg, &mut rng).unwrap();
        assert_eq!((t.distance, t.rotation), (0.0, -10f64.to_radians()));
    }

    #[test]
    fn stop_is_rejected() {
        let mut rng = seeded(1);
        assert!(apply_actuation_noise(Action::Stop, &NoiseConfig::none(), &mut rng).is_err());
    }

    #[test]
    fn negative_sigma_invalid() {
        let mut c = NoiseConfig::none();
        c.act_rot_sigma = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn drift_flag_controls_move_rotation() {
        let mut cfg = NoiseConfig::from_presets(NoiseLevel::None, NoiseLevel::Large);
        cfg.move_heading_drift = false;
        let mut rng = seeded(3);
        for _ in 0..100 {
            let m = apply_actuation_noise(Action::MoveForward, &cfg, &mut rng).unwrap();
            assert_eq!(m.rotation, 0.0);
            assert!(m.distance >= 0.0);
        }
    }

    // Moderate sample sizes here; the 10^6-draw checks live in the
    // acceptance suite.
    #[test]
    fn sensor_statistics() {
        let cfg = NoiseConfig::from_presets(NoiseLevel::Small, NoiseLevel::None);
        let mut rng = seeded(11);
        let n = 200_000;
        let (mut sum_mag, mut sum_ang2) = (0.0, 0.0);
        let p = pose();
        for _ in 0..n {
            let q = apply_sensor_noise(&p, &cfg, &mut rng);
            sum_mag += p.distance_to(q.x, q.z);
            let da = wrap_angle(q.heading.angle() - p.heading.angle());
            sum_ang2 += da * da;
        }
        // E|N(0,σ)| = σ·√(2/π).
        let sigma_pos = (sum_mag / n as f64) / (2.0 / std::f64::consts::PI).sqrt();
        let sigma_ang = (sum_ang2 / n as f64).sqrt();
        assert!((sigma_pos / 0.20 - 1.0).abs() < 0.02, "{sigma_pos}");
        assert!((sigma_ang / 7f64.to_radians() - 1.0).abs() < 0.02, "{sigma_ang}");
    }
}
