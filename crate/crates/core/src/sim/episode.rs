//! Episode sets: random start/goal pairs filtered by geodesic/euclidean ratio.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{GeometryError, Pose3};
use crate::world::OccupancyGrid;

pub const MAX_CONSECUTIVE_REJECTIONS: usize = 1_000_000;

/// Candidates drawn per round. Geodesics within a round may be computed in
/// parallel; acceptance is still decided in draw order.
const BATCH: usize = 256;

/// One stored episode. Field names match the episode-set file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub id: u64,
    pub start_x: f64,
    pub start_z: f64,
    pub start_theta: f64,
    pub goal_x: f64,
    pub goal_z: f64,
    pub geodesic: f64,
}

impl EpisodeSpec {
    pub fn start_pose(&self) -> Result<Pose3, GeometryError> {
        Pose3::from_xz_theta(self.start_x, self.start_z, self.start_theta)
    }

    pub fn goal(&self) -> (f64, f64) {
        (self.goal_x, self.goal_z)
    }

    pub fn euclidean(&self) -> f64 {
        (self.goal_x - self.start_x).hypot(self.goal_z - self.start_z)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    start: (f64, f64),
    goal: (f64, f64),
    theta: f64,
}

fn evaluate(grid: &OccupancyGrid, c: &Candidate, min_ratio: f64) -> Option<f64> {
    let euclid = (c.goal.0 - c.start.0).hypot(c.goal.1 - c.start.1);
    if euclid <= 0.0 || !grid.connected(c.start, c.goal).ok()? {
        return None;
    }
    let geo = grid.geodesic_distance(c.start, c.goal).ok()??;
    (geo / euclid > min_ratio).then_some(geo)
}

/// Rejection-samples `n` episodes whose geodesic/euclidean ratio exceeds
/// `min_ratio`. Start heading is uniform in `[0, 2π)`.
pub fn generate_episodes<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    n: usize,
    min_ratio: f64,
    rng: &mut R,
) -> Result<Vec<EpisodeSpec>, SimError> {
    if !(min_ratio.is_finite() && min_ratio >= 0.0) {
        return Err(SimError::Config(format!("min_ratio must be finite and >= 0, got {min_ratio}")));
    }
    let mut out = Vec::with_capacity(n);
    let mut rejections = 0usize;
    while out.len() < n {
        let mut batch = Vec::with_capacity(BATCH);
        for _ in 0..BATCH {
            let start = grid.sample_navigable_point(rng)?;
            let goal = grid.sample_navigable_point(rng)?;
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            batch.push(Candidate { start, goal, theta });
        }
        #[cfg(feature = "parallel")]
        let scored: Vec<Option<f64>> = {
            use rayon::prelude::*;
            batch.par_iter().map(|c| evaluate(grid, c, min_ratio)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let scored: Vec<Option<f64>> = batch.iter().map(|c| evaluate(grid, c, min_ratio)).collect();

        for (c, geo) in batch.iter().zip(scored) {
            if out.len() == n {
                break;
            }
            match geo {
                Some(geodesic) => {
                    rejections = 0;
                    out.push(EpisodeSpec {
                        id: out.len() as u64,
                        start_x: c.start.0,
                        start_z: c.start.1,
                        start_theta: c.theta,
                        goal_x: c.goal.0,
                        goal_z: c.goal.1,
                        geodesic,
                    });
                }
                None => {
                    rejections += 1;
                    if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                        return Err(SimError::InfeasibleMap {
                            rejections,
                            min_ratio,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn parse_episodes(text: &str) -> Result<Vec<EpisodeSpec>, SimError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SimError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_episodes(path: &Path) -> Result<Vec<EpisodeSpec>, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    parse_episodes(&text)
}

pub fn write_episodes<W: Write>(mut w: W, specs: &[EpisodeSpec]) -> std::io::Result<()> {
    for s in specs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
