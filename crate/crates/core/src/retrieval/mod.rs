//! The real-world observation database and two-step nearest-pose retrieval:
//! keep records whose heading cosine with the query reaches the threshold,
//! then return the one closest in XZ (ties to the lowest id).
//!
//! The heading step is exact: every candidate is checked with the same
//! `Heading::cosine` expression a linear scan would use. To avoid scanning all
//! headings per query, records are bucketed into fixed yaw sectors, each with
//! its own 2D tree; a query only visits sectors overlapping its admissible arc
//! (widened by a small margin so no passing record is skipped).

mod database;
mod kdtree;
mod sfm;

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::geometry::{GeometryError, Pose3};
use kdtree::{Best, KdTree};

pub use database::{load_database, parse_database, write_database};
pub use sfm::{load_sfm_images, parse_sfm_images, parse_sfm_poses, SfmImage};

pub const DEFAULT_COS_THRESHOLD: f64 = 0.96;

const SECTORS: usize = 36;
const SECTOR_WIDTH: f64 = TAU / SECTORS as f64;
const ARC_MARGIN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("observation database is empty")]
    EmptyDatabase,
    #[error("duplicate record id {0}")]
    DuplicateId(u64),
    #[error("cosine threshold must lie in [-1, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One real image and the aligned pose it was captured from.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub id: u64,
    pub image_ref: String,
    pub pose: Pose3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    pub cos_threshold: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            cos_threshold: DEFAULT_COS_THRESHOLD,
        }
    }
}

impl RetrievalConfig {
    pub fn new(cos_threshold: f64) -> Result<Self, RetrievalError> {
        if !(-1.0..=1.0).contains(&cos_threshold) {
            return Err(RetrievalError::InvalidThreshold(cos_threshold));
        }
        Ok(Self { cos_threshold })
    }
}

/// A retrieval answer. `fallback` is set when no record passed the heading
/// filter and the best-aligned headings were used instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalHit<'a> {
    pub record: &'a ObservationRecord,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    records: Vec<ObservationRecord>,
    config: RetrievalConfig,
    sectors: Vec<KdTree>,
}

fn sector_of(angle: f64) -> usize {
    let a = angle.rem_euclid(TAU);
    ((a / SECTOR_WIDTH) as usize).min(SECTORS - 1)
}

impl RetrievalIndex {
    pub fn build(records: Vec<ObservationRecord>, config: RetrievalConfig) -> Result<Self, RetrievalError> {
        let config = RetrievalConfig::new(config.cos_threshold)?;
        if records.is_empty() {
            return Err(RetrievalError::EmptyDatabase);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id) {
                return Err(RetrievalError::DuplicateId(r.id));
            }
        }
        let mut buckets: Vec<Vec<(f64, f64, u32)>> = vec![Vec::new(); SECTORS];
        for (slot, r) in records.iter().enumerate() {
            buckets[sector_of(r.pose.heading.angle())].push((r.pose.x, r.pose.z, slot as u32));
        }
        let sectors = buckets.into_iter().map(KdTree::build).collect();
        Ok(Self {
            records,
            config,
            sectors,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.records
    }

    pub fn config(&self) -> RetrievalConfig {
        self.config
    }

    /// Sectors whose yaw range can contain a heading passing the filter.
    fn candidate_sectors(&self, query_angle: f64) -> impl Iterator<Item = usize> {
        let half = self.config.cos_threshold.clamp(-1.0, 1.0).acos() + ARC_MARGIN;
        let all = half >= PI;
        let lo = query_angle - half;
        let span = if all { SECTORS } else { ((2.0 * half) / SECTOR_WIDTH).ceil() as usize + 2 };
        let first = if all { 0 } else { sector_of(lo) };
        (0..span.min(SECTORS)).map(move |k| (first + k) % SECTORS)
    }

    pub fn retrieve(&self, query: &Pose3) -> RetrievalHit<'_> {
        let threshold = self.config.cos_threshold;
        let qh = query.heading;
        let mut best: Best = None;
        let eligible = |slot: u32| {
            let r = &self.records[slot as usize];
            (r.pose.heading.cosine(&qh) >= threshold).then_some(r.id)
        };
        for s in self.candidate_sectors(qh.angle()) {
            self.sectors[s].nearest_filtered(query.x, query.z, &mut best, &eligible);
        }
        match best {
            Some((_, _, slot)) => RetrievalHit {
                record: &self.records[slot as usize],
                fallback: false,
            },
            None => RetrievalHit {
                record: self.fallback(query),
                fallback: true,
            },
        }
    }

    /// Best-aligned heading(s), then nearest XZ, then lowest id.
    fn fallback(&self, query: &Pose3) -> &ObservationRecord {
        let best_cos = self
            .records
            .iter()
            .map(|r| r.pose.heading.cosine(&query.heading))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut best: Best = None;
        for (slot, r) in self.records.iter().enumerate() {
            if r.pose.heading.cosine(&query.heading) != best_cos {
                continue;
            }
            let dx = r.pose.x - query.x;
            let dz = r.pose.z - query.z;
            let d2 = dx * dx + dz * dz;
            if kdtree::better(d2, r.id, &best) {
                best = Some((d2, r.id, slot as u32));
            }
        }
        let (_, _, slot) = best.expect("index is non-empty");
        &self.records[slot as usize]
    }

    /// Element-wise [`retrieve`](Self::retrieve), order preserving. Runs on the
    /// rayon pool when the `parallel` feature is enabled.
    pub fn retrieve_batch(&self, queries: &[Pose3]) -> Vec<RetrievalHit<'_>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            queries.par_iter().map(|q| self.retrieve(q)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.retrieve_batch_sequential(queries)
        }
    }

    pub fn retrieve_batch_sequential(&self, queries: &[Pose3]) -> Vec<RetrievalHit<'_>> {
        queries.iter().map(|q| self.retrieve(q)).collect()
    }
}

pub fn build_index(records: Vec<ObservationRecord>, config: RetrievalConfig) -> Result<RetrievalIndex, RetrievalError> {
    RetrievalIndex::build(records, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Heading;
    use std::f64::consts::FRAC_PI_2;

    fn rec(id: u64, x: f64, z: f64, theta: f64) -> ObservationRecord {
        ObservationRecord {
            id,
            image_ref: format!("{id}.jpg"),
            pose: Pose3::from_xz_theta(x, z, theta).unwrap(),
        }
    }

    #[test]
    fn single_record_always_returned() {
        let idx = build_index(vec![rec(7, 1.0, 1.0, 0.0)], RetrievalConfig::default()).unwrap();
        assert_eq!(idx.len(), 1);
        let hit = idx.retrieve(&Pose3::from_xz_theta(-5.0, 3.0, 2.0).unwrap());
        assert_eq!(hit.record.id, 7);
        assert!(hit.fallback);
        let hit = idx.retrieve(&Pose3::from_xz_theta(-5.0, 3.0, 0.1).unwrap());
        assert!(!hit.fallback);
    }

    #[test]
    fn heading_filter_runs_before_distance() {
        // A is 0.1 m away but turned 90°; B is 1 m away facing the same way.
        let db = vec![rec(1, 0.1, 0.0, FRAC_PI_2), rec(2, 1.0, 0.0, 0.0)];
        let idx = build_index(db, RetrievalConfig::default()).unwrap();
        let hit = idx.retrieve(&Pose3::from_xz_theta(0.0, 0.0, 0.0).unwrap());
        assert_eq!(hit.record.id, 2);
        assert!(!hit.fallback);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let db = vec![rec(9, 1.0, 0.0, 0.0), rec(4, -1.0, 0.0, 0.0), rec(6, 0.0, 1.0, 0.0)];
        let idx = build_index(db, RetrievalConfig::default()).unwrap();
        let hit = idx.retrieve(&Pose3::from_xz_theta(0.0, 0.0, 0.0).unwrap());
        assert_eq!(hit.record.id, 4);
    }

    #[test]
    fn fallback_picks_best_heading_then_nearest() {
        let db = vec![
            rec(1, 0.0, 0.0, PI),
            rec(2, 5.0, 0.0, FRAC_PI_2),
            rec(3, 3.0, 0.0, FRAC_PI_2),
        ];
        let idx = build_index(db, RetrievalConfig::default()).unwrap();
        let hit = idx.retrieve(&Pose3::from_xz_theta(0.0, 0.0, 1.0).unwrap());
        assert!(hit.fallback);
        assert_eq!(hit.record.id, 3);
    }

    #[test]
    fn threshold_minus_one_is_global_nearest() {
        let db = vec![rec(1, 0.5, 0.0, PI), rec(2, 2.0, 0.0, 0.0)];
        let idx = build_index(db, RetrievalConfig::new(-1.0).unwrap()).unwrap();
        let hit = idx.retrieve(&Pose3::from_xz_theta(0.0, 0.0, 0.0).unwrap());
        assert_eq!(hit.record.id, 1);
        assert!(!hit.fallback);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_index(vec![], RetrievalConfig::default()),
            Err(RetrievalError::EmptyDatabase)
        ));
        assert!(matches!(
            build_index(vec![rec(1, 0.0, 0.0, 0.0), rec(1, 1.0, 0.0, 0.0)], RetrievalConfig::default()),
            Err(RetrievalError::DuplicateId(1))
        ));
        assert!(RetrievalConfig::new(1.5).is_err());
    }

    #[test]
    fn sector_boundaries_wrap() {
        // Query just below 2π, record just above 0: same direction.
        let db = vec![rec(1, 3.0, 0.0, 1e-4), rec(2, 0.5, 0.0, PI)];
        let idx = build_index(db, RetrievalConfig::new(0.999).unwrap()).unwrap();
        let q = Pose3::new(0.0, 0.0, Heading::from_angle(-1e-4).unwrap()).unwrap();
        assert_eq!(idx.retrieve(&q).record.id, 1);
        assert!(!idx.retrieve(&q).fallback);
    }

    #[test]
    fn batch_preserves_order() {
        let db: Vec<_> = (0..50).map(|i| rec(i, i as f64, 0.0, 0.0)).collect();
        let idx = build_index(db, RetrievalConfig::default()).unwrap();
        let qs: Vec<_> = (0..50)
            .rev()
            .map(|i| Pose3::from_xz_theta(i as f64 + 0.1, 0.0, 0.0).unwrap())
            .collect();
        let par: Vec<u64> = idx.retrieve_batch(&qs).iter().map(|h| h.record.id).collect();
        let seq: Vec<u64> = idx.retrieve_batch_sequential(&qs).iter().map(|h| h.record.id).collect();
        assert_eq!(par, seq);
        assert_eq!(par, (0..50).rev().collect::<Vec<_>>());
    }
}
