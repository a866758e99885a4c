//! Independent oracles and builders shared by the integration tests and
//! benches. Nothing here calls into the index or path planner it checks.

#![allow(dead_code)]

use rand::Rng;
use realnav::geometry::{Heading, Pose3};
use realnav::metrics::EpisodeResult;
use realnav::retrieval::ObservationRecord;
use realnav::sim::Trajectory;

/// Exhaustive two-step scan: heading filter, nearest XZ, lowest id. When
/// nothing passes, the best-aligned records compete on distance instead.
/// Returns `(id, fallback)`.
pub fn brute_force_retrieve(records: &[ObservationRecord], q: &Pose3, threshold: f64) -> (u64, bool) {
    let cos = |h: &Heading| h.u() * q.heading.u() + h.v() * q.heading.v();
    let d2 = |r: &ObservationRecord| {
        let dx = r.pose.x - q.x;
        let dz = r.pose.z - q.z;
        dx * dx + dz * dz
    };
    let pick = |keep: &dyn Fn(&ObservationRecord) -> bool| {
        records
            .iter()
            .filter(|r| keep(r))
            .min_by(|a, b| d2(a).total_cmp(&d2(b)).then(a.id.cmp(&b.id)))
            .map(|r| r.id)
    };
    if let Some(id) = pick(&|r| cos(&r.pose.heading) >= threshold) {
        return (id, false);
    }
    let best = records.iter().map(|r| cos(&r.pose.heading)).fold(f64::NEG_INFINITY, f64::max);
    (pick(&|r| cos(&r.pose.heading) == best).expect("non-empty database"), true)
}

/// Records scattered uniformly over `[0, side)²` with uniform headings.
pub fn random_records<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<ObservationRecord> {
    (0..n as u64)
        .map(|id| ObservationRecord {
            id,
            image_ref: format!("r{id}.png"),
            pose: random_pose(rng, side),
        })
        .collect()
}

pub fn random_pose<R: Rng>(rng: &mut R, side: f64) -> Pose3 {
    let x = rng.random::<f64>() * side;
    let z = rng.random::<f64>() * side;
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Pose3::from_xz_theta(x, z, theta).unwrap()
}

pub fn results_of(trajectories: &[Trajectory]) -> Vec<EpisodeResult> {
    trajectories
        .iter()
        .map(|t| EpisodeResult {
            success: t.outcome.is_success(),
            shortest_geodesic: t.spec.geodesic,
            path_length: t.path_length,
            final_distance: t.final_distance,
        })
        .collect()
}

/// `Σ Sᵢ lᵢ / max(lᵢ, pᵢ) / N`, written out directly.
pub fn spl_by_hand(results: &[EpisodeResult]) -> f64 {
    let mut total = 0.0;
    for r in results {
        if r.success {
            total += r.shortest_geodesic / r.shortest_geodesic.max(r.path_length);
        }
    }
    total / results.len() as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
