mod common;

use std::time::Instant;

use realnav::geometry::Pose3;
use realnav::retrieval::{RetrievalConfig, RetrievalIndex};
use realnav::rng::seeded;

use common::{brute_force_retrieve, random_pose, random_records};

#[test]
fn agrees_with_scan_across_thresholds() {
    let mut rng = seeded(31);
    let records = random_records(&mut rng, 10_000, 20.0);
    let queries: Vec<Pose3> = (0..1_000).map(|_| random_pose(&mut rng, 20.0)).collect();
    for threshold in [-1.0, -0.3, 0.0, 0.5, 0.96, 0.9999, 1.0] {
        let index = RetrievalIndex::build(records.clone(), RetrievalConfig::new(threshold).unwrap()).unwrap();
        for q in &queries {
            let hit = index.retrieve(q);
            assert_eq!((hit.record.id, hit.fallback), brute_force_retrieve(&records, q, threshold), "threshold {threshold}");
        }
    }
}

#[test]
fn minus_one_threshold_is_plain_nearest() {
    let mut rng = seeded(32);
    let records = random_records(&mut rng, 5_000, 10.0);
    let index = RetrievalIndex::build(records.clone(), RetrievalConfig::new(-1.0).unwrap()).unwrap();
    for _ in 0..500 {
        let q = random_pose(&mut rng, 10.0);
        let nearest = records
            .iter()
            .min_by(|a, b| {
                let da = (a.pose.x - q.x).powi(2) + (a.pose.z - q.z).powi(2);
                let db = (b.pose.x - q.x).powi(2) + (b.pose.z - q.z).powi(2);
                da.total_cmp(&db).then(a.id.cmp(&b.id))
            })
            .unwrap();
        assert_eq!(index.retrieve(&q).record.id, nearest.id);
    }
}

#[test]
fn batch_matches_single_queries() {
    let mut rng = seeded(33);
    let records = random_records(&mut rng, 3_000, 10.0);
    let queries: Vec<Pose3> = (0..2_000).map(|_| random_pose(&mut rng, 10.0)).collect();
    let index = RetrievalIndex::build(records, RetrievalConfig::default()).unwrap();
    assert_eq!(index.retrieve_batch(&queries), index.retrieve_batch_sequential(&queries));
}

/// Mean query time over 10⁵ queries on 10⁵ records against the exhaustive
/// scan, which is timed on a subsample since its cost per query is flat.
#[test]
fn index_is_at_least_ten_times_faster_than_scan() {
    let mut rng = seeded(34);
    let records = random_records(&mut rng, 100_000, 50.0);
    let queries: Vec<Pose3> = (0..100_000).map(|_| random_pose(&mut rng, 50.0)).collect();
    let index = RetrievalIndex::build(records.clone(), RetrievalConfig::default()).unwrap();

    let t0 = Instant::now();
    let mut sink = 0u64;
    for q in &queries {
        sink ^= index.retrieve(q).record.id;
    }
    let indexed = t0.elapsed().as_secs_f64() / queries.len() as f64;

    let sample = &queries[..200];
    let t0 = Instant::now();
    for q in sample {
        sink ^= brute_force_retrieve(&records, q, 0.96).0;
    }
    let scanned = t0.elapsed().as_secs_f64() / sample.len() as f64;
    std::hint::black_box(sink);
    assert!(scanned >= 10.0 * indexed, "index {indexed:.3e} s/query, scan {scanned:.3e} s/query");
}
