//! Deterministic synthetic worlds shipped with the crate: a 100×100 office
//! floor, a 20×20 demo map and a jittered-lattice image database.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand_distr::{Distribution, Normal};

use crate::geometry::{yaw_matrix, Heading, Pose3, SimilarityTransform};
use crate::retrieval::ObservationRecord;
use crate::rng::seeded;
use crate::world::OccupancyGrid;

/// Half-open cell rectangle `[c0, c1) × [r0, r1)`.
type Rect = (usize, usize, usize, usize);

fn carve(width: usize, height: usize, blocked: &[Rect], open: &[Rect]) -> Vec<bool> {
    let inside = |c: usize, r: usize, rects: &[Rect]| {
        rects
            .iter()
            .any(|&(c0, c1, r0, r1)| (c0..c1).contains(&c) && (r0..r1).contains(&r))
    };
    let mut cells = vec![true; width * height];
    for r in 0..height {
        for c in 0..width {
            let border = c == 0 || r == 0 || c + 1 == width || r + 1 == height;
            if (border || inside(c, r, blocked)) && !inside(c, r, open) {
                cells[r * width + c] = false;
            }
        }
    }
    cells
}

/// 5 m × 5 m office at 5 cm: four rooms split by 10 cm walls with 60 cm
/// doorways, plus desks and cabinets.
pub fn office_grid() -> OccupancyGrid {
    let walls = [
        (0, 100, 49, 51),  // east-west wall
        (39, 41, 0, 49),   // south rooms divider
        (64, 66, 51, 100), // north rooms divider
    ];
    let furniture = [
        (8, 26, 8, 14),
        (10, 16, 24, 38),
        (52, 78, 12, 19),
        (84, 92, 26, 42),
        (10, 24, 64, 78),
        (30, 36, 84, 96),
        (44, 56, 70, 88),
        (78, 92, 62, 68),
        (80, 86, 80, 94),
    ];
    let doors = [(16, 28, 49, 51), (72, 84, 49, 51), (39, 41, 20, 32), (64, 66, 74, 86)];
    let blocked: Vec<Rect> = walls.iter().chain(&furniture).copied().collect();
    OccupancyGrid::new(100, 100, 0.05, (0.0, 0.0), carve(100, 100, &blocked, &doors)).expect("valid fixture")
}

/// 5 m × 5 m at 25 cm with a partition and two pillars.
pub fn demo_grid() -> OccupancyGrid {
    let blocked = [(9, 11, 0, 13), (4, 6, 14, 16), (14, 16, 5, 7)];
    OccupancyGrid::new(20, 20, 0.25, (0.0, 0.0), carve(20, 20, &blocked, &[])).expect("valid fixture")
}

/// Headings stored per lattice point.
const HEADINGS_PER_POINT: usize = 8;

/// `n` records on a regular lattice over the navigable area, eight evenly
/// spaced headings per point, with Gaussian jitter (σ = 2 cm, 2°). Ids are
/// `0..n`, image names `img_00000.png` onward.
pub fn synthetic_database(grid: &OccupancyGrid, n: usize, seed: u64) -> Vec<ObservationRecord> {
    let points_needed = n.div_ceil(HEADINGS_PER_POINT).max(1);
    let (w, h) = (
        grid.width() as f64 * grid.resolution(),
        grid.height() as f64 * grid.resolution(),
    );
    let (ox, oz) = grid.origin();
    let mut spacing = (grid.navigable_count() as f64 * grid.resolution().powi(2) / points_needed as f64).sqrt();
    let lattice = loop {
        let mut pts = Vec::new();
        let mut z = oz + spacing / 2.0;
        while z < oz + h {
            let mut x = ox + spacing / 2.0;
            while x < ox + w {
                if grid.is_navigable(x, z) {
                    pts.push((x, z));
                }
                x += spacing;
            }
            z += spacing;
        }
        if pts.len() >= points_needed || spacing < 1e-3 {
            break pts;
        }
        spacing *= 0.9;
    };
    let pos_noise = Normal::new(0.0, 0.02).expect("valid sigma");
    let ang_noise = Normal::new(0.0, 2f64.to_radians()).expect("valid sigma");
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(n);
    'outer: for j in 0..points_needed {
        let (px, pz) = lattice[j * lattice.len() / points_needed];
        for k in 0..HEADINGS_PER_POINT {
            if out.len() == n {
                break 'outer;
            }
            let mut x = px + pos_noise.sample(&mut rng);
            let mut z = pz + pos_noise.sample(&mut rng);
            if !grid.is_navigable(x, z) {
                (x, z) = (px, pz);
            }
            let theta = k as f64 * std::f64::consts::TAU / HEADINGS_PER_POINT as f64
                + ang_noise.sample(&mut rng);
            let id = out.len() as u64;
            out.push(ObservationRecord {
                id,
                image_ref: format!("img_{id:05}.png"),
                pose: Pose3::new(x, z, Heading::from_angle(theta).expect("finite")).expect("finite"),
            });
        }
    }
    out
}

/// The demo reconstruction's frame relative to the map: points map as
/// `p_map = 2 · R_y(30°) · p_sfm + (1.5, 0, −0.75)`.
pub fn demo_sfm_to_map() -> SimilarityTransform {
    SimilarityTransform::new(2.0, yaw_matrix(30f64.to_radians()), Vector3::new(1.5, 0.0, -0.75)).expect("valid transform")
}

/// Control points as `sx sy sz tx ty tz` lines: targets on a 4×3 layout in
/// the map at three heights, sources mapped back through `sfm_to_map`.
pub fn correspondences_text(sfm_to_map: &SimilarityTransform) -> String {
    let inv = sfm_to_map.inverse();
    let mut out = String::from("# source (reconstruction) -> target (map), meters\n");
    for i in 0..4 {
        for j in 0..3 {
            let target = Vector3::new(0.5 + 1.25 * i as f64, 0.3 * ((i + j) % 3) as f64, 0.75 + 1.5 * j as f64);
            let s = inv.apply(&target);
            let _ = writeln!(out, "{} {} {} {} {} {}", s.x, s.y, s.z, target.x, target.y, target.z);
        }
    }
    out
}

/// COLMAP `images.txt` for `records` as seen from a reconstruction whose
/// frame relates to the map by `sfm_to_map`. Cameras sit at height 0.
pub fn sfm_images_text(records: &[ObservationRecord], sfm_to_map: &SimilarityTransform) -> String {
    let inv = sfm_to_map.inverse();
    let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    let mut out = String::from(
        "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n",
    );
    for r in records {
        // World-from-camera in the map, −Z forward, then into the SfM frame.
        let map_rot = yaw_matrix(r.pose.heading.angle());
        let sfm_rot = inv.rotation() * map_rot;
        let centre = inv.apply(&Vector3::new(r.pose.x, 0.0, r.pose.z));
        let cam_from_world = flip * sfm_rot.transpose();
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(cam_from_world));
        let t = -(cam_from_world * centre);
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} 1 {}\n",
            r.id, q.w, q.i, q.j, q.k, t.x, t.y, t.z, r.image_ref
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn office_is_one_component_with_detours() {
        let g = office_grid();
        assert_eq!((g.width(), g.height()), (100, 100));
        let a = (0.2, 0.2);
        for b in [(4.8, 0.2), (0.2, 4.8), (4.8, 4.8), (3.0, 3.0)] {
            assert!(g.connected(a, b).unwrap(), "{b:?}");
        }
        let geo = g.geodesic_distance((1.0, 2.2), (3.0, 2.2)).unwrap().unwrap();
        assert!(geo > 2.0 * 1.1, "{geo}");
        assert!(g.navigable_count() > 7000);
    }

    #[test]
    fn demo_is_connected() {
        let g = demo_grid();
        assert!(g.connected((0.4, 0.4), (4.6, 4.6)).unwrap());
        assert!(g.connected((0.4, 0.4), (4.6, 0.4)).unwrap());
    }

    #[test]
    fn database_is_deterministic_and_navigable() {
        let g = demo_grid();
        let a = synthetic_database(&g, 500, 1);
        assert_eq!(a, synthetic_database(&g, 500, 1));
        assert_eq!(a.len(), 500);
        assert!(a.iter().all(|r| g.is_navigable(r.pose.x, r.pose.z)));
        assert!(a.iter().enumerate().all(|(i, r)| r.id == i as u64));
    }

    #[test]
    fn sfm_export_roundtrips_through_alignment() {
        use crate::alignment::{estimate_similarity, parse_correspondences};
        use crate::retrieval::parse_sfm_poses;
        let g = demo_grid();
        let db = synthetic_database(&g, 40, 3);
        let t = demo_sfm_to_map();
        let report = estimate_similarity(&parse_correspondences(&correspondences_text(&t)).unwrap()).unwrap();
        assert!(report.rmse < 1e-9);
        let imgs = parse_sfm_poses(&sfm_images_text(&db, &t)).unwrap();
        for (img, rec) in imgs.iter().zip(&db) {
            let p = img.pose.transformed(&report.transform).to_pose3().unwrap();
            assert!((p.x - rec.pose.x).abs() < 1e-9 && (p.z - rec.pose.z).abs() < 1e-9);
            assert!(p.heading.cosine(&rec.pose.heading) > 1.0 - 1e-12);
        }
    }
}
