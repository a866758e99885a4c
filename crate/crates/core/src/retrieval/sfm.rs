//! COLMAP `images.txt` reader.
//!
//! Each registered image takes two lines: `IMAGE_ID QW QX QY QZ TX TY TZ
//! CAMERA_ID NAME`, then a (possibly empty) 2D points line that is ignored.
//! The stored pose is camera-from-world with COLMAP camera axes (x right,
//! y down, z forward); it is inverted and re-axed to the −Z-forward camera
//! convention used by [`Pose6`].

use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::{ObservationRecord, RetrievalError};
use crate::geometry::Pose6;

const QUAT_NORM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SfmImage {
    pub id: u64,
    pub camera_id: u64,
    pub name: String,
    pub pose: Pose6,
}

fn parse_err(line: usize, message: impl Into<String>) -> RetrievalError {
    RetrievalError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<SfmImage, RetrievalError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 10 {
        return Err(parse_err(
            line_no,
            format!("expected `IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME`, got {} fields", fields.len()),
        ));
    }
    let id: u64 = fields[0]
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad IMAGE_ID {:?}", fields[0])))?;
    let mut nums = [0.0f64; 7];
    for (slot, tok) in nums.iter_mut().zip(&fields[1..8]) {
        *slot = tok
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad number {tok:?}")))?;
    }
    let camera_id: u64 = fields[8]
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad CAMERA_ID {:?}", fields[8])))?;
    // Image names may contain spaces.
    let name = fields[9..].join(" ");

    let q = Quaternion::new(nums[0], nums[1], nums[2], nums[3]);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOL {
        return Err(RetrievalError::Validation {
            line: line_no,
            message: format!("quaternion norm {norm} is not unit within {QUAT_NORM_TOL}"),
        });
    }
    let cam_from_world = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    let t = Vector3::new(nums[4], nums[5], nums[6]);
    let world_from_cam = cam_from_world.transpose();
    let center = -(world_from_cam * t);
    let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    let pose = Pose6::new(world_from_cam * flip, center).map_err(|e| RetrievalError::Validation {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(SfmImage {
        id,
        camera_id,
        name,
        pose,
    })
}

/// Full 6DoF poses, in file order.
pub fn parse_sfm_poses(text: &str) -> Result<Vec<SfmImage>, RetrievalError> {
    let data: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i + 1, l))
        .collect();
    // A trailing blank line after the last points line is not a record.
    let mut data = data.as_slice();
    if data.len() % 2 == 1 && data.last().is_some_and(|(_, l)| l.trim().is_empty()) {
        data = &data[..data.len() - 1];
    }
    if data.len() % 2 == 1 {
        let (line, _) = data[data.len() - 1];
        return Err(parse_err(line, "image header without its 2D points line"));
    }
    data.chunks(2).map(|pair| parse_header(pair[0].0, pair[0].1)).collect()
}

/// Planar records; ids and names come straight from the file.
pub fn parse_sfm_images(text: &str) -> Result<Vec<ObservationRecord>, RetrievalError> {
    parse_sfm_poses(text)?
        .into_iter()
        .map(|img| {
            Ok(ObservationRecord {
                id: img.id,
                image_ref: img.name,
                pose: img.pose.to_pose3()?,
            })
        })
        .collect()
}

pub fn load_sfm_images(path: &Path) -> Result<Vec<SfmImage>, RetrievalError> {
    parse_sfm_poses(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const HEADER: &str = "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n";

    #[test]
    fn identity_quaternion_faces_plus_z() {
        // COLMAP cameras look along +Z, which is yaw π in the −Z-forward convention.
        let text = format!("{HEADER}1 1 0 0 0 0 0 0 1 a.jpg\n10.0 20.0 -1\n");
        let recs = parse_sfm_images(&text).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!((recs[0].pose.x, recs[0].pose.z), (0.0, 0.0));
        assert!((recs[0].pose.heading.angle().abs() - PI).abs() < 1e-12);
        assert_eq!(recs[0].image_ref, "a.jpg");
    }

    #[test]
    fn quarter_turn_about_y() {
        // q = (cos45°, 0, sin45°, 0) is R_y(90°) camera-from-world; the
        // inverse sends the +Z optical axis to world −X, which is yaw +90°.
        let text = "2 0.7071 0 0.7071 0 0 0 0 1 b.jpg\n\n";
        let recs = parse_sfm_images(text).unwrap();
        assert!((recs[0].pose.heading.angle() - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn camera_centre_is_inverted_translation() {
        // R = identity, t = (1, 2, 3) → C = −t.
        let text = "3 1 0 0 0 1 2 3 1 c.jpg\n1 2 3\n";
        let imgs = parse_sfm_poses(text).unwrap();
        assert_eq!(*imgs[0].pose.position(), Vector3::new(-1.0, -2.0, -3.0));
        assert_eq!(imgs[0].camera_id, 1);
    }

    #[test]
    fn missing_points_line_is_error() {
        let text = "1 1 0 0 0 0 0 0 1 a.jpg\n\n2 1 0 0 0 0 0 0 1 b.jpg\n";
        assert!(matches!(parse_sfm_images(text), Err(RetrievalError::Parse { line: 3, .. })));
    }

    #[test]
    fn malformed_and_non_unit() {
        assert!(matches!(
            parse_sfm_images("1 1 0 0 x 0 0 0 1 a.jpg\n\n"),
            Err(RetrievalError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_sfm_images("1 1.01 0 0 0 0 0 0 1 a.jpg\n\n"),
            Err(RetrievalError::Validation { line: 1, .. })
        ));
        assert!(parse_sfm_images("1 1 0 0 0 0 0\n\n").is_err());
    }
}
