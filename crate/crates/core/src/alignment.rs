//! Registration of the real-world (SfM) model frame into the virtual model
//! frame: closed-form least-squares similarity estimation from point
//! correspondences (Umeyama), plus re-expression of an observation database.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{GeometryError, Pose3, SimilarityTransform};
use crate::retrieval::ObservationRecord;

/// Relative rank threshold below which a scatter matrix is treated as
/// rank-deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A source point in the real-model frame paired with its target in the
/// virtual-model frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: Vector3<f64>,
    pub target: Vector3<f64>,
}

impl Correspondence {
    pub fn new(source: Vector3<f64>, target: Vector3<f64>) -> Self {
        Self { source, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentReport {
    pub transform: SimilarityTransform,
    pub rmse: f64,
    pub n_points: usize,
}

/// Root-mean-square residual of `t` over the correspondences.
pub fn residual_rmse(t: &SimilarityTransform, correspondences: &[Correspondence]) -> f64 {
    if correspondences.is_empty() {
        return 0.0;
    }
    let sum: f64 = correspondences
        .iter()
        .map(|c| (c.target - t.apply(&c.source)).norm_squared())
        .sum();
    (sum / correspondences.len() as f64).sqrt()
}

fn centroid<'a>(points: impl Iterator<Item = &'a Vector3<f64>>, n: f64) -> Vector3<f64> {
    points.fold(Vector3::zeros(), |acc, p| acc + p) / n
}

fn second_singular_ratio(m: &Matrix3<f64>) -> f64 {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 {
        0.0
    } else {
        sv[1] / sv[0]
    }
}

/// Least-squares similarity transform mapping sources onto targets.
pub fn estimate_similarity(
    correspondences: &[Correspondence],
) -> Result<AlignmentReport, AlignmentError> {
    let n = correspondences.len();
    if n < 3 {
        return Err(AlignmentError::Degenerate(format!(
            "need at least 3 correspondences, got {n}"
        )));
    }
    if correspondences
        .iter()
        .any(|c| !c.source.iter().chain(c.target.iter()).all(|v| v.is_finite()))
    {
        return Err(AlignmentError::Degenerate(
            "non-finite correspondence coordinate".into(),
        ));
    }
    let nf = n as f64;
    let mu_s = centroid(correspondences.iter().map(|c| &c.source), nf);
    let mu_t = centroid(correspondences.iter().map(|c| &c.target), nf);

    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for c in correspondences {
        let s = c.source - mu_s;
        let t = c.target - mu_t;
        cov += t * s.transpose();
        scatter += s * s.transpose();
        var_s += s.norm_squared();
    }
    cov /= nf;
    scatter /= nf;
    var_s /= nf;

    if var_s <= 0.0 || second_singular_ratio(&scatter) < RANK_TOL {
        return Err(AlignmentError::Degenerate(
            "source points are coincident or collinear".into(),
        ));
    }
    if second_singular_ratio(&cov) < RANK_TOL {
        return Err(AlignmentError::Degenerate(
            "target points are coincident or collinear".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sv = svd.singular_values;

    // Reflection guard on the weakest direction.
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        let weakest = sv.imin();
        d[weakest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&d) * v_t;
    let scale = sv.dot(&d) / var_s;
    let translation = mu_t - scale * (rotation * mu_s);

    let transform = SimilarityTransform::new(scale, rotation, translation)?;
    let rmse = residual_rmse(&transform, correspondences);
    Ok(AlignmentReport {
        transform,
        rmse,
        n_points: n,
    })
}

/// Re-expresses planar records in the target frame. Positions are lifted at
/// zero altitude; headings turn by the transform's yaw. Image references are
/// untouched.
pub fn align_database(
    records: &[ObservationRecord],
    transform: &SimilarityTransform,
) -> Vec<ObservationRecord> {
    let yaw = transform.yaw();
    records
        .iter()
        .map(|r| {
            let p = transform.apply(&Vector3::new(r.pose.x, 0.0, r.pose.z));
            ObservationRecord {
                id: r.id,
                image_ref: r.image_ref.clone(),
                pose: Pose3 {
                    x: p.x,
                    z: p.z,
                    heading: r.pose.heading.rotated(yaw),
                },
            }
        })
        .collect()
}

/// Parses `sx sy sz tx ty tz` lines; `#` starts a comment.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>, AlignmentError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AlignmentError::Parse {
                line: i + 1,
                message: format!("bad number: {e}"),
            })?;
        if vals.len() != 6 {
            return Err(AlignmentError::Parse {
                line: i + 1,
                message: format!("expected 6 values, found {}", vals.len()),
            });
        }
        out.push(Correspondence::new(
            Vector3::new(vals[0], vals[1], vals[2]),
            Vector3::new(vals[3], vals[4], vals[5]),
        ));
    }
    Ok(out)
}

pub fn load_correspondences(path: &Path) -> Result<Vec<Correspondence>, AlignmentError> {
    parse_correspondences(&std::fs::read_to_string(path)?)
}
