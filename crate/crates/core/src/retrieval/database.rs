//! Native observation database: JSON lines `{"id","image","x","z","theta_rad"}`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ObservationRecord, RetrievalError};
use crate::geometry::Pose3;

#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    id: u64,
    image: String,
    x: f64,
    z: f64,
    theta_rad: f64,
}

pub fn parse_database(text: &str) -> Result<Vec<ObservationRecord>, RetrievalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(line).map_err(|e| RetrievalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let pose = Pose3::from_xz_theta(rec.x, rec.z, rec.theta_rad).map_err(|e| {
            RetrievalError::Validation {
                line: i + 1,
                message: e.to_string(),
            }
        })?;
        out.push(ObservationRecord {
            id: rec.id,
            image_ref: rec.image,
            pose,
        });
    }
    Ok(out)
}

pub fn load_database(path: &Path) -> Result<Vec<ObservationRecord>, RetrievalError> {
    parse_database(&std::fs::read_to_string(path)?)
}

pub fn write_database<W: Write>(mut w: W, records: &[ObservationRecord]) -> std::io::Result<()> {
    for r in records {
        let line = RecordLine {
            id: r.id,
            image: r.image_ref.clone(),
            x: r.pose.x,
            z: r.pose.z,
            theta_rad: r.pose.heading.angle(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
