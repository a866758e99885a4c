//! Trajectory log: one JSON object per line, the steps of each episode
//! followed by its summary record.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Action, Outcome, SimError, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLine {
    pub episode_id: u64,
    pub step: u32,
    pub true_x: f64,
    pub true_z: f64,
    pub true_theta: f64,
    pub perceived_x: f64,
    pub perceived_z: f64,
    pub perceived_theta: f64,
    pub action: Action,
    pub record_id: Option<u64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub episode_id: u64,
    /// `success`, `failure` or `aborted`.
    pub outcome: String,
    pub steps: usize,
    pub final_distance: f64,
    pub path_length: f64,
    pub geodesic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

impl SummaryLine {
    pub fn is_success(&self) -> bool {
        self.outcome == "success"
    }

    pub fn is_aborted(&self) -> bool {
        self.outcome == "aborted"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogRecord {
    Step(StepLine),
    Summary(SummaryLine),
}

pub fn summary_of(t: &Trajectory) -> SummaryLine {
    SummaryLine {
        episode_id: t.spec.id,
        outcome: t.outcome.name().to_string(),
        steps: t.steps.len(),
        final_distance: t.final_distance,
        path_length: t.path_length,
        geodesic: t.spec.geodesic,
        abort_reason: match &t.outcome {
            Outcome::Aborted(why) => Some(why.clone()),
            _ => None,
        },
    }
}

pub fn records_of(t: &Trajectory) -> impl Iterator<Item = LogRecord> + '_ {
    t.steps
        .iter()
        .map(move |s| {
            LogRecord::Step(StepLine {
                episode_id: t.spec.id,
                step: s.step,
                true_x: s.true_pose.x,
                true_z: s.true_pose.z,
                true_theta: s.true_pose.heading.angle(),
                perceived_x: s.perceived_pose.x,
                perceived_z: s.perceived_pose.z,
                perceived_theta: s.perceived_pose.heading.angle(),
                action: s.action,
                record_id: s.record_id,
                fallback: s.fallback,
            })
        })
        .chain(std::iter::once(LogRecord::Summary(summary_of(t))))
}

pub fn write_log<W: Write>(mut w: W, trajectories: &[Trajectory]) -> std::io::Result<()> {
    for t in trajectories {
        for rec in records_of(t) {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, SimError> {
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

pub fn load_log(path: &Path) -> Result<Vec<LogRecord>, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    parse_log(&text)
}

pub fn summaries(records: &[LogRecord]) -> Vec<&SummaryLine> {
    records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Summary(s) => Some(s),
            LogRecord::Step(_) => None,
        })
        .collect()
}
