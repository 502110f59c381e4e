//! Clip manifests: one JSON object per line.
//!
//! ```text
//! {"id":"clip-0001","frames":["clip-0001/mixed-00.flo", ...],"activity":"3-point","sf":"success","scores":[0.1, ...]}
//! ```
//!
//! Frame paths are relative to the manifest's directory unless absolute.
//! `activity` takes a name or an index 0–5; `sf` is `success`, `failure` or
//! `none`; `scores` is optional and must match the frame count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{Activity, ClipStream, StreamKind};
use crate::events::{FrameSuccessScores, Outcome};
use crate::flow::{read_flow, FlowError};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Record {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Flow { path: PathBuf, source: FlowError },
    #[error("clip {id}: {msg}")]
    Clip { id: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub id: String,
    pub frames: Vec<PathBuf>,
    pub activity: String,
    #[serde(default = "none_label")]
    pub sf: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

fn none_label() -> String {
    "none".to_string()
}

/// A validated manifest entry with resolved paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipEntry {
    pub id: String,
    pub frames: Vec<PathBuf>,
    pub activity: Activity,
    pub sf: Option<Outcome>,
    pub scores: Option<FrameSuccessScores>,
}

impl ClipEntry {
    pub fn load_frames(&self) -> Result<ClipStream, ManifestError> {
        let frames = self
            .frames
            .iter()
            .map(|p| load_flow_file(p))
            .collect::<Result<Vec<_>, _>>()?;
        ClipStream::new(StreamKind::Mixed, frames).map_err(|e| ManifestError::Clip {
            id: self.id.clone(),
            msg: e.to_string(),
        })
    }
}

pub fn load_flow_file(path: &Path) -> Result<crate::flow::FlowField, ManifestError> {
    let file = fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_flow(std::io::BufReader::new(file)).map_err(|source| ManifestError::Flow {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_outcome(s: &str) -> Result<Option<Outcome>, String> {
    match s.to_ascii_lowercase().as_str() {
        "success" | "succ" => Ok(Some(Outcome::Success)),
        "failure" | "fail" => Ok(Some(Outcome::Failure)),
        "none" | "" => Ok(None),
        _ => Err(format!("unknown sf label {s:?}")),
    }
}

pub fn outcome_label(sf: Option<Outcome>) -> &'static str {
    match sf {
        Some(Outcome::Success) => "success",
        Some(Outcome::Failure) => "failure",
        None => "none",
    }
}

/// Parses manifest text; `base` resolves relative frame paths.
pub fn parse_manifest(text: &str, base: &Path, source: &Path) -> Result<Vec<ClipEntry>, ManifestError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fail = |msg: String| ManifestError::Record {
            path: source.to_path_buf(),
            line: line_no,
            msg,
        };
        let rec: ClipRecord = serde_json::from_str(trimmed).map_err(|e| fail(e.to_string()))?;
        if rec.frames.is_empty() {
            return Err(fail("no frames".into()));
        }
        let activity: Activity = rec.activity.parse().map_err(fail)?;
        let sf = parse_outcome(&rec.sf).map_err(fail)?;
        let scores = match rec.scores {
            Some(s) if s.len() != rec.frames.len() => {
                return Err(fail(format!(
                    "{} scores for {} frames",
                    s.len(),
                    rec.frames.len()
                )))
            }
            Some(s) => Some(FrameSuccessScores::new(s).map_err(|e| fail(e.to_string()))?),
            None => None,
        };
        let frames = rec
            .frames
            .into_iter()
            .map(|p| if p.is_absolute() { p } else { base.join(p) })
            .collect();
        entries.push(ClipEntry {
            id: rec.id,
            frames,
            activity,
            sf,
            scores,
        });
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ClipEntry>, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base, path)
}

/// One manifest line, without the trailing newline.
pub fn record_line(record: &ClipRecord) -> String {
    serde_json::to_string(record).expect("manifest records always serialize")
}
