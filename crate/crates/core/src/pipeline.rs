//! Clip-level glue: separate every frame of a clip, turn the resulting
//! streams into descriptors, and persist trained stream classifiers.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::descriptor::{
    compute_descriptor, fuse_streams, predict, ClipStream, DescriptorConfig, DescriptorError,
    MotionDescriptor, ProbVector, SoftmaxModel, StreamKind,
};
use crate::separation::{separate, SeparationError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model has no {0} stream")]
    MissingStream(&'static str),
}

/// Separates each frame; returns the (global, local) streams.
pub fn separate_clip(
    mixed: &ClipStream,
    threshold: f64,
) -> Result<(ClipStream, ClipStream), PipelineError> {
    let results = mixed
        .frames()
        .par_iter()
        .map(|f| separate(f, threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let (global, local): (Vec<_>, Vec<_>) = results.into_iter().map(|r| (r.global, r.local)).unzip();
    Ok((
        ClipStream::new(StreamKind::Global, global)?,
        ClipStream::new(StreamKind::Local, local)?,
    ))
}

/// Descriptors of all three streams of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures {
    pub global: MotionDescriptor,
    pub local: MotionDescriptor,
    pub mixed: MotionDescriptor,
}

impl ClipFeatures {
    pub fn stream(&self, kind: StreamKind) -> &MotionDescriptor {
        match kind {
            StreamKind::Global => &self.global,
            StreamKind::Local => &self.local,
            StreamKind::Mixed => &self.mixed,
        }
    }
}

pub fn clip_features(
    mixed: &ClipStream,
    threshold: f64,
    config: DescriptorConfig,
) -> Result<ClipFeatures, PipelineError> {
    let (global, local) = separate_clip(mixed, threshold)?;
    Ok(ClipFeatures {
        global: compute_descriptor(&global, config)?,
        local: compute_descriptor(&local, config)?,
        mixed: compute_descriptor(mixed, config)?,
    })
}

const MODEL_HEADER: &str = "motionsep-model 1";

/// Trained stream classifiers plus the settings their inputs were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub descriptor: DescriptorConfig,
    pub threshold: f64,
    pub streams: Vec<(StreamKind, SoftmaxModel)>,
}

impl ModelBundle {
    pub fn stream(&self, kind: StreamKind) -> Option<&SoftmaxModel> {
        self.streams.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }

    pub fn is_two_stream(&self) -> bool {
        self.stream(StreamKind::Global).is_some() && self.stream(StreamKind::Local).is_some()
    }

    /// Activity probabilities for a clip. Two-stream bundles fuse global and
    /// local with `weight_ratio`; single-stream bundles use their only stream.
    pub fn predict(
        &self,
        features: &ClipFeatures,
        weight_ratio: f64,
    ) -> Result<ProbVector, PipelineError> {
        if self.is_two_stream() {
            let g = predict(self.stream(StreamKind::Global).unwrap(), &features.global)?;
            let l = predict(self.stream(StreamKind::Local).unwrap(), &features.local)?;
            return Ok(fuse_streams(&g, &l, weight_ratio)?);
        }
        let (kind, model) = self
            .streams
            .first()
            .ok_or(PipelineError::MissingStream("any"))?;
        Ok(predict(model, features.stream(*kind))?)
    }

    /// Line-oriented text. Floats use the shortest round-trip representation,
    /// so `from_text(to_text(m)) == m` exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.descriptor;
        writeln!(out, "{MODEL_HEADER}").unwrap();
        writeln!(out, "descriptor {} {} {}", d.grid, d.segments, d.bins).unwrap();
        writeln!(out, "threshold {:?}", self.threshold).unwrap();
        for (kind, m) in &self.streams {
            writeln!(out, "stream {} {} {}", kind.as_str(), m.classes(), m.dim()).unwrap();
            for row in m.weights().chunks(m.dim().max(1)) {
                writeln!(out, "w {}", join(row)).unwrap();
            }
            writeln!(out, "b {}", join(m.bias())).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, msg: &str| PipelineError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));

        let (n, header) = next("header")?;
        if header != MODEL_HEADER {
            return Err(err(n, "bad header"));
        }
        let (n, line) = next("descriptor")?;
        let nums = fields(line, "descriptor", n)?;
        if nums.len() != 3 {
            return Err(err(n, "descriptor needs 3 values"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| err(n, "bad integer"));
        let descriptor = DescriptorConfig {
            grid: parse_usize(nums[0])?,
            segments: parse_usize(nums[1])?,
            bins: parse_usize(nums[2])?,
        };
        let (n, line) = next("threshold")?;
        let threshold = floats(&fields(line, "threshold", n)?, n)?
            .first()
            .copied()
            .ok_or_else(|| err(n, "missing threshold"))?;

        let mut streams = Vec::new();
        while let Ok((n, line)) = next("stream") {
            if line.is_empty() {
                continue;
            }
            let head = fields(line, "stream", n)?;
            if head.len() != 3 {
                return Err(err(n, "stream needs kind, classes, dim"));
            }
            let kind: StreamKind = head[0].parse().map_err(|e: String| err(n, &e))?;
            let classes = head[1].parse::<usize>().map_err(|_| err(n, "bad classes"))?;
            let dim = head[2].parse::<usize>().map_err(|_| err(n, "bad dim"))?;
            let mut weights = Vec::with_capacity(classes * dim);
            for _ in 0..classes {
                let (n, line) = next("weight row")?;
                let row = floats(&fields(line, "w", n)?, n)?;
                if row.len() != dim {
                    return Err(err(n, "weight row length"));
                }
                weights.extend(row);
            }
            let (n, line) = next("bias")?;
            let bias = floats(&fields(line, "b", n)?, n)?;
            let model = SoftmaxModel::from_parts(classes, dim, weights, bias)
                .map_err(|e| err(n, &e.to_string()))?;
            if model.dim() != descriptor.len() {
                return Err(err(n, "stream dim does not match descriptor"));
            }
            streams.push((kind, model));
        }
        if streams.is_empty() {
            return Err(PipelineError::MissingStream("any"));
        }
        Ok(Self {
            descriptor,
            threshold,
            streams,
        })
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fields<'a>(line: &'a str, tag: &str, n: usize) -> Result<Vec<&'a str>, PipelineError> {
    let mut it = line.split_ascii_whitespace();
    if it.next() != Some(tag) {
        return Err(PipelineError::Parse {
            line: n,
            msg: format!("expected {tag:?}"),
        });
    }
    Ok(it.collect())
}

fn floats(parts: &[&str], n: usize) -> Result<Vec<f64>, PipelineError> {
    parts
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PipelineError::Parse {
                    line: n,
                    msg: format!("bad number {s:?}"),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> ModelBundle {
        let cfg = DescriptorConfig {
            grid: 1,
            segments: 1,
            bins: 2,
        };
        let mut m = SoftmaxModel::zeros(6, 3);
        m.weights_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = (i as f64).sin() / 3.0);
        m.bias_mut()[2] = -1e-300;
        ModelBundle {
            descriptor: cfg,
            threshold: 1.0,
            streams: vec![(StreamKind::Global, m.clone()), (StreamKind::Local, m)],
        }
    }

    #[test]
    fn model_text_round_trip() {
        let b = bundle();
        let text = b.to_text();
        assert!(text.starts_with("motionsep-model 1\ndescriptor 1 1 2\n"));
        assert_eq!(ModelBundle::from_text(&text).unwrap(), b);
    }

    #[test]
    fn model_text_errors() {
        assert!(ModelBundle::from_text("nope").is_err());
        let text = bundle().to_text().replace("stream local 6 3", "stream local 6 4");
        assert!(ModelBundle::from_text(&text).is_err());
        let text = bundle().to_text().replace("threshold 1.0", "threshold NaN");
        assert!(ModelBundle::from_text(&text).is_err());
        let header_only = "motionsep-model 1\ndescriptor 1 1 2\nthreshold 1.0\n";
        assert!(matches!(
            ModelBundle::from_text(header_only),
            Err(PipelineError::MissingStream(_))
        ));
    }
}
