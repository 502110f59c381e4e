//! Motion-pattern descriptors and the per-stream activity classifier.
//!
//! A clip stream (a sequence of flow fields) is summarized as a spatio-temporal
//! histogram of flow directions: frames are grouped into `T` contiguous
//! segments, each frame is tiled into an `S`×`S` grid, and every (cell,
//! segment) block collects a magnitude-weighted histogram over `B` direction
//! bins plus a total-magnitude channel. Each block is L2-normalized.
//!
//! A linear softmax classifier is trained per stream on the cross-entropy
//! loss with class-balanced mini-batches, and the two streams are combined by
//! a weighted average of their output probabilities.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flow::FlowField;

pub const NUM_ACTIVITIES: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("clip has {frames} frames, fewer than {segments} temporal segments")]
    ClipTooShort { frames: usize, segments: usize },
    #[error("clip frames have mismatched dimensions")]
    NonUniformClip,
    #[error("empty clip")]
    EmptyClip,
    #[error("descriptor configuration values must be at least 1")]
    InvalidConfig,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("activity class {0} has no training examples")]
    MissingClass(usize),
    #[error("label {0} out of range")]
    LabelOutOfRange(usize),
    #[error("invalid probability vector")]
    InvalidProbabilities,
    #[error("fusion weight ratio must be positive, got {0}")]
    InvalidWeight(f64),
}

/// The six group activities, in the canonical class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activity {
    ThreePoint = 0,
    FreeThrow = 1,
    Layup = 2,
    TwoPoint = 3,
    SlamDunk = 4,
    Steal = 5,
}

impl Activity {
    pub const ALL: [Activity; NUM_ACTIVITIES] = [
        Activity::ThreePoint,
        Activity::FreeThrow,
        Activity::Layup,
        Activity::TwoPoint,
        Activity::SlamDunk,
        Activity::Steal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::ThreePoint => "3-point",
            Activity::FreeThrow => "free-throw",
            Activity::Layup => "layup",
            Activity::TwoPoint => "2-point",
            Activity::SlamDunk => "slam-dunk",
            Activity::Steal => "steal",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(i) = s.parse::<usize>() {
            return Self::from_index(i).ok_or_else(|| format!("activity index {i} out of range"));
        }
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "-");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| format!("unknown activity {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Global,
    Local,
    Mixed,
}

impl StreamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::Global => "global",
            StreamKind::Local => "local",
            StreamKind::Mixed => "mixed",
        }
    }
}

impl FromStr for StreamKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(StreamKind::Global),
            "local" => Ok(StreamKind::Local),
            "mixed" => Ok(StreamKind::Mixed),
            _ => Err(format!("unknown stream kind {s:?}")),
        }
    }
}

/// An ordered run of same-sized flow fields from one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipStream {
    kind: StreamKind,
    frames: Vec<FlowField>,
}

impl ClipStream {
    pub fn new(kind: StreamKind, frames: Vec<FlowField>) -> Result<Self, DescriptorError> {
        let first = frames.first().ok_or(DescriptorError::EmptyClip)?;
        if frames.iter().any(|f| f.dims() != first.dims()) {
            return Err(DescriptorError::NonUniformClip);
        }
        Ok(Self { kind, frames })
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn frames(&self) -> &[FlowField] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptorConfig {
    /// Spatial grid side.
    pub grid: usize,
    /// Temporal segments.
    pub segments: usize,
    /// Direction bins.
    pub bins: usize,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            grid: 4,
            segments: 4,
            bins: 8,
        }
    }
}

impl DescriptorConfig {
    pub fn len(&self) -> usize {
        self.grid * self.grid * self.segments * (self.bins + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<(), DescriptorError> {
        if self.grid == 0 || self.segments == 0 || self.bins == 0 {
            Err(DescriptorError::InvalidConfig)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDescriptor {
    pub config: DescriptorConfig,
    pub values: Vec<f64>,
}

impl MotionDescriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Concatenation of two descriptors, used for joint-stream baselines.
    pub fn concat(&self, other: &MotionDescriptor) -> Vec<f64> {
        self.values.iter().chain(&other.values).copied().collect()
    }
}

/// Direction bin of a nonzero vector. Bin `k` is centered on angle `k·2π/B`
/// measured by `atan2(dy, dx)`.
#[inline]
fn direction_bin(v: [f64; 2], bins: usize) -> usize {
    let angle = v[1].atan2(v[0]).rem_euclid(TAU);
    let k = (angle / (TAU / bins as f64)).round() as usize;
    k % bins
}

pub fn compute_descriptor(
    clip: &ClipStream,
    config: DescriptorConfig,
) -> Result<MotionDescriptor, DescriptorError> {
    config.validate()?;
    let DescriptorConfig {
        grid,
        segments,
        bins,
    } = config;
    let n = clip.len();
    if n < segments {
        return Err(DescriptorError::ClipTooShort {
            frames: n,
            segments,
        });
    }
    let (w, h) = clip.dims();
    let seg_len = n / segments;
    let block = bins + 1;
    let mut values = vec![0.0; config.len()];
    let cell_x: Vec<usize> = (0..w).map(|x| x * grid / w).collect();

    for (t, frame) in clip.frames().iter().enumerate() {
        let seg = (t / seg_len).min(segments - 1);
        for y in 0..h {
            let cy = y * grid / h;
            let row_base = (seg * grid + cy) * grid;
            for (x, v) in frame.row(y).iter().enumerate() {
                let mag = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if mag > 0.0 {
                    let base = (row_base + cell_x[x]) * block;
                    values[base + direction_bin(*v, bins)] += mag;
                    values[base + bins] += mag;
                }
            }
        }
    }

    for chunk in values.chunks_exact_mut(block) {
        let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            chunk.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(MotionDescriptor { config, values })
}

/// A probability distribution over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accepts a vector of entries in [0, 1] summing to 1 within 1e-6.
    pub fn new(probs: Vec<f64>) -> Result<Self, DescriptorError> {
        let ok = !probs.is_empty()
            && probs.iter().all(|p| (0.0..=1.0).contains(p))
            && (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6;
        if ok {
            Ok(Self(probs))
        } else {
            Err(DescriptorError::InvalidProbabilities)
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Linear softmax classifier, `p = softmax(W·d + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    classes: usize,
    dim: usize,
    /// Row-major `classes × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl SoftmaxModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn from_parts(
        classes: usize,
        dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, DescriptorError> {
        if weights.len() != classes * dim {
            return Err(DescriptorError::DimensionMismatch {
                expected: classes * dim,
                actual: weights.len(),
            });
        }
        if bias.len() != classes {
            return Err(DescriptorError::DimensionMismatch {
                expected: classes,
                actual: bias.len(),
            });
        }
        Ok(Self {
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>, DescriptorError> {
        if features.len() != self.dim {
            return Err(DescriptorError::DimensionMismatch {
                expected: self.dim,
                actual: features.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>, DescriptorError> {
        Ok(softmax(&self.logits(features)?))
    }

    /// Cross-entropy `−log p_label` of one example.
    pub fn loss(&self, features: &[f64], label: usize) -> Result<f64, DescriptorError> {
        if label >= self.classes {
            return Err(DescriptorError::LabelOutOfRange(label));
        }
        let logits = self.logits(features)?;
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        Ok(lse - logits[label])
    }

    /// Gradient of [`loss`](Self::loss) w.r.t. weights (row-major) and bias.
    pub fn gradient(
        &self,
        features: &[f64],
        label: usize,
    ) -> Result<(Vec<f64>, Vec<f64>), DescriptorError> {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.classes];
        self.accumulate_gradient(features, label, 1.0, &mut gw, &mut gb)?;
        Ok((gw, gb))
    }

    /// Adds `scale · ∇loss` into the buffers and returns the loss.
    fn accumulate_gradient(
        &self,
        features: &[f64],
        label: usize,
        scale: f64,
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Result<f64, DescriptorError> {
        if label >= self.classes {
            return Err(DescriptorError::LabelOutOfRange(label));
        }
        let p = self.probabilities(features)?;
        for (c, (row, pc)) in gw.chunks_exact_mut(self.dim).zip(&p).enumerate() {
            let err = pc - if c == label { 1.0 } else { 0.0 };
            gb[c] += scale * err;
            if err != 0.0 {
                for (g, x) in row.iter_mut().zip(features) {
                    *g += scale * err * x;
                }
            }
        }
        Ok(-p[label].max(f64::MIN_POSITIVE).ln())
    }
}

pub fn predict(
    model: &SoftmaxModel,
    descriptor: &MotionDescriptor,
) -> Result<ProbVector, DescriptorError> {
    Ok(ProbVector(model.probabilities(&descriptor.values)?))
}

/// Weighted average `(w·p_global + p_local) / (w + 1)`.
pub fn fuse_streams(
    p_global: &ProbVector,
    p_local: &ProbVector,
    weight_ratio: f64,
) -> Result<ProbVector, DescriptorError> {
    if p_global.len() != p_local.len() {
        return Err(DescriptorError::DimensionMismatch {
            expected: p_global.len(),
            actual: p_local.len(),
        });
    }
    if !(weight_ratio > 0.0 && weight_ratio.is_finite()) {
        return Err(DescriptorError::InvalidWeight(weight_ratio));
    }
    let mut fused: Vec<f64> = p_global
        .0
        .iter()
        .zip(&p_local.0)
        .map(|(g, l)| (weight_ratio * g + l) / (weight_ratio + 1.0))
        .collect();
    let sum: f64 = fused.iter().sum();
    fused.iter_mut().for_each(|p| *p /= sum);
    Ok(ProbVector(fused))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Fixed-step gradient descent.
    Sgd,
    /// Adam with the usual (0.9, 0.999, 1e-8) moment constants.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchMode {
    /// 3 examples per class, 18 per batch.
    Balanced,
    /// Every example once per step.
    FullBatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub batch: BatchMode,
    pub per_class: usize,
    /// L2 penalty `λ/2 · ‖W‖²` on the weights (not the bias).
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 200,
            seed: 0,
            optimizer: Optimizer::Adam,
            batch: BatchMode::Balanced,
            per_class: 3,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-example loss over each epoch's batches, penalty included.
    pub epoch_losses: Vec<f64>,
}

/// Yields class-balanced batches: `per_class` examples of every class in
/// each batch. Each class pool is shuffled and consumed without replacement,
/// and reshuffled once exhausted, so scarce classes repeat.
pub struct BalancedSampler {
    pools: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    per_class: usize,
    rng: ChaCha8Rng,
}

impl BalancedSampler {
    pub fn new(
        labels: &[usize],
        classes: usize,
        per_class: usize,
        seed: u64,
    ) -> Result<Self, DescriptorError> {
        if labels.is_empty() {
            return Err(DescriptorError::EmptyDataset);
        }
        let mut pools = vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            pools
                .get_mut(l)
                .ok_or(DescriptorError::LabelOutOfRange(l))?
                .push(i);
        }
        if let Some(c) = pools.iter().position(Vec::is_empty) {
            return Err(DescriptorError::MissingClass(c));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut pools {
            p.shuffle(&mut rng);
        }
        Ok(Self {
            cursors: vec![0; classes],
            pools,
            per_class,
            rng,
        })
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.pools.len() * self.per_class);
        for (pool, cursor) in self.pools.iter_mut().zip(&mut self.cursors) {
            for _ in 0..self.per_class {
                if *cursor == pool.len() {
                    pool.shuffle(&mut self.rng);
                    *cursor = 0;
                }
                batch.push(pool[*cursor]);
                *cursor += 1;
            }
        }
        batch
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains one softmax classifier on `(features, label)` pairs.
///
/// Weights start at zero. An epoch is `ceil(n / batch_size)` balanced batches
/// or one full-batch step.
pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: &TrainConfig,
) -> Result<(SoftmaxModel, TrainReport), DescriptorError> {
    if features.is_empty() {
        return Err(DescriptorError::EmptyDataset);
    }
    if features.len() != labels.len() {
        return Err(DescriptorError::DimensionMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(DescriptorError::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let lr_ok = config.learning_rate.is_finite() && config.learning_rate > 0.0;
    let wd_ok = config.weight_decay.is_finite() && config.weight_decay >= 0.0;
    if !lr_ok || !wd_ok {
        return Err(DescriptorError::InvalidConfig);
    }
    let mut sampler = BalancedSampler::new(labels, classes, config.per_class.max(1), config.seed)?;
    let mut model = SoftmaxModel::zeros(classes, dim);
    let n_params = classes * dim + classes;
    let mut adam = AdamState::new(n_params);
    let mut grad = vec![0.0; n_params];
    let mut params = vec![0.0; n_params];

    let batch_size = classes * config.per_class.max(1);
    let steps_per_epoch = match config.batch {
        BatchMode::Balanced => features.len().div_ceil(batch_size),
        BatchMode::FullBatch => 1,
    };
    let all: Vec<usize> = (0..features.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for _ in 0..steps_per_epoch {
            let batch = match config.batch {
                BatchMode::Balanced => sampler.next_batch(),
                BatchMode::FullBatch => all.clone(),
            };
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let (gw, gb) = grad.split_at_mut(classes * dim);
            for &i in &batch {
                loss_sum += model.accumulate_gradient(&features[i], labels[i], scale, gw, gb)?;
            }
            if config.weight_decay > 0.0 {
                let mut penalty = 0.0;
                for (g, w) in gw.iter_mut().zip(&model.weights) {
                    *g += config.weight_decay * w;
                    penalty += w * w;
                }
                loss_sum += 0.5 * config.weight_decay * penalty * batch.len() as f64;
            }
            count += batch.len();
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.weights.iter_mut().zip(gw.iter()) {
                        *p -= config.learning_rate * g;
                    }
                    for (p, g) in model.bias.iter_mut().zip(gb.iter()) {
                        *p -= config.learning_rate * g;
                    }
                }
                Optimizer::Adam => {
                    params[..classes * dim].copy_from_slice(&model.weights);
                    params[classes * dim..].copy_from_slice(&model.bias);
                    adam.step(&mut params, &grad, config.learning_rate);
                    model.weights.copy_from_slice(&params[..classes * dim]);
                    model.bias.copy_from_slice(&params[classes * dim..]);
                }
            }
        }
        epoch_losses.push(loss_sum / count as f64);
    }
    Ok((model, TrainReport { epoch_losses }))
}

/// One labeled clip for two-stream training: global and local descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamExample {
    pub global: MotionDescriptor,
    pub local: MotionDescriptor,
    pub activity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamModel {
    pub global: SoftmaxModel,
    pub local: SoftmaxModel,
}

impl TwoStreamModel {
    pub fn predict(
        &self,
        global: &MotionDescriptor,
        local: &MotionDescriptor,
        weight_ratio: f64,
    ) -> Result<ProbVector, DescriptorError> {
        fuse_streams(
            &predict(&self.global, global)?,
            &predict(&self.local, local)?,
            weight_ratio,
        )
    }
}

/// Trains the global and local stream classifiers independently with the
/// same configuration.
pub fn train(
    dataset: &[TwoStreamExample],
    config: &TrainConfig,
) -> Result<(TwoStreamModel, TrainReport, TrainReport), DescriptorError> {
    if dataset.is_empty() {
        return Err(DescriptorError::EmptyDataset);
    }
    let labels: Vec<usize> = dataset.iter().map(|e| e.activity).collect();
    let g: Vec<Vec<f64>> = dataset.iter().map(|e| e.global.values.clone()).collect();
    let l: Vec<Vec<f64>> = dataset.iter().map(|e| e.local.values.clone()).collect();
    let (global, rg) = train_classifier(&g, &labels, NUM_ACTIVITIES, config)?;
    let (local, rl) = train_classifier(&l, &labels, NUM_ACTIVITIES, config)?;
    Ok((TwoStreamModel { global, local }, rg, rl))
}
