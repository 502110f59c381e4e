//! Synthetic labeled clips with exact ground truth.
//!
//! Every frame's global flow comes from a scripted camera model, local flow
//! from rigid disks ("actors") moving at constant per-frame velocity, and the
//! mixed flow is their sum plus optional Gaussian noise. Frame success scores
//! emulate a basket-region classifier: a low baseline, with one late spike on
//! successful shots.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{compose, displacement_field, GlobalMotionModel};
use crate::descriptor::{
    compute_descriptor, Activity, ClipStream, DescriptorConfig, StreamKind, NUM_ACTIVITIES,
};
use crate::events::{FrameSuccessScores, Outcome};
use crate::flow::FlowField;

/// Success spikes land within this many frames of the clip end.
pub const SCORE_BUMP_WINDOW: usize = 6;

const PAN_SPEED: (f64, f64) = (3.0, 7.0);
const STILL_JITTER: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid clip spec: {0}")]
    InvalidSpec(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::InvalidSpec(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSegment {
    pub model: GlobalMotionModel,
    pub frames: Range<usize>,
}

/// A rigid disk. Its velocity flips sign from frame `reverse_at` onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub start: [f64; 2],
    pub radius: f64,
    pub velocity: [f64; 2],
    pub reverse_at: Option<usize>,
}

impl Actor {
    pub fn velocity_at(&self, t: usize) -> [f64; 2] {
        match self.reverse_at {
            Some(r) if t >= r => [-self.velocity[0], -self.velocity[1]],
            _ => self.velocity,
        }
    }

    /// Disk center at each frame.
    pub fn path(&self, frames: usize) -> Vec<[f64; 2]> {
        let mut c = self.start;
        (0..frames)
            .map(|t| {
                let here = c;
                let v = self.velocity_at(t);
                c = [c[0] + v[0], c[1] + v[1]];
                here
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClipSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub camera_script: Vec<CameraSegment>,
    pub actors: Vec<Actor>,
    pub activity: usize,
    pub sf: Option<Outcome>,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Require every actor to stay at least one pixel clear of the borders.
    pub clean_edges: bool,
}

impl SynthClipSpec {
    /// A static-camera clip with no actors.
    pub fn still(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            camera_script: vec![CameraSegment {
                model: GlobalMotionModel::IDENTITY,
                frames: 0..frames,
            }],
            actors: Vec::new(),
            activity: 0,
            sf: None,
            noise_sigma: 0.0,
            seed: 0,
            clean_edges: true,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width < 2 || self.height < 2 {
            return invalid(format!("frame size {}x{}", self.width, self.height));
        }
        if self.frames == 0 {
            return invalid("zero frames");
        }
        if self.activity >= NUM_ACTIVITIES {
            return invalid(format!("activity {}", self.activity));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid(format!("noise sigma {}", self.noise_sigma));
        }
        let mut next = 0;
        for seg in &self.camera_script {
            if seg.frames.start != next || seg.frames.end <= seg.frames.start {
                return invalid("camera spans must partition the clip in order");
            }
            next = seg.frames.end;
        }
        if next != self.frames {
            return invalid("camera spans must cover every frame");
        }
        for (i, a) in self.actors.iter().enumerate() {
            let finite = a.start.iter().chain(&a.velocity).all(|v| v.is_finite());
            if !finite || !(a.radius > 0.0) {
                return invalid(format!("actor {i} has invalid geometry"));
            }
            if self.clean_edges {
                let (lo_x, hi_x) = (1.0, self.width as f64 - 2.0);
                let (lo_y, hi_y) = (1.0, self.height as f64 - 2.0);
                for c in a.path(self.frames) {
                    if c[0] - a.radius < lo_x
                        || c[0] + a.radius > hi_x
                        || c[1] - a.radius < lo_y
                        || c[1] + a.radius > hi_y
                    {
                        return invalid(format!("actor {i} touches the frame margin"));
                    }
                }
            }
        }
        Ok(())
    }

    fn model_at(&self, t: usize) -> GlobalMotionModel {
        self.camera_script
            .iter()
            .find(|s| s.frames.contains(&t))
            .map(|s| s.model)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub global: ClipStream,
    pub local: ClipStream,
    pub mixed: ClipStream,
    pub scores: FrameSuccessScores,
    pub activity: usize,
    pub sf: Option<Outcome>,
}

fn paint_actors(spec: &SynthClipSpec, paths: &[Vec<[f64; 2]>], t: usize) -> FlowField {
    let (w, h) = (spec.width, spec.height);
    let mut data = vec![[0.0; 2]; w * h];
    for (a, path) in spec.actors.iter().zip(paths) {
        let c = path[t];
        let v = a.velocity_at(t);
        let r2 = a.radius * a.radius;
        let y0 = (c[1] - a.radius).floor().max(0.0) as usize;
        let y1 = ((c[1] + a.radius).ceil().max(0.0) as usize).min(h - 1);
        let x0 = (c[0] - a.radius).floor().max(0.0) as usize;
        let x1 = ((c[0] + a.radius).ceil().max(0.0) as usize).min(w - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 - c[0], y as f64 - c[1]);
                if dx * dx + dy * dy <= r2 {
                    data[y * w + x] = v;
                }
            }
        }
    }
    FlowField::from_parts_unchecked(w, h, data)
}

fn success_scores(spec: &SynthClipSpec, rng: &mut ChaCha8Rng) -> FrameSuccessScores {
    let mut scores: Vec<f64> = (0..spec.frames)
        .map(|_| rng.random_range(0.02..=0.3))
        .collect();
    if spec.sf == Some(Outcome::Success) {
        let window = SCORE_BUMP_WINDOW.min(spec.frames);
        let t = spec.frames - 1 - rng.random_range(0..window);
        scores[t] = rng.random_range(0.76..=0.99);
    }
    FrameSuccessScores::new(scores).expect("scores are within [0, 1]")
}

pub fn generate_clip(spec: &SynthClipSpec) -> Result<SynthClip, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let paths: Vec<_> = spec.actors.iter().map(|a| a.path(spec.frames)).collect();

    let mut global = Vec::with_capacity(spec.frames);
    let mut local = Vec::with_capacity(spec.frames);
    let mut mixed = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let g = displacement_field(&spec.model_at(t), spec.width, spec.height)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        let l = paint_actors(spec, &paths, t);
        let mut m = g.add(&l);
        if spec.noise_sigma > 0.0 {
            let data = m
                .data()
                .iter()
                .map(|v| [v[0] + noise.sample(&mut rng), v[1] + noise.sample(&mut rng)])
                .collect();
            m = FlowField::from_parts_unchecked(spec.width, spec.height, data);
        }
        global.push(g);
        local.push(l);
        mixed.push(m);
    }
    let scores = success_scores(spec, &mut rng);
    let stream = |kind, frames| ClipStream::new(kind, frames).expect("uniform non-empty frames");
    Ok(SynthClip {
        global: stream(StreamKind::Global, global),
        local: stream(StreamKind::Local, local),
        mixed: stream(StreamKind::Mixed, mixed),
        scores,
        activity: spec.activity,
        sf: spec.sf,
    })
}

/// Frame geometry and noise shared by every clip of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 16,
            noise_sigma: 0.05,
        }
    }
}

/// Draws a clip spec for one activity.
pub trait MotifTemplate: Sync {
    fn activity(&self) -> usize;
    fn sample(&self, config: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthClipSpec;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CameraMotif {
    /// Pan, then zoom in on the basket.
    PanThenZoom,
    /// Nearly motionless.
    Still,
    /// Steady pan over the whole clip.
    Pan,
    /// Short pan, then a fast zoom.
    FastZoom,
    /// Pan that reverses halfway.
    Reversal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActorMotif {
    /// A few players spread over the left of the court converging on the basket.
    Scattered,
    /// A tight crowd jostling under the basket.
    Crowd,
    /// One fast player driving to the basket.
    Driver,
    /// Players running one way, then turning back.
    Counterattack,
}

/// The built-in template for each activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityMotif {
    pub activity: Activity,
    camera: CameraMotif,
    actors: ActorMotif,
}

impl ActivityMotif {
    pub fn for_activity(activity: Activity) -> Self {
        use ActorMotif::*;
        use CameraMotif::*;
        let (camera, actors) = match activity {
            Activity::ThreePoint => (PanThenZoom, Scattered),
            Activity::FreeThrow => (Still, Crowd),
            Activity::Layup => (Pan, Crowd),
            Activity::TwoPoint => (PanThenZoom, Crowd),
            Activity::SlamDunk => (FastZoom, Driver),
            Activity::Steal => (Reversal, Counterattack),
        };
        Self {
            activity,
            camera,
            actors,
        }
    }
}

/// Templates for all six activities in class order.
pub fn default_templates() -> Vec<ActivityMotif> {
    Activity::ALL
        .into_iter()
        .map(ActivityMotif::for_activity)
        .collect()
}

fn jitter(rng: &mut ChaCha8Rng, amp: f64) -> f64 {
    rng.random_range(-amp..=amp)
}

fn camera_script(motif: CameraMotif, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<CameraSegment> {
    let n = cfg.frames;
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let half = (n / 2).max(1).min(n);
    // broadcast cameras track the play fast; players move slower than the pan
    let pan_speed = rng.random_range(PAN_SPEED.0..=PAN_SPEED.1);
    let drift = jitter(rng, 0.3);
    // basket sits right of center; zooms center near it
    let zoom_center = |rng: &mut ChaCha8Rng| {
        (
            w * (0.6 + jitter(rng, 0.08)),
            h * (0.5 + jitter(rng, 0.08)),
        )
    };
    let seg = |model, frames: Range<usize>| CameraSegment { model, frames };
    let split = |first: GlobalMotionModel, second: GlobalMotionModel, at: usize| {
        if at >= n {
            vec![seg(first, 0..n)]
        } else {
            vec![seg(first, 0..at), seg(second, at..n)]
        }
    };
    match motif {
        CameraMotif::Still => vec![seg(
            GlobalMotionModel::translation(jitter(rng, STILL_JITTER), jitter(rng, STILL_JITTER)),
            0..n,
        )],
        CameraMotif::Pan => vec![seg(GlobalMotionModel::translation(-pan_speed, drift), 0..n)],
        CameraMotif::PanThenZoom => {
            let (cx, cy) = zoom_center(rng);
            let zoom = GlobalMotionModel::zoom_about(1.0 + rng.random_range(0.06..=0.12), cx, cy)
                .expect("positive scale");
            let pan = GlobalMotionModel::translation(-pan_speed, drift);
            // the pan eases off while the camera zooms
            let slow = GlobalMotionModel::translation(-pan_speed * 0.5, drift);
            split(pan, compose(&slow, &zoom), half)
        }
        CameraMotif::FastZoom => {
            let (cx, cy) = zoom_center(rng);
            let zoom = GlobalMotionModel::zoom_about(1.0 + rng.random_range(0.18..=0.27), cx, cy)
                .expect("positive scale");
            let pan = GlobalMotionModel::translation(-pan_speed, drift);
            split(pan, compose(&pan, &zoom), (n / 4).max(1))
        }
        CameraMotif::Reversal => split(
            GlobalMotionModel::translation(-pan_speed, drift),
            GlobalMotionModel::translation(pan_speed, -drift),
            half,
        ),
    }
}

/// Places an actor so that its whole path keeps a clean margin, shrinking the
/// velocity if the frame is too small for the requested run.
fn place_actor(
    cfg: &SynthConfig,
    radius: f64,
    mut velocity: [f64; 2],
    reverse_at: Option<usize>,
    anchor: [f64; 2],
) -> Actor {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    // slack absorbs rounding between the probe path and the placed path
    let lo = 1.0 + radius + 1e-9;
    let (hi_x, hi_y) = (w - 2.0 - radius - 1e-9, h - 2.0 - radius - 1e-9);
    if hi_x < lo || hi_y < lo {
        return Actor {
            start: [w / 2.0, h / 2.0],
            radius: radius.min(w.min(h) / 4.0).max(0.5),
            velocity: [0.0, 0.0],
            reverse_at: None,
        };
    }
    loop {
        let probe = Actor {
            start: [0.0, 0.0],
            radius,
            velocity,
            reverse_at,
        };
        let path = probe.path(cfg.frames);
        let (mut min, mut max) = ([f64::MAX; 2], [f64::MIN; 2]);
        for p in &path {
            for k in 0..2 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        let span = [max[0] - min[0], max[1] - min[1]];
        if span[0] <= hi_x - lo && span[1] <= hi_y - lo {
            // anchor is where the path's bounding box is centered, clamped inside
            let start = [
                (anchor[0] - (min[0] + max[0]) / 2.0).clamp(lo - min[0], hi_x - max[0]),
                (anchor[1] - (min[1] + max[1]) / 2.0).clamp(lo - min[1], hi_y - max[1]),
            ];
            return Actor {
                start,
                radius,
                velocity,
                reverse_at,
            };
        }
        velocity = [velocity[0] * 0.8, velocity[1] * 0.8];
    }
}

fn actors(motif: ActorMotif, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Actor> {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let basket = [w * 0.8, h * 0.5];
    let r = (w.min(h) / 20.0).max(1.5);
    match motif {
        ActorMotif::Scattered => (0..3)
            .map(|_| {
                let anchor = [w * rng.random_range(0.2..=0.4), h * rng.random_range(0.2..=0.8)];
                let (dx, dy) = (basket[0] - anchor[0], basket[1] - anchor[1]);
                let norm = (dx * dx + dy * dy).sqrt().max(1e-9);
                let speed = rng.random_range(2.0..=3.0);
                place_actor(cfg, r, [speed * dx / norm, speed * dy / norm], None, anchor)
            })
            .collect(),
        ActorMotif::Crowd => (0..8)
            .map(|_| {
                let anchor = [
                    basket[0] - w * rng.random_range(0.0..=0.15),
                    basket[1] + h * jitter(rng, 0.12),
                ];
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = rng.random_range(1.5..=3.0);
                let reverse = Some(rng.random_range(2..cfg.frames.max(3)));
                place_actor(
                    cfg,
                    r * 0.8,
                    [speed * angle.cos(), speed * angle.sin()],
                    reverse,
                    anchor,
                )
            })
            .collect(),
        ActorMotif::Driver => {
            let anchor = [w * 0.5, h * (0.5 + jitter(rng, 0.2))];
            let speed = rng.random_range(4.0..=6.0);
            let dy = (basket[1] - anchor[1]) / w;
            vec![place_actor(cfg, r * 1.2, [speed, speed * dy], None, anchor)]
        }
        ActorMotif::Counterattack => (0..4)
            .map(|_| {
                let anchor = [w * rng.random_range(0.35..=0.65), h * rng.random_range(0.25..=0.75)];
                let speed = rng.random_range(2.0..=3.0);
                place_actor(
                    cfg,
                    r,
                    [-speed, jitter(rng, 0.5)],
                    Some((cfg.frames / 2).max(1)),
                    anchor,
                )
            })
            .collect(),
    }
}

impl MotifTemplate for ActivityMotif {
    fn activity(&self) -> usize {
        self.activity.index()
    }

    fn sample(&self, config: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthClipSpec {
        let camera_script = camera_script(self.camera, config, rng);
        let actors = actors(self.actors, config, rng);
        let sf = if self.activity == Activity::Steal {
            None
        } else if rng.random_bool(0.5) {
            Some(Outcome::Success)
        } else {
            Some(Outcome::Failure)
        };
        SynthClipSpec {
            width: config.width,
            height: config.height,
            frames: config.frames,
            camera_script,
            actors,
            activity: self.activity.index(),
            sf,
            noise_sigma: config.noise_sigma,
            seed: rng.random(),
            clean_edges: true,
        }
    }
}

/// Specs for a balanced dataset: `per_class` clips of each template, in
/// template-major order. Each clip is fully determined by its spec.
pub fn dataset_specs<T: MotifTemplate>(
    per_class: usize,
    templates: &[T],
    config: &SynthConfig,
    seed: u64,
) -> Result<Vec<SynthClipSpec>, SynthError> {
    if per_class == 0 {
        return invalid("per_class must be at least 1");
    }
    let mut seen = [false; NUM_ACTIVITIES];
    for t in templates {
        if t.activity() >= NUM_ACTIVITIES {
            return invalid(format!("template activity {}", t.activity()));
        }
        seen[t.activity()] = true;
    }
    if templates.len() != NUM_ACTIVITIES || !seen.iter().all(|s| *s) {
        return invalid("need exactly one template per activity");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(per_class * templates.len());
    for t in templates {
        for _ in 0..per_class {
            let spec = t.sample(config, &mut rng);
            spec.validate()?;
            specs.push(spec);
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub specs: Vec<SynthClipSpec>,
    pub clips: Vec<SynthClip>,
}

pub fn generate_dataset<T: MotifTemplate>(
    per_class: usize,
    templates: &[T],
    config: &SynthConfig,
    seed: u64,
) -> Result<SynthDataset, SynthError> {
    let specs = dataset_specs(per_class, templates, config, seed)?;
    let clips = specs
        .par_iter()
        .map(generate_clip)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SynthDataset { specs, clips })
}

/// Leave-one-out nearest-centroid accuracy on concatenated ground-truth
/// global and local descriptors. Checks that the templates are separable.
pub fn nearest_centroid_accuracy(dataset: &SynthDataset, config: DescriptorConfig) -> f64 {
    let feats: Vec<(Vec<f64>, usize)> = dataset
        .clips
        .par_iter()
        .map(|c| {
            let g = compute_descriptor(&c.global, config).expect("clip long enough");
            let l = compute_descriptor(&c.local, config).expect("clip long enough");
            (g.concat(&l), c.activity)
        })
        .collect();
    let dim = feats.first().map_or(0, |f| f.0.len());
    let mut sums = vec![vec![0.0; dim]; NUM_ACTIVITIES];
    let mut counts = [0usize; NUM_ACTIVITIES];
    for (f, c) in &feats {
        sums[*c].iter_mut().zip(f).for_each(|(s, v)| *s += v);
        counts[*c] += 1;
    }
    let correct = feats
        .iter()
        .filter(|(f, c)| {
            let mut best = (f64::MAX, 0);
            for k in 0..NUM_ACTIVITIES {
                let n = counts[k] - usize::from(k == *c);
                if n == 0 {
                    continue;
                }
                let d: f64 = sums[k]
                    .iter()
                    .zip(f)
                    .map(|(s, v)| {
                        let own = if k == *c { *v } else { 0.0 };
                        let mean = (s - own) / n as f64;
                        (mean - v) * (mean - v)
                    })
                    .sum();
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1 == *c
        })
        .count();
    correct as f64 / feats.len().max(1) as f64
}
