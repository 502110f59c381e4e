//! Global/local motion separation for dense optical flow.
//!
//! The crate estimates the camera-induced (global) part of a mixed flow field
//! with a per-axis affine model recovered from robust border statistics,
//! extracts the residual (local) player motion with a magnitude threshold,
//! classifies clips into group activities from both streams, and fuses the
//! activity with a shot-outcome prediction into semantic events.
//!
//! Modules, bottom-up:
//! - [`flow`]: flow fields, `.flo` I/O, color-wheel rendering.
//! - [`camera`]: the camera model, its synthesis, fitting and labels.
//! - [`separation`]: global/local separation.
//! - [`descriptor`]: motion descriptors and the two-stream classifier.
//! - [`events`]: Kronecker event fusion and the shot-outcome rule.
//! - [`metrics`]: confusion matrices, accuracy, MAP.
//! - [`synth`]: synthetic clips with exact ground truth.
//! - [`pipeline`], [`manifest`], [`cli`]: glue and the command-line tool.

pub mod camera;
pub mod cli;
pub mod descriptor;
pub mod events;
pub mod flow;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod separation;
pub mod synth;

pub use camera::{
    classify_camera_motion, compose, displacement_field, fit_model, CameraMotionLabel,
    GlobalMotionModel, MotionTolerance,
};
pub use descriptor::{
    compute_descriptor, fuse_streams, predict, train, train_classifier, Activity, ClipStream,
    DescriptorConfig, MotionDescriptor, ProbVector, SoftmaxModel, StreamKind, TrainConfig,
};
pub use events::{
    binarize, clip_success, kronecker_fuse, merge_steal, threshold_sweep, EventKind, EventVector,
    FrameSuccessScores, Outcome,
};
pub use flow::{color_code, flow_stats, read_flow, write_flow, FlowField, FlowStats};
pub use metrics::{accuracy, confusion, mean_average_precision, ConfusionMatrix};
pub use separation::{
    estimate_corners, estimate_global, estimate_local, separate, trimmed_mean_middle60,
    CornerEstimates, SeparationResult,
};
