//! C ABI over `motionsep`.
//!
//! Conventions:
//! - Every fallible call returns an [`MsStatus`]; results go through out
//!   pointers. On failure the out pointers are left untouched and
//!   [`ms_last_error`] describes the problem.
//! - Handles are opaque and owned by the caller once returned; release them
//!   with the matching `*_free`. Passing NULL to a `*_free` is a no-op.
//! - Panics never cross the boundary; they surface as `MS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use motionsep::descriptor::NUM_ACTIVITIES;
use motionsep::events::EventKind;
use motionsep::pipeline::{clip_features, ModelBundle};
use motionsep::separation::SeparationError;
use motionsep::{
    classify_camera_motion, clip_success, color_code, fit_model, kronecker_fuse, merge_steal,
    read_flow, separate, write_flow, CameraMotionLabel, ClipStream, ConfusionMatrix, EventVector,
    FlowField, FrameSuccessScores, GlobalMotionModel, MotionTolerance, Outcome, StreamKind,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    /// The input cannot be processed, e.g. a frame too small to separate.
    Degenerate = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Camera motion label; values match `ms_camera_label_name`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsCameraLabel {
    Static = 0,
    PanLeft = 1,
    PanRight = 2,
    TiltUp = 3,
    TiltDown = 4,
    ZoomIn = 5,
    ZoomOut = 6,
    Composite = 7,
}

/// Per-axis camera model: x' = m0*x + m1, y' = m2*y + m3.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsCameraModel {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

/// Opaque dense flow field.
pub struct MsFlowField(FlowField);

/// Opaque output of a global/local separation.
pub struct MsSeparation {
    global: FlowField,
    local: FlowField,
}

/// Opaque trained activity classifier.
pub struct MsModelBundle(ModelBundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MsStatus, String);

impl Failure {
    fn new(status: MsStatus, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(MsStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(MsStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::new(MsStatus::NullPointer, "path is NULL"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::new(MsStatus::InvalidArgument, "path is not UTF-8"))
}

fn io_failure(path: &str, e: std::io::Error) -> Failure {
    Failure::new(MsStatus::Io, format!("{path}: {e}"))
}

fn flow_failure(e: motionsep::flow::FlowError) -> Failure {
    let status = match e {
        motionsep::flow::FlowError::Io(_) => MsStatus::Io,
        motionsep::flow::FlowError::LengthMismatch { .. }
        | motionsep::flow::FlowError::NonFinite { .. } => MsStatus::InvalidArgument,
        _ => MsStatus::Format,
    };
    Failure::new(status, e.to_string())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the most recent failure on this thread, or NULL after a
/// success. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a field from `2*width*height` interleaved (dx, dy) values.
///
/// # Safety
/// `data` must point to `2*width*height` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_new(
    width: usize,
    height: usize,
    data: *const f64,
    out_flow: *mut *mut MsFlowField,
) -> MsStatus {
    guard(|| {
        let out_flow = out(out_flow, "out_flow")?;
        let n = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| Failure::new(MsStatus::InvalidArgument, "dimensions overflow"))?;
        if data.is_null() {
            return Err(Failure::new(MsStatus::NullPointer, "data is NULL"));
        }
        if n == 0 {
            return Err(Failure::new(MsStatus::InvalidArgument, "empty field"));
        }
        let raw = std::slice::from_raw_parts(data, n);
        let pixels = raw.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let field = FlowField::new(width, height, pixels).map_err(flow_failure)?;
        *out_flow = boxed(MsFlowField(field));
        Ok(())
    })
}

/// Reads a `.flo` file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_read(
    path: *const c_char,
    out_flow: *mut *mut MsFlowField,
) -> MsStatus {
    guard(|| {
        let out_flow = out(out_flow, "out_flow")?;
        let path = path_arg(path)?;
        let file = File::open(&path).map_err(|e| io_failure(&path, e))?;
        let field = read_flow(BufReader::new(file))
            .map_err(|e| {
                let Failure(status, msg) = flow_failure(e);
                Failure::new(status, format!("{path}: {msg}"))
            })?;
        *out_flow = boxed(MsFlowField(field));
        Ok(())
    })
}

/// Writes a `.flo` file.
///
/// # Safety
/// `flow` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_write(flow: *const MsFlowField, path: *const c_char) -> MsStatus {
    guard(|| {
        let flow = deref(flow, "flow")?;
        let path = path_arg(path)?;
        let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
        let mut w = BufWriter::new(file);
        write_flow(&flow.0, &mut w).map_err(flow_failure)?;
        w.flush().map_err(|e| io_failure(&path, e))
    })
}

/// Width and height of a field.
///
/// # Safety
/// `flow` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_dims(
    flow: *const MsFlowField,
    out_width: *mut usize,
    out_height: *mut usize,
) -> MsStatus {
    guard(|| {
        let flow = deref(flow, "flow")?;
        let (w, h) = (out(out_width, "out_width")?, out(out_height, "out_height")?);
        (*w, *h) = flow.0.dims();
        Ok(())
    })
}

/// Copies the interleaved (dx, dy) values into `buf`, which must hold at
/// least `2*width*height` doubles.
///
/// # Safety
/// `flow` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_copy_data(
    flow: *const MsFlowField,
    buf: *mut f64,
    len: usize,
) -> MsStatus {
    guard(|| {
        let flow = deref(flow, "flow")?;
        let need = flow.0.data().len() * 2;
        if buf.is_null() {
            return Err(Failure::new(MsStatus::NullPointer, "buf is NULL"));
        }
        if len < need {
            return Err(Failure::new(
                MsStatus::BufferTooSmall,
                format!("need {need} doubles, got {len}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (d, v) in dst.chunks_exact_mut(2).zip(flow.0.data()) {
            d.copy_from_slice(v);
        }
        Ok(())
    })
}

/// # Safety
/// `flow` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_free(flow: *mut MsFlowField) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Renders a field as 8-bit RGB into `buf` (row-major, 3 bytes per pixel).
/// `max_magnitude <= 0` scales by the field's own maximum.
///
/// # Safety
/// `flow` must be a live handle and `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ms_flow_color_code(
    flow: *const MsFlowField,
    max_magnitude: f64,
    buf: *mut u8,
    len: usize,
) -> MsStatus {
    guard(|| {
        let flow = deref(flow, "flow")?;
        if buf.is_null() {
            return Err(Failure::new(MsStatus::NullPointer, "buf is NULL"));
        }
        let need = flow.0.data().len() * 3;
        if len < need {
            return Err(Failure::new(
                MsStatus::BufferTooSmall,
                format!("need {need} bytes, got {len}"),
            ));
        }
        let scale = (max_magnitude > 0.0).then_some(max_magnitude);
        let img = color_code(&flow.0, scale);
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (d, p) in dst.chunks_exact_mut(3).zip(&img.pixels) {
            d.copy_from_slice(p);
        }
        Ok(())
    })
}

/// Splits a mixed field into global and local parts with local threshold
/// `threshold` (pixels/frame).
///
/// # Safety
/// `mixed` must be a live handle; `out_sep` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_separate(
    mixed: *const MsFlowField,
    threshold: f64,
    out_sep: *mut *mut MsSeparation,
) -> MsStatus {
    guard(|| {
        let mixed = deref(mixed, "mixed")?;
        let out_sep = out(out_sep, "out_sep")?;
        let r = separate(&mixed.0, threshold).map_err(|e| {
            let status = match e {
                SeparationError::InvalidThreshold(_) => MsStatus::InvalidArgument,
                _ => MsStatus::Degenerate,
            };
            Failure::new(status, e.to_string())
        })?;
        *out_sep = boxed(MsSeparation {
            global: r.global,
            local: r.local,
        });
        Ok(())
    })
}

/// A new handle holding a copy of the global field.
///
/// # Safety
/// `sep` must be a live handle; `out_flow` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_separation_global(
    sep: *const MsSeparation,
    out_flow: *mut *mut MsFlowField,
) -> MsStatus {
    guard(|| {
        let sep = deref(sep, "sep")?;
        *out(out_flow, "out_flow")? = boxed(MsFlowField(sep.global.clone()));
        Ok(())
    })
}

/// A new handle holding a copy of the local field.
///
/// # Safety
/// `sep` must be a live handle; `out_flow` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_separation_local(
    sep: *const MsSeparation,
    out_flow: *mut *mut MsFlowField,
) -> MsStatus {
    guard(|| {
        let sep = deref(sep, "sep")?;
        *out(out_flow, "out_flow")? = boxed(MsFlowField(sep.local.clone()));
        Ok(())
    })
}

/// # Safety
/// `sep` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_separation_free(sep: *mut MsSeparation) {
    if !sep.is_null() {
        drop(Box::from_raw(sep));
    }
}

/// Least-squares camera model of a (global) field.
///
/// # Safety
/// `flow` must be a live handle; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_camera_model(
    flow: *const MsFlowField,
    out_model: *mut MsCameraModel,
) -> MsStatus {
    guard(|| {
        let flow = deref(flow, "flow")?;
        let out_model = out(out_model, "out_model")?;
        let [m0, m1, m2, m3] = fit_model(&flow.0)
            .map_err(|e| Failure::new(MsStatus::Degenerate, e.to_string()))?
            .params();
        *out_model = MsCameraModel { m0, m1, m2, m3 };
        Ok(())
    })
}

/// Labels a camera model for a `width` x `height` frame. Tolerances are in
/// pixels and in deviation of the scale from 1; pass negatives for defaults.
///
/// # Safety
/// `model` must be readable; `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_classify_camera_motion(
    model: *const MsCameraModel,
    width: usize,
    height: usize,
    translation_tol: f64,
    scale_tol: f64,
    out_label: *mut MsCameraLabel,
) -> MsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out_label = out(out_label, "out_label")?;
        let model = GlobalMotionModel::new(m.m0, m.m1, m.m2, m.m3)
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        let mut tol = MotionTolerance::default();
        if translation_tol >= 0.0 {
            tol.translation = translation_tol;
        }
        if scale_tol >= 0.0 {
            tol.scale = scale_tol;
        }
        *out_label = match classify_camera_motion(&model, width, height, tol) {
            CameraMotionLabel::Static => MsCameraLabel::Static,
            CameraMotionLabel::PanLeft => MsCameraLabel::PanLeft,
            CameraMotionLabel::PanRight => MsCameraLabel::PanRight,
            CameraMotionLabel::TiltUp => MsCameraLabel::TiltUp,
            CameraMotionLabel::TiltDown => MsCameraLabel::TiltDown,
            CameraMotionLabel::ZoomIn => MsCameraLabel::ZoomIn,
            CameraMotionLabel::ZoomOut => MsCameraLabel::ZoomOut,
            CameraMotionLabel::Composite => MsCameraLabel::Composite,
        };
        Ok(())
    })
}

/// Static, NUL-terminated name of a label, e.g. "pan-left".
#[no_mangle]
pub extern "C" fn ms_camera_label_name(label: MsCameraLabel) -> *const c_char {
    let s: &'static CStr = match label {
        MsCameraLabel::Static => c"static",
        MsCameraLabel::PanLeft => c"pan-left",
        MsCameraLabel::PanRight => c"pan-right",
        MsCameraLabel::TiltUp => c"tilt-up",
        MsCameraLabel::TiltDown => c"tilt-down",
        MsCameraLabel::ZoomIn => c"zoom-in",
        MsCameraLabel::ZoomOut => c"zoom-out",
        MsCameraLabel::Composite => c"composite",
    };
    s.as_ptr()
}

/// 12-way event index of an (activity, success) pair via the Kronecker
/// product of the one-hot vectors. `success` is 0 or 1.
///
/// # Safety
/// `out_index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_event12_index(
    activity: usize,
    success: u8,
    out_index: *mut usize,
) -> MsStatus {
    guard(|| {
        let out_index = out(out_index, "out_index")?;
        if activity >= NUM_ACTIVITIES || success > 1 {
            return Err(Failure::new(
                MsStatus::InvalidArgument,
                format!("activity {activity} / success {success} out of range"),
            ));
        }
        let fused = kronecker_fuse(
            &EventVector::one_hot(EventKind::Activity6, activity),
            &EventVector::one_hot(EventKind::SF2, success as usize),
        )
        .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        *out_index = fused.hot_index().expect("one-hot product");
        Ok(())
    })
}

/// Maps a 12-way event index to the 11-way space where both steal events
/// coincide.
///
/// # Safety
/// `out_index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_merge_steal_index(index12: usize, out_index: *mut usize) -> MsStatus {
    guard(|| {
        let out_index = out(out_index, "out_index")?;
        if index12 >= EventKind::Event12.len() {
            return Err(Failure::new(
                MsStatus::InvalidArgument,
                format!("event index {index12} out of range"),
            ));
        }
        let merged = merge_steal(&EventVector::one_hot(EventKind::Event12, index12))
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        *out_index = merged.hot_index().expect("one-hot merge");
        Ok(())
    })
}

/// Writes 1 if any of the `n` frame scores exceeds `threshold`, else 0.
///
/// # Safety
/// `scores` must point to `n` readable doubles; `out_success` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_clip_success(
    scores: *const f64,
    n: usize,
    threshold: f64,
    out_success: *mut u8,
) -> MsStatus {
    guard(|| {
        let out_success = out(out_success, "out_success")?;
        if scores.is_null() {
            return Err(Failure::new(MsStatus::NullPointer, "scores is NULL"));
        }
        let scores = FrameSuccessScores::new(std::slice::from_raw_parts(scores, n).to_vec())
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        let sf = clip_success(&scores, threshold)
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        *out_success = (sf.hot_index() == Some(Outcome::Success.index())) as u8;
        Ok(())
    })
}

unsafe fn confusion_arg(counts: *const u64, classes: usize) -> Result<ConfusionMatrix, Failure> {
    if counts.is_null() {
        return Err(Failure::new(MsStatus::NullPointer, "counts is NULL"));
    }
    if classes == 0 {
        return Err(Failure::new(MsStatus::InvalidArgument, "no classes"));
    }
    let flat = std::slice::from_raw_parts(counts, classes * classes);
    let rows: Vec<Vec<u64>> = flat.chunks_exact(classes).map(<[u64]>::to_vec).collect();
    Ok(ConfusionMatrix::from_rows(&rows))
}

/// Accuracy of a row-major `classes` x `classes` confusion matrix
/// (rows = truth, columns = prediction).
///
/// # Safety
/// `counts` must hold `classes*classes` values; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_accuracy(
    counts: *const u64,
    classes: usize,
    out_value: *mut f64,
) -> MsStatus {
    guard(|| {
        let out_value = out(out_value, "out_value")?;
        let cm = confusion_arg(counts, classes)?;
        *out_value = motionsep::accuracy(&cm)
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Mean of per-class precisions; classes never predicted count as zero.
///
/// # Safety
/// `counts` must hold `classes*classes` values; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_mean_average_precision(
    counts: *const u64,
    classes: usize,
    out_value: *mut f64,
) -> MsStatus {
    guard(|| {
        let out_value = out(out_value, "out_value")?;
        let cm = confusion_arg(counts, classes)?;
        *out_value = motionsep::mean_average_precision(&cm)
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Loads a model written by `motionsep train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_model_load(
    path: *const c_char,
    out_model: *mut *mut MsModelBundle,
) -> MsStatus {
    guard(|| {
        let out_model = out(out_model, "out_model")?;
        let path = path_arg(path)?;
        let text = std::fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
        let bundle = ModelBundle::from_text(&text)
            .map_err(|e| Failure::new(MsStatus::Format, format!("{path}: {e}")))?;
        *out_model = boxed(MsModelBundle(bundle));
        Ok(())
    })
}

/// Activity probabilities for a clip of `n` mixed-flow frames, written to
/// `out_probs` (at least 6 doubles). `fuse_ratio` weighs the global stream
/// against the local one for two-stream models.
///
/// # Safety
/// `model` must be a live handle, `frames` must point to `n` live handles and
/// `out_probs` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_model_classify_clip(
    model: *const MsModelBundle,
    frames: *const *const MsFlowField,
    n: usize,
    fuse_ratio: f64,
    out_probs: *mut f64,
    len: usize,
) -> MsStatus {
    guard(|| {
        let model = deref(model, "model")?;
        if frames.is_null() || out_probs.is_null() {
            return Err(Failure::new(MsStatus::NullPointer, "frames or out_probs is NULL"));
        }
        if len < NUM_ACTIVITIES {
            return Err(Failure::new(
                MsStatus::BufferTooSmall,
                format!("need {NUM_ACTIVITIES} doubles, got {len}"),
            ));
        }
        let fields = std::slice::from_raw_parts(frames, n)
            .iter()
            .map(|f| deref(*f, "frame").map(|f| f.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let clip = ClipStream::new(StreamKind::Mixed, fields)
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        let features = clip_features(&clip, model.0.threshold, model.0.descriptor)
            .map_err(|e| Failure::new(MsStatus::Degenerate, e.to_string()))?;
        let probs = model
            .0
            .predict(&features, fuse_ratio)
            .map_err(|e| Failure::new(MsStatus::InvalidArgument, e.to_string()))?;
        std::slice::from_raw_parts_mut(out_probs, NUM_ACTIVITIES).copy_from_slice(probs.as_slice());
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_model_free(model: *mut MsModelBundle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
