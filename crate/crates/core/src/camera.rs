//! Per-axis affine camera model.
//!
//! A point `(x, y)` in the anchor frame maps to `(m0·x + m1, m2·y + m3)` in the
//! target frame, so the induced displacement is `((m0−1)x + m1, (m2−1)y + m3)`.
//! Coordinates are 0-based from the top-left pixel, x right and y down.

use std::fmt;

use thiserror::Error;

use crate::flow::FlowField;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("invalid model parameters [{0}, {1}, {2}, {3}]: scales must be positive and all finite")]
    InvalidModel(f64, f64, f64, f64),
    #[error("field of {width}x{height} is too small, both sides must be at least 2")]
    TooSmall { width: usize, height: usize },
    #[error("rank-deficient line fit")]
    DegenerateFit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalMotionModel {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl GlobalMotionModel {
    pub const IDENTITY: Self = Self {
        m0: 1.0,
        m1: 0.0,
        m2: 1.0,
        m3: 0.0,
    };

    pub fn new(m0: f64, m1: f64, m2: f64, m3: f64) -> Result<Self, CameraError> {
        let finite = [m0, m1, m2, m3].iter().all(|v| v.is_finite());
        if !finite || m0 <= 0.0 || m2 <= 0.0 {
            return Err(CameraError::InvalidModel(m0, m1, m2, m3));
        }
        Ok(Self { m0, m1, m2, m3 })
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m0: 1.0,
            m1: dx,
            m2: 1.0,
            m3: dy,
        }
    }

    /// Isotropic scaling about `(cx, cy)`. `scale` must be positive.
    pub fn zoom_about(scale: f64, cx: f64, cy: f64) -> Result<Self, CameraError> {
        Self::new(scale, (1.0 - scale) * cx, scale, (1.0 - scale) * cy)
    }

    pub fn params(&self) -> [f64; 4] {
        [self.m0, self.m1, self.m2, self.m3]
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.m0 * x + self.m1, self.m2 * y + self.m3)
    }

    #[inline]
    pub fn displacement_at(&self, x: f64, y: f64) -> [f64; 2] {
        [(self.m0 - 1.0) * x + self.m1, (self.m2 - 1.0) * y + self.m3]
    }

    /// Point left unmoved along each axis, `None` on an axis with unit scale.
    pub fn fixed_point(&self) -> (Option<f64>, Option<f64>) {
        let axis = |s: f64, t: f64| (s != 1.0).then(|| t / (1.0 - s));
        (axis(self.m0, self.m1), axis(self.m2, self.m3))
    }
}

impl Default for GlobalMotionModel {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Display for GlobalMotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.m0, self.m1, self.m2, self.m3)
    }
}

pub(crate) fn check_min_size(width: usize, height: usize) -> Result<(), CameraError> {
    if width < 2 || height < 2 {
        Err(CameraError::TooSmall { width, height })
    } else {
        Ok(())
    }
}

/// Synthesizes the flow a camera model induces on a `width`×`height` grid.
pub fn displacement_field(
    model: &GlobalMotionModel,
    width: usize,
    height: usize,
) -> Result<FlowField, CameraError> {
    check_min_size(width, height)?;
    let col_dx: Vec<f64> = (0..width)
        .map(|x| model.displacement_at(x as f64, 0.0)[0])
        .collect();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = model.displacement_at(0.0, y as f64)[1];
        data.extend(col_dx.iter().map(|&dx| [dx, dy]));
    }
    FlowField::new(width, height, data).map_err(|_| {
        CameraError::InvalidModel(model.m0, model.m1, model.m2, model.m3)
    })
}

/// Least-squares line through `(i, values[i])`, returns `(slope, intercept)`.
fn line_fit(values: &[f64]) -> Result<(f64, f64), CameraError> {
    let n = values.len() as f64;
    if values.len() < 2 {
        return Err(CameraError::DegenerateFit);
    }
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (v - mean_y);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(CameraError::DegenerateFit);
    }
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

/// Recovers the model that best explains `field`: a line fit of the
/// per-column mean of dx against x, and of the per-row mean of dy against y.
pub fn fit_model(field: &FlowField) -> Result<GlobalMotionModel, CameraError> {
    let (w, h) = field.dims();
    check_min_size(w, h)?;
    let mut col_dx = vec![0.0; w];
    let mut row_dy = vec![0.0; h];
    for y in 0..h {
        for (x, v) in field.row(y).iter().enumerate() {
            col_dx[x] += v[0];
            row_dy[y] += v[1];
        }
    }
    col_dx.iter_mut().for_each(|s| *s /= h as f64);
    row_dy.iter_mut().for_each(|s| *s /= w as f64);
    let (sx, m1) = line_fit(&col_dx)?;
    let (sy, m3) = line_fit(&row_dy)?;
    GlobalMotionModel::new(sx + 1.0, m1, sy + 1.0, m3)
}

/// Applies `first`, then `second`.
pub fn compose(first: &GlobalMotionModel, second: &GlobalMotionModel) -> GlobalMotionModel {
    GlobalMotionModel {
        m0: second.m0 * first.m0,
        m1: second.m0 * first.m1 + second.m1,
        m2: second.m2 * first.m2,
        m3: second.m2 * first.m3 + second.m3,
    }
}

/// Basic camera motions, named for what the camera does. Pan and tilt follow
/// the image-motion reading of the basic-motion figure: pan right shows as
/// leftward content motion, tilt up as upward content motion. `ZoomIn` is
/// content magnification (`m0, m2 > 1`) about a fixed point inside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraMotionLabel {
    Static,
    PanLeft,
    PanRight,
    TiltUp,
    TiltDown,
    ZoomIn,
    ZoomOut,
    Composite,
}

impl CameraMotionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::PanLeft => "pan-left",
            Self::PanRight => "pan-right",
            Self::TiltUp => "tilt-up",
            Self::TiltDown => "tilt-down",
            Self::ZoomIn => "zoom-in",
            Self::ZoomOut => "zoom-out",
            Self::Composite => "composite",
        }
    }
}

impl fmt::Display for CameraMotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionTolerance {
    /// Pixels.
    pub translation: f64,
    /// Dimensionless deviation of a scale factor from 1.
    pub scale: f64,
}

impl Default for MotionTolerance {
    fn default() -> Self {
        Self {
            translation: 0.5,
            scale: 0.005,
        }
    }
}

/// Labels a model. The frame size locates the zoom fixed point.
pub fn classify_camera_motion(
    model: &GlobalMotionModel,
    width: usize,
    height: usize,
    tol: MotionTolerance,
) -> CameraMotionLabel {
    use CameraMotionLabel::*;
    let sx = model.m0 - 1.0;
    let sy = model.m2 - 1.0;
    let scale_still = sx.abs() <= tol.scale && sy.abs() <= tol.scale;
    let moves_x = model.m1.abs() > tol.translation;
    let moves_y = model.m3.abs() > tol.translation;

    if scale_still {
        return match (moves_x, moves_y) {
            (false, false) => Static,
            (true, false) if model.m1 < 0.0 => PanRight,
            (true, false) => PanLeft,
            (false, true) if model.m3 < 0.0 => TiltUp,
            (false, true) => TiltDown,
            (true, true) => Composite,
        };
    }

    let zooming = sx.abs() > tol.scale && sy.abs() > tol.scale && (sx > 0.0) == (sy > 0.0);
    if zooming {
        if let (Some(fx), Some(fy)) = model.fixed_point() {
            let inside = (0.0..=(width - 1) as f64).contains(&fx)
                && (0.0..=(height - 1) as f64).contains(&fy);
            if inside {
                return if sx > 0.0 { ZoomIn } else { ZoomOut };
            }
        }
    }
    Composite
}
