//! Global/local motion separation.
//!
//! The global field is rebuilt from robust statistics of the four border
//! lines: a trimmed mean (middle 60%) of dx down the left and right columns
//! and of dy along the top and bottom rows. Between the borders the field is
//! linearly interpolated, which is exact for any field generated by the
//! per-axis affine camera model. The local field is what remains of the mixed
//! field after a magnitude threshold test.

use thiserror::Error;

use crate::camera::{check_min_size, CameraError};
use crate::flow::{magnitude, FlowField};

/// Pixels per frame below which motion is ignored.
pub const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SeparationError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("threshold must be finite and non-negative, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Mean of the sorted values after dropping `floor(0.2·n)` from each end.
pub fn trimmed_mean_middle60(values: &[f64]) -> Result<f64, SeparationError> {
    if values.is_empty() {
        return Err(SeparationError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    Ok(trimmed_mean_in_place(&mut sorted))
}

fn trimmed_mean_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let cut = n / 5;
    values.sort_unstable_by(f64::total_cmp);
    let kept = &values[cut..n - cut];
    kept.iter().sum::<f64>() / kept.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerEstimates {
    /// dx along column 0.
    pub x_left: f64,
    /// dx along the last column.
    pub x_right: f64,
    /// dy along row 0.
    pub y_top: f64,
    /// dy along the last row.
    pub y_bottom: f64,
}

impl CornerEstimates {
    /// Corner vectors in the order top-left, top-right, bottom-left, bottom-right.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.x_left, self.y_top],
            [self.x_right, self.y_top],
            [self.x_left, self.y_bottom],
            [self.x_right, self.y_bottom],
        ]
    }
}

pub fn estimate_corners(mixed: &FlowField) -> Result<CornerEstimates, SeparationError> {
    let (w, h) = mixed.dims();
    check_min_size(w, h)?;
    let mut scratch = Vec::with_capacity(w.max(h));
    let mut column_stat = |x: usize| {
        scratch.clear();
        scratch.extend(mixed.column(x).map(|v| v[0]));
        trimmed_mean_in_place(&mut scratch)
    };
    let x_left = column_stat(0);
    let x_right = column_stat(w - 1);
    let mut row_stat = |y: usize| {
        scratch.clear();
        scratch.extend(mixed.row(y).iter().map(|v| v[1]));
        trimmed_mean_in_place(&mut scratch)
    };
    let y_top = row_stat(0);
    let y_bottom = row_stat(h - 1);
    Ok(CornerEstimates {
        x_left,
        x_right,
        y_top,
        y_bottom,
    })
}

/// Fills a `width`×`height` field by interpolating between the corner
/// statistics. dx varies only with x and dy only with y.
pub fn interpolate_global(corners: &CornerEstimates, width: usize, height: usize) -> FlowField {
    // this form is exact at both ends
    let lerp = |a: f64, b: f64, i: usize, n: usize| {
        let t = i as f64 / (n - 1) as f64;
        (1.0 - t) * a + t * b
    };
    let col_dx: Vec<f64> = (0..width)
        .map(|x| lerp(corners.x_left, corners.x_right, x, width))
        .collect();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = lerp(corners.y_top, corners.y_bottom, y, height);
        data.extend(col_dx.iter().map(|&dx| [dx, dy]));
    }
    FlowField::from_parts_unchecked(width, height, data)
}

pub fn estimate_global(mixed: &FlowField) -> Result<FlowField, SeparationError> {
    let corners = estimate_corners(mixed)?;
    Ok(interpolate_global(&corners, mixed.width(), mixed.height()))
}

/// Per-pixel threshold rule. Both components share one decision.
#[inline]
pub fn local_vector(mixed: [f64; 2], global: [f64; 2], threshold: f64) -> [f64; 2] {
    let r_m = magnitude(mixed);
    if r_m <= threshold {
        return [0.0, 0.0];
    }
    let r_g = magnitude(global);
    if (r_m - r_g).abs() > threshold {
        [mixed[0] - global[0], mixed[1] - global[1]]
    } else {
        [0.0, 0.0]
    }
}

pub fn estimate_local(
    mixed: &FlowField,
    global: &FlowField,
    threshold: f64,
) -> Result<FlowField, SeparationError> {
    if mixed.dims() != global.dims() {
        return Err(SeparationError::DimensionMismatch(
            mixed.dims(),
            global.dims(),
        ));
    }
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(SeparationError::InvalidThreshold(threshold));
    }
    let data = mixed
        .data()
        .iter()
        .zip(global.data())
        .map(|(m, g)| local_vector(*m, *g, threshold))
        .collect();
    Ok(FlowField::from_parts_unchecked(
        mixed.width(),
        mixed.height(),
        data,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    pub global: FlowField,
    pub local: FlowField,
    pub corners: CornerEstimates,
    pub threshold: f64,
}

pub fn separate(mixed: &FlowField, threshold: f64) -> Result<SeparationResult, SeparationError> {
    let corners = estimate_corners(mixed)?;
    let global = interpolate_global(&corners, mixed.width(), mixed.height());
    let local = estimate_local(mixed, &global, threshold)?;
    Ok(SeparationResult {
        global,
        local,
        corners,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{displacement_field, GlobalMotionModel};

    #[test]
    fn trimmed_mean_examples() {
        let v = [9.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 9.0];
        assert_eq!(trimmed_mean_middle60(&v).unwrap(), 1.0);
        assert_eq!(trimmed_mean_middle60(&[5.0]).unwrap(), 5.0);
        for n in 1..40 {
            assert_eq!(trimmed_mean_middle60(&vec![2.25; n]).unwrap(), 2.25);
        }
        assert_eq!(
            trimmed_mean_middle60(&[]),
            Err(SeparationError::EmptyInput)
        );
        // n=5: drop one per tail, mean of the middle three
        assert_eq!(
            trimmed_mean_middle60(&[100.0, 2.0, -50.0, 3.0, 4.0]).unwrap(),
            3.0
        );
    }

    #[test]
    fn corners_of_constant_pan() {
        let f = displacement_field(&GlobalMotionModel::translation(-3.0, 2.0), 10, 10).unwrap();
        let c = estimate_corners(&f).unwrap();
        assert_eq!(
            c,
            CornerEstimates {
                x_left: -3.0,
                x_right: -3.0,
                y_top: 2.0,
                y_bottom: 2.0
            }
        );
        let z = estimate_corners(&FlowField::zeros(4, 4).unwrap()).unwrap();
        assert_eq!(z.corners(), [[0.0; 2]; 4]);
    }

    #[test]
    fn left_column_contamination_is_trimmed() {
        let model = GlobalMotionModel::new(1.1, 0.0, 1.0, 0.0).unwrap();
        let clean = displacement_field(&model, 11, 11).unwrap();
        let mut data = clean.data().to_vec();
        data[3 * 11] = [1e3, -7.0];
        data[8 * 11] = [-55.5, 4.0];
        let dirty = FlowField::new(11, 11, data).unwrap();
        assert_eq!(estimate_corners(&dirty).unwrap().x_left, 0.0);
    }

    #[test]
    fn local_branches() {
        assert_eq!(local_vector([0.5, 0.5], [0.0, 0.0], 1.0), [0.0, 0.0]);
        assert_eq!(local_vector([5.0, 0.0], [1.0, 0.0], 1.0), [4.0, 0.0]);
        assert_eq!(local_vector([2.0, 0.0], [1.5, 0.0], 1.0), [0.0, 0.0]);
        // first branch wins even when the second condition would hold
        assert_eq!(local_vector([0.9, 0.0], [5.0, 0.0], 1.0), [0.0, 0.0]);
        // opposite directions with equal magnitude cancel in the r test
        assert_eq!(local_vector([3.0, 0.0], [-3.0, 0.0], 1.0), [0.0, 0.0]);
    }

    #[test]
    fn local_errors() {
        let a = FlowField::zeros(3, 3).unwrap();
        let b = FlowField::zeros(3, 4).unwrap();
        assert!(matches!(
            estimate_local(&a, &b, 1.0),
            Err(SeparationError::DimensionMismatch(..))
        ));
        assert!(matches!(
            estimate_local(&a, &a, -0.1),
            Err(SeparationError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn zero_field_separates_to_zeros() {
        let r = separate(&FlowField::zeros(6, 5).unwrap(), DEFAULT_THRESHOLD).unwrap();
        assert!(r.global.is_zero() && r.local.is_zero());
    }

    #[test]
    fn too_small_field() {
        let f = FlowField::zeros(1, 5).unwrap();
        assert!(matches!(
            separate(&f, 1.0),
            Err(SeparationError::Camera(CameraError::TooSmall { .. }))
        ));
    }
}
