//! Dense flow fields: the value type, Middlebury `.flo` I/O, color-wheel
//! rendering and magnitude statistics.
//!
//! Components are held as `f64` so that model synthesis and fitting stay
//! exact; the `.flo` container stores `f32`, so writing quantizes and a field
//! read from disk always round-trips bit-exactly.

use std::io::{Read, Write};

use thiserror::Error;

/// Tag at offset 0 of every `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

/// Largest accepted width or height.
pub const MAX_SIDE: usize = 1 << 15;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("bad magic tag {0} (expected 202021.25)")]
    BadMagic(f32),
    #[error("bad dimensions {width}x{height}")]
    BadDimensions { width: i64, height: i64 },
    #[error("stream truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("non-finite component at pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },
    #[error("data length {actual} does not match {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An H×W grid of per-pixel displacements `(dx, dy)` in pixels/frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 2]>) -> Result<Self, FlowError> {
        check_dims(width as i64, height as i64)?;
        if data.len() != width * height {
            return Err(FlowError::LengthMismatch {
                width,
                height,
                actual: data.len(),
            });
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(FlowError::NonFinite {
                x: i % width,
                y: i / width,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, FlowError> {
        Self::new(width, height, vec![[0.0; 2]; width * height])
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 2],
    ) -> Result<Self, FlowError> {
        let mut data = Vec::with_capacity(width.saturating_mul(height).min(MAX_SIDE * MAX_SIDE));
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[[f64; 2]] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn column(&self, x: usize) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.height).map(move |y| self.get(x, y))
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().map(|v| magnitude(*v))
    }

    /// Pointwise sum. Panics on a dimension mismatch.
    pub fn add(&self, other: &FlowField) -> FlowField {
        assert_eq!(self.dims(), other.dims(), "flow field dimension mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        FlowField {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn max_abs_diff(&self, other: &FlowField) -> f64 {
        assert_eq!(self.dims(), other.dims(), "flow field dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v[0] == 0.0 && v[1] == 0.0)
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<[f64; 2]>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }
}

#[inline]
pub fn magnitude(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn check_dims(width: i64, height: i64) -> Result<(), FlowError> {
    let ok = |s: i64| (1..=MAX_SIDE as i64).contains(&s);
    if ok(width) && ok(height) {
        Ok(())
    } else {
        Err(FlowError::BadDimensions { width, height })
    }
}

/// Parses a `.flo` byte stream.
pub fn read_flow(mut reader: impl Read) -> Result<FlowField, FlowError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_flow(&bytes)
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField, FlowError> {
    if bytes.len() < 12 {
        return Err(FlowError::Truncated {
            expected: 12,
            actual: bytes.len(),
        });
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().unwrap() };
    let magic = f32::from_le_bytes(word(0));
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(FlowError::BadMagic(magic));
    }
    let width = i32::from_le_bytes(word(4)) as i64;
    let height = i32::from_le_bytes(word(8)) as i64;
    check_dims(width, height)?;
    let (width, height) = (width as usize, height as usize);
    let expected = 12 + width * height * 8;
    if bytes.len() < expected {
        return Err(FlowError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let data = bytes[12..expected]
        .chunks_exact(8)
        .map(|c| {
            let dx = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let dy = f32::from_le_bytes(c[4..8].try_into().unwrap());
            [dx as f64, dy as f64]
        })
        .collect();
    FlowField::new(width, height, data)
}

/// Serializes a field as `.flo`. Components are narrowed to `f32`.
pub fn write_flow(field: &FlowField, mut writer: impl Write) -> Result<(), FlowError> {
    writer.write_all(&encode_flow(field))?;
    Ok(())
}

pub fn encode_flow(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + field.data.len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(field.width as i32).to_le_bytes());
    out.extend_from_slice(&(field.height as i32).to_le_bytes());
    for v in &field.data {
        out.extend_from_slice(&(v[0] as f32).to_le_bytes());
        out.extend_from_slice(&(v[1] as f32).to_le_bytes());
    }
    out
}

/// Magnitude summary of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStats {
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub mean_magnitude: f64,
    sorted: Vec<f64>,
}

impl FlowStats {
    /// Fraction of pixels whose magnitude is strictly greater than `threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        let at_or_below = self.sorted.partition_point(|&m| m <= threshold);
        (self.sorted.len() - at_or_below) as f64 / self.sorted.len() as f64
    }
}

pub fn flow_stats(field: &FlowField) -> FlowStats {
    let mut sorted: Vec<f64> = field.magnitudes().collect();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    FlowStats {
        min_magnitude: sorted[0],
        max_magnitude: sorted[sorted.len() - 1],
        // summation rounding can push the mean a hair outside [min, max]
        mean_magnitude: mean.clamp(sorted[0], sorted[sorted.len() - 1]),
        sorted,
    }
}

/// An 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

// Segment lengths of the Middlebury color wheel.
const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
pub const WHEEL_SIZE: usize = RY + YG + GC + CB + BM + MR;

/// The 55-entry color wheel, channels in [0, 255].
pub fn color_wheel() -> [[f64; 3]; WHEEL_SIZE] {
    let mut wheel = [[0.0; 3]; WHEEL_SIZE];
    let mut k = 0;
    let mut ramp = |len: usize, f: &dyn Fn(f64) -> [f64; 3]| {
        for i in 0..len {
            wheel[k] = f(255.0 * i as f64 / len as f64);
            k += 1;
        }
    };
    ramp(RY, &|t| [255.0, t, 0.0]);
    ramp(YG, &|t| [255.0 - t, 255.0, 0.0]);
    ramp(GC, &|t| [0.0, 255.0, t]);
    ramp(CB, &|t| [0.0, 255.0 - t, 255.0]);
    ramp(BM, &|t| [t, 0.0, 255.0]);
    ramp(MR, &|t| [255.0, 0.0, 255.0 - t]);
    wheel
}

/// Color of one normalized vector. `v` is already divided by the max magnitude.
fn wheel_color(wheel: &[[f64; 3]; WHEEL_SIZE], v: [f64; 2]) -> [u8; 3] {
    let rad = magnitude(v);
    if rad == 0.0 {
        return [255; 3];
    }
    let a = (-v[1]).atan2(-v[0]) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * (WHEEL_SIZE - 1) as f64;
    let k0 = (fk.floor() as usize).min(WHEEL_SIZE - 1);
    let k1 = (k0 + 1) % WHEEL_SIZE;
    let f = fk - k0 as f64;
    let sat = rad.min(1.0);
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        let col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
        let col = 1.0 - sat * (1.0 - col);
        *out = (255.0 * col).round() as u8;
    }
    rgb
}

/// Renders direction as hue and magnitude as saturation. `max_magnitude`
/// defaults to the field maximum (or 1 for an all-zero field).
pub fn color_code(field: &FlowField, max_magnitude: Option<f64>) -> RgbImage {
    let max = match max_magnitude {
        Some(m) if m > 0.0 && m.is_finite() => m,
        _ => {
            let m = field.magnitudes().fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let wheel = color_wheel();
    let pixels = field
        .data
        .iter()
        .map(|v| wheel_color(&wheel, [v[0] / max, v[1] / max]))
        .collect();
    RgbImage {
        width: field.width,
        height: field.height,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(w: i32, h: i32) -> Vec<u8> {
        let mut b = FLO_MAGIC.to_le_bytes().to_vec();
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&h.to_le_bytes());
        b
    }

    fn floats(b: &mut Vec<u8>, vals: &[f32]) {
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }

    #[test]
    fn reads_two_by_one() {
        let mut b = header(2, 1);
        floats(&mut b, &[1.0, 0.0, 0.0, 1.0]);
        let f = decode_flow(&b).unwrap();
        assert_eq!(f.dims(), (2, 1));
        assert_eq!(f.data(), &[[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn reads_direct_layout() {
        let mut b = header(2, 2);
        floats(&mut b, &[1.0, 0.0, 0.0, 1.0, -2.5, 3.0, 0.0, 0.0]);
        let f = decode_flow(&b).unwrap();
        assert_eq!(f.dims(), (2, 2));
        assert_eq!(f.get(0, 0), [1.0, 0.0]);
        assert_eq!(f.get(1, 0), [0.0, 1.0]);
        assert_eq!(f.get(0, 1), [-2.5, 3.0]);
    }

    #[test]
    fn truncated_stream() {
        let mut b = header(2, 2);
        floats(&mut b, &[0.0; 8]);
        b.truncate(b.len() - 16);
        assert!(matches!(
            decode_flow(&b),
            Err(FlowError::Truncated {
                expected: 44,
                actual: 28
            })
        ));
        assert!(matches!(
            decode_flow(&b[..7]),
            Err(FlowError::Truncated { .. })
        ));
    }

    #[test]
    fn bad_magic_and_dims() {
        let mut b = header(2, 2);
        b[0] ^= 1;
        assert!(matches!(decode_flow(&b), Err(FlowError::BadMagic(_))));
        assert!(matches!(
            decode_flow(&header(0, 4)),
            Err(FlowError::BadDimensions { .. })
        ));
        assert!(matches!(
            decode_flow(&header(-3, 4)),
            Err(FlowError::BadDimensions { .. })
        ));
        assert!(matches!(
            decode_flow(&header(4, (MAX_SIDE + 1) as i32)),
            Err(FlowError::BadDimensions { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let mut b = header(2, 2);
        floats(&mut b, &[0.0, 0.0, 0.0, 0.0, 0.0, f32::NAN, 0.0, 0.0]);
        assert!(matches!(
            decode_flow(&b),
            Err(FlowError::NonFinite { x: 0, y: 1 })
        ));
        assert!(FlowField::new(2, 2, vec![[f64::INFINITY, 0.0]; 4]).is_err());
    }

    #[test]
    fn zero_field_encoding() {
        let f = FlowField::zeros(1, 2).unwrap();
        let b = encode_flow(&f);
        assert_eq!(b.len(), 12 + 16);
        assert_eq!(&b[..12], &header(1, 2)[..]);
        assert!(b[12..].iter().all(|&x| x == 0));
    }

    #[test]
    fn magic_value_in_payload_round_trips() {
        let f = FlowField::from_fn(3, 2, |x, y| {
            if x == 0 && y == 0 {
                [FLO_MAGIC as f64, 0.0]
            } else {
                [x as f64, -(y as f64)]
            }
        })
        .unwrap();
        let b = encode_flow(&f);
        assert_eq!(&b[12..16], &FLO_MAGIC.to_le_bytes());
        assert_eq!(decode_flow(&b).unwrap(), f);
        assert_eq!(encode_flow(&decode_flow(&b).unwrap()), b);
    }

    #[test]
    fn stats_basic() {
        let z = flow_stats(&FlowField::zeros(4, 3).unwrap());
        assert_eq!(
            (z.min_magnitude, z.mean_magnitude, z.max_magnitude),
            (0.0, 0.0, 0.0)
        );
        let f = FlowField::new(2, 2, vec![[3.0, 4.0], [0.0, 0.0], [3.0, 4.0], [0.0, 0.0]]).unwrap();
        let s = flow_stats(&f);
        assert_eq!(s.max_magnitude, 5.0);
        assert_eq!(s.mean_magnitude, 2.5);
        assert_eq!(s.fraction_above(0.0), 0.5);
        assert_eq!(s.fraction_above(5.0), 0.0);
    }

    #[test]
    fn zero_field_is_white() {
        let img = color_code(&FlowField::zeros(3, 3).unwrap(), None);
        assert!(img.pixels.iter().all(|p| *p == [255, 255, 255]));
    }

    #[test]
    fn uniform_field_is_uniform_and_saturated() {
        let f = FlowField::from_fn(4, 4, |_, _| [2.0, 0.0]).unwrap();
        let img = color_code(&f, Some(2.0));
        let first = img.pixels[0];
        assert!(img.pixels.iter().all(|p| *p == first));
        assert_eq!(first.iter().min(), Some(&0));
        assert_eq!(first.iter().max(), Some(&255));
    }

    #[test]
    fn ppm_header() {
        let img = color_code(&FlowField::zeros(3, 2).unwrap(), None);
        let ppm = img.to_ppm();
        assert!(ppm.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(ppm.len(), 11 + 18);
    }

    #[test]
    fn wheel_has_55_saturated_entries() {
        let w = color_wheel();
        assert_eq!(w.len(), 55);
        for c in w {
            assert_eq!(c.iter().cloned().fold(f64::MIN, f64::max), 255.0);
            assert_eq!(c.iter().cloned().fold(f64::MAX, f64::min), 0.0);
        }
    }
}
