//! Double-precision full-frame reference path.
//!
//! Nothing here shares arithmetic with the streaming model: correlation is a
//! direct sum over a padded frame, magnitudes use `f64::sqrt`, and values are
//! rounded and clamped only at the 8-bit frame boundary. The streaming path
//! in [`crate::streamcore`] is expected to agree with these results
//! bit-for-bit on integer masks.

use thiserror::Error;

use crate::imageio::GrayImage;
use crate::kernels::{self, Arity, GradientPath, Kernel};
use crate::pipeline::{threshold, MagnitudeMode, PipelineSpec, StageSpec};
use crate::streamcore::Padding;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("{width}x{height} frame cannot hold {len} values")]
    BadLength { width: usize, height: usize, len: usize },
    #[error(transparent)]
    Kernel(#[from] kernels::KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RealFrame {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, OracleError> {
        if width.checked_mul(height) != Some(values.len()) {
            return Err(OracleError::BadLength {
                width,
                height,
                len: values.len(),
            });
        }
        Ok(RealFrame { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> RealFrame {
        RealFrame {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl From<&GrayImage> for RealFrame {
    fn from(img: &GrayImage) -> Self {
        RealFrame {
            width: img.width(),
            height: img.height(),
            values: img.pixels().iter().map(|&p| p as f64).collect(),
        }
    }
}

/// Pixel at a possibly out-of-frame coordinate.
pub fn padded_pixel(img: &GrayImage, row: isize, col: isize, padding: Padding) -> f64 {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let inside = (0..h).contains(&row) && (0..w).contains(&col);
    match padding {
        _ if inside => img.get(row as usize, col as usize) as f64,
        Padding::Zero => 0.0,
        Padding::Replicate => img.get(row.clamp(0, h - 1) as usize, col.clamp(0, w - 1) as usize) as f64,
    }
}

/// Same-size correlation: `out(r,c) = Σ k[i][j] · pad(img, r+i+a, c+j+a)`,
/// with `a = -1` for 3×3 masks and `a = 0` for 2×2.
pub fn correlate_full(img: &GrayImage, k: &Kernel, padding: Padding) -> RealFrame {
    let taps = k.to_f64();
    let n = k.size();
    let a = k.anchor();
    let mut values = Vec::with_capacity(img.width() * img.height());
    for r in 0..img.height() as isize {
        for c in 0..img.width() as isize {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let p = padded_pixel(img, r + i as isize + a, c + j as isize + a, padding);
                    acc += taps[i * n + j] * p;
                }
            }
            values.push(acc);
        }
    }
    RealFrame {
        width: img.width(),
        height: img.height(),
        values,
    }
}

pub fn magnitude(gx: &RealFrame, gy: &RealFrame, mode: MagnitudeMode) -> Result<RealFrame, OracleError> {
    check_dims(gx, gy)?;
    let values = gx
        .values
        .iter()
        .zip(&gy.values)
        .map(|(&x, &y)| match mode {
            MagnitudeMode::Exact => (x * x + y * y).sqrt(),
            MagnitudeMode::AbsSum => x.abs() + y.abs(),
        })
        .collect();
    Ok(RealFrame {
        width: gx.width,
        height: gx.height,
        values,
    })
}

/// Round half away from zero, then clamp to `[0, 255]`.
pub fn round_and_clamp(frame: &RealFrame) -> GrayImage {
    let pixels = frame.values.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::new(frame.width, frame.height, pixels).expect("frame dimensions are valid")
}

/// Floating-point realization of a whole pipeline, with the same 8-bit
/// hand-off between stages as the streaming path.
pub fn reference_pipeline(img: &GrayImage, spec: &PipelineSpec) -> Result<GrayImage, OracleError> {
    let mut cur = img.clone();
    for stage in spec.stages() {
        cur = match stage {
            StageSpec::Threshold(level) => threshold(&cur, *level),
            StageSpec::Custom(k) => round_and_clamp(&correlate_full(&cur, k, spec.padding())),
            StageSpec::Filter { op, magnitude: mode } => {
                for kind in op.cascade() {
                    let frame = match kind.arity() {
                        Arity::DualPath => {
                            let kx = kernels::kernel_for_variant(kind, GradientPath::Gx, spec.roberts())?;
                            let ky = kernels::kernel_for_variant(kind, GradientPath::Gy, spec.roberts())?;
                            let gx = correlate_full(&cur, &kx, spec.padding());
                            let gy = correlate_full(&cur, &ky, spec.padding());
                            magnitude(&gx, &gy, *mode)?
                        }
                        Arity::SinglePath => {
                            let k = kernels::kernel_for(kind, GradientPath::Single)?;
                            correlate_full(&cur, &k, spec.padding())
                        }
                    };
                    cur = round_and_clamp(&frame);
                }
                cur
            }
        };
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Identical,
    Db(f64),
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Identical => f.write_str("identical"),
            Psnr::Db(db) => write!(f, "{db:.2} dB"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDiff {
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    pub psnr: Psnr,
}

impl FrameDiff {
    pub fn is_identical(&self) -> bool {
        self.psnr == Psnr::Identical
    }
}

fn check_dims(a: &RealFrame, b: &RealFrame) -> Result<(), OracleError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(OracleError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Max/mean absolute difference and PSNR against a 255 peak.
pub fn compare_frames(a: &RealFrame, b: &RealFrame) -> Result<FrameDiff, OracleError> {
    check_dims(a, b)?;
    let n = a.values.len() as f64;
    let (mut max, mut sum, mut sq) = (0.0f64, 0.0, 0.0);
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let d = (x - y).abs();
        max = max.max(d);
        sum += d;
        sq += d * d;
    }
    let psnr = if max == 0.0 {
        Psnr::Identical
    } else {
        Psnr::Db(10.0 * (255.0f64 * 255.0 / (sq / n)).log10())
    };
    Ok(FrameDiff {
        max_abs_diff: max,
        mean_abs_diff: sum / n,
        psnr,
    })
}

pub fn compare_images(a: &GrayImage, b: &GrayImage) -> Result<FrameDiff, OracleError> {
    compare_frames(&a.into(), &b.into())
}

/// Scale and add two frames: `alpha·a + beta·b`.
pub fn combine(alpha: f64, a: &RealFrame, beta: f64, b: &RealFrame) -> Result<RealFrame, OracleError> {
    check_dims(a, b)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| alpha * x + beta * y)
        .collect();
    Ok(RealFrame {
        width: a.width,
        height: a.height,
        values,
    })
}

/// Negate every value; used when checking that a mask's sign flip only
/// negates its response.
pub fn negate(frame: &RealFrame) -> RealFrame {
    frame.map(|v| -v)
}
