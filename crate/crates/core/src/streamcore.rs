//! Hardware-shaped dataflow: raster serializer, line-buffered window
//! generator, MAC FIR and deserializer, all on fixed-point samples.
//!
//! A frame enters as a row-major stream of scalar samples. The window
//! generator keeps the previous rows in line buffers and emits one K×K
//! neighborhood per output pixel; the MAC FIR reduces each window to a single
//! sample; the deserializer reassembles the output stream into an 8-bit frame.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fixedpoint::{self, FixedFormat, FixedValue, Overflow, Quantization};
use crate::imageio::GrayImage;
use crate::kernels::{anchor_for, Kernel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("format {0} cannot hold 8-bit pixels losslessly")]
    FormatTooNarrow(FixedFormat),
    #[error("stream has {actual} samples, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unsupported window size {0}, expected 2 or 3")]
    UnsupportedKernelSize(usize),
    #[error("tap {tap} cannot be represented in coefficient format {format}")]
    CoefficientOverflow { tap: String, format: FixedFormat },
    #[error("accumulator {format} cannot hold the worst-case sum [{lo}, {hi}] x 2^-{frac}")]
    AccumulatorTooNarrow {
        format: FixedFormat,
        lo: i128,
        hi: i128,
        frac: u32,
    },
    #[error("window/tap size mismatch: window {window}, taps {taps}")]
    WindowSize { window: usize, taps: usize },
    #[error("stream format {stream} does not match filter input format {input}")]
    InputFormat { stream: FixedFormat, input: FixedFormat },
}

/// Border policy for out-of-frame window reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Padding {
    #[default]
    Zero,
    Replicate,
}

impl FromStr for Padding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(Padding::Zero),
            "replicate" => Ok(Padding::Replicate),
            other => Err(format!("unknown padding `{other}`, expected zero or replicate")),
        }
    }
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::Zero => "zero",
            Padding::Replicate => "replicate",
        })
    }
}

/// Row-major sample stream of one frame, all samples in one format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelStream {
    width: usize,
    height: usize,
    format: FixedFormat,
    raw: Vec<i128>,
}

impl PixelStream {
    pub fn new(width: usize, height: usize, samples: Vec<FixedValue>) -> Result<Self, StreamError> {
        let format = match samples.first() {
            Some(s) => s.format(),
            None => {
                return Err(StreamError::LengthMismatch {
                    expected: width * height,
                    actual: 0,
                })
            }
        };
        let raw = samples.iter().map(|s| fixedpoint::convert(*s, format).raw()).collect();
        Self::from_raw(width, height, format, raw)
    }

    pub(crate) fn from_raw(
        width: usize,
        height: usize,
        format: FixedFormat,
        raw: Vec<i128>,
    ) -> Result<Self, StreamError> {
        if width.checked_mul(height) != Some(raw.len()) {
            return Err(StreamError::LengthMismatch {
                expected: width.saturating_mul(height),
                actual: raw.len(),
            });
        }
        Ok(PixelStream {
            width,
            height,
            format,
            raw,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn format(&self) -> FixedFormat {
        self.format
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn get(&self, index: usize) -> FixedValue {
        FixedValue::from_raw(self.raw[index], self.format).expect("stream samples are in range")
    }

    pub fn samples(&self) -> impl Iterator<Item = FixedValue> + '_ {
        self.raw
            .iter()
            .map(|&r| FixedValue::from_raw(r, self.format).expect("stream samples are in range"))
    }

    pub fn raw(&self) -> &[i128] {
        &self.raw
    }
}

/// Raster-serialize a frame into `fmt`, which must hold every 8-bit value
/// exactly.
pub fn serialize(img: &GrayImage, fmt: FixedFormat) -> Result<PixelStream, StreamError> {
    if !fmt.holds_integers(0, 255) {
        return Err(StreamError::FormatTooNarrow(fmt));
    }
    let shift = fmt.fraction_bits();
    let raw = img.pixels().iter().map(|&p| (p as i128) << shift).collect();
    PixelStream::from_raw(img.width(), img.height(), fmt, raw)
}

/// Reassemble a stream into an 8-bit frame: each sample is rounded to an
/// integer per its format's quantization mode, then saturated to `[0, 255]`.
pub fn deserialize(stream: &PixelStream) -> Result<GrayImage, StreamError> {
    let count = stream.width.checked_mul(stream.height);
    if count != Some(stream.raw.len()) {
        return Err(StreamError::LengthMismatch {
            expected: count.unwrap_or(usize::MAX),
            actual: stream.raw.len(),
        });
    }
    let frac = stream.format.fraction_bits();
    let pixel_fmt = FixedFormat::unsigned(8, 0)
        .expect("u8.0 is valid")
        .with_overflow(Overflow::Saturate)
        .with_quantization(stream.format.quantization());
    let pixels = stream
        .raw
        .iter()
        .map(|&r| fixedpoint::from_dyadic(r, frac, pixel_fmt).raw() as u8)
        .collect();
    Ok(GrayImage::new(stream.width, stream.height, pixels).expect("length checked"))
}

/// One K×K neighborhood, raw samples in the stream's format, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row: usize,
    pub col: usize,
    size: usize,
    taps: [i128; 9],
}

impl Window {
    pub fn from_rows(row: usize, col: usize, values: &[&[i128]]) -> Self {
        let size = values.len();
        let mut taps = [0; 9];
        for (i, r) in values.iter().enumerate() {
            assert_eq!(r.len(), size, "window must be square");
            taps[i * size..(i + 1) * size].copy_from_slice(r);
        }
        Window { row, col, size, taps }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[i128] {
        &self.taps[..self.size * self.size]
    }

    pub fn at(&self, i: usize, j: usize) -> i128 {
        self.taps[i * self.size + j]
    }
}

/// Line-buffered K×K window generator.
///
/// The K−1 line buffers and the K×K window registers are stored as one
/// shift register of `(K−1)·W + K` samples, indexed by absolute sample
/// number. The output for coordinate `(r, c)` is emitted when the sample
/// `L = d·W + d` positions later arrives, where `d` is the number of rows and
/// columns the window reaches past its output coordinate. Remaining windows
/// are drained by [`WindowGenerator::finish`].
#[derive(Debug, Clone)]
pub struct WindowGenerator {
    width: usize,
    height: usize,
    size: usize,
    padding: Padding,
    anchor: isize,
    lag: usize,
    history: Vec<i128>,
    consumed: usize,
    emitted: usize,
    first_emission: Option<usize>,
}

impl WindowGenerator {
    pub fn new(width: usize, height: usize, size: usize, padding: Padding) -> Result<Self, StreamError> {
        if !matches!(size, 2 | 3) {
            return Err(StreamError::UnsupportedKernelSize(size));
        }
        assert!(width > 0 && height > 0, "frame must be non-empty");
        let anchor = anchor_for(size);
        let reach = (size as isize - 1 + anchor) as usize;
        let lag = reach * width + reach;
        Ok(WindowGenerator {
            width,
            height,
            size,
            padding,
            anchor,
            lag,
            history: vec![0; (size - 1) * width + size],
            consumed: 0,
            emitted: 0,
            first_emission: None,
        })
    }

    /// Samples between an output pixel's own sample and the one that
    /// completes its window.
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Samples consumed when the first window came out, if any has.
    pub fn first_emission_after(&self) -> Option<usize> {
        self.first_emission
    }

    /// Samples the frame had consumed past the first output pixel's own
    /// sample when its window was emitted: the structural latency.
    pub fn structural_latency(&self) -> Option<usize> {
        self.first_emission.map(|n| n - 1)
    }

    fn total(&self) -> usize {
        self.width * self.height
    }

    /// Push the next raster sample; returns the window that became complete.
    pub fn push(&mut self, raw: i128) -> Option<Window> {
        assert!(self.consumed < self.total(), "more samples than the frame holds");
        let slot = self.consumed % self.history.len();
        self.history[slot] = raw;
        self.consumed += 1;
        let newest = self.consumed - 1;
        if newest >= self.lag {
            Some(self.emit(newest - self.lag))
        } else {
            None
        }
    }

    /// Drain the windows still owed once the whole frame has been pushed.
    pub fn finish(&mut self) -> Vec<Window> {
        assert_eq!(self.consumed, self.total(), "frame not fully consumed");
        (self.emitted..self.total()).map(|o| self.emit(o)).collect()
    }

    fn sample(&self, row: isize, col: isize) -> i128 {
        let (h, w) = (self.height as isize, self.width as isize);
        let (r, c) = if (0..h).contains(&row) && (0..w).contains(&col) {
            (row, col)
        } else {
            match self.padding {
                Padding::Zero => return 0,
                Padding::Replicate => (row.clamp(0, h - 1), col.clamp(0, w - 1)),
            }
        };
        let index = r as usize * self.width + c as usize;
        debug_assert!(index < self.consumed && index + self.history.len() >= self.consumed);
        self.history[index % self.history.len()]
    }

    fn emit(&mut self, output: usize) -> Window {
        debug_assert_eq!(output, self.emitted);
        let row = output / self.width;
        let col = output % self.width;
        let mut taps = [0; 9];
        for i in 0..self.size {
            for j in 0..self.size {
                taps[i * self.size + j] = self.sample(
                    row as isize + i as isize + self.anchor,
                    col as isize + j as isize + self.anchor,
                );
            }
        }
        if self.first_emission.is_none() {
            self.first_emission = Some(self.consumed);
        }
        self.emitted += 1;
        Window {
            row,
            col,
            size: self.size,
            taps,
        }
    }
}

/// All `W·H` windows of a stream, in raster order of their output pixel.
pub fn window_stream(stream: &PixelStream, size: usize, padding: Padding) -> Result<Vec<Window>, StreamError> {
    let mut generator = WindowGenerator::new(stream.width, stream.height, size, padding)?;
    let mut out = Vec::with_capacity(stream.len());
    for &s in &stream.raw {
        out.extend(generator.push(s));
    }
    out.extend(generator.finish());
    Ok(out)
}

/// Word lengths of the datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedConfig {
    /// Gateway-in format of the pixel stream.
    pub input: FixedFormat,
    /// Format the taps are quantized into.
    pub coefficients: FixedFormat,
    /// Accumulator; `None` sizes it from the taps.
    pub accumulator: Option<FixedFormat>,
    /// Filter output; `None` derives an integer format from the accumulator.
    pub output: Option<FixedFormat>,
}

/// Minimum accumulator width used when sizing automatically.
pub const MIN_ACCUMULATOR_BITS: u32 = 20;

impl Default for FixedConfig {
    fn default() -> Self {
        FixedConfig {
            input: FixedFormat::unsigned(8, 0).expect("valid"),
            coefficients: FixedFormat::signed(16, 4).expect("valid"),
            accumulator: None,
            output: None,
        }
    }
}

/// Multiply-accumulate FIR over one K×K window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacFir {
    size: usize,
    taps: Vec<FixedValue>,
    input_fmt: FixedFormat,
    accumulator_fmt: FixedFormat,
    output_fmt: FixedFormat,
}

fn signed_bits_for(lo: i128, hi: i128) -> u32 {
    (1..=127)
        .find(|&n| lo >= -(1i128 << (n - 1)) && hi < (1i128 << (n - 1)))
        .unwrap_or(128)
}

impl MacFir {
    /// Load `kernel`'s coefficients as taps.
    ///
    /// Fails if a coefficient does not fit the coefficient format (sign or
    /// range; precision loss is allowed and follows the format's
    /// quantization) or if the accumulator cannot hold every possible sum of
    /// input-range pixels times taps.
    pub fn new(kernel: &Kernel, config: &FixedConfig) -> Result<Self, StreamError> {
        let coeff_fmt = config.coefficients;
        let mut taps = Vec::with_capacity(kernel.coeffs().len());
        for &c in kernel.coeffs() {
            let t = fixedpoint::quantize_ratio(c, coeff_fmt);
            let limit = fixedpoint::quantize_ratio(c, coeff_fmt.with_overflow(Overflow::Saturate));
            let wide = FixedFormat::signed(64, coeff_fmt.fraction_bits())
                .expect("valid")
                .with_quantization(coeff_fmt.quantization());
            if fixedpoint::quantize_ratio(c, wide).raw() != limit.raw() {
                return Err(StreamError::CoefficientOverflow {
                    tap: c.to_string(),
                    format: coeff_fmt,
                });
            }
            taps.push(t);
        }

        let input = config.input;
        let prod_frac = input.fraction_bits() + coeff_fmt.fraction_bits();
        let (mut lo, mut hi) = (0i128, 0i128);
        for t in &taps {
            let a = t.raw().saturating_mul(input.min_raw());
            let b = t.raw().saturating_mul(input.max_raw());
            lo = lo.saturating_add(a.min(b));
            hi = hi.saturating_add(a.max(b));
        }
        let accumulator_fmt = match config.accumulator {
            Some(acc) => {
                let shift = acc.fraction_bits().checked_sub(prod_frac);
                let fits = shift.is_some_and(|s| {
                    let scale = 1i128.checked_shl(s).unwrap_or(0);
                    match (lo.checked_mul(scale), hi.checked_mul(scale)) {
                        (Some(l), Some(h)) if scale != 0 => acc.contains_raw(l) && acc.contains_raw(h),
                        _ => false,
                    }
                });
                if !fits {
                    return Err(StreamError::AccumulatorTooNarrow {
                        format: acc,
                        lo,
                        hi,
                        frac: prod_frac,
                    });
                }
                acc
            }
            None => {
                let bits = signed_bits_for(lo, hi).max(MIN_ACCUMULATOR_BITS).max(prod_frac + 1);
                if bits > fixedpoint::MAX_TOTAL_BITS {
                    return Err(StreamError::AccumulatorTooNarrow {
                        format: FixedFormat::signed(64, prod_frac.min(63)).expect("valid"),
                        lo,
                        hi,
                        frac: prod_frac,
                    });
                }
                FixedFormat::signed(bits, prod_frac).expect("width checked")
            }
        };
        let output_fmt = config.output.unwrap_or_else(|| {
            let bits = accumulator_fmt.integer_bits().max(2);
            FixedFormat::signed(bits, 0)
                .expect("valid")
                .with_overflow(Overflow::Saturate)
                .with_quantization(Quantization::RoundNearest)
        });
        Ok(MacFir {
            size: kernel.size(),
            taps,
            input_fmt: input,
            accumulator_fmt,
            output_fmt,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[FixedValue] {
        &self.taps
    }

    pub fn input_format(&self) -> FixedFormat {
        self.input_fmt
    }

    pub fn accumulator_format(&self) -> FixedFormat {
        self.accumulator_fmt
    }

    pub fn output_format(&self) -> FixedFormat {
        self.output_fmt
    }

    /// Raw accumulator contents for `window`, with
    /// `input.frac + coeff.frac` fraction bits.
    pub(crate) fn accumulate(&self, window: &Window) -> i128 {
        self.taps.iter().zip(window.values()).map(|(t, &w)| t.raw() * w).sum()
    }

    pub(crate) fn product_frac(&self) -> u32 {
        self.input_fmt.fraction_bits() + self.taps[0].format().fraction_bits()
    }
}

/// Σ tap·sample held exactly in the accumulator, quantized once into the
/// filter's output format.
pub fn mac_fir(window: &Window, fir: &MacFir) -> Result<FixedValue, StreamError> {
    if window.size() != fir.size {
        return Err(StreamError::WindowSize {
            window: window.size(),
            taps: fir.size,
        });
    }
    let acc = fir.accumulate(window);
    let acc = fixedpoint::from_dyadic(acc, fir.product_frac(), fir.accumulator_fmt);
    Ok(fixedpoint::convert(acc, fir.output_fmt))
}

/// Run one MAC FIR over a stream, producing a same-size output stream.
pub fn filter_stream(stream: &PixelStream, fir: &MacFir, padding: Padding) -> Result<PixelStream, StreamError> {
    if stream.format != fir.input_fmt {
        return Err(StreamError::InputFormat {
            stream: stream.format,
            input: fir.input_fmt,
        });
    }
    let mut raw = Vec::with_capacity(stream.len());
    for w in window_stream(stream, fir.size, padding)? {
        raw.push(mac_fir(&w, fir)?.raw());
    }
    PixelStream::from_raw(stream.width, stream.height, fir.output_fmt, raw)
}
