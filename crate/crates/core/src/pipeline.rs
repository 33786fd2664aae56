//! Operator graphs built from the streaming stages.
//!
//! A pipeline is an ordered list of stages, each of which consumes and
//! produces an 8-bit frame. Filter stages run serialize → window → MAC FIR →
//! deserialize; gradient operators fan one window stream out to two MAC FIRs
//! and merge them with a magnitude unit before the output clamp.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Roots;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::fixedpoint::{self, FixedFormat, FixedValue};
use crate::imageio::GrayImage;
use crate::kernels::{self, Arity, GradientPath, Kernel, KernelError, OperatorKind, RobertsVariant};
use crate::streamcore::{self, FixedConfig, MacFir, Padding, PixelStream, StreamError, WindowGenerator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("pipeline has no stages")]
    Empty,
    #[error("bad stage `{token}`: {reason}")]
    Parse { token: String, reason: String },
    #[error("gradient direction is undefined when Gx = Gy = 0")]
    UndefinedDirection,
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MagnitudeMode {
    /// `sqrt(Gx² + Gy²)`
    #[default]
    Exact,
    /// `|Gx| + |Gy|`
    AbsSum,
}

impl FromStr for MagnitudeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(MagnitudeMode::Exact),
            "abs" => Ok(MagnitudeMode::AbsSum),
            other => Err(format!("unknown magnitude mode `{other}`, expected exact or abs")),
        }
    }
}

impl fmt::Display for MagnitudeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MagnitudeMode::Exact => "exact",
            MagnitudeMode::AbsSum => "abs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageSpec {
    Filter { op: OperatorKind, magnitude: MagnitudeMode },
    Threshold(u8),
    Custom(Kernel),
}

impl StageSpec {
    pub fn filter(op: OperatorKind) -> Self {
        StageSpec::Filter {
            op,
            magnitude: MagnitudeMode::default(),
        }
    }

    /// Whether every mask the stage uses has integer coefficients.
    pub fn is_integer(&self) -> bool {
        match self {
            StageSpec::Threshold(_) => true,
            StageSpec::Custom(k) => k.is_integer(),
            StageSpec::Filter { op, .. } => op
                .cascade()
                .iter()
                .all(|k| !matches!(k, OperatorKind::GaussianBlur | OperatorKind::Sharpen)),
        }
    }
}

impl fmt::Display for StageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageSpec::Filter { op, magnitude } if op.arity() == Arity::DualPath => {
                write!(f, "{op}:{magnitude}")
            }
            StageSpec::Filter { op, .. } => write!(f, "{op}"),
            StageSpec::Threshold(level) => write!(f, "thresh={level}"),
            StageSpec::Custom(k) => {
                let cells: Vec<String> = k.coeffs().iter().map(|c| c.to_string()).collect();
                write!(f, "custom[{}]", cells.join(","))
            }
        }
    }
}

/// Level used by the `thresh` stage and the detect command when none is given.
pub const DEFAULT_THRESHOLD: u8 = 128;

fn parse_stage(token: &str, default_magnitude: MagnitudeMode) -> Result<StageSpec, PipelineError> {
    let err = |reason: String| PipelineError::Parse {
        token: token.to_string(),
        reason,
    };
    let t = token.trim().to_ascii_lowercase();
    if t.is_empty() {
        return Err(err("empty stage".into()));
    }
    if t == "thresh" {
        return Ok(StageSpec::Threshold(DEFAULT_THRESHOLD));
    }
    if let Some(level) = t.strip_prefix("thresh=") {
        let level: u8 = level
            .trim()
            .parse()
            .map_err(|_| err("threshold must be an integer in 0..=255".into()))?;
        return Ok(StageSpec::Threshold(level));
    }
    let (name, suffix) = match t.split_once(':') {
        Some((n, s)) => (n, Some(s)),
        None => (t.as_str(), None),
    };
    let op: OperatorKind = name.parse().map_err(|e: KernelError| err(e.to_string()))?;
    let magnitude = match suffix {
        None => default_magnitude,
        Some(s) if op.arity() == Arity::DualPath => s.parse().map_err(err)?,
        Some(_) => return Err(err(format!("{op} is single-path and takes no magnitude suffix"))),
    };
    Ok(StageSpec::Filter { op, magnitude })
}

/// A validated stage list plus the datapath configuration shared by every
/// stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineSpec {
    stages: Vec<StageSpec>,
    padding: Padding,
    fixed: FixedConfig,
    roberts: RobertsVariant,
}

impl PipelineSpec {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self, PipelineError> {
        if stages.is_empty() {
            return Err(PipelineError::Empty);
        }
        Ok(PipelineSpec {
            stages,
            padding: Padding::default(),
            fixed: FixedConfig::default(),
            roberts: RobertsVariant::default(),
        })
    }

    /// Parse the comma-separated stage list, e.g. `gauss,sobel:abs,thresh=80`.
    /// Dual-path stages without a suffix get `default_magnitude`.
    pub fn parse_with(text: &str, default_magnitude: MagnitudeMode) -> Result<Self, PipelineError> {
        if text.trim().is_empty() {
            return Err(PipelineError::Empty);
        }
        let stages = text
            .split(',')
            .map(|tok| parse_stage(tok, default_magnitude))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(stages)
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_fixed(mut self, fixed: FixedConfig) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_roberts(mut self, roberts: RobertsVariant) -> Self {
        self.roberts = roberts;
        self
    }

    pub fn push(&mut self, stage: StageSpec) {
        self.stages.push(stage);
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn fixed(&self) -> &FixedConfig {
        &self.fixed
    }

    pub fn roberts(&self) -> RobertsVariant {
        self.roberts
    }

    pub fn is_integer(&self) -> bool {
        self.stages.iter().all(StageSpec::is_integer)
    }
}

impl FromStr for PipelineSpec {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_with(s, MagnitudeMode::default())
    }
}

impl fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stages.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Combined edge strength of one pixel.
///
/// Both inputs are brought onto the finer of their two grids. `Exact` takes
/// the integer square root of `gx² + gy²` on that grid and rounds it to the
/// nearest grid point; `AbsSum` is exact. The result is expressed in `gx`'s
/// format, saturating if it does not fit.
pub fn gradient_magnitude(gx: FixedValue, gy: FixedValue, mode: MagnitudeMode) -> FixedValue {
    let out = gx.format();
    let frac = out.fraction_bits().max(gy.format().fraction_bits());
    let x = fixedpoint::convert(gx, FixedFormat::signed(64, frac.min(63)).expect("valid")).raw();
    let y = fixedpoint::convert(gy, FixedFormat::signed(64, frac.min(63)).expect("valid")).raw();
    let frac = frac.min(63);
    let mag = match mode {
        MagnitudeMode::AbsSum => x.abs() + y.abs(),
        MagnitudeMode::Exact => nearest_sqrt(x, y),
    };
    fixedpoint::from_dyadic(mag, frac, out)
}

/// `round(sqrt(x² + y²))`; never a tie since the radicand is an integer.
fn nearest_sqrt(x: i128, y: i128) -> i128 {
    match x
        .checked_mul(x)
        .and_then(|a| y.checked_mul(y).and_then(|b| a.checked_add(b)))
    {
        Some(n) => {
            let r = n.sqrt();
            if n - r * r > r {
                r + 1
            } else {
                r
            }
        }
        None => {
            let n = BigInt::from(x) * x + BigInt::from(y) * y;
            let r = n.sqrt();
            let rounded = if &n - &r * &r > r { r + 1 } else { r };
            rounded.to_i128().expect("sqrt of a 128-bit radicand fits")
        }
    }
}

/// Four-quadrant gradient orientation `atan2(gy, gx)` in radians.
pub fn gradient_direction(gx: f64, gy: f64) -> Result<f64, PipelineError> {
    if gx == 0.0 && gy == 0.0 {
        return Err(PipelineError::UndefinedDirection);
    }
    Ok(gy.atan2(gx))
}

/// Binary segmentation: `pixel >= level` becomes 255, everything else 0.
pub fn threshold(img: &GrayImage, level: u8) -> GrayImage {
    let pixels = img.pixels().iter().map(|&p| if p >= level { 255 } else { 0 }).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same dimensions")
}

/// What one primitive pass did, for diagnostics and conservation checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageReport {
    pub label: String,
    pub kernels: Vec<String>,
    pub samples_in: usize,
    pub windows: usize,
    pub samples_out: usize,
    /// Samples past the first output pixel consumed before its window left
    /// the line buffers; `None` for pixelwise stages.
    pub latency: Option<usize>,
    pub min: u8,
    pub max: u8,
}

/// Run the streaming model of one filter pass: one or two MAC FIRs sharing a
/// single window stream, merged by `magnitude` when there are two.
pub fn stream_filter(
    img: &GrayImage,
    masks: &[Kernel],
    magnitude: MagnitudeMode,
    padding: Padding,
    fixed: &FixedConfig,
) -> Result<(GrayImage, StageReport), PipelineError> {
    assert!(matches!(masks.len(), 1 | 2), "one or two masks per pass");
    let firs = masks
        .iter()
        .map(|k| MacFir::new(k, fixed))
        .collect::<Result<Vec<_>, _>>()?;
    let size = masks[0].size();
    let input = streamcore::serialize(img, fixed.input)?;
    let mut windows = WindowGenerator::new(img.width(), img.height(), size, padding)?;
    let out_fmt = firs[0].output_format();
    let mut out = Vec::with_capacity(input.len());
    let mut process = |w: &streamcore::Window| -> Result<(), PipelineError> {
        let sample = match firs.as_slice() {
            [f] => streamcore::mac_fir(w, f)?,
            [fx, fy] => {
                let gx = streamcore::mac_fir(w, fx)?;
                let gy = streamcore::mac_fir(w, fy)?;
                gradient_magnitude(gx, gy, magnitude)
            }
            _ => unreachable!(),
        };
        out.push(fixedpoint::convert(sample, out_fmt).raw());
        Ok(())
    };
    for &s in input.raw() {
        if let Some(w) = windows.push(s) {
            process(&w)?;
        }
    }
    for w in windows.finish() {
        process(&w)?;
    }
    let windows_emitted = windows.emitted();
    let stream = PixelStream::from_raw(img.width(), img.height(), out_fmt, out)?;
    let samples_out = stream.len();
    let frame = streamcore::deserialize(&stream)?;
    let (min, max) = frame.min_max();
    let report = StageReport {
        label: String::new(),
        kernels: masks.iter().map(|k| k.name().to_string()).collect(),
        samples_in: input.len(),
        windows: windows_emitted,
        samples_out,
        latency: windows.structural_latency(),
        min,
        max,
    };
    Ok((frame, report))
}

fn masks_for(kind: OperatorKind, roberts: RobertsVariant) -> Result<Vec<Kernel>, KernelError> {
    match kind.arity() {
        Arity::DualPath => Ok(vec![
            kernels::kernel_for_variant(kind, GradientPath::Gx, roberts)?,
            kernels::kernel_for_variant(kind, GradientPath::Gy, roberts)?,
        ]),
        Arity::SinglePath => Ok(vec![kernels::kernel_for(kind, GradientPath::Single)?]),
    }
}

/// Apply every stage in order and report each primitive pass.
pub fn run_pipeline_traced(
    img: &GrayImage,
    spec: &PipelineSpec,
) -> Result<(GrayImage, Vec<StageReport>), PipelineError> {
    let mut cur = img.clone();
    let mut reports = Vec::new();
    for stage in &spec.stages {
        match stage {
            StageSpec::Threshold(level) => {
                cur = threshold(&cur, *level);
                let (min, max) = cur.min_max();
                let n = cur.pixels().len();
                reports.push(StageReport {
                    label: stage.to_string(),
                    kernels: Vec::new(),
                    samples_in: n,
                    windows: 0,
                    samples_out: n,
                    latency: None,
                    min,
                    max,
                });
            }
            StageSpec::Custom(k) => {
                let (next, mut report) = stream_filter(
                    &cur,
                    std::slice::from_ref(k),
                    MagnitudeMode::Exact,
                    spec.padding,
                    &spec.fixed,
                )?;
                report.label = stage.to_string();
                reports.push(report);
                cur = next;
            }
            StageSpec::Filter { op, magnitude } => {
                for kind in op.cascade() {
                    let masks = masks_for(kind, spec.roberts)?;
                    let (next, mut report) = stream_filter(&cur, &masks, *magnitude, spec.padding, &spec.fixed)?;
                    report.label = if kind == *op {
                        stage.to_string()
                    } else {
                        format!("{op}/{kind}")
                    };
                    reports.push(report);
                    cur = next;
                }
            }
        }
    }
    Ok((cur, reports))
}

/// Apply every stage of `spec` to `img`. Deterministic: identical inputs give
/// bit-identical outputs.
pub fn run_pipeline(img: &GrayImage, spec: &PipelineSpec) -> Result<GrayImage, PipelineError> {
    run_pipeline_traced(img, spec).map(|(out, _)| out)
}
