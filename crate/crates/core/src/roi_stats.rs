//! Region-of-interest extraction and first-order textural statistics (mean,
//! sample standard deviation, variance) on `[0, 1]`-normalized intensities.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::imageio::GrayImage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoiError {
    #[error("region {0} does not intersect the {1}x{2} frame")]
    EmptyRoi(RoiSpec, usize, usize),
    #[error("need at least 2 pixels for a sample deviation, got {0}")]
    TooFewPixels(usize),
    #[error("bad region `{text}`: {reason}")]
    Parse { text: String, reason: String },
}

/// Region geometry in pixel coordinates, origin at the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoiShape {
    Rect { x: i64, y: i64, w: i64, h: i64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiSpec {
    shape: RoiShape,
}

impl Eq for RoiSpec {}

impl RoiSpec {
    pub fn rect(x: i64, y: i64, w: i64, h: i64) -> Result<Self, RoiError> {
        if w < 1 || h < 1 {
            return Err(RoiError::Parse {
                text: format!("rect:{x},{y},{w},{h}"),
                reason: "width and height must be at least 1".into(),
            });
        }
        Ok(RoiSpec {
            shape: RoiShape::Rect { x, y, w, h },
        })
    }

    pub fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64) -> Result<Self, RoiError> {
        if !(rx >= 1.0 && ry >= 1.0) || !cx.is_finite() || !cy.is_finite() || !rx.is_finite() || !ry.is_finite() {
            return Err(RoiError::Parse {
                text: format!("ellipse:{cx},{cy},{rx},{ry}"),
                reason: "radii must be finite and at least 1".into(),
            });
        }
        Ok(RoiSpec {
            shape: RoiShape::Ellipse { cx, cy, rx, ry },
        })
    }

    pub fn shape(&self) -> RoiShape {
        self.shape
    }

    /// Whether the pixel whose center is at `(row, col)` lies inside.
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (r, c) = (row as i64, col as i64);
        match self.shape {
            RoiShape::Rect { x, y, w, h } => c >= x && c < x + w && r >= y && r < y + h,
            RoiShape::Ellipse { cx, cy, rx, ry } => {
                let dx = (c as f64 - cx) / rx;
                let dy = (r as f64 - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }
}

impl fmt::Display for RoiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            RoiShape::Rect { x, y, w, h } => write!(f, "rect:{x},{y},{w},{h}"),
            RoiShape::Ellipse { cx, cy, rx, ry } => write!(f, "ellipse:{cx},{cy},{rx},{ry}"),
        }
    }
}

impl Serialize for RoiSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl FromStr for RoiSpec {
    type Err = RoiError;

    /// `rect:x,y,w,h` or `ellipse:cx,cy,rx,ry`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| RoiError::Parse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let (kind, args) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| err("expected rect:... or ellipse:..."))?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        if args.len() != 4 {
            return Err(err("expected four comma-separated numbers"));
        }
        let rebrand = |e: RoiError| match e {
            RoiError::Parse { reason, .. } => err(&reason),
            other => other,
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "rect" => {
                let v = args
                    .iter()
                    .map(|a| a.parse::<i64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err("rect coordinates must be integers"))?;
                RoiSpec::rect(v[0], v[1], v[2], v[3]).map_err(rebrand)
            }
            "ellipse" => {
                let v = args
                    .iter()
                    .map(|a| a.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err("ellipse parameters must be numbers"))?;
                RoiSpec::ellipse(v[0], v[1], v[2], v[3]).map_err(rebrand)
            }
            _ => Err(err("unknown shape, expected rect or ellipse")),
        }
    }
}

/// The masked frame and the in-region intensities in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiExtract {
    pub masked: GrayImage,
    pub pixels: Vec<u8>,
}

/// Pixels outside the region are set to 0 in the masked frame.
pub fn extract_roi(img: &GrayImage, roi: &RoiSpec) -> Result<RoiExtract, RoiError> {
    let mut masked = GrayImage::filled(img.width(), img.height(), 0).expect("same dimensions");
    let mut pixels = Vec::new();
    for r in 0..img.height() {
        for c in 0..img.width() {
            if roi.contains(r, c) {
                let p = img.get(r, c);
                masked.set(r, c, p);
                pixels.push(p);
            }
        }
    }
    if pixels.is_empty() {
        return Err(RoiError::EmptyRoi(*roi, img.width(), img.height()));
    }
    Ok(RoiExtract { masked, pixels })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub label: String,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub pixel_count: usize,
    pub roi: Option<RoiSpec>,
}

impl StatsReport {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_roi(mut self, roi: RoiSpec) -> Self {
        self.roi = Some(roi);
        self
    }
}

/// Statistics of 8-bit intensities after scaling to `[0, 1]`.
///
/// Sums are accumulated exactly in integers, so a constant region reports a
/// spread of exactly zero.
pub fn compute_stats(pixels: &[u8]) -> Result<StatsReport, RoiError> {
    let n = pixels.len();
    if n < 2 {
        return Err(RoiError::TooFewPixels(n));
    }
    let sum: u128 = pixels.iter().map(|&p| p as u128).sum();
    let sum_sq: u128 = pixels.iter().map(|&p| (p as u128) * (p as u128)).sum();
    let n128 = n as u128;
    // n·Σp² − (Σp)² = n·Σ(p − mean)², never negative.
    let spread = n128 * sum_sq - sum * sum;
    let variance_raw = spread as f64 / (n128 * (n128 - 1)) as f64;
    let std_dev = variance_raw.sqrt() / 255.0;
    Ok(StatsReport {
        label: String::new(),
        mean: sum as f64 / (n as f64 * 255.0),
        variance: std_dev * std_dev,
        std_dev,
        pixel_count: n,
        roi: None,
    })
}

/// Mean, sample standard deviation (n − 1 denominator) and variance = σ².
pub fn compute_stats_normalized(values: &[f64]) -> Result<StatsReport, RoiError> {
    let n = values.len();
    if n < 2 {
        return Err(RoiError::TooFewPixels(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    // Corrected two-pass sum of squares.
    let (ss, drift) = values.iter().fold((0.0, 0.0), |(ss, drift), &u| {
        let d = u - mean;
        (ss + d * d, drift + d)
    });
    let ss = (ss - drift * drift / n as f64).max(0.0);
    let std_dev = (ss / (n - 1) as f64).sqrt();
    Ok(StatsReport {
        label: String::new(),
        mean,
        variance: std_dev * std_dev,
        std_dev,
        pixel_count: n,
        roi: None,
    })
}

/// Extract the region and compute its statistics in one step.
pub fn roi_stats(img: &GrayImage, roi: &RoiSpec, label: &str) -> Result<(StatsReport, RoiExtract), RoiError> {
    let extract = extract_roi(img, roi)?;
    let report = compute_stats(&extract.pixels)?.with_label(label).with_roi(*roi);
    Ok((report, extract))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Larger {
    First,
    Second,
    Equal,
}

fn larger(a: f64, b: f64) -> Larger {
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => Larger::First,
        Some(std::cmp::Ordering::Less) => Larger::Second,
        _ => Larger::Equal,
    }
}

/// Differences `a − b` per metric, and which side is larger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportComparison {
    pub first: String,
    pub second: String,
    pub delta_mean: f64,
    pub delta_variance: f64,
    pub delta_std_dev: f64,
    pub larger_mean: Larger,
    pub larger_variance: Larger,
    pub larger_std_dev: Larger,
}

pub fn compare_reports(a: &StatsReport, b: &StatsReport) -> ReportComparison {
    ReportComparison {
        first: a.label.clone(),
        second: b.label.clone(),
        delta_mean: a.mean - b.mean,
        delta_variance: a.variance - b.variance,
        delta_std_dev: a.std_dev - b.std_dev,
        larger_mean: larger(a.mean, b.mean),
        larger_variance: larger(a.variance, b.variance),
        larger_std_dev: larger(a.std_dev, b.std_dev),
    }
}

/// Number formatting for report rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Scientific notation with three significant digits, e.g. `3.18e-1`.
    #[default]
    Short,
    /// Shortest representation that round-trips.
    Full,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "short" | "3" => Ok(Precision::Short),
            "full" => Ok(Precision::Full),
            other => Err(format!("unknown precision `{other}`, expected short or full")),
        }
    }
}

fn sci(v: f64, precision: Precision) -> String {
    match precision {
        Precision::Short => format!("{v:.2e}"),
        Precision::Full => format!("{v:e}"),
    }
}

/// `label  mean  variance  stddev  pixel_count`, tab-separated.
pub fn format_tsv(report: &StatsReport, precision: Precision) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        report.label,
        sci(report.mean, precision),
        sci(report.variance, precision),
        sci(report.std_dev, precision),
        report.pixel_count
    )
}
