//! Catalog of the convolution masks used by the operators, with exact
//! rational coefficients.
//!
//! Masks are applied as correlation: tap `(i, j)` multiplies the window
//! sample at row `i`, column `j` without any flip.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("operator {kind} has no {path} kernel")]
    InvalidCombination { kind: OperatorKind, path: GradientPath },
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("bad coefficient `{0}`")]
    BadCoefficient(String),
    #[error("custom kernel needs 4 or 9 coefficients, got {0}")]
    BadTapCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Roberts,
    Prewitt,
    Sobel,
    Scharr,
    Laplacian,
    LoG,
    GaussianBlur,
    Sharpen,
}

/// Which mask of an operator is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradientPath {
    Gx,
    Gy,
    Single,
}

impl fmt::Display for GradientPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientPath::Gx => "Gx",
            GradientPath::Gy => "Gy",
            GradientPath::Single => "single-path",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    SinglePath,
    DualPath,
}

/// Which Roberts Gy mask to use.
///
/// `Canonical` is the zero-sum diagonal difference `[[0,1],[-1,0]]`;
/// `Unbalanced` is `[[0,1],[-1,1]]`, whose taps sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RobertsVariant {
    #[default]
    Canonical,
    Unbalanced,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 8] = [
        OperatorKind::Roberts,
        OperatorKind::Prewitt,
        OperatorKind::Sobel,
        OperatorKind::Scharr,
        OperatorKind::Laplacian,
        OperatorKind::LoG,
        OperatorKind::GaussianBlur,
        OperatorKind::Sharpen,
    ];

    pub fn arity(self) -> Arity {
        match self {
            OperatorKind::Roberts | OperatorKind::Prewitt | OperatorKind::Sobel | OperatorKind::Scharr => {
                Arity::DualPath
            }
            _ => Arity::SinglePath,
        }
    }

    /// The primitive operators this one is realized with, in order. Only LoG
    /// expands (blur, then Laplacian).
    pub fn cascade(self) -> Vec<OperatorKind> {
        match self {
            OperatorKind::LoG => vec![OperatorKind::GaussianBlur, OperatorKind::Laplacian],
            other => vec![other],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Roberts => "roberts",
            OperatorKind::Prewitt => "prewitt",
            OperatorKind::Sobel => "sobel",
            OperatorKind::Scharr => "scharr",
            OperatorKind::Laplacian => "laplacian",
            OperatorKind::LoG => "log",
            OperatorKind::GaussianBlur => "gauss",
            OperatorKind::Sharpen => "sharpen",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| KernelError::UnknownOperator(s.to_string()))
    }
}

/// A K×K mask (K = 2 or 3), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    name: String,
    size: usize,
    coeffs: Vec<Rational64>,
}

impl Kernel {
    /// Panics unless `coeffs.len() == size * size` and `size` is 2 or 3.
    pub fn new(name: impl Into<String>, size: usize, coeffs: Vec<Rational64>) -> Self {
        assert!(matches!(size, 2 | 3), "kernel size must be 2 or 3");
        assert_eq!(coeffs.len(), size * size, "coefficient count must be size^2");
        Kernel {
            name: name.into(),
            size,
            coeffs,
        }
    }

    fn from_ints(name: &str, size: usize, ints: &[i64]) -> Self {
        Self::new(name, size, ints.iter().map(|&v| Rational64::from_integer(v)).collect())
    }

    fn scaled(name: &str, ints: &[i64], denom: i64) -> Self {
        Self::new(name, 3, ints.iter().map(|&v| Rational64::new(v, denom)).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coeffs(&self) -> &[Rational64] {
        &self.coeffs
    }

    pub fn at(&self, row: usize, col: usize) -> Rational64 {
        self.coeffs[row * self.size + col]
    }

    /// Window offset of tap (0, 0) relative to the output pixel.
    pub fn anchor(&self) -> isize {
        anchor_for(self.size)
    }

    pub fn is_integer(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    /// Coefficients as `f64` (exact for every catalog entry).
    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| *c.numer() as f64 / *c.denom() as f64)
            .collect()
    }
}

/// Offset of the first window row/column from the output coordinate: `-1` for
/// 3×3 (centered), `0` for 2×2 (top-left anchored).
pub fn anchor_for(size: usize) -> isize {
    -(((size - 1) / 2) as isize)
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.coeffs.chunks(self.size) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

impl FromStr for Kernel {
    type Err = KernelError;

    /// Comma-separated rationals: nine for 3×3 or four for 2×2.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let coeffs = s.split(',').map(parse_coefficient).collect::<Result<Vec<_>, _>>()?;
        let size = match coeffs.len() {
            4 => 2,
            9 => 3,
            n => return Err(KernelError::BadTapCount(n)),
        };
        Ok(Kernel::new("custom", size, coeffs))
    }
}

/// Parses `7`, `-3/16` or `0.125` into an exact rational.
pub fn parse_coefficient(text: &str) -> Result<Rational64, KernelError> {
    let t = text.trim();
    let bad = || KernelError::BadCoefficient(text.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let negative = int.starts_with('-');
        let digits = int.trim_start_matches(['-', '+']);
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let denom = 10i64.pow(frac.len() as u32);
        let part: i64 = frac.parse().map_err(|_| bad())?;
        let mag = whole
            .checked_mul(denom)
            .and_then(|w| w.checked_add(part))
            .ok_or_else(bad)?;
        return Ok(Rational64::new(if negative { -mag } else { mag }, denom));
    }
    t.parse::<i64>().map(Rational64::from_integer).map_err(|_| bad())
}

/// The mask for `(kind, path)` using the canonical Roberts cross.
pub fn kernel_for(kind: OperatorKind, path: GradientPath) -> Result<Kernel, KernelError> {
    kernel_for_variant(kind, path, RobertsVariant::Canonical)
}

pub fn kernel_for_variant(
    kind: OperatorKind,
    path: GradientPath,
    roberts: RobertsVariant,
) -> Result<Kernel, KernelError> {
    use GradientPath::*;
    use OperatorKind::*;
    let k = match (kind, path) {
        (Roberts, Gx) => Kernel::from_ints("roberts.gx", 2, &[1, 0, 0, -1]),
        (Roberts, Gy) => match roberts {
            RobertsVariant::Canonical => Kernel::from_ints("roberts.gy", 2, &[0, 1, -1, 0]),
            RobertsVariant::Unbalanced => Kernel::from_ints("roberts.gy.unbalanced", 2, &[0, 1, -1, 1]),
        },
        (Prewitt, Gx) => Kernel::from_ints("prewitt.gx", 3, &[-1, 0, 1, -1, 0, 1, -1, 0, 1]),
        (Prewitt, Gy) => Kernel::from_ints("prewitt.gy", 3, &[-1, -1, -1, 0, 0, 0, 1, 1, 1]),
        (Sobel, Gx) => Kernel::from_ints("sobel.gx", 3, &[-1, -2, -1, 0, 0, 0, 1, 2, 1]),
        (Sobel, Gy) => Kernel::from_ints("sobel.gy", 3, &[-1, 0, 1, -2, 0, 2, -1, 0, 1]),
        (Scharr, Gx) => Kernel::from_ints("scharr.gx", 3, &[3, 10, 3, 0, 0, 0, -3, -10, -3]),
        (Scharr, Gy) => Kernel::from_ints("scharr.gy", 3, &[3, 0, -3, 10, 0, -10, 3, 0, -3]),
        (Laplacian, Single) => Kernel::from_ints("laplacian", 3, &[-1, -1, -1, -1, 8, -1, -1, -1, -1]),
        (GaussianBlur, Single) => Kernel::scaled("gauss", &[1, 2, 1, 2, 4, 2, 1, 2, 1], 16),
        (Sharpen, Single) => Kernel::scaled("sharpen", &[-1, -1, -1, 1, 16, 1, -1, -1, -1], 8),
        _ => return Err(KernelError::InvalidCombination { kind, path }),
    };
    Ok(k)
}

/// Exact coefficient sum.
pub fn kernel_sum(k: &Kernel) -> Rational64 {
    k.coeffs.iter().fold(Rational64::zero(), |acc, &c| acc + c)
}

/// Every mask in the catalog, literal Roberts Gy excluded.
pub fn catalog() -> Vec<Kernel> {
    let mut out = Vec::new();
    for kind in OperatorKind::ALL {
        let paths: &[GradientPath] = match kind.arity() {
            Arity::DualPath => &[GradientPath::Gx, GradientPath::Gy],
            Arity::SinglePath => &[GradientPath::Single],
        };
        for &path in paths {
            if let Ok(k) = kernel_for(kind, path) {
                out.push(k);
            }
        }
    }
    out
}
