//! Arbitrary-width fixed-point numbers with explicit overflow and quantization
//! behavior.
//!
//! A [`FixedValue`] is a raw two's-complement integer paired with a
//! [`FixedFormat`]; its real value is `raw * 2^-fraction_bits`. Every
//! arithmetic operation computes the exact result first and quantizes exactly
//! once into the requested output format, the way a single post-adder
//! quantizer behaves in a MAC datapath.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Widest raw word supported.
pub const MAX_TOTAL_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixedError {
    #[error("invalid fixed-point format: {0}")]
    InvalidFormat(String),
    #[error("cannot parse fixed-point format `{text}`: {reason}")]
    Parse { text: String, reason: String },
    #[error("raw value {raw} does not fit in {format}")]
    RawOutOfRange { raw: i128, format: FixedFormat },
}

/// What happens when a quantized value falls outside the representable range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Overflow {
    /// Modular arithmetic on the raw word.
    Wrap,
    /// Clamp to the nearest representable extreme.
    #[default]
    Saturate,
}

/// How values between grid points are mapped onto the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Quantization {
    /// Round toward negative infinity (drop low bits of a two's-complement word).
    #[default]
    Truncate,
    /// Round to nearest, ties away from zero.
    RoundNearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    total_bits: u32,
    fraction_bits: u32,
    signed: bool,
    overflow: Overflow,
    quantization: Quantization,
}

impl FixedFormat {
    pub fn new(signed: bool, total_bits: u32, fraction_bits: u32) -> Result<Self, FixedError> {
        if total_bits == 0 || total_bits > MAX_TOTAL_BITS {
            return Err(FixedError::InvalidFormat(format!(
                "total_bits must be in 1..={MAX_TOTAL_BITS}, got {total_bits}"
            )));
        }
        let max_frac = if signed { total_bits - 1 } else { total_bits };
        if fraction_bits > max_frac {
            return Err(FixedError::InvalidFormat(format!(
                "fraction_bits must be at most {max_frac} for a {}{total_bits} word, got {fraction_bits}",
                if signed { "signed " } else { "unsigned " },
            )));
        }
        Ok(FixedFormat {
            total_bits,
            fraction_bits,
            signed,
            overflow: Overflow::default(),
            quantization: Quantization::default(),
        })
    }

    pub fn unsigned(total_bits: u32, fraction_bits: u32) -> Result<Self, FixedError> {
        Self::new(false, total_bits, fraction_bits)
    }

    pub fn signed(total_bits: u32, fraction_bits: u32) -> Result<Self, FixedError> {
        Self::new(true, total_bits, fraction_bits)
    }

    pub fn with_overflow(mut self, overflow: Overflow) -> Self {
        self.overflow = overflow;
        self
    }

    pub fn with_quantization(mut self, quantization: Quantization) -> Self {
        self.quantization = quantization;
        self
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn fraction_bits(&self) -> u32 {
        self.fraction_bits
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn overflow(&self) -> Overflow {
        self.overflow
    }

    pub fn quantization(&self) -> Quantization {
        self.quantization
    }

    /// Number of integer (non-fraction) bits, sign bit included.
    pub fn integer_bits(&self) -> u32 {
        self.total_bits - self.fraction_bits
    }

    pub fn min_raw(&self) -> i128 {
        if self.signed {
            -(1i128 << (self.total_bits - 1))
        } else {
            0
        }
    }

    pub fn max_raw(&self) -> i128 {
        if self.signed {
            (1i128 << (self.total_bits - 1)) - 1
        } else {
            (1i128 << self.total_bits) - 1
        }
    }

    pub fn contains_raw(&self, raw: i128) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }

    /// Grid spacing, `2^-fraction_bits`.
    pub fn step(&self) -> BigRational {
        BigRational::new(BigInt::one(), pow2(self.fraction_bits))
    }

    pub fn min_value(&self) -> BigRational {
        raw_to_rational(self.min_raw(), self.fraction_bits)
    }

    pub fn max_value(&self) -> BigRational {
        raw_to_rational(self.max_raw(), self.fraction_bits)
    }

    /// True when every integer in `lo..=hi` is representable exactly.
    pub fn holds_integers(&self, lo: i128, hi: i128) -> bool {
        let scale = 1i128 << self.fraction_bits;
        match (lo.checked_mul(scale), hi.checked_mul(scale)) {
            (Some(l), Some(h)) => self.contains_raw(l) && self.contains_raw(h),
            _ => false,
        }
    }
}

impl fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}.{}:{}:{}",
            if self.signed { 's' } else { 'u' },
            self.total_bits,
            self.fraction_bits,
            match self.overflow {
                Overflow::Wrap => "wrap",
                Overflow::Saturate => "sat",
            },
            match self.quantization {
                Quantization::Truncate => "trunc",
                Quantization::RoundNearest => "round",
            }
        )
    }
}

impl FromStr for FixedFormat {
    type Err = FixedError;

    /// Parses `u8.4`, `s16.8`, `s18.8:sat:round`, ... (case-insensitive).
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let perr = |reason: &str| FixedError::Parse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let lower = text.trim().to_ascii_lowercase();
        let mut parts = lower.split(':');
        let head = parts.next().unwrap_or_default();
        let signed = match head.chars().next() {
            Some('u') => false,
            Some('s') => true,
            _ => return Err(perr("expected `u` or `s` prefix")),
        };
        let (total, frac) = head[1..]
            .split_once('.')
            .ok_or_else(|| perr("expected <total>.<fraction>"))?;
        let total: u32 = total.parse().map_err(|_| perr("bad total bit count"))?;
        let frac: u32 = frac.parse().map_err(|_| perr("bad fraction bit count"))?;
        let mut fmt = FixedFormat::new(signed, total, frac).map_err(|e| match e {
            FixedError::InvalidFormat(reason) => perr(&reason),
            other => other,
        })?;
        for suffix in parts {
            match suffix {
                "wrap" => fmt.overflow = Overflow::Wrap,
                "sat" => fmt.overflow = Overflow::Saturate,
                "trunc" => fmt.quantization = Quantization::Truncate,
                "round" => fmt.quantization = Quantization::RoundNearest,
                other => return Err(perr(&format!("unknown suffix `{other}`"))),
            }
        }
        Ok(fmt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedValue {
    raw: i128,
    format: FixedFormat,
}

impl FixedValue {
    pub fn from_raw(raw: i128, format: FixedFormat) -> Result<Self, FixedError> {
        if !format.contains_raw(raw) {
            return Err(FixedError::RawOutOfRange { raw, format });
        }
        Ok(FixedValue { raw, format })
    }

    pub fn zero(format: FixedFormat) -> Self {
        FixedValue { raw: 0, format }
    }

    pub fn raw(&self) -> i128 {
        self.raw
    }

    pub fn format(&self) -> FixedFormat {
        self.format
    }

    /// Exact real value.
    pub fn value(&self) -> BigRational {
        raw_to_rational(self.raw, self.format.fraction_bits)
    }

    pub fn to_f64(&self) -> f64 {
        self.raw as f64 / (self.format.fraction_bits as f64).exp2()
    }
}

impl fmt::Display for FixedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits as usize
}

fn raw_to_rational(raw: i128, fraction_bits: u32) -> BigRational {
    BigRational::new(BigInt::from(raw), pow2(fraction_bits))
}

/// Quantize the exact rational `num / den` (den > 0) to an integer.
fn round_quotient(num: &BigInt, den: &BigInt, mode: Quantization) -> BigInt {
    debug_assert!(den.is_positive());
    match mode {
        Quantization::Truncate => num.div_floor(den),
        Quantization::RoundNearest => {
            let two = BigInt::from(2);
            let mag = (num.abs() * &two + den).div_floor(&(den * &two));
            if num.is_negative() {
                -mag
            } else {
                mag
            }
        }
    }
}

fn limit_big(q: BigInt, fmt: FixedFormat) -> i128 {
    match fmt.overflow {
        Overflow::Saturate => {
            let lo = BigInt::from(fmt.min_raw());
            let hi = BigInt::from(fmt.max_raw());
            let clamped = if q < lo {
                lo
            } else if q > hi {
                hi
            } else {
                q
            };
            clamped.to_i128().expect("clamped into a 64-bit range")
        }
        Overflow::Wrap => {
            let modulus = pow2(fmt.total_bits);
            let m = q.mod_floor(&modulus).to_i128().expect("reduced below 2^64");
            wrap_sign(m, fmt)
        }
    }
}

fn wrap_sign(m: i128, fmt: FixedFormat) -> i128 {
    if fmt.signed && m >= 1i128 << (fmt.total_bits - 1) {
        m - (1i128 << fmt.total_bits)
    } else {
        m
    }
}

fn limit_i128(q: i128, fmt: FixedFormat) -> i128 {
    match fmt.overflow {
        Overflow::Saturate => q.clamp(fmt.min_raw(), fmt.max_raw()),
        Overflow::Wrap => wrap_sign(q.rem_euclid(1i128 << fmt.total_bits), fmt),
    }
}

/// Quantize an exact rational into `fmt`: first onto the `2^-f` grid per the
/// format's quantization mode, then into range per its overflow policy.
pub fn quantize(x: &BigRational, fmt: FixedFormat) -> FixedValue {
    let num = x.numer() * pow2(fmt.fraction_bits);
    let q = round_quotient(&num, x.denom(), fmt.quantization);
    FixedValue {
        raw: limit_big(q, fmt),
        format: fmt,
    }
}

pub fn quantize_ratio(x: Rational64, fmt: FixedFormat) -> FixedValue {
    let x = BigRational::new(BigInt::from(*x.numer()), BigInt::from(*x.denom()));
    quantize(&x, fmt)
}

/// Quantize an integer; exact whenever `fmt` can hold it.
pub fn quantize_int(x: i64, fmt: FixedFormat) -> FixedValue {
    from_dyadic(x as i128, 0, fmt)
}

/// Quantize the exact dyadic value `mantissa * 2^-frac` into `fmt`.
///
/// This is the hot path used by the streaming MAC; it stays in `i128` when it
/// can and falls back to big integers otherwise.
pub fn from_dyadic(mantissa: i128, frac: u32, fmt: FixedFormat) -> FixedValue {
    let raw = dyadic_fast(mantissa, frac, fmt).unwrap_or_else(|| {
        let x = BigRational::new(BigInt::from(mantissa), pow2(frac));
        quantize(&x, fmt).raw
    });
    FixedValue { raw, format: fmt }
}

fn dyadic_fast(mantissa: i128, frac: u32, fmt: FixedFormat) -> Option<i128> {
    let target = fmt.fraction_bits;
    let q = if target >= frac {
        let shift = target - frac;
        if shift >= 127 {
            return None;
        }
        mantissa.checked_mul(1i128 << shift)?
    } else {
        let shift = frac - target;
        if shift >= 126 {
            return None;
        }
        match fmt.quantization {
            Quantization::Truncate => mantissa >> shift,
            Quantization::RoundNearest => {
                let half = 1i128 << (shift - 1);
                let mag = mantissa.checked_abs()?.checked_add(half)? >> shift;
                if mantissa < 0 {
                    -mag
                } else {
                    mag
                }
            }
        }
    };
    Some(limit_i128(q, fmt))
}

fn big_dyadic(v: &FixedValue, frac: u32) -> BigInt {
    BigInt::from(v.raw) << (frac - v.format.fraction_bits) as usize
}

/// Exact sum quantized into `out`.
pub fn add(a: FixedValue, b: FixedValue, out: FixedFormat) -> FixedValue {
    let frac = a.format.fraction_bits.max(b.format.fraction_bits);
    let align = |v: &FixedValue| v.raw.checked_mul(1i128 << (frac - v.format.fraction_bits));
    match (align(&a), align(&b)) {
        (Some(x), Some(y)) if x.checked_add(y).is_some() => from_dyadic(x + y, frac, out),
        _ => {
            let sum = big_dyadic(&a, frac) + big_dyadic(&b, frac);
            quantize(&BigRational::new(sum, pow2(frac)), out)
        }
    }
}

/// Exact product quantized into `out`.
pub fn mul(a: FixedValue, b: FixedValue, out: FixedFormat) -> FixedValue {
    let frac = a.format.fraction_bits + b.format.fraction_bits;
    match a.raw.checked_mul(b.raw) {
        Some(p) => from_dyadic(p, frac, out),
        None => {
            let p = BigInt::from(a.raw) * BigInt::from(b.raw);
            quantize(&BigRational::new(p, pow2(frac)), out)
        }
    }
}

/// Re-quantize a value into another format.
pub fn convert(v: FixedValue, out: FixedFormat) -> FixedValue {
    from_dyadic(v.raw, v.format.fraction_bits, out)
}

pub fn is_zero(v: &FixedValue) -> bool {
    v.raw.is_zero()
}
